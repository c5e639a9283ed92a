#pragma once

#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "mf/matrix.hpp"

namespace mf {

/// A learnable tensor. Modules own their Params; a ParamRegistry holds
/// pointers in creation order for the optimizer and checkpointing.
struct Param {
    std::string name;
    Matrix value;
};

class ParamRegistry {
public:
    void add(Param& p, std::string name) {
        p.name = std::move(name);
        params_.push_back(&p);
    }
    const std::vector<Param*>& all() const { return params_; }
    Param* find(const std::string& name) const {
        for (Param* p : params_)
            if (p->name == name) return p;
        return nullptr;
    }

private:
    std::vector<Param*> params_;
};

/// Handle to a node on a Tape.
struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

/// Reverse-mode tape over a closed set of matrix operations. Operations are
/// recorded in execution order; backward() replays them in exact reverse
/// order, accumulating gradients with a fixed summation order so repeated
/// runs are bit-identical. A Tape is single-threaded.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    void reset();
    size_t node_count() const { return nodes_.size(); }

    // ---- graph entry points ----
    Var leaf(Matrix v, bool requires_grad = false);
    Var constant(Matrix v) { return leaf(std::move(v), false); }
    /// Registers p.value as a leaf (once per tape) and remembers the binding
    /// so param_grad() can report its gradient after backward().
    Var param(const Param& p);

    const Matrix& val(Var v) const { return nodes_[v.id].value; }
    bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }
    /// Gradient of a node after backward(); empty matrix if never touched.
    const Matrix& grad(Var v) const;
    /// Gradient of a bound param; nullptr if the param was unused.
    const Matrix* param_grad(const Param& p) const;

    // ---- differentiable operations ----
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var hadamard(Var a, Var b);
    Var div_elem(Var a, Var b);
    Var matmul(Var a, Var b);
    Var transpose(Var a);
    Var softmax_rows(Var a);
    Var sym_normalize(Var a);
    Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5);
    Var gelu(Var x);
    Var sigmoid(Var x);
    Var log(Var x);
    Var clamp(Var x, double lo, double hi);
    Var affine(Var x, double alpha, double beta);
    Var scale(Var x, double c) { return affine(x, c, 0.0); }
    Var hadamard_const(Var x, Matrix c);
    Var add_const(Var x, Matrix c);
    Var add_row(Var x, Var bias);
    Var linear(Var x, Var w, Var b) { return add_row(matmul(x, w), b); }
    Var concat_cols(Var a, Var b);
    Var slice_cols(Var x, int col0, int col1);
    Var sum_all(Var x);
    Var mean_all(Var x);
    Var reshape(Var x, int rows, int cols);
    /// out.data[k] = x.data[idx[k]], with idx[k] == -1 meaning zero. Backward
    /// scatter-adds, so duplicate indices are valid (e.g. upsampling).
    Var gather(Var x, int rows, int cols, std::shared_ptr<const std::vector<int>> idx);
    /// 2x2 mean pooling of an (h*w) x c feature grid.
    Var avgpool2x(Var x, int h, int w);
    /// Multiplies each row of x (n x c) by the matching entry of m (n x 1).
    Var mul_col(Var x, Var m);

    /// Backpropagates from a 1x1 loss node through every recorded operation.
    void backward(Var loss);

private:
    struct Node {
        Matrix value;
        Matrix grad;
        std::function<void(Tape&)> back;
        bool requires_grad = false;
    };

    Var push(Matrix value, bool requires_grad, std::function<void(Tape&)> back);
    void accum(int id, const Matrix& g);
    void accum(int id, Matrix&& g);
    void accum_scaled(int id, const Matrix& g, double s);

    std::vector<Node> nodes_;
    std::unordered_map<const Param*, int> param_vars_;
    Matrix empty_;
};

// ---- spatial index builders (for gather-based ops) ----
// Feature grids are stored as (h*w) x c matrices, pixel-major rows,
// flat element index (y*w + x)*c + ch.

struct Im2colPlan {
    int out_h = 0, out_w = 0;
    std::shared_ptr<const std::vector<int>> idx; // rows: out_h*out_w, cols: k*k*c
};

Im2colPlan build_im2col(int h, int w, int c, int k, int stride, int pad);
/// Tokens from p x p patches: rows (h/p)*(w/p), cols p*p*c.
std::shared_ptr<const std::vector<int>> build_patchify(int h, int w, int c, int p);
/// Inverse of patchify: token matrix back to an (h*w) x c grid.
std::shared_ptr<const std::vector<int>> build_unpatchify(int h, int w, int c, int p);
std::shared_ptr<const std::vector<int>> build_upsample2x(int h, int w, int c);
/// Nearest-neighbor resample between arbitrary grid sizes.
std::shared_ptr<const std::vector<int>> build_resize_nearest(int h_in, int w_in, int c, int h_out, int w_out);

} // namespace mf
