#include "mf/tape.hpp"

#include <array>
#include <cmath>
#include <map>

namespace mf {

void Tape::reset() {
    nodes_.clear();
    param_vars_.clear();
}

Var Tape::push(Matrix value, bool requires_grad, std::function<void(Tape&)> back) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    if (requires_grad) n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::leaf(Matrix v, bool requires_grad) {
    return push(std::move(v), requires_grad, nullptr);
}

Var Tape::param(const Param& p) {
    auto it = param_vars_.find(&p);
    if (it != param_vars_.end()) return Var{it->second};
    Var v = leaf(p.value, true);
    param_vars_.emplace(&p, v.id);
    return v;
}

const Matrix& Tape::grad(Var v) const {
    return nodes_[v.id].grad.empty() ? empty_ : nodes_[v.id].grad;
}

const Matrix* Tape::param_grad(const Param& p) const {
    auto it = param_vars_.find(&p);
    if (it == param_vars_.end()) return nullptr;
    const Matrix& g = nodes_[it->second].grad;
    return g.empty() ? nullptr : &g;
}

void Tape::accum(int id, const Matrix& g) {
    Node& n = nodes_[id];
    if (!n.requires_grad) return;
    if (n.grad.empty()) {
        n.grad = g;
        return;
    }
    require_same_shape(n.grad, g, "tape accum");
    for (size_t i = 0; i < g.size(); ++i) n.grad.data()[i] += g.data()[i];
}

void Tape::accum(int id, Matrix&& g) {
    Node& n = nodes_[id];
    if (!n.requires_grad) return;
    if (n.grad.empty()) {
        n.grad = std::move(g);
        return;
    }
    require_same_shape(n.grad, g, "tape accum");
    for (size_t i = 0; i < g.size(); ++i) n.grad.data()[i] += g.data()[i];
}

void Tape::accum_scaled(int id, const Matrix& g, double s) {
    Node& n = nodes_[id];
    if (!n.requires_grad) return;
    if (n.grad.empty()) n.grad = Matrix(g.rows(), g.cols());
    for (size_t i = 0; i < g.size(); ++i) n.grad.data()[i] += s * g.data()[i];
}

void Tape::backward(Var loss) {
    Node& ln = nodes_[loss.id];
    if (ln.value.rows() != 1 || ln.value.cols() != 1)
        throw ShapeError("backward: loss must be 1x1, got " + ln.value.shape_str());
    if (!ln.requires_grad) return;
    ln.grad = Matrix{{1.0}};
    for (int i = loss.id; i >= 0; --i) {
        Node& n = nodes_[i];
        if (!n.grad.empty() && n.back) n.back(*this);
    }
}

// ---- elementwise and structural ops ----

Var Tape::add(Var a, Var b) {
    Matrix out = mf::add(val(a), val(b));
    const bool rg = requires_grad(a) || requires_grad(b);
    return push(std::move(out), rg, [a, b, self = static_cast<int>(nodes_.size())](Tape& t) {
        const Matrix& g = t.nodes_[self].grad;
        t.accum(a.id, g);
        t.accum(b.id, g);
    });
}

Var Tape::sub(Var a, Var b) {
    Matrix out = mf::sub(val(a), val(b));
    const bool rg = requires_grad(a) || requires_grad(b);
    return push(std::move(out), rg, [a, b, self = static_cast<int>(nodes_.size())](Tape& t) {
        const Matrix& g = t.nodes_[self].grad;
        t.accum(a.id, g);
        t.accum_scaled(b.id, g, -1.0);
    });
}

Var Tape::hadamard(Var a, Var b) {
    Matrix out = mf::hadamard(val(a), val(b));
    const bool rg = requires_grad(a) || requires_grad(b);
    return push(std::move(out), rg, [a, b, self = static_cast<int>(nodes_.size())](Tape& t) {
        const Matrix& g = t.nodes_[self].grad;
        if (t.requires_grad(a)) t.accum(a.id, mf::hadamard(g, t.val(b)));
        if (t.requires_grad(b)) t.accum(b.id, mf::hadamard(g, t.val(a)));
    });
}

Var Tape::div_elem(Var a, Var b) {
    require_same_shape(val(a), val(b), "div_elem");
    const Matrix& av = val(a);
    const Matrix& bv = val(b);
    Matrix out(av.rows(), av.cols());
    for (size_t i = 0; i < av.size(); ++i) out.data()[i] = av.data()[i] / bv.data()[i];
    const bool rg = requires_grad(a) || requires_grad(b);
    return push(std::move(out), rg, [a, b, self = static_cast<int>(nodes_.size())](Tape& t) {
        const Matrix& g = t.nodes_[self].grad;
        const Matrix& bv2 = t.val(b);
        const Matrix& ov = t.nodes_[self].value;
        Matrix da(g.rows(), g.cols()), db(g.rows(), g.cols());
        for (size_t i = 0; i < g.size(); ++i) {
            da.data()[i] = g.data()[i] / bv2.data()[i];
            db.data()[i] = -g.data()[i] * ov.data()[i] / bv2.data()[i];
        }
        t.accum(a.id, std::move(da));
        t.accum(b.id, std::move(db));
    });
}

Var Tape::matmul(Var a, Var b) {
    Matrix out = mf::matmul(val(a), val(b));
    const bool rg = requires_grad(a) || requires_grad(b);
    return push(std::move(out), rg, [a, b, self = static_cast<int>(nodes_.size())](Tape& t) {
        const Matrix& g = t.nodes_[self].grad;
        if (t.requires_grad(a)) t.accum(a.id, matmul_nt(g, t.val(b)));
        if (t.requires_grad(b)) t.accum(b.id, matmul_tn(t.val(a), g));
    });
}

Var Tape::transpose(Var a) {
    Matrix out = mf::transpose(val(a));
    return push(std::move(out), requires_grad(a), [a, self = static_cast<int>(nodes_.size())](Tape& t) {
        t.accum(a.id, mf::transpose(t.nodes_[self].grad));
    });
}

Var Tape::softmax_rows(Var a) {
    Matrix out = mf::softmax_rows(val(a));
    return push(std::move(out), requires_grad(a), [a, self = static_cast<int>(nodes_.size())](Tape& t) {
        const Matrix& g = t.nodes_[self].grad;
        const Matrix& s = t.nodes_[self].value;
        Matrix dx(s.rows(), s.cols());
        for (int i = 0; i < s.rows(); ++i) {
            double dot = 0.0;
            for (int j = 0; j < s.cols(); ++j) dot += g(i, j) * s(i, j);
            for (int j = 0; j < s.cols(); ++j) dx(i, j) = s(i, j) * (g(i, j) - dot);
        }
        t.accum(a.id, std::move(dx));
    });
}

Var Tape::sym_normalize(Var a) {
    Matrix out = mf::sym_normalize(val(a));
    return push(std::move(out), requires_grad(a), [a, self = static_cast<int>(nodes_.size())](Tape& t) {
        const Matrix& g = t.nodes_[self].grad;
        const Matrix& s = t.val(a);
        const Matrix& nrm = t.nodes_[self].value;
        const int n = s.rows();
        std::vector<double> dsum(n), inv_sqrt(n), row_dot(n, 0.0), col_dot(n, 0.0);
        for (int i = 0; i < n; ++i) {
            double d = 0.0;
            for (int j = 0; j < n; ++j) d += s(i, j);
            dsum[i] = d;
            inv_sqrt[i] = 1.0 / std::sqrt(d);
        }
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                const double gn = g(i, j) * nrm(i, j);
                row_dot[i] += gn;
                col_dot[j] += gn;
            }
        Matrix dx(n, n);
        for (int k = 0; k < n; ++k) {
            const double corr = (row_dot[k] + col_dot[k]) / (2.0 * dsum[k]);
            for (int l = 0; l < n; ++l) dx(k, l) = g(k, l) * inv_sqrt[k] * inv_sqrt[l] - corr;
        }
        t.accum(a.id, std::move(dx));
    });
}

Var Tape::layer_norm(Var x, Var gain, Var bias, double eps) {
    const Matrix& xv = val(x);
    const Matrix& gv = val(gain);
    const Matrix& bv = val(bias);
    if (gv.rows() != 1 || gv.cols() != xv.cols() || bv.rows() != 1 || bv.cols() != xv.cols())
        throw ShapeError("layer_norm: gain/bias must be 1x" + std::to_string(xv.cols()) + ", got " + gv.shape_str() +
                         " and " + bv.shape_str());
    const int d = xv.cols();
    Matrix xhat(xv.rows(), d);
    std::vector<double> inv_std(xv.rows());
    for (int i = 0; i < xv.rows(); ++i) {
        double mean = 0.0;
        for (int j = 0; j < d; ++j) mean += xv(i, j);
        mean /= d;
        double var = 0.0;
        for (int j = 0; j < d; ++j) var += (xv(i, j) - mean) * (xv(i, j) - mean);
        var /= d;
        inv_std[i] = 1.0 / std::sqrt(var + eps);
        for (int j = 0; j < d; ++j) xhat(i, j) = (xv(i, j) - mean) * inv_std[i];
    }
    Matrix out(xv.rows(), d);
    for (int i = 0; i < xv.rows(); ++i)
        for (int j = 0; j < d; ++j) out(i, j) = xhat(i, j) * gv(0, j) + bv(0, j);
    const bool rg = requires_grad(x) || requires_grad(gain) || requires_grad(bias);
    return push(std::move(out), rg,
                [x, gain, bias, xhat = std::move(xhat), inv_std = std::move(inv_std),
                 self = static_cast<int>(nodes_.size())](Tape& t) {
                    const Matrix& g = t.nodes_[self].grad;
                    const Matrix& gv2 = t.val(gain);
                    const int d2 = g.cols();
                    if (t.requires_grad(gain)) {
                        Matrix dgain(1, d2);
                        for (int i = 0; i < g.rows(); ++i)
                            for (int j = 0; j < d2; ++j) dgain(0, j) += g(i, j) * xhat(i, j);
                        t.accum(gain.id, std::move(dgain));
                    }
                    if (t.requires_grad(bias)) t.accum(bias.id, column_sums(g));
                    if (t.requires_grad(x)) {
                        Matrix dx(g.rows(), d2);
                        for (int i = 0; i < g.rows(); ++i) {
                            double m1 = 0.0, m2 = 0.0;
                            for (int j = 0; j < d2; ++j) {
                                const double dh = g(i, j) * gv2(0, j);
                                m1 += dh;
                                m2 += dh * xhat(i, j);
                            }
                            m1 /= d2;
                            m2 /= d2;
                            for (int j = 0; j < d2; ++j) {
                                const double dh = g(i, j) * gv2(0, j);
                                dx(i, j) = inv_std[i] * (dh - m1 - xhat(i, j) * m2);
                            }
                        }
                        t.accum(x.id, std::move(dx));
                    }
                });
}

Var Tape::gelu(Var x) {
    Matrix out = mf::gelu(val(x));
    return push(std::move(out), requires_grad(x), [x, self = static_cast<int>(nodes_.size())](Tape& t) {
        const Matrix& g = t.nodes_[self].grad;
        const Matrix& xv = t.val(x);
        Matrix dx(g.rows(), g.cols());
        for (size_t i = 0; i < g.size(); ++i) dx.data()[i] = g.data()[i] * gelu_grad_scalar(xv.data()[i]);
        t.accum(x.id, std::move(dx));
    });
}

Var Tape::sigmoid(Var x) {
    Matrix out = mf::sigmoid(val(x));
    return push(std::move(out), requires_grad(x), [x, self = static_cast<int>(nodes_.size())](Tape& t) {
        const Matrix& g = t.nodes_[self].grad;
        const Matrix& s = t.nodes_[self].value;
        Matrix dx(g.rows(), g.cols());
        for (size_t i = 0; i < g.size(); ++i) {
            const double sv = s.data()[i];
            dx.data()[i] = g.data()[i] * sv * (1.0 - sv);
        }
        t.accum(x.id, std::move(dx));
    });
}

Var Tape::log(Var x) {
    const Matrix& xv = val(x);
    Matrix out(xv.rows(), xv.cols());
    for (size_t i = 0; i < xv.size(); ++i) out.data()[i] = std::log(xv.data()[i]);
    return push(std::move(out), requires_grad(x), [x, self = static_cast<int>(nodes_.size())](Tape& t) {
        const Matrix& g = t.nodes_[self].grad;
        const Matrix& xv2 = t.val(x);
        Matrix dx(g.rows(), g.cols());
        for (size_t i = 0; i < g.size(); ++i) dx.data()[i] = g.data()[i] / xv2.data()[i];
        t.accum(x.id, std::move(dx));
    });
}

Var Tape::clamp(Var x, double lo, double hi) {
    const Matrix& xv = val(x);
    Matrix out(xv.rows(), xv.cols());
    for (size_t i = 0; i < xv.size(); ++i) {
        const double v = xv.data()[i];
        out.data()[i] = v < lo ? lo : (v > hi ? hi : v);
    }
    return push(std::move(out), requires_grad(x), [x, lo, hi, self = static_cast<int>(nodes_.size())](Tape& t) {
        const Matrix& g = t.nodes_[self].grad;
        const Matrix& xv2 = t.val(x);
        Matrix dx(g.rows(), g.cols());
        for (size_t i = 0; i < g.size(); ++i) {
            const double v = xv2.data()[i];
            dx.data()[i] = (v >= lo && v <= hi) ? g.data()[i] : 0.0;
        }
        t.accum(x.id, std::move(dx));
    });
}

Var Tape::affine(Var x, double alpha, double beta) {
    Matrix out = mf::affine(val(x), alpha, beta);
    return push(std::move(out), requires_grad(x), [x, alpha, self = static_cast<int>(nodes_.size())](Tape& t) {
        t.accum_scaled(x.id, t.nodes_[self].grad, alpha);
    });
}

Var Tape::hadamard_const(Var x, Matrix c) {
    Matrix out = mf::hadamard(val(x), c);
    return push(std::move(out), requires_grad(x),
                [x, c = std::move(c), self = static_cast<int>(nodes_.size())](Tape& t) {
                    t.accum(x.id, mf::hadamard(t.nodes_[self].grad, c));
                });
}

Var Tape::add_const(Var x, Matrix c) {
    Matrix out = mf::add(val(x), c);
    return push(std::move(out), requires_grad(x), [x, self = static_cast<int>(nodes_.size())](Tape& t) {
        t.accum(x.id, t.nodes_[self].grad);
    });
}

Var Tape::add_row(Var x, Var bias) {
    Matrix out = add_row_broadcast(val(x), val(bias));
    const bool rg = requires_grad(x) || requires_grad(bias);
    return push(std::move(out), rg, [x, bias, self = static_cast<int>(nodes_.size())](Tape& t) {
        const Matrix& g = t.nodes_[self].grad;
        t.accum(x.id, g);
        if (t.requires_grad(bias)) t.accum(bias.id, column_sums(g));
    });
}

Var Tape::concat_cols(Var a, Var b) {
    Matrix out = mf::concat_cols(val(a), val(b));
    const bool rg = requires_grad(a) || requires_grad(b);
    const int ac = val(a).cols();
    return push(std::move(out), rg, [a, b, ac, self = static_cast<int>(nodes_.size())](Tape& t) {
        const Matrix& g = t.nodes_[self].grad;
        if (t.requires_grad(a)) t.accum(a.id, mf::slice_cols(g, 0, ac));
        if (t.requires_grad(b)) t.accum(b.id, mf::slice_cols(g, ac, g.cols()));
    });
}

Var Tape::slice_cols(Var x, int col0, int col1) {
    Matrix out = mf::slice_cols(val(x), col0, col1);
    const int xc = val(x).cols();
    return push(std::move(out), requires_grad(x), [x, col0, xc, self = static_cast<int>(nodes_.size())](Tape& t) {
        const Matrix& g = t.nodes_[self].grad;
        Matrix dx(g.rows(), xc);
        for (int i = 0; i < g.rows(); ++i)
            for (int j = 0; j < g.cols(); ++j) dx(i, col0 + j) = g(i, j);
        t.accum(x.id, std::move(dx));
    });
}

Var Tape::sum_all(Var x) {
    Matrix out{{mf::sum_all(val(x))}};
    const int r = val(x).rows(), c = val(x).cols();
    return push(std::move(out), requires_grad(x), [x, r, c, self = static_cast<int>(nodes_.size())](Tape& t) {
        const double g = t.nodes_[self].grad(0, 0);
        t.accum(x.id, Matrix::full(r, c, g));
    });
}

Var Tape::mean_all(Var x) {
    Matrix out{{mf::mean_all(val(x))}};
    const int r = val(x).rows(), c = val(x).cols();
    return push(std::move(out), requires_grad(x), [x, r, c, self = static_cast<int>(nodes_.size())](Tape& t) {
        const double g = t.nodes_[self].grad(0, 0) / (static_cast<double>(r) * c);
        t.accum(x.id, Matrix::full(r, c, g));
    });
}

Var Tape::reshape(Var x, int rows, int cols) {
    const Matrix& xv = val(x);
    if (static_cast<size_t>(rows) * cols != xv.size())
        throw ShapeError("reshape: cannot view " + xv.shape_str() + " as " + std::to_string(rows) + "x" +
                         std::to_string(cols));
    Matrix out(rows, cols, xv.vec());
    const int xr = xv.rows(), xc = xv.cols();
    return push(std::move(out), requires_grad(x), [x, xr, xc, self = static_cast<int>(nodes_.size())](Tape& t) {
        const Matrix& g = t.nodes_[self].grad;
        t.accum(x.id, Matrix(xr, xc, g.vec()));
    });
}

Var Tape::gather(Var x, int rows, int cols, std::shared_ptr<const std::vector<int>> idx) {
    const Matrix& xv = val(x);
    if (idx->size() != static_cast<size_t>(rows) * cols)
        throw ShapeError("gather: index length does not match output shape");
    Matrix out(rows, cols);
    for (size_t k = 0; k < idx->size(); ++k) {
        const int src = (*idx)[k];
        out.data()[k] = src < 0 ? 0.0 : xv.data()[src];
    }
    const int xr = xv.rows(), xc = xv.cols();
    return push(std::move(out), requires_grad(x),
                [x, xr, xc, idx = std::move(idx), self = static_cast<int>(nodes_.size())](Tape& t) {
                    const Matrix& g = t.nodes_[self].grad;
                    Matrix dx(xr, xc);
                    for (size_t k = 0; k < idx->size(); ++k) {
                        const int src = (*idx)[k];
                        if (src >= 0) dx.data()[src] += g.data()[k];
                    }
                    t.accum(x.id, std::move(dx));
                });
}

Var Tape::avgpool2x(Var x, int h, int w) {
    const Matrix& xv = val(x);
    if (xv.rows() != h * w || h % 2 != 0 || w % 2 != 0)
        throw ShapeError("avgpool2x: grid " + std::to_string(h) + "x" + std::to_string(w) + " does not match " +
                         xv.shape_str());
    const int c = xv.cols();
    const int oh = h / 2, ow = w / 2;
    Matrix out(oh * ow, c);
    for (int y = 0; y < oh; ++y)
        for (int xo = 0; xo < ow; ++xo) {
            double* o = out.row(y * ow + xo);
            for (int dy = 0; dy < 2; ++dy) {
                const double* in = xv.row((2 * y + dy) * w + 2 * xo);
                const double* in2 = in + c;
                for (int ch = 0; ch < c; ++ch) o[ch] += 0.25 * (in[ch] + in2[ch]);
            }
        }
    return push(std::move(out), requires_grad(x), [x, h, w, c, self = static_cast<int>(nodes_.size())](Tape& t) {
        const Matrix& g = t.nodes_[self].grad;
        Matrix dx(h * w, c);
        const int ow2 = w / 2;
        for (int y = 0; y < h; ++y)
            for (int xo = 0; xo < w; ++xo) {
                const double* gr = g.row((y / 2) * ow2 + xo / 2);
                double* o = dx.row(y * w + xo);
                for (int ch = 0; ch < c; ++ch) o[ch] = 0.25 * gr[ch];
            }
        t.accum(x.id, std::move(dx));
    });
}

Var Tape::mul_col(Var x, Var m) {
    const Matrix& xv = val(x);
    const Matrix& mv = val(m);
    if (mv.cols() != 1 || mv.rows() != xv.rows())
        throw ShapeError("mul_col: multiplier must be " + std::to_string(xv.rows()) + "x1, got " + mv.shape_str());
    Matrix out(xv.rows(), xv.cols());
    for (int i = 0; i < xv.rows(); ++i) {
        const double s = mv(i, 0);
        const double* in = xv.row(i);
        double* o = out.row(i);
        for (int j = 0; j < xv.cols(); ++j) o[j] = in[j] * s;
    }
    const bool rg = requires_grad(x) || requires_grad(m);
    return push(std::move(out), rg, [x, m, self = static_cast<int>(nodes_.size())](Tape& t) {
        const Matrix& g = t.nodes_[self].grad;
        const Matrix& xv2 = t.val(x);
        const Matrix& mv2 = t.val(m);
        if (t.requires_grad(x)) {
            Matrix dx(g.rows(), g.cols());
            for (int i = 0; i < g.rows(); ++i) {
                const double s = mv2(i, 0);
                for (int j = 0; j < g.cols(); ++j) dx(i, j) = g(i, j) * s;
            }
            t.accum(x.id, std::move(dx));
        }
        if (t.requires_grad(m)) {
            Matrix dm(g.rows(), 1);
            for (int i = 0; i < g.rows(); ++i) {
                double s = 0.0;
                for (int j = 0; j < g.cols(); ++j) s += g(i, j) * xv2(i, j);
                dm(i, 0) = s;
            }
            t.accum(m.id, std::move(dm));
        }
    });
}

// ---- index builders ----
// Pure functions of the geometry, memoized so per-sample forwards reuse the
// tables.

namespace {

template <size_t N, typename F>
std::shared_ptr<const std::vector<int>> cached_idx(const std::array<int, N>& key, F&& build) {
    thread_local std::map<std::array<int, N>, std::shared_ptr<const std::vector<int>>> cache;
    auto it = cache.find(key);
    if (it == cache.end()) it = cache.emplace(key, build()).first;
    return it->second;
}

} // namespace

Im2colPlan build_im2col(int h, int w, int c, int k, int stride, int pad) {
    Im2colPlan plan;
    plan.out_h = (h + 2 * pad - k) / stride + 1;
    plan.out_w = (w + 2 * pad - k) / stride + 1;
    const int out_h = plan.out_h, out_w = plan.out_w;
    plan.idx = cached_idx(std::array<int, 6>{h, w, c, k, stride, pad}, [&] {
        auto idx = std::make_shared<std::vector<int>>();
        idx->reserve(static_cast<size_t>(out_h) * out_w * k * k * c);
        for (int oy = 0; oy < out_h; ++oy)
            for (int ox = 0; ox < out_w; ++ox)
                for (int ky = 0; ky < k; ++ky)
                    for (int kx = 0; kx < k; ++kx) {
                        const int iy = oy * stride - pad + ky;
                        const int ix = ox * stride - pad + kx;
                        const bool in_bounds = iy >= 0 && iy < h && ix >= 0 && ix < w;
                        for (int ch = 0; ch < c; ++ch)
                            idx->push_back(in_bounds ? (iy * w + ix) * c + ch : -1);
                    }
        return idx;
    });
    return plan;
}

std::shared_ptr<const std::vector<int>> build_patchify(int h, int w, int c, int p) {
    if (h % p != 0 || w % p != 0)
        throw ShapeError("patchify: grid " + std::to_string(h) + "x" + std::to_string(w) +
                         " not divisible by patch size " + std::to_string(p));
    return cached_idx(std::array<int, 4>{h, w, c, p}, [&] {
        auto idx = std::make_shared<std::vector<int>>();
        idx->reserve(static_cast<size_t>(h) * w * c);
        for (int ty = 0; ty < h / p; ++ty)
            for (int tx = 0; tx < w / p; ++tx)
                for (int py = 0; py < p; ++py)
                    for (int px = 0; px < p; ++px)
                        for (int ch = 0; ch < c; ++ch)
                            idx->push_back(((ty * p + py) * w + (tx * p + px)) * c + ch);
        return idx;
    });
}

std::shared_ptr<const std::vector<int>> build_unpatchify(int h, int w, int c, int p) {
    if (h % p != 0 || w % p != 0) throw ShapeError("unpatchify: grid not divisible by patch size");
    return cached_idx(std::array<int, 4>{-h, w, c, p}, [&] {
        const int tiles_x = w / p;
        const int patch_cols = p * p * c;
        auto idx = std::make_shared<std::vector<int>>();
        idx->reserve(static_cast<size_t>(h) * w * c);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                for (int ch = 0; ch < c; ++ch) {
                    const int token = (y / p) * tiles_x + (x / p);
                    const int col = ((y % p) * p + (x % p)) * c + ch;
                    idx->push_back(token * patch_cols + col);
                }
        return idx;
    });
}

std::shared_ptr<const std::vector<int>> build_upsample2x(int h, int w, int c) {
    return cached_idx(std::array<int, 3>{h, w, c}, [&] {
        auto idx = std::make_shared<std::vector<int>>();
        idx->reserve(static_cast<size_t>(4) * h * w * c);
        for (int y = 0; y < 2 * h; ++y)
            for (int x = 0; x < 2 * w; ++x)
                for (int ch = 0; ch < c; ++ch) idx->push_back(((y / 2) * w + x / 2) * c + ch);
        return idx;
    });
}

std::shared_ptr<const std::vector<int>> build_resize_nearest(int h_in, int w_in, int c, int h_out, int w_out) {
    return cached_idx(std::array<int, 5>{h_in, w_in, c, h_out, w_out}, [&] {
        auto idx = std::make_shared<std::vector<int>>();
        idx->reserve(static_cast<size_t>(h_out) * w_out * c);
        for (int y = 0; y < h_out; ++y) {
            const int sy = std::min(h_in - 1, y * h_in / h_out);
            for (int x = 0; x < w_out; ++x) {
                const int sx = std::min(w_in - 1, x * w_in / w_out);
                for (int ch = 0; ch < c; ++ch) idx->push_back((sy * w_in + sx) * c + ch);
            }
        }
        return idx;
    });
}

} // namespace mf
