#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace mf {

/// Thrown when operand shapes are incompatible. The message names both shapes.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Thrown when a value is outside an operation's domain (e.g. a similarity
/// matrix with a zero row sum).
class DomainError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Dense row-major matrix of 64-bit floats. The single value carrier for
/// token features, similarity matrices, parameters and image planes.
class Matrix {
public:
    Matrix() = default;
    Matrix(int rows, int cols) : rows_(rows), cols_(cols), data_(static_cast<size_t>(rows) * cols, 0.0) {
        if (rows < 0 || cols < 0) throw ShapeError("Matrix: negative dimension " + shape_str());
    }
    Matrix(int rows, int cols, std::vector<double> data) : rows_(rows), cols_(cols), data_(std::move(data)) {
        if (data_.size() != static_cast<size_t>(rows) * cols)
            throw ShapeError("Matrix: data length " + std::to_string(data_.size()) + " does not match " + shape_str());
    }
    Matrix(std::initializer_list<std::initializer_list<double>> rows);

    static Matrix identity(int n);
    static Matrix full(int rows, int cols, double value);

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(int i, int j) { return data_[static_cast<size_t>(i) * cols_ + j]; }
    double operator()(int i, int j) const { return data_[static_cast<size_t>(i) * cols_ + j]; }
    double* row(int i) { return data_.data() + static_cast<size_t>(i) * cols_; }
    const double* row(int i) const { return data_.data() + static_cast<size_t>(i) * cols_; }
    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& vec() { return data_; }
    const std::vector<double>& vec() const { return data_; }

    bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }
    std::string shape_str() const { return std::to_string(rows_) + "x" + std::to_string(cols_); }
    bool all_finite() const;

private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<double> data_;
};

// ---- shape checks -------------------------------------------------------

void require_same_shape(const Matrix& a, const Matrix& b, const char* op);

// ---- kernels ------------------------------------------------------------
// All kernels use a fixed summation order (ascending k per output element),
// so repeated runs on identical inputs are bit-identical.

/// a (m x k) times b (k x n).
Matrix matmul(const Matrix& a, const Matrix& b);
/// a (m x k) times b^T where b is (n x k).
Matrix matmul_nt(const Matrix& a, const Matrix& b);
/// a^T times b where a is (k x m), b is (k x n).
Matrix matmul_tn(const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& m);

/// Row-wise softmax with max subtraction; every output row sums to 1.
Matrix softmax_rows(const Matrix& m);

/// Symmetric normalization S -> D^{-1/2} S D^{-1/2} with D = diag(row sums).
/// Requires a square nonnegative matrix with strictly positive row sums.
Matrix sym_normalize(const Matrix& s);

/// Per-row standardization followed by the affine map gain, bias (both 1 x cols).
Matrix layer_norm(const Matrix& x, const Matrix& gain, const Matrix& bias, double eps = 1e-5);

/// GELU, tanh approximation. The single canonical form used everywhere.
Matrix gelu(const Matrix& x);
double gelu_scalar(double x);
double gelu_grad_scalar(double x);

Matrix sigmoid(const Matrix& x);

/// x (n x in) * w (in x out) + b (1 x out, broadcast over rows).
Matrix linear(const Matrix& x, const Matrix& w, const Matrix& b);

Matrix concat_cols(const Matrix& a, const Matrix& b);
Matrix slice_cols(const Matrix& x, int col0, int col1);

Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
Matrix hadamard(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& a, double c);
/// alpha * x + beta, elementwise.
Matrix affine(const Matrix& x, double alpha, double beta);
Matrix add_row_broadcast(const Matrix& x, const Matrix& b);
Matrix column_sums(const Matrix& x);

double sum_all(const Matrix& x);
double mean_all(const Matrix& x);
double max_abs_diff(const Matrix& a, const Matrix& b);

} // namespace mf
