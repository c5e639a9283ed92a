#include "mf/matrix.hpp"

#include <cmath>

namespace mf {

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = static_cast<int>(rows.size());
    cols_ = rows_ > 0 ? static_cast<int>(rows.begin()->size()) : 0;
    data_.reserve(static_cast<size_t>(rows_) * cols_);
    for (const auto& r : rows) {
        if (static_cast<int>(r.size()) != cols_) throw ShapeError("Matrix: ragged initializer list");
        data_.insert(data_.end(), r.begin(), r.end());
    }
}

Matrix Matrix::identity(int n) {
    Matrix m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::full(int rows, int cols, double value) {
    Matrix m(rows, cols);
    for (auto& v : m.data_) v = value;
    return m;
}

bool Matrix::all_finite() const {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
    if (!a.same_shape(b))
        throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " + b.shape_str());
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows())
        throw ShapeError("matmul: shape mismatch " + a.shape_str() + " * " + b.shape_str());
    Matrix c(a.rows(), b.cols());
    const int n = b.cols(), k_dim = a.cols();
    for (int i = 0; i < a.rows(); ++i) {
        double* __restrict crow = c.row(i);
        const double* __restrict arow = a.row(i);
        for (int k = 0; k < k_dim; ++k) {
            const double aik = arow[k];
            const double* __restrict brow = b.row(k);
            for (int j = 0; j < n; ++j) crow[j] += aik * brow[j];
        }
    }
    return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols())
        throw ShapeError("matmul_nt: shape mismatch " + a.shape_str() + " * (" + b.shape_str() + ")^T");
    return matmul(a, transpose(b));
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows())
        throw ShapeError("matmul_tn: shape mismatch (" + a.shape_str() + ")^T * " + b.shape_str());
    // c[i][j] = sum_m a[m][i] * b[m][j]; m ascends per output element, so
    // the summation order matches the plain kernels.
    Matrix c(a.cols(), b.cols());
    const int rows = a.rows(), n = b.cols(), k_dim = a.cols();
    for (int m = 0; m < rows; ++m) {
        const double* __restrict arow = a.row(m);
        const double* __restrict brow = b.row(m);
        for (int i = 0; i < k_dim; ++i) {
            const double aim = arow[i];
            double* __restrict crow = c.row(i);
            for (int j = 0; j < n; ++j) crow[j] += aim * brow[j];
        }
    }
    return c;
}

Matrix transpose(const Matrix& m) {
    Matrix t(m.cols(), m.rows());
    for (int i = 0; i < m.rows(); ++i)
        for (int j = 0; j < m.cols(); ++j) t(j, i) = m(i, j);
    return t;
}

Matrix softmax_rows(const Matrix& m) {
    if (m.empty()) throw ShapeError("softmax_rows: empty matrix");
    Matrix out(m.rows(), m.cols());
    for (int i = 0; i < m.rows(); ++i) {
        const double* in = m.row(i);
        double* o = out.row(i);
        double mx = in[0];
        for (int j = 1; j < m.cols(); ++j) mx = std::max(mx, in[j]);
        double sum = 0.0;
        for (int j = 0; j < m.cols(); ++j) {
            o[j] = std::exp(in[j] - mx);
            sum += o[j];
        }
        for (int j = 0; j < m.cols(); ++j) o[j] /= sum;
    }
    return out;
}

Matrix sym_normalize(const Matrix& s) {
    if (s.rows() != s.cols()) throw ShapeError("sym_normalize: matrix must be square, got " + s.shape_str());
    const int n = s.rows();
    std::vector<double> inv_sqrt(n);
    for (int i = 0; i < n; ++i) {
        double d = 0.0;
        for (int j = 0; j < n; ++j) {
            if (s(i, j) < 0.0)
                throw DomainError("sym_normalize: negative entry at (" + std::to_string(i) + "," + std::to_string(j) + ")");
            d += s(i, j);
        }
        if (d <= 0.0)
            throw DomainError("sym_normalize: degenerate similarity, row " + std::to_string(i) + " sums to zero");
        inv_sqrt[i] = 1.0 / std::sqrt(d);
    }
    Matrix out(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) out(i, j) = s(i, j) * inv_sqrt[i] * inv_sqrt[j];
    return out;
}

Matrix layer_norm(const Matrix& x, const Matrix& gain, const Matrix& bias, double eps) {
    if (gain.rows() != 1 || gain.cols() != x.cols() || bias.rows() != 1 || bias.cols() != x.cols())
        throw ShapeError("layer_norm: gain/bias must be 1x" + std::to_string(x.cols()) + ", got " + gain.shape_str() +
                         " and " + bias.shape_str());
    Matrix out(x.rows(), x.cols());
    const int d = x.cols();
    for (int i = 0; i < x.rows(); ++i) {
        const double* in = x.row(i);
        double* o = out.row(i);
        double mean = 0.0;
        for (int j = 0; j < d; ++j) mean += in[j];
        mean /= d;
        double var = 0.0;
        for (int j = 0; j < d; ++j) var += (in[j] - mean) * (in[j] - mean);
        var /= d;
        const double inv_std = 1.0 / std::sqrt(var + eps);
        for (int j = 0; j < d; ++j) o[j] = (in[j] - mean) * inv_std * gain(0, j) + bias(0, j);
    }
    return out;
}

namespace {
constexpr double kGeluC = 0.7978845608028654; // sqrt(2/pi)
constexpr double kGeluA = 0.044715;
} // namespace

double gelu_scalar(double x) {
    return 0.5 * x * (1.0 + std::tanh(kGeluC * (x + kGeluA * x * x * x)));
}

double gelu_grad_scalar(double x) {
    const double u = kGeluC * (x + kGeluA * x * x * x);
    const double t = std::tanh(u);
    const double du = kGeluC * (1.0 + 3.0 * kGeluA * x * x);
    return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
}

Matrix gelu(const Matrix& x) {
    Matrix out(x.rows(), x.cols());
    for (size_t i = 0; i < x.size(); ++i) out.data()[i] = gelu_scalar(x.data()[i]);
    return out;
}

Matrix sigmoid(const Matrix& x) {
    Matrix out(x.rows(), x.cols());
    for (size_t i = 0; i < x.size(); ++i) {
        const double v = x.data()[i];
        out.data()[i] = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
    }
    return out;
}

Matrix linear(const Matrix& x, const Matrix& w, const Matrix& b) {
    return add_row_broadcast(matmul(x, w), b);
}

Matrix concat_cols(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows())
        throw ShapeError("concat_cols: row count mismatch " + a.shape_str() + " vs " + b.shape_str());
    Matrix out(a.rows(), a.cols() + b.cols());
    for (int i = 0; i < a.rows(); ++i) {
        double* o = out.row(i);
        const double* ra = a.row(i);
        const double* rb = b.row(i);
        for (int j = 0; j < a.cols(); ++j) o[j] = ra[j];
        for (int j = 0; j < b.cols(); ++j) o[a.cols() + j] = rb[j];
    }
    return out;
}

Matrix slice_cols(const Matrix& x, int col0, int col1) {
    if (col0 < 0 || col1 > x.cols() || col0 >= col1)
        throw ShapeError("slice_cols: invalid range [" + std::to_string(col0) + "," + std::to_string(col1) + ") for " +
                         x.shape_str());
    Matrix out(x.rows(), col1 - col0);
    for (int i = 0; i < x.rows(); ++i)
        for (int j = col0; j < col1; ++j) out(i, j - col0) = x(i, j);
    return out;
}

Matrix add(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "add");
    Matrix out(a.rows(), a.cols());
    for (size_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] + b.data()[i];
    return out;
}

Matrix sub(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "sub");
    Matrix out(a.rows(), a.cols());
    for (size_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] - b.data()[i];
    return out;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "hadamard");
    Matrix out(a.rows(), a.cols());
    for (size_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] * b.data()[i];
    return out;
}

Matrix scale(const Matrix& a, double c) {
    Matrix out(a.rows(), a.cols());
    for (size_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] * c;
    return out;
}

Matrix affine(const Matrix& x, double alpha, double beta) {
    Matrix out(x.rows(), x.cols());
    for (size_t i = 0; i < x.size(); ++i) out.data()[i] = alpha * x.data()[i] + beta;
    return out;
}

Matrix add_row_broadcast(const Matrix& x, const Matrix& b) {
    if (b.rows() != 1 || b.cols() != x.cols())
        throw ShapeError("add_row_broadcast: bias must be 1x" + std::to_string(x.cols()) + ", got " + b.shape_str());
    Matrix out(x.rows(), x.cols());
    for (int i = 0; i < x.rows(); ++i) {
        const double* in = x.row(i);
        double* o = out.row(i);
        for (int j = 0; j < x.cols(); ++j) o[j] = in[j] + b(0, j);
    }
    return out;
}

Matrix column_sums(const Matrix& x) {
    Matrix out(1, x.cols());
    for (int i = 0; i < x.rows(); ++i)
        for (int j = 0; j < x.cols(); ++j) out(0, j) += x(i, j);
    return out;
}

double sum_all(const Matrix& x) {
    double s = 0.0;
    for (double v : x.vec()) s += v;
    return s;
}

double mean_all(const Matrix& x) {
    if (x.empty()) throw ShapeError("mean_all: empty matrix");
    return sum_all(x) / static_cast<double>(x.size());
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "max_abs_diff");
    double m = 0.0;
    for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
    return m;
}

} // namespace mf
