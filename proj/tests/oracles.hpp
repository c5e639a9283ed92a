// Independent straight-line oracles for the test and acceptance suites.
// Everything here is written directly from the definitions, without calling
// the library paths it validates (Matrix is used as a plain container only).
#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "mf/matrix.hpp"
#include "mf/rng.hpp"

namespace oracle {

using mf::Matrix;

/// Classic ijk triple loop with a scalar accumulator.
inline Matrix matmul(const Matrix& a, const Matrix& b) {
    Matrix c(a.rows(), b.cols());
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < b.cols(); ++j) {
            double s = 0.0;
            for (int k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
            c(i, j) = s;
        }
    return c;
}

inline Matrix transpose(const Matrix& m) {
    Matrix t(m.cols(), m.rows());
    for (int i = 0; i < m.rows(); ++i)
        for (int j = 0; j < m.cols(); ++j) t(j, i) = m(i, j);
    return t;
}

/// Row softmax with explicit max subtraction, accumulated in long double.
inline Matrix softmax_rows(const Matrix& m) {
    Matrix out(m.rows(), m.cols());
    for (int i = 0; i < m.rows(); ++i) {
        long double mx = m(i, 0);
        for (int j = 1; j < m.cols(); ++j) mx = std::max<long double>(mx, m(i, j));
        long double sum = 0.0L;
        for (int j = 0; j < m.cols(); ++j) sum += expl(static_cast<long double>(m(i, j)) - mx);
        for (int j = 0; j < m.cols(); ++j)
            out(i, j) = static_cast<double>(expl(static_cast<long double>(m(i, j)) - mx) / sum);
    }
    return out;
}

/// Elementwise s[i][j] / sqrt(d_i * d_j).
inline Matrix sym_normalize(const Matrix& s) {
    const int n = s.rows();
    std::vector<double> d(n, 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) d[i] += s(i, j);
    Matrix out(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) out(i, j) = s(i, j) / std::sqrt(d[i] * d[j]);
    return out;
}

/// Brute-force cross-diffusion similarities: eps * Shat_l S0 Shat_r^T +
/// (1-eps) * (s_r + s_d)/2, every product a double loop.
struct CdaOracleOut {
    Matrix s_rd, s_dr, m_rd, m_dr;
};

inline CdaOracleOut cda(const Matrix& s_r, const Matrix& s_d, const Matrix& v_r, const Matrix& v_d, double eps) {
    const int n = s_r.rows();
    const Matrix shat_r = oracle::sym_normalize(s_r);
    const Matrix shat_d = oracle::sym_normalize(s_d);
    CdaOracleOut out;
    out.s_rd = Matrix(n, n);
    out.s_dr = Matrix(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double diff_rd = 0.0, diff_dr = 0.0;
            for (int k = 0; k < n; ++k) {
                diff_rd += shat_r(i, k) * shat_d(j, k);
                diff_dr += shat_d(i, k) * shat_r(j, k);
            }
            const double a = 0.5 * (s_r(i, j) + s_d(i, j));
            out.s_rd(i, j) = eps * diff_rd + (1.0 - eps) * a;
            out.s_dr(i, j) = eps * diff_dr + (1.0 - eps) * a;
        }
    out.m_rd = oracle::matmul(out.s_rd, v_d);
    out.m_dr = oracle::matmul(out.s_dr, v_r);
    return out;
}

/// Central finite differences of a scalar function over a flat parameter
/// vector; returns max relative error against the supplied analytic grads.
inline double fd_max_rel_err(const std::function<double()>& f, std::vector<double*> slots,
                             const std::vector<double>& analytic, double h = 1e-5) {
    double worst = 0.0;
    for (size_t i = 0; i < slots.size(); ++i) {
        const double saved = *slots[i];
        *slots[i] = saved + h;
        const double up = f();
        *slots[i] = saved - h;
        const double dn = f();
        *slots[i] = saved;
        const double fd = (up - dn) / (2.0 * h);
        const double err = std::abs(fd - analytic[i]) / std::max({1.0, std::abs(fd), std::abs(analytic[i])});
        worst = std::max(worst, err);
    }
    return worst;
}

// ---- metric oracles ----

struct Counts {
    long tp = 0, fp = 0, fn = 0;
};

inline Counts count_at(const Matrix& pred, const Matrix& gt, double t) {
    Counts c;
    for (size_t i = 0; i < pred.size(); ++i) {
        const bool pos = pred.data()[i] >= t;
        const bool truth = gt.data()[i] == 1.0;
        if (pos && truth) ++c.tp;
        else if (pos) ++c.fp;
        else if (truth) ++c.fn;
    }
    return c;
}

/// Straight-line reimplementation of docs/metrics.md (structure measure).
double reference_s_measure(const Matrix& pred, const Matrix& gt);
/// Straight-line reimplementation of docs/metrics.md (max E-measure).
double reference_e_measure_max(const Matrix& pred, const Matrix& gt);

} // namespace oracle
