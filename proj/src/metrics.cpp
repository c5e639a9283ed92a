#include "mf/metrics.hpp"

#include <cmath>

namespace mf {

namespace {

void check_pair(const Matrix& pred, const Matrix& gt, const char* op) {
    require_same_shape(pred, gt, op);
    for (double v : pred.vec())
        if (!(v >= 0.0 && v <= 1.0)) throw DomainError(std::string(op) + ": prediction outside [0,1]");
    for (double v : gt.vec())
        if (v != 0.0 && v != 1.0) throw DomainError(std::string(op) + ": ground truth must be binary");
}

} // namespace

double mae(const Matrix& pred, const Matrix& gt) {
    check_pair(pred, gt, "mae");
    double s = 0.0;
    for (size_t i = 0; i < pred.size(); ++i) s += std::abs(pred.data()[i] - gt.data()[i]);
    return s / static_cast<double>(pred.size());
}

PrCurve pr_curve(const Matrix& pred, const Matrix& gt) {
    check_pair(pred, gt, "pr_curve");
    double fg = 0.0;
    for (double v : gt.vec()) fg += v;
    if (fg == 0.0) throw DomainError("pr_curve: ground truth has no foreground");
    PrCurve curve;
    for (int k = 0; k < 256; ++k) {
        const double t = k / 255.0;
        long tp = 0, fp = 0, fn = 0;
        for (size_t i = 0; i < pred.size(); ++i) {
            const bool pos = pred.data()[i] >= t;
            const bool truth = gt.data()[i] == 1.0;
            if (pos && truth) ++tp;
            else if (pos) ++fp;
            else if (truth) ++fn;
        }
        PrPoint pt;
        pt.precision = (tp + fp) > 0 ? static_cast<double>(tp) / (tp + fp) : 1.0;
        pt.recall = static_cast<double>(tp) / (tp + fn);
        curve.points[k] = pt;
    }
    return curve;
}

double f_measure_max(const PrCurve& curve, double beta2) {
    double best = 0.0;
    for (const PrPoint& pt : curve.points) {
        const double den = beta2 * pt.precision + pt.recall;
        const double f = den > 0.0 ? (1.0 + beta2) * pt.precision * pt.recall / den : 0.0;
        best = std::max(best, f);
    }
    return best;
}

// ---- structure measure ----

namespace {

struct RegionStats {
    double mean = 0.0;
    double sample_var = 0.0; // N-1 normalization, 0 for regions under 2 px
    long count = 0;
};

RegionStats masked_stats(const Matrix& x, const Matrix& mask, double keep) {
    RegionStats st;
    double sum = 0.0;
    for (size_t i = 0; i < x.size(); ++i)
        if (mask.data()[i] == keep) {
            sum += x.data()[i];
            ++st.count;
        }
    if (st.count == 0) return st;
    st.mean = sum / st.count;
    if (st.count >= 2) {
        double ss = 0.0;
        for (size_t i = 0; i < x.size(); ++i)
            if (mask.data()[i] == keep) {
                const double d = x.data()[i] - st.mean;
                ss += d * d;
            }
        st.sample_var = ss / (st.count - 1);
    }
    return st;
}

double object_similarity(const Matrix& x, const Matrix& mask, double keep) {
    const RegionStats st = masked_stats(x, mask, keep);
    if (st.count == 0) return 0.0;
    const double sd = std::sqrt(st.sample_var);
    return 2.0 * st.mean / (st.mean * st.mean + 1.0 + sd);
}

double s_object(const Matrix& pred, const Matrix& gt) {
    const double u = mean_all(gt);
    const double fg = object_similarity(pred, gt, 1.0);
    const double bg = object_similarity(affine(pred, -1.0, 1.0), gt, 0.0);
    return u * fg + (1.0 - u) * bg;
}

double region_ssim(const Matrix& pred, const Matrix& gt, int r0, int r1, int c0, int c1) {
    const long n = static_cast<long>(r1 - r0) * (c1 - c0);
    if (n <= 0) return 0.0;
    double mp = 0.0, mg = 0.0;
    for (int i = r0; i < r1; ++i)
        for (int j = c0; j < c1; ++j) {
            mp += pred(i, j);
            mg += gt(i, j);
        }
    mp /= n;
    mg /= n;
    double vp = 0.0, vg = 0.0, cov = 0.0;
    if (n >= 2) {
        for (int i = r0; i < r1; ++i)
            for (int j = c0; j < c1; ++j) {
                const double dp = pred(i, j) - mp;
                const double dg = gt(i, j) - mg;
                vp += dp * dp;
                vg += dg * dg;
                cov += dp * dg;
            }
        vp /= n - 1;
        vg /= n - 1;
        cov /= n - 1;
    }
    const double a = 4.0 * mp * mg * cov;
    const double b = (mp * mp + mg * mg) * (vp + vg);
    if (a != 0.0) return a / b;
    return b == 0.0 ? 1.0 : 0.0;
}

double s_region(const Matrix& pred, const Matrix& gt) {
    const int h = gt.rows(), w = gt.cols();
    double total = 0.0, sx = 0.0, sy = 0.0;
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j)
            if (gt(i, j) == 1.0) {
                total += 1.0;
                sy += i + 1;
                sx += j + 1;
            }
    // Centroid as 1-based rounded counts of the top/left partitions.
    const int cy = static_cast<int>(std::lround(sy / total));
    const int cx = static_cast<int>(std::lround(sx / total));
    const double area = static_cast<double>(h) * w;
    const double w1 = (static_cast<double>(cx) * cy) / area;
    const double w2 = (static_cast<double>(w - cx) * cy) / area;
    const double w3 = (static_cast<double>(cx) * (h - cy)) / area;
    const double w4 = 1.0 - w1 - w2 - w3;
    return w1 * region_ssim(pred, gt, 0, cy, 0, cx) + w2 * region_ssim(pred, gt, 0, cy, cx, w) +
           w3 * region_ssim(pred, gt, cy, h, 0, cx) + w4 * region_ssim(pred, gt, cy, h, cx, w);
}

} // namespace

double s_measure(const Matrix& pred, const Matrix& gt, double alpha) {
    check_pair(pred, gt, "s_measure");
    const double mu = mean_all(gt);
    if (mu == 0.0) return 1.0 - mean_all(pred);
    if (mu == 1.0) return mean_all(pred);
    const double s = alpha * s_object(pred, gt) + (1.0 - alpha) * s_region(pred, gt);
    return std::max(s, 0.0);
}

// ---- enhanced-alignment measure ----

double e_measure_max(const Matrix& pred, const Matrix& gt) {
    check_pair(pred, gt, "e_measure_max");
    double fg = 0.0;
    for (double v : gt.vec()) fg += v;
    const size_t n = gt.size();
    const double mu_g = fg / static_cast<double>(n);
    double best = 0.0;
    for (int k = 0; k < 256; ++k) {
        const double t = k / 255.0;
        double score;
        if (fg == 0.0) {
            // GT all background: credit the non-predicted area.
            double s = 0.0;
            for (size_t i = 0; i < n; ++i) s += pred.data()[i] >= t ? 0.0 : 1.0;
            score = s / static_cast<double>(n);
        } else if (fg == static_cast<double>(n)) {
            double s = 0.0;
            for (size_t i = 0; i < n; ++i) s += pred.data()[i] >= t ? 1.0 : 0.0;
            score = s / static_cast<double>(n);
        } else {
            double pos = 0.0;
            for (size_t i = 0; i < n; ++i) pos += pred.data()[i] >= t ? 1.0 : 0.0;
            const double mu_p = pos / static_cast<double>(n);
            double s = 0.0;
            for (size_t i = 0; i < n; ++i) {
                const double phi_p = (pred.data()[i] >= t ? 1.0 : 0.0) - mu_p;
                const double phi_g = gt.data()[i] - mu_g;
                const double den = phi_p * phi_p + phi_g * phi_g;
                const double xi = den > 0.0 ? 2.0 * phi_p * phi_g / den : 1.0;
                s += (1.0 + xi) * (1.0 + xi) / 4.0;
            }
            score = s / static_cast<double>(n);
        }
        best = std::max(best, score);
    }
    return best;
}

} // namespace mf
