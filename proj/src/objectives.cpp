#include "mf/objectives.hpp"

#include <cmath>

namespace mf {

void require_binary_mask(const Matrix& y, const char* op) {
    for (double v : y.vec())
        if (v != 0.0 && v != 1.0) throw DomainError(std::string(op) + ": mask must be binary");
}

namespace {

Matrix true_class_slope(const Matrix& y) { return affine(y, 2.0, -1.0); } // 2y - 1
Matrix true_class_offset(const Matrix& y) { return affine(y, -1.0, 1.0); } // 1 - y

} // namespace

Var focal_regularization_t(Tape& t, Var p_r, Var p_d, const Matrix& y, const FocalConfig& cfg) {
    require_same_shape(t.val(p_r), y, "focal_regularization");
    require_same_shape(t.val(p_d), y, "focal_regularization");
    require_binary_mask(y, "focal_regularization");

    Var pr = t.clamp(p_r, cfg.clamp_lo, 1.0 - cfg.clamp_lo);
    Var pd = t.clamp(p_d, cfg.clamp_lo, 1.0 - cfg.clamp_lo);
    Var qr = pr, qd = pd;
    if (!cfg.literal) {
        // Probability assigned to the true class: p on foreground, 1-p off it.
        qr = t.add_const(t.hadamard_const(pr, true_class_slope(y)), true_class_offset(y));
        qd = t.add_const(t.hadamard_const(pd, true_class_slope(y)), true_class_offset(y));
    }
    Var dice = t.div_elem(t.scale(t.hadamard(qr, qd), 2.0), t.add(qr, qd));
    Var factor = t.affine(t.hadamard(qr, dice), -1.0, 1.0);
    Var modulated = t.hadamard(t.hadamard(factor, factor), t.log(qr));

    Matrix alpha(y.rows(), y.cols());
    for (size_t i = 0; i < y.size(); ++i) alpha.data()[i] = y.data()[i] == 1.0 ? cfg.alpha_fg : cfg.alpha_bg;
    return t.scale(t.mean_all(t.hadamard_const(modulated, alpha)), -1.0);
}

double focal_regularization(const Matrix& p_r, const Matrix& p_d, const Matrix& y, const FocalConfig& cfg) {
    Tape t;
    return t.val(focal_regularization_t(t, t.constant(p_r), t.constant(p_d), y, cfg))(0, 0);
}

Matrix position_weight(const Matrix& y, int window) {
    if (window < 1 || window % 2 == 0) throw DomainError("position_weight: window must be odd and positive");
    const int h = y.rows(), w = y.cols(), r = window / 2;
    // Integral image for O(1) truncated-window means.
    std::vector<double> integral(static_cast<size_t>(h + 1) * (w + 1), 0.0);
    auto at = [&](int i, int j) -> double& { return integral[static_cast<size_t>(i) * (w + 1) + j]; };
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) at(i + 1, j + 1) = y(i, j) + at(i, j + 1) + at(i + 1, j) - at(i, j);
    Matrix omega(h, w);
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) {
            const int y0 = std::max(0, i - r), y1 = std::min(h - 1, i + r);
            const int x0 = std::max(0, j - r), x1 = std::min(w - 1, j + r);
            const double sum = at(y1 + 1, x1 + 1) - at(y0, x1 + 1) - at(y1 + 1, x0) + at(y0, x0);
            const double mean = sum / (static_cast<double>(y1 - y0 + 1) * (x1 - x0 + 1));
            omega(i, j) = 1.0 + 5.0 * std::abs(mean - y(i, j));
        }
    return omega;
}

Var pixel_position_aware_loss_t(Tape& t, Var p, const Matrix& y, int window, double clamp_lo) {
    require_same_shape(t.val(p), y, "pixel_position_aware_loss");
    require_binary_mask(y, "pixel_position_aware_loss");
    const Matrix omega = position_weight(y, window);

    Var pc = t.clamp(p, clamp_lo, 1.0 - clamp_lo);
    // BCE per pixel: -(y log p + (1-y) log(1-p)), then omega-normalized.
    Var log_p = t.log(pc);
    Var log_np = t.log(t.affine(pc, -1.0, 1.0));
    Var bce = t.scale(t.add(t.hadamard_const(log_p, y), t.hadamard_const(log_np, true_class_offset(y))), -1.0);
    const double omega_sum = sum_all(omega);
    Var wbce = t.scale(t.sum_all(t.hadamard_const(bce, omega)), 1.0 / omega_sum);

    // Weighted IoU with +1 smoothing on both sides.
    const Matrix omega_fg = hadamard(omega, y);
    const Matrix omega_bg = hadamard(omega, true_class_offset(y));
    Var inter = t.affine(t.sum_all(t.hadamard_const(p, omega_fg)), 1.0, 1.0);
    Var uni = t.affine(t.sum_all(t.hadamard_const(p, omega_bg)), 1.0, sum_all(omega_fg) + 1.0);
    Var wiou = t.affine(t.div_elem(inter, uni), -1.0, 1.0);

    return t.scale(t.add(wbce, wiou), 0.5);
}

double pixel_position_aware_loss(const Matrix& p, const Matrix& y, int window, double clamp_lo) {
    Tape t;
    return t.val(pixel_position_aware_loss_t(t, t.constant(p), y, window, clamp_lo))(0, 0);
}

LossBreakdownVars total_loss_t(Tape& t, const std::vector<Var>& per_decoder, const std::vector<Var>& per_level,
                               const std::vector<std::pair<Var, Var>>& focal_terms, double lambda) {
    if (per_decoder.empty()) throw DomainError("total_loss: sub-decoder loss list is empty");
    if (per_level.size() != 4) throw DomainError("total_loss: expected level losses for l = 2..5");
    if (lambda < 0.0 || lambda > 0.9)
        throw DomainError("total_loss: lambda must lie in [0, 0.9], got " + std::to_string(lambda));

    Var lp{};
    for (size_t i = 0; i < per_decoder.size(); ++i)
        lp = i == 0 ? per_decoder[i] : t.add(lp, per_decoder[i]);
    lp = t.scale(lp, 1.0 / static_cast<double>(per_decoder.size()));
    for (size_t i = 0; i < per_level.size(); ++i) {
        const int level = static_cast<int>(i) + 2;
        lp = t.add(lp, t.scale(per_level[i], 1.0 / std::pow(2.0, level - 1)));
    }

    LossBreakdownVars out;
    out.l_p = lp;
    Var focal{};
    for (size_t i = 0; i < focal_terms.size(); ++i) {
        Var pair_sum = t.add(focal_terms[i].first, focal_terms[i].second);
        focal = i == 0 ? pair_sum : t.add(focal, pair_sum);
    }
    if (!focal.valid()) focal = t.constant(Matrix{{0.0}});
    out.focal_sum = focal;
    out.total = t.add(t.scale(lp, 1.0 - lambda), t.scale(focal, lambda));
    return out;
}

LossBreakdown total_loss(const std::vector<double>& per_decoder, const std::vector<double>& per_level,
                         const std::vector<std::pair<double, double>>& focal_terms, double lambda) {
    Tape t;
    auto wrap = [&](double v) { return t.constant(Matrix{{v}}); };
    std::vector<Var> dec, lev;
    for (double v : per_decoder) dec.push_back(wrap(v));
    for (double v : per_level) lev.push_back(wrap(v));
    std::vector<std::pair<Var, Var>> foc;
    for (auto [a, b] : focal_terms) foc.emplace_back(wrap(a), wrap(b));
    LossBreakdownVars vars = total_loss_t(t, dec, lev, foc, lambda);
    LossBreakdown out;
    out.l_p = t.val(vars.l_p)(0, 0);
    out.focal_sum = t.val(vars.focal_sum)(0, 0);
    out.total = t.val(vars.total)(0, 0);
    out.lambda = lambda;
    return out;
}

} // namespace mf
