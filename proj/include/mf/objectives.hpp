#pragma once

#include <utility>
#include <vector>

#include "mf/tape.hpp"

namespace mf {

struct FocalConfig {
    /// Reproduce the verbatim modulating fraction that uses the raw
    /// foreground probabilities on every pixel. The default mode works on
    /// true-class probabilities (p on foreground, 1-p on background) for
    /// both branches, which is what makes the per-pixel alpha switch
    /// meaningful.
    bool literal = false;
    double clamp_lo = 1e-7;
    double alpha_fg = 0.25;
    double alpha_bg = 0.75;
};

/// Checks a mask is strictly {0,1}-valued.
void require_binary_mask(const Matrix& y, const char* op);

/// Pixel-level focal regularization between the two modality probability
/// heads, supervised by mask y. Symmetric counterpart: swap p_r and p_d.
Var focal_regularization_t(Tape& t, Var p_r, Var p_d, const Matrix& y, const FocalConfig& cfg = {});
double focal_regularization(const Matrix& p_r, const Matrix& p_d, const Matrix& y, const FocalConfig& cfg = {});

/// Boundary-emphasis weight map: 1 + 5*|AP(y) - y|, mean pooling over a
/// k x k window truncated at image borders.
Matrix position_weight(const Matrix& y, int window = 31);

/// Half the sum of omega-weighted BCE and omega-weighted IoU losses.
Var pixel_position_aware_loss_t(Tape& t, Var p, const Matrix& y, int window = 31, double clamp_lo = 1e-7);
double pixel_position_aware_loss(const Matrix& p, const Matrix& y, int window = 31, double clamp_lo = 1e-7);

struct LossBreakdown {
    double l_p = 0.0;
    double focal_sum = 0.0;
    double total = 0.0;
    double lambda = 0.0;
};

struct LossBreakdownVars {
    Var l_p;
    Var focal_sum;
    Var total;
};

/// Saliency loss composition: L_P averages the sub-decoder losses and adds
/// the level losses at weight 1/2^(l-1) for l = 2..5; the total blends L_P
/// with the focal sum by lambda.
LossBreakdownVars total_loss_t(Tape& t, const std::vector<Var>& per_decoder, const std::vector<Var>& per_level,
                               const std::vector<std::pair<Var, Var>>& focal_terms, double lambda);
LossBreakdown total_loss(const std::vector<double>& per_decoder, const std::vector<double>& per_level,
                         const std::vector<std::pair<double, double>>& focal_terms, double lambda);

} // namespace mf
