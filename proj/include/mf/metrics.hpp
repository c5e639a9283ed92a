#pragma once

#include <array>

#include "mf/matrix.hpp"

namespace mf {

/// Mean absolute per-pixel error.
double mae(const Matrix& pred, const Matrix& gt);

struct PrPoint {
    double precision = 0.0;
    double recall = 0.0;
};

/// 256 precision/recall pairs at thresholds k/255, k = 0..255, binarizing
/// pred >= t. Precision at zero positive predictions is defined as 1.
struct PrCurve {
    std::array<PrPoint, 256> points;
};

PrCurve pr_curve(const Matrix& pred, const Matrix& gt);

/// Max over thresholds of (1+b2) P R / (b2 P + R), 0 when the denominator
/// vanishes; b2 = 0.3.
double f_measure_max(const PrCurve& curve, double beta2 = 0.3);

/// Structure measure, alpha-blend of object- and region-level similarity.
/// Component formulas are pinned in docs/metrics.md.
double s_measure(const Matrix& pred, const Matrix& gt, double alpha = 0.5);

/// Max over 256 thresholds of the enhanced-alignment score.
/// Component formulas are pinned in docs/metrics.md.
double e_measure_max(const Matrix& pred, const Matrix& gt);

} // namespace mf
