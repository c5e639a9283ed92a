#pragma once

#include <string>
#include <vector>

#include "mf/matrix.hpp"

namespace mf {

struct GradCheckResult {
    std::string op;
    double max_rel_err = 0.0;
};

/// Central-difference checks (step h) of every differentiable tape
/// operation and of the full fusion block, over `rounds` random draws each.
/// Relative error uses |analytic - fd| / max(1, |analytic|, |fd|).
std::vector<GradCheckResult> run_grad_checks(uint64_t seed, int rounds = 3, double h = 1e-5);

} // namespace mf
