#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace fer {

/// Result of the finite-difference validation suite: every analytic gradient
/// in the codebase (per-loss logit gradients and full backward through the
/// network) compared against central differences.
struct GradCheckReport {
    struct Entry {
        std::string name;
        double max_rel_error = 0.0;
    };
    std::vector<Entry> checks;
    double max_rel_error = 0.0;

    bool passed(double tolerance = 1e-5) const { return max_rel_error <= tolerance; }
};

GradCheckReport run_gradient_checks(std::uint64_t seed = 7, int points_per_loss = 50);

} // namespace fer
