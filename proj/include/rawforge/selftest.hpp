#pragma once

#include <cstdint>

#include <json.hpp>

namespace rawforge {

struct GradcheckResult {
  double max_rel_err = 0.0;
  int checked = 0;
};

/// Forward-mode PTP derivative vs central differences (step h) along random
/// directions, on pixels away from every clamp and curve breakpoint. Cycles
/// through both gamma curves, both tone curves and identity/camera CCMs.
GradcheckResult ptp_gradcheck(std::uint64_t seed, int pixels, double h = 1e-4);

/// Analytic dual-domain MSE gradient vs central differences on random
/// coordinates of `cases` small images.
GradcheckResult loss_gradcheck(std::uint64_t seed, int cases);

/// Runs the embedded invariant suites. Report:
/// {"suite", "seed", "passed", "failed", "tolerances": {...}, "results": [...]}.
nlohmann::json run_selftest(std::uint64_t seed);

}  // namespace rawforge
