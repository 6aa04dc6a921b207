#pragma once

#include <cmath>
#include <cstdint>

#include "rawforge/imagecore.hpp"
#include "rawforge/random.hpp"

namespace rawforge {

/// log(read) = read_slope * log(shot) + read_intercept + N(0, read_sigma^2),
/// with log(shot) uniform on [shot_log_min, shot_log_max].
struct NoiseRanges {
  double shot_log_min = std::log(1e-4);
  double shot_log_max = std::log(1e-2);
  double read_slope = 2.18;
  double read_intercept = 1.20;
  double read_sigma = 0.26;

  void validate() const;
};

NoiseParams sample_noise_params(Rng& rng, const NoiseRanges& ranges);

struct NoiseOptions {
  /// Keep unclamped samples (result is flagged pre_clip).
  bool clamp = true;
};

/// out = clamp(x + n), n ~ N(0, read + shot * x) drawn from a counter-based
/// stream keyed by `seed` and the pixel index. Also records p and seed in meta.
RawImage add_shot_read_noise(const RawImage& r, const NoiseParams& p, std::uint64_t seed,
                             NoiseOptions opts = {});

struct NoiseEstimate {
  double shot = 0.0;
  double read = 0.0;
  int bins_used = 0;
};

/// Least-squares line through per-bin residual variance vs clean intensity
/// (16 equal bins over [0,1]). Bins with under 100 samples or more than 0.1%
/// clipped samples are skipped.
NoiseEstimate estimate_noise_curve(const RawImage& noisy, const RawImage& clean);

}  // namespace rawforge
