#include "rawforge/noise.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "rawforge/parallel.hpp"

namespace rawforge {

void NoiseRanges::validate() const {
  if (!std::isfinite(shot_log_min) || !std::isfinite(shot_log_max) ||
      shot_log_min > shot_log_max) {
    throw ValidationError("noise range: shot_log_min must be <= shot_log_max");
  }
  if (!std::isfinite(read_slope) || !std::isfinite(read_intercept) || !(read_sigma >= 0.0)) {
    throw ValidationError("noise range: read model must be finite with read_sigma >= 0");
  }
}

NoiseParams sample_noise_params(Rng& rng, const NoiseRanges& ranges) {
  ranges.validate();
  const double log_shot = ranges.shot_log_min == ranges.shot_log_max
                              ? ranges.shot_log_min
                              : rng.uniform(ranges.shot_log_min, ranges.shot_log_max);
  double log_read = ranges.read_slope * log_shot + ranges.read_intercept;
  if (ranges.read_sigma > 0.0) log_read += ranges.read_sigma * rng.normal();
  return {std::exp(log_shot), std::exp(log_read)};
}

RawImage add_shot_read_noise(const RawImage& r, const NoiseParams& p, std::uint64_t seed,
                             NoiseOptions opts) {
  p.validate();
  if (!in_unit_range(r.plane)) throw ValidationError("noise input must lie in [0,1]");
  CaptureMetadata meta = r.meta;
  meta.noise = p;
  meta.seed = seed;
  ImagePlane out = r.plane;
  if (p.shot > 0.0 || p.read > 0.0) {
    const CounterRng gen(seed);
    auto samples = out.samples();
    parallel_for(samples.size(), [&](std::size_t begin, std::size_t end) {
      for (std::size_t i = begin; i < end; ++i) {
        const double x = samples[i];
        const double sd = std::sqrt(p.read + p.shot * x);
        double v = x + sd * gen.normal(i);
        if (opts.clamp) v = std::clamp(v, 0.0, 1.0);
        samples[i] = static_cast<float>(v);
      }
    });
  }
  return RawImage(std::move(out), meta, !opts.clamp);
}

NoiseEstimate estimate_noise_curve(const RawImage& noisy, const RawImage& clean) {
  constexpr int kBins = 16;
  constexpr std::size_t kMinSamples = 100;
  constexpr double kMaxClipFraction = 1e-3;
  if (!noisy.plane.same_shape(clean.plane) || noisy.pattern() != clean.pattern()) {
    throw ValidationError("noise estimate: images differ in size or pattern");
  }
  struct Bin {
    double sum_x = 0, sum_r = 0, sum_r2 = 0;
    std::size_t n = 0, clipped = 0;
  };
  std::array<Bin, kBins> bins{};
  const auto xs = clean.plane.samples();
  const auto ys = noisy.plane.samples();
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double x = xs[i];
    const int b = std::clamp(static_cast<int>(x * kBins), 0, kBins - 1);
    const double res = static_cast<double>(ys[i]) - x;
    Bin& bin = bins[b];
    bin.sum_x += x;
    bin.sum_r += res;
    bin.sum_r2 += res * res;
    ++bin.n;
    if (!noisy.pre_clip && (ys[i] == 0.0f || ys[i] == 1.0f)) ++bin.clipped;
  }
  bool any_populated = false;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int used = 0;
  for (const Bin& bin : bins) {
    if (bin.n < kMinSamples) continue;
    any_populated = true;
    if (static_cast<double>(bin.clipped) > kMaxClipFraction * static_cast<double>(bin.n)) continue;
    const double n = static_cast<double>(bin.n);
    const double mx = bin.sum_x / n;
    const double mr = bin.sum_r / n;
    const double var = (bin.sum_r2 - n * mr * mr) / (n - 1.0);
    sx += mx;
    sy += var;
    sxx += mx * mx;
    sxy += mx * var;
    ++used;
  }
  if (!any_populated) throw ValidationError("noise estimate: no bin has 100 samples");
  if (used == 0) throw ValidationError("noise estimate: every populated bin is clipped");
  NoiseEstimate est;
  est.bins_used = used;
  const double denom = used * sxx - sx * sx;
  if (used < 2 || std::abs(denom) < 1e-12) {
    // One intensity level: slope unidentifiable, attribute everything to read noise.
    est.read = std::max(0.0, sy / used);
    return est;
  }
  est.shot = std::max(0.0, (used * sxy - sx * sy) / denom);
  est.read = std::max(0.0, (sy - (used * sxy - sx * sy) / denom * sx) / used);
  return est;
}

}  // namespace rawforge
