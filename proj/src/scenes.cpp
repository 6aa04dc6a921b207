#include "rawforge/scenes.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "rawforge/random.hpp"

namespace rawforge {

namespace {

struct Wave {
  double fx, fy, phase, amp;
};

// Amplitudes fall off as 1/f when `pink` is set, as in natural images.
std::vector<Wave> random_waves(Rng& rng, int count, double min_freq, double max_freq, double total_amp,
                               bool pink = false) {
  std::vector<Wave> waves;
  double amp_sum = 0.0;
  for (int i = 0; i < count; ++i) {
    const double f = rng.uniform(min_freq, max_freq);
    const double angle = rng.uniform(0.0, std::numbers::pi);
    const double amp = rng.uniform(0.5, 1.0) * (pink ? min_freq / f : 1.0);
    waves.push_back({f * std::cos(angle), f * std::sin(angle), rng.uniform(0.0, 2 * std::numbers::pi), amp});
    amp_sum += waves.back().amp;
  }
  for (auto& w : waves) w.amp *= total_amp / amp_sum;
  return waves;
}

double eval_waves(const std::vector<Wave>& waves, int x, int y) {
  double v = 0.0;
  for (const auto& w : waves) v += w.amp * std::cos(2 * std::numbers::pi * (w.fx * x + w.fy * y) + w.phase);
  return v;
}

}  // namespace

namespace {

LinearImage wave_scene(std::uint64_t seed, int width, int height, double max_freq, bool pink) {
  Rng rng(derive_seed(seed, 0x5ce7e));
  const auto luma = random_waves(rng, pink ? 16 : 6, 0.005, max_freq, 0.3, pink);
  const auto chroma_r = random_waves(rng, 3, 0.002, max_freq / 3.0, 0.08);
  const auto chroma_b = random_waves(rng, 3, 0.002, max_freq / 3.0, 0.08);
  const double base = rng.uniform(0.35, 0.6);
  const double tint_r = rng.uniform(-0.08, 0.08);
  const double tint_b = rng.uniform(-0.08, 0.08);
  LinearImage img(width, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double l = base + eval_waves(luma, x, y);
      img.r.at(x, y) = static_cast<float>(std::clamp(l + tint_r + eval_waves(chroma_r, x, y), 0.02, 0.98));
      img.g.at(x, y) = static_cast<float>(std::clamp(l, 0.02, 0.98));
      img.b.at(x, y) = static_cast<float>(std::clamp(l + tint_b + eval_waves(chroma_b, x, y), 0.02, 0.98));
    }
  }
  return img;
}

}  // namespace

LinearImage band_limited_scene(std::uint64_t seed, int width, int height, double max_freq) {
  return wave_scene(seed, width, height, max_freq, false);
}

SrgbImage textured_scene(std::uint64_t seed, int width, int height) {
  const LinearImage base = wave_scene(seed, width, height, 0.25, true);
  SrgbImage img(base.r, base.g, base.b);
  Rng rng(derive_seed(seed, 0xd15c));
  const int discs = 4;
  for (int d = 0; d < discs; ++d) {
    const double cx = rng.uniform(0.0, width);
    const double cy = rng.uniform(0.0, height);
    const double radius = rng.uniform(0.08, 0.25) * std::min(width, height);
    const double colour[3] = {rng.uniform(0.05, 0.95), rng.uniform(0.05, 0.95), rng.uniform(0.05, 0.95)};
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        const double dist = std::hypot(x - cx, y - cy);
        const double a = std::clamp((radius - dist) / 2.0 + 0.5, 0.0, 1.0);
        if (a <= 0.0) continue;
        for (int c = 0; c < 3; ++c) {
          float& v = img.plane(c).at(x, y);
          v = static_cast<float>((1.0 - a) * v + a * colour[c]);
        }
      }
    }
  }
  return img;
}

}  // namespace rawforge
