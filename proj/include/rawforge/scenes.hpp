#pragma once

#include <cstdint>

#include "rawforge/imagecore.hpp"

namespace rawforge {

/// Smooth random scene: a few random sinusoids share one luminance signal,
/// plus weaker low-frequency chroma. Spatial frequencies stay below
/// `max_freq` cycles/pixel. Samples lie in [0.02, 0.98].
LinearImage band_limited_scene(std::uint64_t seed, int width, int height, double max_freq = 0.1);

/// Band-limited texture plus soft-edged discs, for exercising degradations.
SrgbImage textured_scene(std::uint64_t seed, int width, int height);

}  // namespace rawforge
