#pragma once

#include "rawforge/imagecore.hpp"

namespace rawforge {

/// Channel (0=R, 1=G, 2=B) sampled at column x, row y.
int cfa_color(BayerPattern p, int x, int y);

/// Pattern seen when the origin moves to (dx, dy). Period 2 in both axes.
BayerPattern pattern_at_offset(BayerPattern p, int dx, int dy);

/// Sample each pixel's pattern colour. Noise-free; `meta.pattern` is overwritten.
RawImage mosaic(const LinearImage& x, BayerPattern pattern, CaptureMetadata meta = {});

struct DemosaicOptions {
  /// 3x3 Gaussian (sigma 0.8) over same-colour sites before interpolation.
  bool prefilter = false;
};

/// Same-colour 3x3 Gaussian smoothing on the Bayer lattice (stride 2).
RawImage cfa_prefilter(const RawImage& raw);

/// Missing samples are the mean of the in-bounds same-colour 3x3 neighbours.
LinearImage demosaic_bilinear(const RawImage& raw, DemosaicOptions opts = {});

/// Malvar-He-Cutler 5x5 gradient-corrected interpolation. Needs width, height >= 6.
LinearImage demosaic_malvar(const RawImage& raw, DemosaicOptions opts = {});

}  // namespace rawforge
