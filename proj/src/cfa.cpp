#include "rawforge/cfa.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "rawforge/parallel.hpp"

namespace rawforge {

namespace {

// Quad colours, row-major: [y0x0, y0x1, y1x0, y1x1].
constexpr std::array<int, 4> quad(BayerPattern p) {
  switch (p) {
    case BayerPattern::RGGB: return {0, 1, 1, 2};
    case BayerPattern::BGGR: return {2, 1, 1, 0};
    case BayerPattern::GRBG: return {1, 0, 2, 1};
    case BayerPattern::GBRG: return {1, 2, 0, 1};
  }
  return {0, 1, 1, 2};
}

int mod2(int v) { return ((v % 2) + 2) % 2; }

// Reflect-101 keeps the Bayer parity at the borders.
int reflect(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * (n - 1) - i;
  }
  return i;
}

using Kernel5 = std::array<std::array<float, 5>, 5>;

// Malvar-He-Cutler kernels, scaled by 8.
constexpr Kernel5 kGreenAtRB = {{{0, 0, -1, 0, 0},
                                 {0, 0, 2, 0, 0},
                                 {-1, 2, 4, 2, -1},
                                 {0, 0, 2, 0, 0},
                                 {0, 0, -1, 0, 0}}};
// Colour present in the row of this green site.
constexpr Kernel5 kRowNeighbour = {{{0, 0, 0.5f, 0, 0},
                                    {0, -1, 0, -1, 0},
                                    {-1, 4, 5, 4, -1},
                                    {0, -1, 0, -1, 0},
                                    {0, 0, 0.5f, 0, 0}}};
// Colour present in the column of this green site.
constexpr Kernel5 kColNeighbour = {{{0, 0, -1, 0, 0},
                                    {0, -1, 4, -1, 0},
                                    {0.5f, 0, 5, 0, 0.5f},
                                    {0, -1, 4, -1, 0},
                                    {0, 0, -1, 0, 0}}};
// Red at blue, blue at red.
constexpr Kernel5 kDiagonal = {{{0, 0, -1.5f, 0, 0},
                                {0, 2, 0, 2, 0},
                                {-1.5f, 0, 6, 0, -1.5f},
                                {0, 2, 0, 2, 0},
                                {0, 0, -1.5f, 0, 0}}};

double apply5(const ImagePlane& p, int x, int y, const Kernel5& k) {
  const int w = p.width();
  const int h = p.height();
  double acc = 0.0;
  for (int j = 0; j < 5; ++j) {
    const int yy = reflect(y + j - 2, h);
    for (int i = 0; i < 5; ++i) {
      if (k[j][i] == 0.0f) continue;
      acc += static_cast<double>(k[j][i]) * p.at(reflect(x + i - 2, w), yy);
    }
  }
  return acc / 8.0;
}

RawImage maybe_prefilter(const RawImage& raw, const DemosaicOptions& opts) {
  return opts.prefilter ? cfa_prefilter(raw) : raw;
}

}  // namespace

int cfa_color(BayerPattern p, int x, int y) { return quad(p)[mod2(y) * 2 + mod2(x)]; }

BayerPattern pattern_at_offset(BayerPattern p, int dx, int dy) {
  const auto q = quad(p);
  std::array<int, 4> shifted{};
  for (int y = 0; y < 2; ++y) {
    for (int x = 0; x < 2; ++x) shifted[y * 2 + x] = q[mod2(y + dy) * 2 + mod2(x + dx)];
  }
  for (auto cand : {BayerPattern::RGGB, BayerPattern::BGGR, BayerPattern::GRBG, BayerPattern::GBRG}) {
    if (quad(cand) == shifted) return cand;
  }
  return p;  // unreachable: the four patterns are closed under shifts
}

RawImage mosaic(const LinearImage& x, BayerPattern pattern, CaptureMetadata meta) {
  if (x.width() % 2 != 0 || x.height() % 2 != 0) {
    throw ValidationError("mosaic needs even width and height");
  }
  ImagePlane plane(x.width(), x.height());
  for (int y = 0; y < x.height(); ++y) {
    for (int i = 0; i < x.width(); ++i) plane.at(i, y) = x.plane(cfa_color(pattern, i, y)).at(i, y);
  }
  meta.pattern = pattern;
  return RawImage(std::move(plane), meta);
}

RawImage cfa_prefilter(const RawImage& raw) {
  constexpr double sigma = 0.8;
  double wts[3][3];
  double total = 0.0;
  for (int j = -1; j <= 1; ++j) {
    for (int i = -1; i <= 1; ++i) {
      wts[j + 1][i + 1] = std::exp(-(i * i + j * j) / (2.0 * sigma * sigma));
      total += wts[j + 1][i + 1];
    }
  }
  const ImagePlane& src = raw.plane;
  const int w = src.width();
  const int h = src.height();
  // Out-of-range lattice neighbours mirror to the opposite same-colour site.
  auto lattice = [](int v, int step, int n) {
    const int t = v + 2 * step;
    if (t < 0 || t >= n) return v - 2 * step >= 0 && v - 2 * step < n ? v - 2 * step : v;
    return t;
  };
  ImagePlane out(w, h);
  parallel_for(static_cast<std::size_t>(h), [&](std::size_t y0, std::size_t y1) {
    for (int y = static_cast<int>(y0); y < static_cast<int>(y1); ++y) {
      for (int x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int j = -1; j <= 1; ++j) {
          const int yy = lattice(y, j, h);
          for (int i = -1; i <= 1; ++i) acc += wts[j + 1][i + 1] * src.at(lattice(x, i, w), yy);
        }
        out.at(x, y) = static_cast<float>(acc / total);
      }
    }
  });
  return RawImage(std::move(out), raw.meta, raw.pre_clip);
}

LinearImage demosaic_bilinear(const RawImage& input, DemosaicOptions opts) {
  const RawImage raw = maybe_prefilter(input, opts);
  const ImagePlane& src = raw.plane;
  const int w = src.width();
  const int h = src.height();
  const BayerPattern pat = raw.pattern();
  LinearImage out(w, h);
  parallel_for(static_cast<std::size_t>(h), [&](std::size_t y0, std::size_t y1) {
    for (int y = static_cast<int>(y0); y < static_cast<int>(y1); ++y) {
      for (int x = 0; x < w; ++x) {
        const int own = cfa_color(pat, x, y);
        for (int c = 0; c < 3; ++c) {
          float v;
          if (c == own) {
            v = src.at(x, y);
          } else {
            double acc = 0.0;
            int n = 0;
            for (int j = -1; j <= 1; ++j) {
              const int yy = y + j;
              if (yy < 0 || yy >= h) continue;
              for (int i = -1; i <= 1; ++i) {
                const int xx = x + i;
                if (xx < 0 || xx >= w || cfa_color(pat, xx, yy) != c) continue;
                acc += src.at(xx, yy);
                ++n;
              }
            }
            v = static_cast<float>(acc / n);
          }
          out.plane(c).at(x, y) = std::clamp(v, 0.0f, 1.0f);
        }
      }
    }
  });
  return out;
}

LinearImage demosaic_malvar(const RawImage& input, DemosaicOptions opts) {
  if (input.width() < 6 || input.height() < 6) {
    throw ValidationError("Malvar demosaic needs at least 6x6 pixels");
  }
  const RawImage raw = maybe_prefilter(input, opts);
  const ImagePlane& src = raw.plane;
  const int w = src.width();
  const int h = src.height();
  const BayerPattern pat = raw.pattern();
  LinearImage out(w, h);
  parallel_for(static_cast<std::size_t>(h), [&](std::size_t y0, std::size_t y1) {
    for (int y = static_cast<int>(y0); y < static_cast<int>(y1); ++y) {
      for (int x = 0; x < w; ++x) {
        const int own = cfa_color(pat, x, y);
        double v[3];
        v[own] = src.at(x, y);
        if (own == 1) {
          const int row_colour = cfa_color(pat, x + 1, y);
          const int col_colour = cfa_color(pat, x, y + 1);
          v[row_colour] = apply5(src, x, y, kRowNeighbour);
          v[col_colour] = apply5(src, x, y, kColNeighbour);
        } else {
          v[1] = apply5(src, x, y, kGreenAtRB);
          v[2 - own] = apply5(src, x, y, kDiagonal);
        }
        for (int c = 0; c < 3; ++c) {
          out.plane(c).at(x, y) = std::clamp(static_cast<float>(v[c]), 0.0f, 1.0f);
        }
      }
    }
  });
  return out;
}

}  // namespace rawforge
