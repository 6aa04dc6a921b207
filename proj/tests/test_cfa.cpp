#include <doctest.h>

#include <cmath>

#include "rawforge/cfa.hpp"
#include "rawforge/metrics.hpp"
#include "rawforge/scenes.hpp"
#include "support.hpp"

using namespace rawforge;

namespace {

const BayerPattern kPatterns[] = {BayerPattern::RGGB, BayerPattern::BGGR, BayerPattern::GRBG, BayerPattern::GBRG};

LinearImage constant_image(int w, int h, float r, float g, float b) {
  return LinearImage(ImagePlane(w, h, r), ImagePlane(w, h, g), ImagePlane(w, h, b));
}

// Straightforward bilinear reference: mean of the in-bounds same-colour 3x3 neighbours.
LinearImage reference_bilinear(const RawImage& raw) {
  const int w = raw.plane.width(), h = raw.plane.height();
  LinearImage out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        if (cfa_color(raw.pattern(), x, y) == c) {
          out.plane(c).at(x, y) = raw.plane.at(x, y);
          continue;
        }
        double sum = 0.0;
        int n = 0;
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int xx = x + dx, yy = y + dy;
            if (xx < 0 || yy < 0 || xx >= w || yy >= h) continue;
            if (cfa_color(raw.pattern(), xx, yy) != c) continue;
            sum += raw.plane.at(xx, yy);
            ++n;
          }
        }
        out.plane(c).at(x, y) = static_cast<float>(sum / n);
      }
    }
  }
  return out;
}

// Malvar-He-Cutler kernels written out from the published table (x8).
constexpr double kGAtRB[5][5] = {
    {0, 0, -1, 0, 0}, {0, 0, 2, 0, 0}, {-1, 2, 4, 2, -1}, {0, 0, 2, 0, 0}, {0, 0, -1, 0, 0}};
constexpr double kRowNbr[5][5] = {
    {0, 0, 0.5, 0, 0}, {0, -1, 0, -1, 0}, {-1, 4, 5, 4, -1}, {0, -1, 0, -1, 0}, {0, 0, 0.5, 0, 0}};
constexpr double kColNbr[5][5] = {
    {0, 0, -1, 0, 0}, {0, -1, 4, -1, 0}, {0.5, 0, 5, 0, 0.5}, {0, -1, 4, -1, 0}, {0, 0, -1, 0, 0}};
constexpr double kDiag[5][5] = {
    {0, 0, -1.5, 0, 0}, {0, 2, 0, 2, 0}, {-1.5, 0, 6, 0, -1.5}, {0, 2, 0, 2, 0}, {0, 0, -1.5, 0, 0}};

int reflect101(int i, int n) {
  if (i < 0) return -i;
  if (i >= n) return 2 * n - 2 - i;
  return i;
}

LinearImage reference_malvar(const RawImage& raw) {
  const int w = raw.plane.width(), h = raw.plane.height();
  const BayerPattern p = raw.pattern();
  LinearImage out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int own = cfa_color(p, x, y);
      for (int c = 0; c < 3; ++c) {
        if (c == own) {
          out.plane(c).at(x, y) = raw.plane.at(x, y);
          continue;
        }
        const double(*k)[5] = nullptr;
        if (c == 1) {
          k = kGAtRB;
        } else if (own == 1) {
          k = cfa_color(p, x + 1, y) == c ? kRowNbr : kColNbr;
        } else {
          k = kDiag;
        }
        double acc = 0.0;
        for (int j = -2; j <= 2; ++j) {
          for (int i = -2; i <= 2; ++i) {
            acc += k[j + 2][i + 2] * raw.plane.at(reflect101(x + i, w), reflect101(y + j, h));
          }
        }
        out.plane(c).at(x, y) = static_cast<float>(std::clamp(acc / 8.0, 0.0, 1.0));
      }
    }
  }
  return out;
}

}  // namespace

TEST_CASE("pattern definitions") {
  const LinearImage x = constant_image(2, 2, 0.1f, 0.2f, 0.3f);
  const RawImage rggb = mosaic(x, BayerPattern::RGGB);
  CHECK(rggb.plane.at(0, 0) == 0.1f);
  CHECK(rggb.plane.at(1, 0) == 0.2f);
  CHECK(rggb.plane.at(0, 1) == 0.2f);
  CHECK(rggb.plane.at(1, 1) == 0.3f);
  CHECK(rggb.pattern() == BayerPattern::RGGB);
  const RawImage bggr = mosaic(x, BayerPattern::BGGR);
  CHECK(bggr.plane.at(0, 0) == 0.3f);
  CHECK(bggr.plane.at(1, 0) == 0.2f);
  CHECK(bggr.plane.at(0, 1) == 0.2f);
  CHECK(bggr.plane.at(1, 1) == 0.1f);
  const RawImage grbg = mosaic(x, BayerPattern::GRBG);
  CHECK(grbg.plane.at(0, 0) == 0.2f);
  CHECK(grbg.plane.at(1, 0) == 0.1f);
  CHECK(grbg.plane.at(0, 1) == 0.3f);
  const RawImage gbrg = mosaic(x, BayerPattern::GBRG);
  CHECK(gbrg.plane.at(1, 0) == 0.3f);
  CHECK(gbrg.plane.at(0, 1) == 0.1f);
  for (BayerPattern p : kPatterns) {
    int counts[3] = {0, 0, 0};
    for (int q = 0; q < 4; ++q) ++counts[cfa_color(p, q % 2, q / 2)];
    CHECK(counts[0] == 1);
    CHECK(counts[1] == 2);
    CHECK(counts[2] == 1);
  }
  CHECK_THROWS_AS(mosaic(constant_image(3, 2, 0, 0, 0), BayerPattern::RGGB), ValidationError);
}

TEST_CASE("pattern_at_offset") {
  CHECK(pattern_at_offset(BayerPattern::RGGB, 0, 0) == BayerPattern::RGGB);
  CHECK(pattern_at_offset(BayerPattern::RGGB, 1, 0) == BayerPattern::GRBG);
  CHECK(pattern_at_offset(BayerPattern::RGGB, 1, 1) == BayerPattern::BGGR);
  CHECK(pattern_at_offset(BayerPattern::RGGB, 0, 1) == BayerPattern::GBRG);
  for (BayerPattern p : kPatterns) {
    CHECK(pattern_at_offset(p, 2, -4) == p);
    for (int dy = 0; dy < 2; ++dy) {
      for (int dx = 0; dx < 2; ++dx) {
        const BayerPattern s = pattern_at_offset(p, dx, dy);
        for (int y = 0; y < 4; ++y) {
          for (int x = 0; x < 4; ++x) CHECK(cfa_color(s, x, y) == cfa_color(p, x + dx, y + dy));
        }
      }
    }
  }
}

TEST_CASE("mosaic preserves the selected samples") {
  const auto x = testing::random_image<LinearImage>(21, 10, 8);
  for (BayerPattern p : kPatterns) {
    const RawImage raw = mosaic(x, p);
    double sum_raw = 0.0, sum_sel = 0.0;
    for (int yy = 0; yy < 8; ++yy) {
      for (int xx = 0; xx < 10; ++xx) {
        sum_raw += raw.plane.at(xx, yy);
        sum_sel += x.plane(cfa_color(p, xx, yy)).at(xx, yy);
      }
    }
    CHECK(sum_raw == sum_sel);
  }
}

TEST_CASE("bilinear demosaic") {
  for (BayerPattern p : kPatterns) {
    const LinearImage flat = constant_image(8, 6, 0.25f, 0.5f, 0.75f);
    const RawImage raw = mosaic(flat, p);
    const LinearImage rec = demosaic_bilinear(raw);
    CHECK(testing::max_abs_diff(rec, flat) == 0.0);
    CHECK(mosaic(rec, p).plane == raw.plane);

    // Horizontal ramp: exact away from the border.
    LinearImage ramp(16, 8);
    for (int y = 0; y < 8; ++y) {
      for (int x = 0; x < 16; ++x) {
        for (int c = 0; c < 3; ++c) ramp.plane(c).at(x, y) = static_cast<float>(0.05 + 0.05 * x + 0.01 * c);
      }
    }
    const LinearImage r2 = demosaic_bilinear(mosaic(ramp, p));
    for (int y = 1; y < 7; ++y) {
      for (int x = 1; x < 15; ++x) {
        for (int c = 0; c < 3; ++c) CHECK(r2.plane(c).at(x, y) == doctest::Approx(ramp.plane(c).at(x, y)).epsilon(1e-6));
      }
    }

    const auto noise = testing::random_image<LinearImage>(31, 12, 10);
    const RawImage nraw = mosaic(noise, p);
    CHECK(testing::max_abs_diff(demosaic_bilinear(nraw), reference_bilinear(nraw)) < 1e-6);
  }
}

TEST_CASE("malvar demosaic") {
  for (BayerPattern p : kPatterns) {
    const LinearImage flat = constant_image(8, 8, 0.2f, 0.6f, 0.4f);
    const RawImage raw = mosaic(flat, p);
    CHECK(testing::max_abs_diff(demosaic_malvar(raw), flat) < 1e-6);

    const LinearImage gray = constant_image(8, 8, 0.37f, 0.37f, 0.37f);
    CHECK(testing::max_abs_diff(demosaic_malvar(mosaic(gray, p)), gray) < 1e-6);
    // Gray ramps (linear in x and y): exact in the interior.
    LinearImage ramp(8, 8);
    for (int y = 0; y < 8; ++y) {
      for (int x = 0; x < 8; ++x) {
        for (int c = 0; c < 3; ++c) ramp.plane(c).at(x, y) = static_cast<float>(0.1 + 0.06 * x + 0.04 * y);
      }
    }
    const LinearImage rr = demosaic_malvar(mosaic(ramp, p));
    for (int y = 2; y < 6; ++y) {
      for (int x = 2; x < 6; ++x) {
        for (int c = 0; c < 3; ++c) CHECK(rr.plane(c).at(x, y) == doctest::Approx(ramp.plane(c).at(x, y)).epsilon(1e-5));
      }
    }

    const auto noise = testing::random_image<LinearImage>(41, 12, 10);
    const RawImage nraw = mosaic(noise, p);
    const LinearImage got = demosaic_malvar(nraw);
    CHECK(testing::max_abs_diff(got, reference_malvar(nraw)) < 1e-6);
    for (int y = 0; y < 10; ++y) {
      for (int x = 0; x < 12; ++x) CHECK(got.plane(cfa_color(p, x, y)).at(x, y) == nraw.plane.at(x, y));
    }
  }
  CHECK_THROWS_AS(demosaic_malvar(mosaic(constant_image(4, 8, 0, 0, 0), BayerPattern::RGGB)), ValidationError);
}

TEST_CASE("pattern equivariance") {
  const LinearImage big = band_limited_scene(5, 34, 34, 0.2);
  const RawImage base = mosaic(big, BayerPattern::RGGB);
  const LinearImage ref_b = demosaic_bilinear(base);
  const LinearImage ref_m = demosaic_malvar(base);
  for (int dy = 0; dy < 2; ++dy) {
    for (int dx = 0; dx < 2; ++dx) {
      const BayerPattern p = pattern_at_offset(BayerPattern::RGGB, dx, dy);
      const LinearImage shifted = crop(big, dx, dy, 32, 32);
      const LinearImage gb = demosaic_bilinear(mosaic(shifted, p));
      const LinearImage gm = demosaic_malvar(mosaic(shifted, p));
      for (int y = 3; y < 29; ++y) {
        for (int x = 3; x < 29; ++x) {
          for (int c = 0; c < 3; ++c) {
            CHECK(gb.plane(c).at(x, y) == doctest::Approx(ref_b.plane(c).at(x + dx, y + dy)).epsilon(1e-6));
            CHECK(gm.plane(c).at(x, y) == doctest::Approx(ref_m.plane(c).at(x + dx, y + dy)).epsilon(1e-6));
          }
        }
      }
    }
  }
}

TEST_CASE("demosaic quality on band-limited scenes") {
  double bil = 0.0, mal = 0.0;
  for (int i = 0; i < 8; ++i) {
    const LinearImage scene = band_limited_scene(100 + i, 96, 96);
    const RawImage raw = mosaic(scene, kPatterns[i % 4]);
    const LinearImage b = demosaic_bilinear(raw);
    const LinearImage m = demosaic_malvar(raw);
    CHECK(psnr(scene, b).db == doctest::Approx(testing::reference_psnr(scene, b)).epsilon(1e-9));
    bil += psnr(scene, b).db;
    mal += psnr(scene, m).db;
    for (int c = 0; c < 3; ++c) {
      for (float v : m.plane(c).samples()) {
        CHECK(v >= 0.0f);
        CHECK(v <= 1.0f);
      }
    }
  }
  CHECK(bil / 8 >= 30.0);
  CHECK(mal >= bil);
}

TEST_CASE("prefilter") {
  const LinearImage flat = constant_image(8, 8, 0.3f, 0.6f, 0.9f);
  for (BayerPattern p : kPatterns) {
    const RawImage raw = mosaic(flat, p);
    CHECK(testing::max_abs_diff(cfa_prefilter(raw).plane, raw.plane) < 1e-6);
    CHECK(testing::max_abs_diff(demosaic_malvar(raw, {true}), flat) < 1e-6);
  }
  // A single bright site spreads only onto same-colour neighbours.
  ImagePlane plane(12, 12, 0.0f);
  plane.at(6, 6) = 1.0f;
  const RawImage spike(plane, CaptureMetadata{});
  const RawImage f = cfa_prefilter(spike);
  const double s = 0.8;
  const double w0 = 1.0, w1 = std::exp(-1 / (2 * s * s)), w2 = std::exp(-2 / (2 * s * s));
  const double total = w0 + 4 * w1 + 4 * w2;
  CHECK(f.plane.at(6, 6) == doctest::Approx(w0 / total).epsilon(1e-6));
  CHECK(f.plane.at(8, 6) == doctest::Approx(w1 / total).epsilon(1e-6));
  CHECK(f.plane.at(8, 8) == doctest::Approx(w2 / total).epsilon(1e-6));
  CHECK(f.plane.at(7, 6) == 0.0f);
  CHECK(f.plane.at(7, 7) == 0.0f);
}
