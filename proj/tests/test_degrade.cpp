#include <doctest.h>

#include <cmath>
#include <numbers>

#include "rawforge/degrade.hpp"
#include "rawforge/metrics.hpp"
#include "rawforge/parallel.hpp"
#include "rawforge/scenes.hpp"
#include "support.hpp"

using namespace rawforge;

namespace {

struct KernelMoments {
  double var_x = 0.0;
  double var_y = 0.0;
  double sum = 0.0;
};

KernelMoments moments(const Kernel& k) {
  KernelMoments m;
  const int half = k.size / 2;
  for (int y = 0; y < k.size; ++y) {
    for (int x = 0; x < k.size; ++x) {
      const double w = k.at(x, y);
      m.sum += w;
      m.var_x += w * (x - half) * (x - half);
      m.var_y += w * (y - half) * (y - half);
    }
  }
  m.var_x /= m.sum;
  m.var_y /= m.sum;
  return m;
}

// Point-sampled axis-aligned Gaussian, computed directly.
KernelMoments gaussian_moments(int size, double sx, double sy) {
  KernelMoments m;
  const int half = size / 2;
  for (int y = -half; y <= half; ++y) {
    for (int x = -half; x <= half; ++x) {
      const double w = std::exp(-0.5 * (x * x / (sx * sx) + y * y / (sy * sy)));
      m.sum += w;
      m.var_x += w * x * x;
      m.var_y += w * y * y;
    }
  }
  m.var_x /= m.sum;
  m.var_y /= m.sum;
  return m;
}

ImagePlane reference_convolve(const ImagePlane& img, const Kernel& k) {
  const int w = img.width(), h = img.height(), half = k.size / 2;
  ImagePlane out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int j = 0; j < k.size; ++j) {
        for (int i = 0; i < k.size; ++i) {
          const int sx = std::clamp(x + i - half, 0, w - 1);
          const int sy = std::clamp(y + j - half, 0, h - 1);
          acc += k.at(i, j) * img.at(sx, sy);
        }
      }
      out.at(x, y) = static_cast<float>(acc);
    }
  }
  return out;
}

constexpr int kLuma[64] = {16, 11, 10, 16, 24,  40,  51,  61,  12, 12, 14, 19, 26,  58,  60,  55,
                           14, 13, 16, 24, 40,  57,  69,  56,  14, 17, 22, 29, 51,  87,  80,  62,
                           18, 22, 37, 56, 68,  109, 103, 77,  24, 35, 55, 64, 81,  104, 113, 92,
                           49, 64, 78, 87, 103, 121, 120, 101, 72, 92, 95, 98, 112, 100, 103, 99};
constexpr int kChroma[64] = {17, 18, 24, 47, 99, 99, 99, 99, 18, 21, 26, 66, 99, 99, 99, 99,
                             24, 26, 56, 99, 99, 99, 99, 99, 47, 66, 99, 99, 99, 99, 99, 99,
                             99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99,
                             99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99};

int libjpeg_scaled(int base, int quality) {
  const int scale = quality < 50 ? 5000 / quality : 200 - 2 * quality;
  return std::clamp((base * scale + 50) / 100, 1, 255);
}

// One 8x8 block through the textbook JPEG quantisation chain.
SrgbImage reference_jpeg_block(const SrgbImage& img, int quality) {
  double ycc[3][8][8];
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 8; ++x) {
      const double r = 255.0 * img.r.at(x, y), g = 255.0 * img.g.at(x, y), b = 255.0 * img.b.at(x, y);
      ycc[0][y][x] = 0.299 * r + 0.587 * g + 0.114 * b - 128.0;
      ycc[1][y][x] = -0.168736 * r - 0.331264 * g + 0.5 * b;
      ycc[2][y][x] = 0.5 * r - 0.418688 * g - 0.081312 * b;
    }
  }
  auto alpha = [](int u) { return u == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0); };
  for (int c = 0; c < 3; ++c) {
    double coef[8][8];
    for (int v = 0; v < 8; ++v) {
      for (int u = 0; u < 8; ++u) {
        double acc = 0.0;
        for (int y = 0; y < 8; ++y) {
          for (int x = 0; x < 8; ++x) {
            acc += ycc[c][y][x] * std::cos((2 * x + 1) * u * std::numbers::pi / 16) *
                   std::cos((2 * y + 1) * v * std::numbers::pi / 16);
          }
        }
        const int q = libjpeg_scaled(c == 0 ? kLuma[v * 8 + u] : kChroma[v * 8 + u], quality);
        coef[v][u] = std::round(alpha(u) * alpha(v) * acc / q) * q;
      }
    }
    for (int y = 0; y < 8; ++y) {
      for (int x = 0; x < 8; ++x) {
        double acc = 0.0;
        for (int v = 0; v < 8; ++v) {
          for (int u = 0; u < 8; ++u) {
            acc += alpha(u) * alpha(v) * coef[v][u] * std::cos((2 * x + 1) * u * std::numbers::pi / 16) *
                   std::cos((2 * y + 1) * v * std::numbers::pi / 16);
          }
        }
        ycc[c][y][x] = acc;
      }
    }
  }
  SrgbImage out(8, 8);
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 8; ++x) {
      const double Y = ycc[0][y][x] + 128.0, cb = ycc[1][y][x], cr = ycc[2][y][x];
      out.r.at(x, y) = static_cast<float>(std::clamp((Y + 1.402 * cr) / 255.0, 0.0, 1.0));
      out.g.at(x, y) = static_cast<float>(std::clamp((Y - 0.344136 * cb - 0.714136 * cr) / 255.0, 0.0, 1.0));
      out.b.at(x, y) = static_cast<float>(std::clamp((Y + 1.772 * cb) / 255.0, 0.0, 1.0));
    }
  }
  return out;
}

SrgbImage constant_srgb(int w, int h, float r, float g, float b) {
  return SrgbImage(ImagePlane(w, h, r), ImagePlane(w, h, g), ImagePlane(w, h, b));
}

}  // namespace

TEST_CASE("gaussian kernels") {
  const Kernel delta = make_kernel({KernelFamily::IsoGaussian, 7, 1e-3});
  CHECK(delta.at(3, 3) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(delta.at(2, 3) < 1e-12);

  const Kernel iso = make_kernel({KernelFamily::IsoGaussian, 7, 1.0});
  double sum = 0.0;
  for (int y = 0; y < 7; ++y) {
    for (int x = 0; x < 7; ++x) {
      sum += iso.at(x, y);
      CHECK(iso.at(x, y) == doctest::Approx(iso.at(6 - y, x)).epsilon(1e-12));
    }
  }
  CHECK(std::abs(sum - 1.0) < 1e-6);

  KernelSpec aniso{KernelFamily::AnisoGaussian, 21};
  aniso.sigma_x = 2.0;
  aniso.sigma_y = 0.5;
  const KernelMoments m = moments(make_kernel(aniso));
  const KernelMoments ref = gaussian_moments(21, 2.0, 0.5);
  CHECK(m.var_x > m.var_y);
  CHECK(m.var_x == doctest::Approx(ref.var_x).epsilon(1e-9));
  CHECK(m.var_y == doctest::Approx(ref.var_y).epsilon(1e-9));
  // Vertical sigma 0.5 is undersampled by integer taps; with sigma_y = 1 the
  // discrete moments match the continuous ratio.
  aniso.sigma_y = 1.0;
  const KernelMoments m1 = moments(make_kernel(aniso));
  CHECK(m1.var_x / m1.var_y == doctest::Approx(4.0).epsilon(0.1));

  aniso.sigma_y = 0.5;
  aniso.theta = std::numbers::pi / 2;
  const KernelMoments rot = moments(make_kernel(aniso));
  CHECK(rot.var_y == doctest::Approx(ref.var_x).epsilon(1e-6));
  CHECK(rot.var_x == doctest::Approx(ref.var_y).epsilon(1e-6));

  CHECK_THROWS_AS(make_kernel({KernelFamily::IsoGaussian, 8, 1.0}), ValidationError);
  CHECK_THROWS_AS(make_kernel({KernelFamily::IsoGaussian, 7, 0.0}), ValidationError);
  CHECK_THROWS_AS(make_kernel({KernelFamily::IsoGaussian, 7, -1.0}), ValidationError);
}

TEST_CASE("sinc kernels") {
  for (double cutoff : {std::numbers::pi / 3, 1.5, std::numbers::pi}) {
    KernelSpec s{KernelFamily::Sinc, 13};
    s.cutoff = cutoff;
    const Kernel k = make_kernel(s);
    double sum = 0.0;
    for (int y = 0; y < 13; ++y) {
      for (int x = 0; x < 13; ++x) {
        sum += k.at(x, y);
        CHECK(k.at(x, y) == doctest::Approx(k.at(12 - x, y)).epsilon(1e-12));
        CHECK(k.at(x, y) == doctest::Approx(k.at(y, x)).epsilon(1e-12));
      }
    }
    CHECK(std::abs(sum - 1.0) < 1e-6);
  }
  // A lower cutoff spreads the kernel.
  KernelSpec narrow{KernelFamily::Sinc, 13}, wide{KernelFamily::Sinc, 13};
  narrow.cutoff = std::numbers::pi / 3;
  wide.cutoff = std::numbers::pi * 0.9;
  CHECK(make_kernel(narrow).at(6, 6) < make_kernel(wide).at(6, 6));
}

TEST_CASE("convolution") {
  const ImagePlane img = testing::random_plane(3, 16, 16);
  CHECK(convolve(img, make_kernel({KernelFamily::IsoGaussian, 7, 1e-6})) == img);
  const ImagePlane flat(16, 16, 0.4f);
  CHECK(testing::max_abs_diff(convolve(flat, make_kernel({KernelFamily::IsoGaussian, 7, 1.5})), flat) < 1e-6);

  ImagePlane ramp(16, 16);
  for (int y = 0; y < 16; ++y) {
    for (int x = 0; x < 16; ++x) ramp.at(x, y) = static_cast<float>(0.05 * x);
  }
  const ImagePlane r = convolve(ramp, make_kernel({KernelFamily::IsoGaussian, 7, 1.0}));
  for (int y = 0; y < 16; ++y) {
    for (int x = 3; x < 13; ++x) CHECK(r.at(x, y) == doctest::Approx(ramp.at(x, y)).epsilon(1e-5));
  }

  KernelSpec a{KernelFamily::AnisoGaussian, 9};
  a.sigma_x = 2.5;
  a.sigma_y = 0.7;
  a.theta = 0.6;
  const Kernel k = make_kernel(a);
  CHECK(testing::max_abs_diff(convolve(img, k), reference_convolve(img, k)) < 1e-6);
  CHECK_THROWS_AS(convolve(ImagePlane(6, 6), make_kernel({KernelFamily::IsoGaussian, 7, 1.0})), ValidationError);
}

TEST_CASE("resizing") {
  CHECK(resized_extent(10, 0.5) == 6);  // round(5) -> nearest even
  CHECK(resized_extent(100, 0.25) == 26);
  CHECK(resized_extent(4, 0.1) == 2);
  CHECK(resized_extent(64, 1.5) == 96);

  const auto img = testing::random_image<SrgbImage>(5, 24, 18);
  for (ResizeFilter f : {ResizeFilter::Bilinear, ResizeFilter::Bicubic, ResizeFilter::Area}) {
    CHECK(testing::max_abs_diff(resize(img, {1.0, f}), img) < 1e-6);
    const SrgbImage flat = constant_srgb(24, 18, 0.3f, 0.6f, 0.9f);
    for (double s : {0.25, 0.5, 0.7, 1.3, 1.5}) {
      const SrgbImage out = resize(flat, {s, f});
      CHECK(out.width() % 2 == 0);
      CHECK(out.height() % 2 == 0);
      CHECK(testing::max_abs_diff(out, constant_srgb(out.width(), out.height(), 0.3f, 0.6f, 0.9f)) < 1e-6);
    }
  }

  ImagePlane checker(8, 8);
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 8; ++x) checker.at(x, y) = static_cast<float>((x + y) % 2);
  }
  const ImagePlane half = resize_to(checker, 4, 4, ResizeFilter::Bilinear);
  CHECK(testing::max_abs_diff(half, ImagePlane(4, 4, 0.5f)) < 1e-6);
  CHECK(testing::max_abs_diff(resize_to(checker, 4, 4, ResizeFilter::Area), ImagePlane(4, 4, 0.5f)) < 1e-6);

  CHECK_THROWS_AS(resize(img, {0.0, ResizeFilter::Bilinear}), ValidationError);
  CHECK_THROWS_AS(resize_to(checker, 3, 4, ResizeFilter::Bilinear), ValidationError);
}

TEST_CASE("quantization tables") {
  CHECK(scaled_quant_table(kLumaQuantTable, 50)[0] == 16);
  for (int q : {1, 10, 25, 50, 75, 90, 100}) {
    const auto luma = scaled_quant_table(kLumaQuantTable, q);
    const auto chroma = scaled_quant_table(kChromaQuantTable, q);
    for (int i = 0; i < 64; ++i) {
      CHECK(luma[i] == libjpeg_scaled(kLuma[i], q));
      CHECK(chroma[i] == libjpeg_scaled(kChroma[i], q));
    }
  }
  for (int v : scaled_quant_table(kLumaQuantTable, 100)) CHECK(v == 1);
  CHECK_THROWS_AS(scaled_quant_table(kLumaQuantTable, 0), ValidationError);
  CHECK_THROWS_AS(scaled_quant_table(kLumaQuantTable, 101), ValidationError);
}

TEST_CASE("jpeg simulation") {
  const auto block = testing::random_image<SrgbImage>(17, 8, 8, 0.1, 0.9);
  for (int q : {20, 75, 95}) {
    CHECK(testing::max_abs_diff(jpeg_simulate(block, q), reference_jpeg_block(block, q)) < 1e-5);
  }

  SrgbImage gradient(40, 24);
  for (int y = 0; y < 24; ++y) {
    for (int x = 0; x < 40; ++x) {
      gradient.r.at(x, y) = static_cast<float>(0.1 + 0.02 * x);
      gradient.g.at(x, y) = static_cast<float>(0.2 + 0.01 * x + 0.01 * y);
      gradient.b.at(x, y) = static_cast<float>(0.8 - 0.02 * y);
    }
  }
  CHECK(psnr(gradient, jpeg_simulate(gradient, 100)).db >= 50.0);

  const SrgbImage natural = textured_scene(3, 64, 64);
  double prev = 1e9;
  for (int q : {90, 70, 50, 30, 10}) {
    const double p = psnr(natural, jpeg_simulate(natural, q)).db;
    CHECK(p <= prev);
    prev = p;
  }

  const SrgbImage flat = constant_srgb(20, 12, 0.3f, 0.5f, 0.7f);
  for (int q : {10, 50, 90, 100}) {
    const int step = std::max(libjpeg_scaled(kLuma[0], q), libjpeg_scaled(kChroma[0], q));
    CHECK(testing::max_abs_diff(jpeg_simulate(flat, q), flat) <= step / 255.0);
  }
  CHECK(testing::max_abs_diff(jpeg_simulate(flat, 100), flat) <= 1.0 / 255.0);
  CHECK_THROWS_AS(jpeg_simulate(flat, 0), ValidationError);
}

TEST_CASE("degradation config") {
  const DegradationConfig std_cfg = DegradationConfig::standard();
  CHECK_NOTHROW(std_cfg.validate());
  const nlohmann::json j = degradation_config_to_json(std_cfg);
  CHECK(degradation_config_to_json(degradation_config_from_json(j)) == j);

  nlohmann::json noisy = j;
  noisy["stages"].push_back({{"type", "gaussian_noise"}});
  CHECK_THROWS_AS(degradation_config_from_json(noisy), ValidationError);
  nlohmann::json poisson = j;
  poisson["stages"].push_back({{"type", "poisson_noise"}});
  CHECK_THROWS_AS(degradation_config_from_json(poisson), ValidationError);
  nlohmann::json empty = j;
  empty["stages"] = nlohmann::json::array();
  CHECK_THROWS_AS(degradation_config_from_json(empty), ValidationError);
}

TEST_CASE("detail degradation") {
  const SrgbImage hq = textured_scene(9, 96, 64);
  const DegradeResult ident = degrade_detail(hq, DegradationConfig::identity(), 1);
  // Delta blur and unit resize leave only the quality-100 JPEG rounding.
  CHECK(testing::max_abs_diff(ident.image, jpeg_simulate(hq, 100)) <= 1e-6);
  double se = 0.0;
  for (int c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < hq.r.size(); ++i) {
      const double d = static_cast<double>(ident.image.plane(c).samples()[i]) - hq.plane(c).samples()[i];
      se += d * d;
    }
  }
  CHECK(std::sqrt(se / (3.0 * hq.r.size())) <= 1.0 / 255.0);

  const DegradationConfig cfg = DegradationConfig::standard();
  set_thread_count(1);
  const DegradeResult a = degrade_detail(hq, cfg, 77);
  set_thread_count(6);
  const DegradeResult b = degrade_detail(hq, cfg, 77);
  set_thread_count(0);
  CHECK(a.image.r == b.image.r);
  CHECK(a.image.g == b.image.g);
  CHECK(a.image.b == b.image.b);
  CHECK(plan_to_json(a.plan) == plan_to_json(b.plan));
  CHECK(plan_to_json(plan_from_json(plan_to_json(a.plan))) == plan_to_json(a.plan));
  CHECK(a.image.width() == hq.width());
  CHECK(a.image.height() == hq.height());

  // Every sampled kernel is normalised; outputs stay in range.
  double mean_psnr = 0.0;
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    const SrgbImage src = textured_scene(seed, 64, 64);
    const DegradeResult r = degrade_detail(src, cfg, seed);
    for (const auto& stage : r.plan.stages) {
      if (const auto* k = std::get_if<KernelSpec>(&stage)) {
        const Kernel kern = make_kernel(*k);
        double s = 0.0;
        for (double t : kern.taps) s += t;
        CHECK(std::abs(s - 1.0) < 1e-6);
        CHECK(k->size % 2 == 1);
      }
    }
    for (int c = 0; c < 3; ++c) {
      for (float v : r.image.plane(c).samples()) {
        CHECK(v >= 0.0f);
        CHECK(v <= 1.0f);
      }
    }
    mean_psnr += psnr(src, r.image).db;
  }
  CHECK(mean_psnr / 12 < 35.0);

  DegradationConfig sr = cfg;
  sr.final_scale = 0.5;
  const DegradeResult small = degrade_detail(hq, sr, 3);
  CHECK(small.image.width() == 48);
  CHECK(small.image.height() == 32);
}
