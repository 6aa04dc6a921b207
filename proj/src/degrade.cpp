#include "rawforge/degrade.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "rawforge/parallel.hpp"

namespace rawforge {

namespace {

using nlohmann::json;

constexpr double kPi = std::numbers::pi;

struct Tap {
  int index;
  double weight;
};

double catmull_rom(double t) {
  constexpr double a = -0.5;
  t = std::abs(t);
  if (t <= 1.0) return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
  if (t < 2.0) return ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a;
  return 0.0;
}

std::vector<std::vector<Tap>> resample_taps(int in, int out, ResizeFilter filter) {
  std::vector<std::vector<Tap>> taps(static_cast<std::size_t>(out));
  const double ratio = static_cast<double>(in) / out;
  auto clampi = [in](int i) { return std::clamp(i, 0, in - 1); };
  for (int d = 0; d < out; ++d) {
    auto& t = taps[d];
    if (filter == ResizeFilter::Area) {
      const double lo = d * ratio;
      const double hi = (d + 1) * ratio;
      for (int i = static_cast<int>(std::floor(lo)); i < static_cast<int>(std::ceil(hi)); ++i) {
        const double overlap = std::min(hi, i + 1.0) - std::max(lo, static_cast<double>(i));
        if (overlap > 0.0) t.push_back({clampi(i), overlap / ratio});
      }
      continue;
    }
    const double src = (d + 0.5) * ratio - 0.5;
    const int i0 = static_cast<int>(std::floor(src));
    const double f = src - i0;
    if (filter == ResizeFilter::Bilinear) {
      t.push_back({clampi(i0), 1.0 - f});
      t.push_back({clampi(i0 + 1), f});
    } else {
      for (int k = -1; k <= 2; ++k) t.push_back({clampi(i0 + k), catmull_rom(f - k)});
    }
    double sum = 0.0;
    for (const auto& tap : t) sum += tap.weight;
    for (auto& tap : t) tap.weight /= sum;
  }
  return taps;
}

// 8x8 orthonormal DCT-II basis: kDct[u][x].
struct DctBasis {
  double c[8][8];
  DctBasis() {
    for (int u = 0; u < 8; ++u) {
      const double a = u == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
      for (int x = 0; x < 8; ++x) c[u][x] = a * std::cos((2 * x + 1) * u * kPi / 16.0);
    }
  }
};

const DctBasis& dct_basis() {
  static const DctBasis basis;
  return basis;
}

void dct8x8(const double in[64], double out[64]) {
  const auto& c = dct_basis().c;
  double tmp[64];
  for (int y = 0; y < 8; ++y) {
    for (int u = 0; u < 8; ++u) {
      double s = 0.0;
      for (int x = 0; x < 8; ++x) s += c[u][x] * in[y * 8 + x];
      tmp[y * 8 + u] = s;
    }
  }
  for (int u = 0; u < 8; ++u) {
    for (int v = 0; v < 8; ++v) {
      double s = 0.0;
      for (int y = 0; y < 8; ++y) s += c[v][y] * tmp[y * 8 + u];
      out[v * 8 + u] = s;
    }
  }
}

void idct8x8(const double in[64], double out[64]) {
  const auto& c = dct_basis().c;
  double tmp[64];
  for (int v = 0; v < 8; ++v) {
    for (int x = 0; x < 8; ++x) {
      double s = 0.0;
      for (int u = 0; u < 8; ++u) s += c[u][x] * in[v * 8 + u];
      tmp[v * 8 + x] = s;
    }
  }
  for (int x = 0; x < 8; ++x) {
    for (int y = 0; y < 8; ++y) {
      double s = 0.0;
      for (int v = 0; v < 8; ++v) s += c[v][y] * tmp[v * 8 + x];
      out[y * 8 + x] = s;
    }
  }
}

double sample_range(Rng& rng, const Range& r) {
  return r.lo == r.hi ? r.lo : rng.uniform(r.lo, r.hi);
}

int largest_odd_below(int n) {
  int k = n - 1;
  if (k % 2 == 0) --k;
  return k;
}

KernelFamily parse_family(const std::string& s) {
  if (s == "iso_gaussian") return KernelFamily::IsoGaussian;
  if (s == "aniso_gaussian") return KernelFamily::AnisoGaussian;
  if (s == "sinc") return KernelFamily::Sinc;
  throw ValidationError("unknown kernel family '" + s + "'");
}

ResizeFilter parse_filter(const std::string& s) {
  if (s == "bilinear") return ResizeFilter::Bilinear;
  if (s == "bicubic") return ResizeFilter::Bicubic;
  if (s == "area") return ResizeFilter::Area;
  throw ValidationError("unknown resize filter '" + s + "'");
}

Range parse_range(const json& j) {
  if (j.is_number()) return {j.get<double>(), j.get<double>()};
  const auto v = j.get<std::vector<double>>();
  if (v.size() != 2 || v[0] > v[1]) throw ValidationError("range must be [lo, hi] with lo <= hi");
  return {v[0], v[1]};
}

json range_json(const Range& r) { return json::array({r.lo, r.hi}); }

StageTemplate parse_stage(const json& j) {
  const std::string type = j.at("type").get<std::string>();
  if (type.find("noise") != std::string::npos) {
    throw ValidationError(
        "noise stages are not allowed in detail degradation; sensor noise is added in the RAW "
        "domain");
  }
  StageTemplate t;
  t.probability = j.value("probability", 1.0);
  if (type == "blur") {
    t.kind = StageTemplate::Kind::Blur;
    if (j.contains("families")) {
      t.families.clear();
      for (const auto& [name, weight] : j.at("families").items()) {
        t.families.emplace_back(parse_family(name), weight.get<double>());
      }
    }
    if (j.contains("kernel_size")) t.kernel_size = parse_range(j.at("kernel_size"));
    if (j.contains("sigma")) t.sigma = parse_range(j.at("sigma"));
    if (j.contains("sinc_cutoff")) t.sinc_cutoff = parse_range(j.at("sinc_cutoff"));
  } else if (type == "resize") {
    t.kind = StageTemplate::Kind::Resize;
    if (j.contains("scale")) t.scale = parse_range(j.at("scale"));
    if (j.contains("filters")) {
      t.filters.clear();
      for (const auto& f : j.at("filters")) t.filters.push_back(parse_filter(f.get<std::string>()));
    }
  } else if (type == "jpeg" || type == "compress") {
    t.kind = StageTemplate::Kind::Jpeg;
    if (j.contains("quality")) t.quality = parse_range(j.at("quality"));
  } else {
    throw ValidationError("unknown degradation stage '" + type + "'");
  }
  return t;
}

json stage_json(const StageTemplate& t) {
  json j;
  j["probability"] = t.probability;
  switch (t.kind) {
    case StageTemplate::Kind::Blur: {
      j["type"] = "blur";
      json fam = json::object();
      for (const auto& [f, w] : t.families) fam[family_name(f)] = w;
      j["families"] = fam;
      j["kernel_size"] = range_json(t.kernel_size);
      j["sigma"] = range_json(t.sigma);
      j["sinc_cutoff"] = range_json(t.sinc_cutoff);
      break;
    }
    case StageTemplate::Kind::Resize: {
      j["type"] = "resize";
      j["scale"] = range_json(t.scale);
      json f = json::array();
      for (auto filter : t.filters) f.push_back(filter_name(filter));
      j["filters"] = f;
      break;
    }
    case StageTemplate::Kind::Jpeg:
      j["type"] = "jpeg";
      j["quality"] = range_json(t.quality);
      break;
  }
  return j;
}

void validate_stage(const StageTemplate& t) {
  if (!(t.probability >= 0.0 && t.probability <= 1.0)) {
    throw ValidationError("stage probability must be in [0,1]");
  }
  switch (t.kind) {
    case StageTemplate::Kind::Blur: {
      double total = 0.0;
      for (const auto& [f, w] : t.families) {
        if (w < 0.0) throw ValidationError("kernel family weight must be >= 0");
        total += w;
      }
      if (!(total > 0.0)) throw ValidationError("blur stage needs a kernel family");
      if (t.kernel_size.lo < 1 || t.kernel_size.hi > 21) {
        throw ValidationError("kernel size range must lie in [1, 21]");
      }
      if (!(t.sigma.lo > 0.0)) throw ValidationError("blur sigma must be > 0");
      if (!(t.sinc_cutoff.lo > 0.0)) throw ValidationError("sinc cutoff must be > 0");
      break;
    }
    case StageTemplate::Kind::Resize:
      if (t.scale.lo < 0.25 || t.scale.hi > 1.5) {
        throw ValidationError("resize scale range must lie in [0.25, 1.5]");
      }
      if (t.filters.empty()) throw ValidationError("resize stage needs a filter");
      break;
    case StageTemplate::Kind::Jpeg:
      if (t.quality.lo < 1 || t.quality.hi > 100) {
        throw ValidationError("JPEG quality range must lie in [1, 100]");
      }
      break;
  }
}

KernelSpec resolve_blur(const StageTemplate& t, Rng& rng, int max_size) {
  double total = 0.0;
  for (const auto& [f, w] : t.families) total += w;
  double pick = rng.uniform() * total;
  KernelFamily family = t.families.back().first;
  for (const auto& [f, w] : t.families) {
    if (pick < w) {
      family = f;
      break;
    }
    pick -= w;
  }
  const int lo = (static_cast<int>(t.kernel_size.lo) - 1) / 2;
  const int hi = (static_cast<int>(t.kernel_size.hi) - 1) / 2;
  KernelSpec k;
  k.family = family;
  k.size = std::min(2 * rng.uniform_int(lo, std::max(lo, hi)) + 1, max_size);
  switch (family) {
    case KernelFamily::IsoGaussian: k.sigma = sample_range(rng, t.sigma); break;
    case KernelFamily::AnisoGaussian:
      k.sigma_x = sample_range(rng, t.sigma);
      k.sigma_y = sample_range(rng, t.sigma);
      k.theta = rng.uniform(0.0, kPi);
      break;
    case KernelFamily::Sinc: k.cutoff = sample_range(rng, t.sinc_cutoff); break;
  }
  return k;
}

void resolve_list(const std::vector<StageTemplate>& list, Rng& rng, int& w, int& h,
                  std::vector<DegradationStage>& out) {
  constexpr int kMinExtent = 8;
  for (const auto& t : list) {
    // Draw the gate first so parameter draws stay aligned whether or not it fires.
    const bool active = rng.bernoulli(t.probability);
    switch (t.kind) {
      case StageTemplate::Kind::Blur: {
        const KernelSpec k = resolve_blur(t, rng, largest_odd_below(std::min(w, h)));
        if (active && k.size >= 3) out.emplace_back(k);
        break;
      }
      case StageTemplate::Kind::Resize: {
        ResizeSpec r;
        r.scale = sample_range(rng, t.scale);
        r.filter = t.filters[static_cast<std::size_t>(
            rng.uniform_int(0, static_cast<int>(t.filters.size()) - 1))];
        r.scale = std::max(r.scale, static_cast<double>(kMinExtent) / std::min(w, h));
        if (active) {
          out.emplace_back(r);
          w = resized_extent(w, r.scale);
          h = resized_extent(h, r.scale);
        }
        break;
      }
      case StageTemplate::Kind::Jpeg: {
        const int q = static_cast<int>(std::lround(sample_range(rng, t.quality)));
        if (active) out.emplace_back(JpegSpec{q});
        break;
      }
    }
  }
}

}  // namespace

const std::array<int, 64> kLumaQuantTable = {
    16, 11, 10, 16, 24,  40,  51,  61,  12, 12, 14, 19, 26,  58,  60,  55,
    14, 13, 16, 24, 40,  57,  69,  56,  14, 17, 22, 29, 51,  87,  80,  62,
    18, 22, 37, 56, 68,  109, 103, 77,  24, 35, 55, 64, 81,  104, 113, 92,
    49, 64, 78, 87, 103, 121, 120, 101, 72, 92, 95, 98, 112, 100, 103, 99};

const std::array<int, 64> kChromaQuantTable = {
    17, 18, 24, 47, 99, 99, 99, 99, 18, 21, 26, 66, 99, 99, 99, 99, 24, 26, 56, 99, 99, 99,
    99, 99, 47, 66, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99};

std::string family_name(KernelFamily f) {
  switch (f) {
    case KernelFamily::IsoGaussian: return "iso_gaussian";
    case KernelFamily::AnisoGaussian: return "aniso_gaussian";
    case KernelFamily::Sinc: return "sinc";
  }
  return "iso_gaussian";
}

std::string filter_name(ResizeFilter f) {
  switch (f) {
    case ResizeFilter::Bilinear: return "bilinear";
    case ResizeFilter::Bicubic: return "bicubic";
    case ResizeFilter::Area: return "area";
  }
  return "bilinear";
}

Kernel make_kernel(const KernelSpec& spec) {
  if (spec.size < 1 || spec.size % 2 == 0) throw ValidationError("kernel size must be odd");
  const int n = spec.size;
  const int half = n / 2;
  Kernel k;
  k.size = n;
  k.taps.assign(static_cast<std::size_t>(n) * n, 0.0);
  switch (spec.family) {
    case KernelFamily::IsoGaussian: {
      if (!(spec.sigma > 0.0)) throw ValidationError("kernel sigma must be > 0");
      const double s2 = 2.0 * spec.sigma * spec.sigma;
      for (int y = -half; y <= half; ++y) {
        for (int x = -half; x <= half; ++x) {
          k.taps[(y + half) * n + x + half] = std::exp(-(x * x + y * y) / s2);
        }
      }
      break;
    }
    case KernelFamily::AnisoGaussian: {
      if (!(spec.sigma_x > 0.0) || !(spec.sigma_y > 0.0)) {
        throw ValidationError("kernel sigma must be > 0");
      }
      // Inverse covariance of R diag(sx^2, sy^2) R^T.
      const double c = std::cos(spec.theta);
      const double s = std::sin(spec.theta);
      const double ix = 1.0 / (spec.sigma_x * spec.sigma_x);
      const double iy = 1.0 / (spec.sigma_y * spec.sigma_y);
      const double a = c * c * ix + s * s * iy;
      const double b = c * s * (ix - iy);
      const double d = s * s * ix + c * c * iy;
      for (int y = -half; y <= half; ++y) {
        for (int x = -half; x <= half; ++x) {
          k.taps[(y + half) * n + x + half] = std::exp(-0.5 * (a * x * x + 2 * b * x * y + d * y * y));
        }
      }
      break;
    }
    case KernelFamily::Sinc: {
      if (!(spec.cutoff > 0.0)) throw ValidationError("sinc cutoff must be > 0");
      const double radius = half + 1.0;
      for (int y = -half; y <= half; ++y) {
        for (int x = -half; x <= half; ++x) {
          const double r = std::hypot(x, y);
          const double jinc = r == 0.0 ? spec.cutoff * spec.cutoff / (4.0 * kPi)
                                       : spec.cutoff * std::cyl_bessel_j(1.0, spec.cutoff * r) /
                                             (2.0 * kPi * r);
          const double window = r < radius ? 0.5 * (1.0 + std::cos(kPi * r / radius)) : 0.0;
          k.taps[(y + half) * n + x + half] = jinc * window;
        }
      }
      break;
    }
  }
  double sum = 0.0;
  for (double t : k.taps) sum += t;
  if (!(std::abs(sum) > 1e-12)) throw ValidationError("kernel taps sum to zero");
  for (double& t : k.taps) t /= sum;
  return k;
}

ImagePlane convolve(const ImagePlane& img, const Kernel& k) {
  if (k.size > 1 && (k.size >= img.width() || k.size >= img.height())) {
    throw ValidationError("kernel must be smaller than the image");
  }
  const int w = img.width();
  const int h = img.height();
  const int half = k.size / 2;
  ImagePlane out(w, h);
  parallel_for(static_cast<std::size_t>(h), [&](std::size_t y0, std::size_t y1) {
    for (int y = static_cast<int>(y0); y < static_cast<int>(y1); ++y) {
      for (int x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int j = -half; j <= half; ++j) {
          const int yy = std::clamp(y - j, 0, h - 1);
          const float* row = img.row(yy);
          for (int i = -half; i <= half; ++i) {
            acc += k.at(i + half, j + half) * row[std::clamp(x - i, 0, w - 1)];
          }
        }
        out.at(x, y) = static_cast<float>(acc);
      }
    }
  });
  return out;
}

int resized_extent(int n, double scale) {
  const int even = 2 * static_cast<int>(std::lround(n * scale / 2.0));
  return std::max(2, even);
}

ImagePlane resize_to(const ImagePlane& img, int out_w, int out_h, ResizeFilter filter) {
  if (out_w < 2 || out_h < 2 || out_w % 2 != 0 || out_h % 2 != 0) {
    throw ValidationError("resize output dimensions must be even and >= 2");
  }
  if (out_w == img.width() && out_h == img.height()) return img;
  const auto tx = resample_taps(img.width(), out_w, filter);
  const auto ty = resample_taps(img.height(), out_h, filter);
  std::vector<double> horiz(static_cast<std::size_t>(out_w) * img.height());
  for (int y = 0; y < img.height(); ++y) {
    const float* row = img.row(y);
    for (int x = 0; x < out_w; ++x) {
      double acc = 0.0;
      for (const Tap& t : tx[x]) acc += t.weight * row[t.index];
      horiz[static_cast<std::size_t>(y) * out_w + x] = acc;
    }
  }
  ImagePlane out(out_w, out_h);
  for (int y = 0; y < out_h; ++y) {
    for (int x = 0; x < out_w; ++x) {
      double acc = 0.0;
      for (const Tap& t : ty[y]) acc += t.weight * horiz[static_cast<std::size_t>(t.index) * out_w + x];
      out.at(x, y) = static_cast<float>(acc);
    }
  }
  return out;
}

std::array<int, 64> scaled_quant_table(const std::array<int, 64>& base, int quality) {
  if (quality < 1 || quality > 100) throw ValidationError("JPEG quality must be in [1, 100]");
  const int scale = quality < 50 ? 5000 / quality : 200 - 2 * quality;
  std::array<int, 64> out{};
  for (int i = 0; i < 64; ++i) out[i] = std::clamp((base[i] * scale + 50) / 100, 1, 255);
  return out;
}

SrgbImage jpeg_simulate(const SrgbImage& img, int quality) {
  const auto luma_q = scaled_quant_table(kLumaQuantTable, quality);
  const auto chroma_q = scaled_quant_table(kChromaQuantTable, quality);
  const int w = img.width();
  const int h = img.height();
  const int pw = (w + 7) / 8 * 8;
  const int ph = (h + 7) / 8 * 8;
  // Level-shifted YCbCr planes on the padded grid, edge replicated.
  std::vector<double> ycc[3];
  for (auto& p : ycc) p.assign(static_cast<std::size_t>(pw) * ph, 0.0);
  for (int y = 0; y < ph; ++y) {
    const int sy = std::min(y, h - 1);
    for (int x = 0; x < pw; ++x) {
      const int sx = std::min(x, w - 1);
      const double r = 255.0 * img.r.at(sx, sy);
      const double g = 255.0 * img.g.at(sx, sy);
      const double b = 255.0 * img.b.at(sx, sy);
      const std::size_t i = static_cast<std::size_t>(y) * pw + x;
      ycc[0][i] = 0.299 * r + 0.587 * g + 0.114 * b - 128.0;
      ycc[1][i] = -0.168736 * r - 0.331264 * g + 0.5 * b;
      ycc[2][i] = 0.5 * r - 0.418688 * g - 0.081312 * b;
    }
  }
  const int blocks_x = pw / 8;
  const int blocks = blocks_x * (ph / 8);
  parallel_for(static_cast<std::size_t>(blocks), [&](std::size_t b0, std::size_t b1) {
    double block[64], coef[64];
    for (std::size_t bi = b0; bi < b1; ++bi) {
      const int bx = static_cast<int>(bi) % blocks_x * 8;
      const int by = static_cast<int>(bi) / blocks_x * 8;
      for (int c = 0; c < 3; ++c) {
        const auto& q = c == 0 ? luma_q : chroma_q;
        auto& plane = ycc[c];
        for (int y = 0; y < 8; ++y) {
          for (int x = 0; x < 8; ++x) block[y * 8 + x] = plane[(by + y) * pw + bx + x];
        }
        dct8x8(block, coef);
        for (int k = 0; k < 64; ++k) coef[k] = std::round(coef[k] / q[k]) * q[k];
        idct8x8(coef, block);
        for (int y = 0; y < 8; ++y) {
          for (int x = 0; x < 8; ++x) plane[(by + y) * pw + bx + x] = block[y * 8 + x];
        }
      }
    }
  });
  SrgbImage out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * pw + x;
      const double Y = ycc[0][i] + 128.0;
      const double cb = ycc[1][i];
      const double cr = ycc[2][i];
      const double r = Y + 1.402 * cr;
      const double g = Y - 0.344136 * cb - 0.714136 * cr;
      const double b = Y + 1.772 * cb;
      out.r.at(x, y) = static_cast<float>(std::clamp(r / 255.0, 0.0, 1.0));
      out.g.at(x, y) = static_cast<float>(std::clamp(g / 255.0, 0.0, 1.0));
      out.b.at(x, y) = static_cast<float>(std::clamp(b / 255.0, 0.0, 1.0));
    }
  }
  return out;
}

void DegradationConfig::validate() const {
  if (stages.empty()) throw ValidationError("degradation config needs at least one stage");
  for (const auto& s : stages) validate_stage(s);
  if (second_stages) {
    if (second_stages->empty()) throw ValidationError("second_stages must not be empty");
    for (const auto& s : *second_stages) validate_stage(s);
  }
  if (!(final_scale >= 0.25 && final_scale <= 1.5)) {
    throw ValidationError("final_scale must lie in [0.25, 1.5]");
  }
}

DegradationConfig DegradationConfig::standard() {
  StageTemplate blur1;
  blur1.kind = StageTemplate::Kind::Blur;
  blur1.families = {{KernelFamily::IsoGaussian, 0.6},
                    {KernelFamily::AnisoGaussian, 0.3},
                    {KernelFamily::Sinc, 0.1}};
  blur1.sigma = {0.2, 3.0};
  StageTemplate resize1;
  resize1.kind = StageTemplate::Kind::Resize;
  resize1.scale = {0.25, 1.5};
  StageTemplate jpeg1;
  jpeg1.kind = StageTemplate::Kind::Jpeg;
  jpeg1.quality = {30, 95};

  StageTemplate blur2 = blur1;
  blur2.probability = 0.8;
  blur2.sigma = {0.2, 1.5};
  StageTemplate resize2 = resize1;
  resize2.scale = {0.3, 1.2};
  StageTemplate jpeg2 = jpeg1;

  DegradationConfig cfg;
  cfg.stages = {blur1, resize1, jpeg1};
  cfg.second_order = true;
  cfg.second_stages = std::vector<StageTemplate>{blur2, resize2, jpeg2};
  return cfg;
}

DegradationConfig DegradationConfig::identity() {
  StageTemplate blur;
  blur.kind = StageTemplate::Kind::Blur;
  blur.kernel_size = {7, 7};
  blur.sigma = {1e-3, 1e-3};
  StageTemplate resize;
  resize.kind = StageTemplate::Kind::Resize;
  resize.scale = {1.0, 1.0};
  resize.filters = {ResizeFilter::Bicubic};
  StageTemplate jpeg;
  jpeg.kind = StageTemplate::Kind::Jpeg;
  jpeg.quality = {100, 100};
  DegradationConfig cfg;
  cfg.stages = {blur, resize, jpeg};
  return cfg;
}

DegradationConfig degradation_config_from_json(const json& j) {
  DegradationConfig cfg;
  try {
    for (const auto& s : j.at("stages")) cfg.stages.push_back(parse_stage(s));
    cfg.second_order = j.value("second_order", false);
    if (j.contains("second_stages")) {
      std::vector<StageTemplate> second;
      for (const auto& s : j.at("second_stages")) second.push_back(parse_stage(s));
      cfg.second_stages = std::move(second);
    }
    cfg.final_scale = j.value("final_scale", 1.0);
    cfg.seed = j.value("seed", std::uint64_t{0});
  } catch (const json::exception& e) {
    throw ValidationError(std::string("invalid degradation config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

json degradation_config_to_json(const DegradationConfig& cfg) {
  json j;
  j["stages"] = json::array();
  for (const auto& s : cfg.stages) j["stages"].push_back(stage_json(s));
  j["second_order"] = cfg.second_order;
  if (cfg.second_stages) {
    j["second_stages"] = json::array();
    for (const auto& s : *cfg.second_stages) j["second_stages"].push_back(stage_json(s));
  }
  j["final_scale"] = cfg.final_scale;
  j["seed"] = cfg.seed;
  return j;
}

json plan_to_json(const DegradationPlan& plan) {
  json stages = json::array();
  for (const auto& stage : plan.stages) {
    std::visit(
        [&](const auto& s) {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, KernelSpec>) {
            json k = {{"type", "blur"}, {"family", family_name(s.family)}, {"size", s.size}};
            switch (s.family) {
              case KernelFamily::IsoGaussian: k["sigma"] = s.sigma; break;
              case KernelFamily::AnisoGaussian:
                k["sigma_x"] = s.sigma_x;
                k["sigma_y"] = s.sigma_y;
                k["theta"] = s.theta;
                break;
              case KernelFamily::Sinc: k["cutoff"] = s.cutoff; break;
            }
            stages.push_back(k);
          } else if constexpr (std::is_same_v<T, ResizeSpec>) {
            stages.push_back({{"type", "resize"}, {"scale", s.scale}, {"filter", filter_name(s.filter)}});
          } else {
            stages.push_back({{"type", "jpeg"}, {"quality", s.quality}});
          }
        },
        stage);
  }
  return {{"stages", stages},
          {"out_width", plan.out_width},
          {"out_height", plan.out_height},
          {"final_filter", filter_name(plan.final_filter)}};
}

DegradationPlan plan_from_json(const json& j) {
  DegradationPlan plan;
  try {
    for (const auto& s : j.at("stages")) {
      const std::string type = s.at("type").get<std::string>();
      if (type == "blur") {
        KernelSpec k;
        k.family = parse_family(s.at("family").get<std::string>());
        k.size = s.at("size").get<int>();
        k.sigma = s.value("sigma", k.sigma);
        k.sigma_x = s.value("sigma_x", k.sigma_x);
        k.sigma_y = s.value("sigma_y", k.sigma_y);
        k.theta = s.value("theta", k.theta);
        k.cutoff = s.value("cutoff", k.cutoff);
        plan.stages.emplace_back(k);
      } else if (type == "resize") {
        plan.stages.emplace_back(
            ResizeSpec{s.at("scale").get<double>(), parse_filter(s.at("filter").get<std::string>())});
      } else if (type == "jpeg") {
        plan.stages.emplace_back(JpegSpec{s.at("quality").get<int>()});
      } else {
        throw ValidationError("unknown plan stage '" + type + "'");
      }
    }
    plan.out_width = j.at("out_width").get<int>();
    plan.out_height = j.at("out_height").get<int>();
    plan.final_filter = parse_filter(j.at("final_filter").get<std::string>());
  } catch (const json::exception& e) {
    throw ValidationError(std::string("invalid degradation plan: ") + e.what());
  }
  return plan;
}

DegradationPlan resolve_plan(const DegradationConfig& cfg, int width, int height, Rng& rng) {
  cfg.validate();
  DegradationPlan plan;
  int w = width;
  int h = height;
  resolve_list(cfg.stages, rng, w, h, plan.stages);
  if (cfg.second_order) {
    resolve_list(cfg.second_stages ? *cfg.second_stages : cfg.stages, rng, w, h, plan.stages);
  }
  plan.out_width = resized_extent(width, cfg.final_scale);
  plan.out_height = resized_extent(height, cfg.final_scale);
  return plan;
}

SrgbImage apply_plan(const SrgbImage& hq, const DegradationPlan& plan) {
  SrgbImage img = hq;
  for (const auto& stage : plan.stages) {
    std::visit(
        [&](const auto& s) {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, KernelSpec>) {
            img = convolve(img, make_kernel(s));
          } else if constexpr (std::is_same_v<T, ResizeSpec>) {
            img = resize(img, s);
          } else {
            img = jpeg_simulate(img, s.quality);
          }
        },
        stage);
    clamp_unit(img);
  }
  if (img.width() != plan.out_width || img.height() != plan.out_height) {
    img = resize_to(img, plan.out_width, plan.out_height, plan.final_filter);
    clamp_unit(img);
  }
  return img;
}

DegradeResult degrade_detail(const SrgbImage& hq, const DegradationConfig& cfg, std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0xde9a));
  DegradationPlan plan = resolve_plan(cfg, hq.width(), hq.height(), rng);
  SrgbImage out = apply_plan(hq, plan);
  return {std::move(out), std::move(plan)};
}

}  // namespace rawforge
