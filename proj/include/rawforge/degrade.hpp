#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "rawforge/imagecore.hpp"
#include "rawforge/random.hpp"

namespace rawforge {

enum class KernelFamily { IsoGaussian, AnisoGaussian, Sinc };

struct KernelSpec {
  KernelFamily family = KernelFamily::IsoGaussian;
  int size = 7;              // odd, 7..21 in sampled configs
  double sigma = 1.0;        // iso
  double sigma_x = 1.0;      // aniso, before rotation
  double sigma_y = 1.0;
  double theta = 0.0;        // aniso rotation, radians
  double cutoff = 1.5;       // sinc, radians per pixel

  friend bool operator==(const KernelSpec&, const KernelSpec&) = default;
};

/// Square kernel, row-major taps summing to 1.
struct Kernel {
  int size = 1;
  std::vector<double> taps{1.0};

  double at(int x, int y) const { return taps[static_cast<std::size_t>(y) * size + x]; }
};

Kernel make_kernel(const KernelSpec& spec);

/// Direct 2-D convolution, edge-replicated borders, same-size output.
ImagePlane convolve(const ImagePlane& img, const Kernel& k);
template <class Tag>
ColorImage<Tag> convolve(const ColorImage<Tag>& img, const Kernel& k) {
  return ColorImage<Tag>(convolve(img.r, k), convolve(img.g, k), convolve(img.b, k));
}

enum class ResizeFilter { Bilinear, Bicubic, Area };

struct ResizeSpec {
  double scale = 1.0;
  ResizeFilter filter = ResizeFilter::Bilinear;

  friend bool operator==(const ResizeSpec&, const ResizeSpec&) = default;
};

/// round(n * scale) to the nearest even value, at least 2.
int resized_extent(int n, double scale);

/// Separable resampling with half-pixel centre alignment.
ImagePlane resize_to(const ImagePlane& img, int out_w, int out_h, ResizeFilter filter);
template <class Tag>
ColorImage<Tag> resize_to(const ColorImage<Tag>& img, int out_w, int out_h, ResizeFilter filter) {
  return ColorImage<Tag>(resize_to(img.r, out_w, out_h, filter),
                         resize_to(img.g, out_w, out_h, filter),
                         resize_to(img.b, out_w, out_h, filter));
}
template <class Tag>
ColorImage<Tag> resize(const ColorImage<Tag>& img, const ResizeSpec& spec) {
  if (!(spec.scale > 0.0)) throw ValidationError("resize scale must be > 0");
  return resize_to(img, resized_extent(img.width(), spec.scale),
                   resized_extent(img.height(), spec.scale), spec.filter);
}

/// libjpeg quality law applied to a base table (values 1..255).
std::array<int, 64> scaled_quant_table(const std::array<int, 64>& base, int quality);
extern const std::array<int, 64> kLumaQuantTable;
extern const std::array<int, 64> kChromaQuantTable;

/// Block-DCT quantisation model of JPEG: BT.601 full-range YCbCr, 8x8 DCT-II,
/// Annex K tables scaled by quality, no chroma subsampling or entropy coding.
SrgbImage jpeg_simulate(const SrgbImage& img, int quality);

struct JpegSpec {
  int quality = 95;
  friend bool operator==(const JpegSpec&, const JpegSpec&) = default;
};

using DegradationStage = std::variant<KernelSpec, ResizeSpec, JpegSpec>;

/// Concrete stages with every random choice resolved.
struct DegradationPlan {
  std::vector<DegradationStage> stages;
  int out_width = 0;
  int out_height = 0;
  ResizeFilter final_filter = ResizeFilter::Bicubic;
};

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

/// One configurable stage with sampling ranges.
struct StageTemplate {
  enum class Kind { Blur, Resize, Jpeg };
  Kind kind = Kind::Blur;
  double probability = 1.0;
  // blur
  std::vector<std::pair<KernelFamily, double>> families = {{KernelFamily::IsoGaussian, 1.0}};
  Range kernel_size{7, 21};
  Range sigma{0.2, 3.0};
  Range sinc_cutoff{3.14159265358979 / 3.0, 3.14159265358979};
  // resize
  Range scale{0.25, 1.5};
  std::vector<ResizeFilter> filters = {ResizeFilter::Bilinear, ResizeFilter::Bicubic,
                                       ResizeFilter::Area};
  // jpeg
  Range quality{30, 95};
};

struct DegradationConfig {
  std::vector<StageTemplate> stages;
  /// Run a second pass; uses `second_stages` when given, else repeats `stages`.
  bool second_order = false;
  std::optional<std::vector<StageTemplate>> second_stages;
  /// Output size relative to the input (LQ/HQ scale factor).
  double final_scale = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
  /// Blur / resize / JPEG twice, with the random-noise stages left out.
  static DegradationConfig standard();
  /// Near-delta blur, scale 1, quality 100.
  static DegradationConfig identity();
};

DegradationConfig degradation_config_from_json(const nlohmann::json& j);
nlohmann::json degradation_config_to_json(const DegradationConfig& cfg);
nlohmann::json plan_to_json(const DegradationPlan& plan);
DegradationPlan plan_from_json(const nlohmann::json& j);

/// Draw every stage parameter for an input of the given size.
DegradationPlan resolve_plan(const DegradationConfig& cfg, int width, int height, Rng& rng);
SrgbImage apply_plan(const SrgbImage& hq, const DegradationPlan& plan);

struct DegradeResult {
  SrgbImage image;
  DegradationPlan plan;
};

DegradeResult degrade_detail(const SrgbImage& hq, const DegradationConfig& cfg, std::uint64_t seed);

std::string family_name(KernelFamily f);
std::string filter_name(ResizeFilter f);

}  // namespace rawforge
