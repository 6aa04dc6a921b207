#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace rawforge {

/// Raised for precondition and contract violations (CLI exit code 1).
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised for unreadable/unwritable files and malformed containers (CLI exit code 2).
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Row-major 3x3 matrix.
using Mat3 = std::array<double, 9>;
using Vec3 = std::array<double, 3>;

inline constexpr Mat3 kIdentity3 = {1, 0, 0, 0, 1, 0, 0, 0, 1};

double determinant(const Mat3& m);
/// Throws ValidationError when |det| <= 1e-8.
Mat3 inverse(const Mat3& m);
Vec3 multiply(const Mat3& m, const Vec3& v);

/// Single channel of row-major float samples.
class ImagePlane {
 public:
  ImagePlane() = default;
  ImagePlane(int width, int height, float fill = 0.0f);
  /// Takes ownership of `data`; size must equal width*height and all samples finite.
  ImagePlane(int width, int height, std::vector<float> data);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  float at(int x, int y) const { return data_[static_cast<std::size_t>(y) * width_ + x]; }
  float& at(int x, int y) { return data_[static_cast<std::size_t>(y) * width_ + x]; }

  std::span<const float> samples() const { return data_; }
  std::span<float> samples() { return data_; }
  float* row(int y) { return data_.data() + static_cast<std::size_t>(y) * width_; }
  const float* row(int y) const { return data_.data() + static_cast<std::size_t>(y) * width_; }

  bool all_finite() const;
  bool same_shape(const ImagePlane& o) const { return width_ == o.width_ && height_ == o.height_; }

  friend bool operator==(const ImagePlane&, const ImagePlane&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<float> data_;
};

/// 2x2 colour filter layouts; the name lists the quad row-major.
enum class BayerPattern { RGGB, BGGR, GRBG, GBRG };

struct NoiseParams {
  double shot = 0.0;  // variance per unit signal
  double read = 0.0;  // signal-independent variance

  void validate() const;
  friend bool operator==(const NoiseParams&, const NoiseParams&) = default;
};

struct CaptureMetadata {
  BayerPattern pattern = BayerPattern::RGGB;
  Vec3 wb_gains = {1.0, 1.0, 1.0};
  Mat3 ccm = kIdentity3;
  NoiseParams noise;
  std::uint64_t seed = 0;

  void validate() const;
  friend bool operator==(const CaptureMetadata&, const CaptureMetadata&) = default;
};

struct LinearTag {};
struct SrgbTag {};
struct FieldTag {};

/// Three equally sized planes. The tag keeps scene-linear and display-referred
/// images from being mixed up; FieldTag is used for unbounded data such as
/// tangents and gradients.
template <class Tag>
struct ColorImage {
  ImagePlane r, g, b;

  ColorImage() = default;
  ColorImage(int width, int height, float fill = 0.0f)
      : r(width, height, fill), g(width, height, fill), b(width, height, fill) {}
  ColorImage(ImagePlane r_, ImagePlane g_, ImagePlane b_)
      : r(std::move(r_)), g(std::move(g_)), b(std::move(b_)) {
    if (!r.same_shape(g) || !r.same_shape(b)) {
      throw ValidationError("colour planes differ in size");
    }
  }

  int width() const { return r.width(); }
  int height() const { return r.height(); }
  std::size_t pixel_count() const { return r.size(); }

  ImagePlane& plane(int c) { return c == 0 ? r : (c == 1 ? g : b); }
  const ImagePlane& plane(int c) const { return c == 0 ? r : (c == 1 ? g : b); }

  Vec3 pixel(std::size_t i) const { return {r.samples()[i], g.samples()[i], b.samples()[i]}; }
  void set_pixel(std::size_t i, const Vec3& v) {
    r.samples()[i] = static_cast<float>(v[0]);
    g.samples()[i] = static_cast<float>(v[1]);
    b.samples()[i] = static_cast<float>(v[2]);
  }

  bool same_shape(const ColorImage& o) const { return r.same_shape(o.r); }
  friend bool operator==(const ColorImage&, const ColorImage&) = default;
};

using LinearImage = ColorImage<LinearTag>;
using SrgbImage = ColorImage<SrgbTag>;
using FieldImage = ColorImage<FieldTag>;

/// Reinterpret planes under a different domain tag (copies).
template <class To, class From>
ColorImage<To> retag(const ColorImage<From>& img) {
  return ColorImage<To>(img.r, img.g, img.b);
}

/// Mosaiced single-channel sensor frame.
struct RawImage {
  ImagePlane plane;
  CaptureMetadata meta;
  /// Set when samples carry noise that has not been clamped to [0,1].
  bool pre_clip = false;

  RawImage() = default;
  RawImage(ImagePlane p, CaptureMetadata m, bool unclamped = false);

  BayerPattern pattern() const { return meta.pattern; }
  int width() const { return plane.width(); }
  int height() const { return plane.height(); }

  friend bool operator==(const RawImage&, const RawImage&) = default;
};

/// Clamp every sample of `p` to [0,1] in place.
void clamp_unit(ImagePlane& p);
template <class Tag>
void clamp_unit(ColorImage<Tag>& img) {
  clamp_unit(img.r);
  clamp_unit(img.g);
  clamp_unit(img.b);
}

bool in_unit_range(const ImagePlane& p);

ImagePlane crop(const ImagePlane& img, int x0, int y0, int w, int h);
template <class Tag>
ColorImage<Tag> crop(const ColorImage<Tag>& img, int x0, int y0, int w, int h) {
  return ColorImage<Tag>(crop(img.r, x0, y0, w, h), crop(img.g, x0, y0, w, h),
                         crop(img.b, x0, y0, w, h));
}
/// x0 and y0 must be even so the Bayer phase is preserved.
RawImage crop(const RawImage& img, int x0, int y0, int w, int h);

}  // namespace rawforge
