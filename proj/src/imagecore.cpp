#include "rawforge/imagecore.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace rawforge {

double determinant(const Mat3& m) {
  return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
         m[2] * (m[3] * m[7] - m[4] * m[6]);
}

Mat3 inverse(const Mat3& m) {
  const double det = determinant(m);
  if (!(std::abs(det) > 1e-8)) {
    throw ValidationError("matrix is singular (|det| <= 1e-8)");
  }
  const double s = 1.0 / det;
  return {(m[4] * m[8] - m[5] * m[7]) * s, (m[2] * m[7] - m[1] * m[8]) * s,
          (m[1] * m[5] - m[2] * m[4]) * s, (m[5] * m[6] - m[3] * m[8]) * s,
          (m[0] * m[8] - m[2] * m[6]) * s, (m[2] * m[3] - m[0] * m[5]) * s,
          (m[3] * m[7] - m[4] * m[6]) * s, (m[1] * m[6] - m[0] * m[7]) * s,
          (m[0] * m[4] - m[1] * m[3]) * s};
}

Vec3 multiply(const Mat3& m, const Vec3& v) {
  return {m[0] * v[0] + m[1] * v[1] + m[2] * v[2], m[3] * v[0] + m[4] * v[1] + m[5] * v[2],
          m[6] * v[0] + m[7] * v[1] + m[8] * v[2]};
}

ImagePlane::ImagePlane(int width, int height, float fill) : width_(width), height_(height) {
  if (width < 1 || height < 1) {
    throw ValidationError("image dimensions must be >= 1, got " + std::to_string(width) + "x" +
                          std::to_string(height));
  }
  if (!std::isfinite(fill)) throw ValidationError("non-finite fill value");
  data_.assign(static_cast<std::size_t>(width) * height, fill);
}

ImagePlane::ImagePlane(int width, int height, std::vector<float> data)
    : width_(width), height_(height), data_(std::move(data)) {
  if (width < 1 || height < 1) {
    throw ValidationError("image dimensions must be >= 1");
  }
  if (data_.size() != static_cast<std::size_t>(width) * height) {
    throw ValidationError("sample count does not match " + std::to_string(width) + "x" +
                          std::to_string(height));
  }
  if (!all_finite()) throw ValidationError("image contains NaN or Inf");
}

bool ImagePlane::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); });
}

void NoiseParams::validate() const {
  if (!std::isfinite(shot) || !std::isfinite(read) || shot < 0.0 || read < 0.0) {
    throw ValidationError("noise parameters must be finite and non-negative");
  }
}

void CaptureMetadata::validate() const {
  for (double g : wb_gains) {
    if (!(g > 0.0) || !std::isfinite(g)) throw ValidationError("white-balance gains must be > 0");
  }
  if (!(std::abs(determinant(ccm)) > 1e-8)) {
    throw ValidationError("ccm is singular (|det| <= 1e-8)");
  }
  noise.validate();
}

RawImage::RawImage(ImagePlane p, CaptureMetadata m, bool unclamped)
    : plane(std::move(p)), meta(m), pre_clip(unclamped) {
  if (plane.width() % 2 != 0 || plane.height() % 2 != 0) {
    throw ValidationError("RAW dimensions must be even (full Bayer quads)");
  }
  meta.validate();
  if (!pre_clip && !in_unit_range(plane)) {
    throw ValidationError("RAW samples outside [0,1]");
  }
}

void clamp_unit(ImagePlane& p) {
  for (float& v : p.samples()) v = std::clamp(v, 0.0f, 1.0f);
}

bool in_unit_range(const ImagePlane& p) {
  const auto s = p.samples();
  return std::all_of(s.begin(), s.end(), [](float v) { return v >= 0.0f && v <= 1.0f; });
}

ImagePlane crop(const ImagePlane& img, int x0, int y0, int w, int h) {
  if (x0 < 0 || y0 < 0 || w < 1 || h < 1 || x0 + w > img.width() || y0 + h > img.height()) {
    throw ValidationError("crop region out of bounds");
  }
  ImagePlane out(w, h);
  for (int y = 0; y < h; ++y) {
    std::copy_n(img.row(y0 + y) + x0, w, out.row(y));
  }
  return out;
}

RawImage crop(const RawImage& img, int x0, int y0, int w, int h) {
  if (x0 % 2 != 0 || y0 % 2 != 0) {
    throw ValidationError("RAW crop offset must be even to keep the Bayer phase");
  }
  return RawImage(crop(img.plane, x0, y0, w, h), img.meta, img.pre_clip);
}

}  // namespace rawforge
