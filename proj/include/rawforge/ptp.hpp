#pragma once

#include <cstdint>
#include <vector>

#include <json.hpp>

#include "rawforge/imagecore.hpp"

namespace rawforge {

struct GammaCurve {
  enum class Kind { SrgbStandard, Power };
  Kind kind = Kind::SrgbStandard;
  double gamma = 2.2;  // exponent for Kind::Power; output = x^(1/gamma)

  static GammaCurve srgb() { return {}; }
  static GammaCurve power(double g) { return {Kind::Power, g}; }
  friend bool operator==(const GammaCurve&, const GammaCurve&) = default;
};

enum class ToneCurve { Smoothstep, Identity };

/// Parameters of the post tone processing chain
/// (white balance -> colour correction -> gamma compression -> tone mapping).
struct PtpParams {
  Vec3 wb_gains = {1.0, 1.0, 1.0};
  Mat3 ccm = kIdentity3;
  GammaCurve gamma;
  ToneCurve tone = ToneCurve::Smoothstep;

  /// Gains > 0, ccm invertible with rows summing to 1 (within 1e-6), gamma > 0.
  void validate() const;
  /// All stages reduce to the identity.
  static PtpParams identity();
  friend bool operator==(const PtpParams&, const PtpParams&) = default;
};

/// PtpParams from capture metadata (curves default to sRGB + smoothstep).
PtpParams ptp_params_from(const CaptureMetadata& meta);
/// Reads "wb_gains", "ccm" and the optional "gamma"/"tone" keys of a sidecar.
PtpParams ptp_params_from_json(const nlohmann::json& j);
/// Writes "gamma" and "tone" (plus gains and ccm) into `j`.
void ptp_params_to_json(const PtpParams& p, nlohmann::json& j);

/// Knee of the highlight soft-roll used by invert_wb.
inline constexpr double kSoftRollKnee = 0.9;

// Scalar curves. Inputs are clamped to [0,1].
double gamma_compress(double x, const GammaCurve& c);
double gamma_expand(double y, const GammaCurve& c);
double tone_map(double x, ToneCurve t);
double tone_unmap(double y, ToneCurve t);
/// Inverse white balance for one sample, including the highlight soft-roll.
double invert_wb_sample(double y, double gain);

LinearImage apply_wb(const LinearImage& x, const Vec3& gains);
LinearImage invert_wb(const LinearImage& x, const Vec3& gains);
LinearImage apply_ccm(const LinearImage& x, const Mat3& ccm);
/// Not clamped: out-of-gamut results are kept for the following stage.
LinearImage invert_ccm(const LinearImage& x, const Mat3& ccm);

Vec3 ptp_forward_pixel(const Vec3& x, const PtpParams& p);
Vec3 ptp_inverse_pixel(const Vec3& y, const PtpParams& p);

SrgbImage ptp_forward(const LinearImage& x, const PtpParams& p);
LinearImage ptp_inverse(const SrgbImage& y, const PtpParams& p);

/// Value plus directional derivative, carried through each stage.
struct PixelJet {
  Vec3 value{};
  Vec3 tangent{};
  /// Some clamp (or curve domain boundary) was touched on the way.
  bool saturated = false;
};

PixelJet ptp_jvp_pixel(const PixelJet& x, const PtpParams& p);
/// Row-major d(output_i)/d(input_j), assembled from three basis tangents.
Mat3 ptp_jacobian_pixel(const Vec3& x, const PtpParams& p, bool* saturated = nullptr);

struct PtpJvpResult {
  SrgbImage value;
  FieldImage tangent;
  /// 1 where the pixel touched a clamp boundary.
  std::vector<std::uint8_t> saturation_mask;
  double saturated_fraction = 0.0;
};

PtpJvpResult ptp_jvp(const LinearImage& x, const FieldImage& tangent, const PtpParams& p);

}  // namespace rawforge
