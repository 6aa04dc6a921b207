#include "rawforge/ptp.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rawforge/parallel.hpp"

namespace rawforge {

namespace {

constexpr double kSrgbLinearKnee = 0.0031308;
constexpr double kSrgbEncodedKnee = 12.92 * kSrgbLinearKnee;

struct Jet {
  double v;
  double d;
};

// Clamp with zero subgradient outside the interval; touching a bound marks saturation.
Jet clamp_jet(Jet j, bool& saturated) {
  if (j.v <= 0.0 || j.v >= 1.0) saturated = true;
  if (j.v < 0.0) return {0.0, 0.0};
  if (j.v > 1.0) return {1.0, 0.0};
  return j;
}

Jet gamma_jet(Jet x, const GammaCurve& c, bool& saturated) {
  if (c.kind == GammaCurve::Kind::SrgbStandard) {
    if (x.v <= kSrgbLinearKnee) return {12.92 * x.v, 12.92 * x.d};
    const double e = 1.0 / 2.4;
    const double p = std::pow(x.v, e);
    return {1.055 * p - 0.055, 1.055 * e * p / x.v * x.d};
  }
  const double e = 1.0 / c.gamma;
  if (x.v <= 0.0) {
    saturated = true;
    return {0.0, 0.0};
  }
  const double p = std::pow(x.v, e);
  return {p, e * p / x.v * x.d};
}

Jet tone_jet(Jet x, ToneCurve t) {
  if (t == ToneCurve::Identity) return x;
  return {x.v * x.v * (3.0 - 2.0 * x.v), 6.0 * x.v * (1.0 - x.v) * x.d};
}

template <class F>
LinearImage map_pixels(const LinearImage& x, F&& f) {
  LinearImage out(x.width(), x.height());
  parallel_for(x.pixel_count(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) out.set_pixel(i, f(x.pixel(i)));
  });
  return out;
}

void check_gains(const Vec3& gains) {
  for (double g : gains) {
    if (!(g > 0.0) || !std::isfinite(g)) throw ValidationError("white-balance gains must be > 0");
  }
}

}  // namespace

void PtpParams::validate() const {
  check_gains(wb_gains);
  if (!(std::abs(determinant(ccm)) > 1e-8)) throw ValidationError("ccm is singular");
  for (int r = 0; r < 3; ++r) {
    const double sum = ccm[3 * r] + ccm[3 * r + 1] + ccm[3 * r + 2];
    if (std::abs(sum - 1.0) > 1e-6) {
      throw ValidationError("ccm row " + std::to_string(r) + " does not sum to 1");
    }
  }
  if (gamma.kind == GammaCurve::Kind::Power && !(gamma.gamma > 0.0)) {
    throw ValidationError("gamma exponent must be > 0");
  }
}

PtpParams PtpParams::identity() {
  return {{1.0, 1.0, 1.0}, kIdentity3, GammaCurve::power(1.0), ToneCurve::Identity};
}

PtpParams ptp_params_from(const CaptureMetadata& meta) {
  PtpParams p;
  p.wb_gains = meta.wb_gains;
  p.ccm = meta.ccm;
  return p;
}

PtpParams ptp_params_from_json(const nlohmann::json& j) {
  PtpParams p;
  try {
    p.wb_gains = j.at("wb_gains").get<Vec3>();
    p.ccm = j.at("ccm").get<Mat3>();
    if (j.contains("gamma")) {
      const auto& g = j.at("gamma");
      if (g.is_string() && g.get<std::string>() == "srgb_standard") {
        p.gamma = GammaCurve::srgb();
      } else if (g.is_object() && g.contains("power")) {
        p.gamma = GammaCurve::power(g.at("power").get<double>());
      } else {
        throw ValidationError("gamma must be \"srgb_standard\" or {\"power\": <value>}");
      }
    }
    if (j.contains("tone")) {
      const auto t = j.at("tone").get<std::string>();
      if (t == "smoothstep") {
        p.tone = ToneCurve::Smoothstep;
      } else if (t == "identity") {
        p.tone = ToneCurve::Identity;
      } else {
        throw ValidationError("tone must be \"smoothstep\" or \"identity\"");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("invalid PTP parameters: ") + e.what());
  }
  p.validate();
  return p;
}

void ptp_params_to_json(const PtpParams& p, nlohmann::json& j) {
  j["wb_gains"] = p.wb_gains;
  j["ccm"] = p.ccm;
  if (p.gamma.kind == GammaCurve::Kind::SrgbStandard) {
    j["gamma"] = "srgb_standard";
  } else {
    j["gamma"] = {{"power", p.gamma.gamma}};
  }
  j["tone"] = p.tone == ToneCurve::Smoothstep ? "smoothstep" : "identity";
}

double gamma_compress(double x, const GammaCurve& c) {
  x = std::clamp(x, 0.0, 1.0);
  if (c.kind == GammaCurve::Kind::SrgbStandard) {
    return x <= kSrgbLinearKnee ? 12.92 * x : 1.055 * std::pow(x, 1.0 / 2.4) - 0.055;
  }
  return std::pow(x, 1.0 / c.gamma);
}

double gamma_expand(double y, const GammaCurve& c) {
  y = std::clamp(y, 0.0, 1.0);
  if (c.kind == GammaCurve::Kind::SrgbStandard) {
    return y <= kSrgbEncodedKnee ? y / 12.92 : std::pow((y + 0.055) / 1.055, 2.4);
  }
  return std::pow(y, c.gamma);
}

double tone_map(double x, ToneCurve t) {
  x = std::clamp(x, 0.0, 1.0);
  if (t == ToneCurve::Identity) return x;
  return std::clamp(x * x * (3.0 - 2.0 * x), 0.0, 1.0);
}

double tone_unmap(double y, ToneCurve t) {
  y = std::clamp(y, 0.0, 1.0);
  if (t == ToneCurve::Identity) return y;
  return std::clamp(0.5 - std::sin(std::asin(1.0 - 2.0 * y) / 3.0), 0.0, 1.0);
}

double invert_wb_sample(double y, double gain) {
  const double q = y / gain;
  if (gain >= 1.0) return std::clamp(q, 0.0, 1.0);
  // Division amplifies: roll quotients above the knee smoothly onto [knee, 1].
  const double top = 1.0 / gain;
  const double knee = std::max(0.0, std::min(kSoftRollKnee, (3.0 - top) / 2.0));
  const double span = top - knee;
  const double room = 1.0 - knee;
  const double slope = span / room;
  if (slope > 3.0) return std::clamp(q, 0.0, 1.0);
  if (q <= knee) return std::max(q, 0.0);
  if (q >= top) return 1.0;
  const double u = (q - knee) / span;
  const double h = slope * u + (3.0 - 2.0 * slope) * u * u + (slope - 2.0) * u * u * u;
  return std::clamp(knee + room * h, 0.0, 1.0);
}

LinearImage apply_wb(const LinearImage& x, const Vec3& gains) {
  check_gains(gains);
  return map_pixels(x, [&](const Vec3& v) {
    return Vec3{std::clamp(v[0] * gains[0], 0.0, 1.0), std::clamp(v[1] * gains[1], 0.0, 1.0),
                std::clamp(v[2] * gains[2], 0.0, 1.0)};
  });
}

LinearImage invert_wb(const LinearImage& x, const Vec3& gains) {
  check_gains(gains);
  return map_pixels(x, [&](const Vec3& v) {
    return Vec3{invert_wb_sample(v[0], gains[0]), invert_wb_sample(v[1], gains[1]),
                invert_wb_sample(v[2], gains[2])};
  });
}

LinearImage apply_ccm(const LinearImage& x, const Mat3& ccm) {
  if (!(std::abs(determinant(ccm)) > 1e-8)) throw ValidationError("ccm is singular");
  return map_pixels(x, [&](const Vec3& v) {
    Vec3 o = multiply(ccm, v);
    for (double& c : o) c = std::clamp(c, 0.0, 1.0);
    return o;
  });
}

LinearImage invert_ccm(const LinearImage& x, const Mat3& ccm) {
  const Mat3 inv = inverse(ccm);
  return map_pixels(x, [&](const Vec3& v) { return multiply(inv, v); });
}

PixelJet ptp_jvp_pixel(const PixelJet& x, const PtpParams& p) {
  PixelJet out;
  bool sat = false;
  Jet c[3];
  for (int k = 0; k < 3; ++k) {
    c[k] = clamp_jet({x.value[k] * p.wb_gains[k], x.tangent[k] * p.wb_gains[k]}, sat);
  }
  const Vec3 mv = multiply(p.ccm, {c[0].v, c[1].v, c[2].v});
  const Vec3 md = multiply(p.ccm, {c[0].d, c[1].d, c[2].d});
  for (int k = 0; k < 3; ++k) {
    Jet j = clamp_jet({mv[k], md[k]}, sat);
    j = gamma_jet(j, p.gamma, sat);
    j = tone_jet(j, p.tone);
    if (j.v < 0.0 || j.v > 1.0) j = {std::clamp(j.v, 0.0, 1.0), 0.0};
    out.value[k] = j.v;
    out.tangent[k] = j.d;
  }
  out.saturated = sat;
  return out;
}

Mat3 ptp_jacobian_pixel(const Vec3& x, const PtpParams& p, bool* saturated) {
  Mat3 jac{};
  bool sat = false;
  for (int col = 0; col < 3; ++col) {
    PixelJet in{x, {0.0, 0.0, 0.0}};
    in.tangent[col] = 1.0;
    const PixelJet o = ptp_jvp_pixel(in, p);
    sat = sat || o.saturated;
    for (int row = 0; row < 3; ++row) jac[3 * row + col] = o.tangent[row];
  }
  if (saturated != nullptr) *saturated = sat;
  return jac;
}

Vec3 ptp_forward_pixel(const Vec3& x, const PtpParams& p) {
  return ptp_jvp_pixel({x, {0.0, 0.0, 0.0}}, p).value;
}

Vec3 ptp_inverse_pixel(const Vec3& y, const PtpParams& p) {
  Vec3 lin;
  for (int k = 0; k < 3; ++k) lin[k] = gamma_expand(tone_unmap(y[k], p.tone), p.gamma);
  const Vec3 cam = multiply(inverse(p.ccm), lin);
  return {invert_wb_sample(cam[0], p.wb_gains[0]), invert_wb_sample(cam[1], p.wb_gains[1]),
          invert_wb_sample(cam[2], p.wb_gains[2])};
}

SrgbImage ptp_forward(const LinearImage& x, const PtpParams& p) {
  p.validate();
  SrgbImage out(x.width(), x.height());
  parallel_for(x.pixel_count(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) out.set_pixel(i, ptp_forward_pixel(x.pixel(i), p));
  });
  return out;
}

LinearImage ptp_inverse(const SrgbImage& y, const PtpParams& p) {
  p.validate();
  const Mat3 inv = inverse(p.ccm);
  LinearImage out(y.width(), y.height());
  parallel_for(y.pixel_count(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const Vec3 v = y.pixel(i);
      Vec3 lin;
      for (int k = 0; k < 3; ++k) lin[k] = gamma_expand(tone_unmap(v[k], p.tone), p.gamma);
      const Vec3 cam = multiply(inv, lin);
      out.set_pixel(i, {invert_wb_sample(cam[0], p.wb_gains[0]),
                        invert_wb_sample(cam[1], p.wb_gains[1]),
                        invert_wb_sample(cam[2], p.wb_gains[2])});
    }
  });
  return out;
}

PtpJvpResult ptp_jvp(const LinearImage& x, const FieldImage& tangent, const PtpParams& p) {
  p.validate();
  if (x.width() != tangent.width() || x.height() != tangent.height()) {
    throw ValidationError("tangent image size differs from input");
  }
  PtpJvpResult res{SrgbImage(x.width(), x.height()), FieldImage(x.width(), x.height()),
                   std::vector<std::uint8_t>(x.pixel_count(), 0), 0.0};
  parallel_for(x.pixel_count(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const PixelJet o = ptp_jvp_pixel({x.pixel(i), tangent.pixel(i)}, p);
      res.value.set_pixel(i, o.value);
      res.tangent.set_pixel(i, o.tangent);
      res.saturation_mask[i] = o.saturated ? 1 : 0;
    }
  });
  std::size_t count = 0;
  for (auto m : res.saturation_mask) count += m;
  res.saturated_fraction =
      x.pixel_count() == 0 ? 0.0 : static_cast<double>(count) / static_cast<double>(x.pixel_count());
  return res;
}

}  // namespace rawforge
