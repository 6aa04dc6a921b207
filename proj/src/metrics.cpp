#include "rawforge/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rawforge/parallel.hpp"

namespace rawforge {

namespace {

constexpr std::size_t kPairwiseBlock = 128;

std::vector<double> gaussian_window() {
  std::vector<double> w(kSsimWindow);
  const int half = kSsimWindow / 2;
  double sum = 0.0;
  for (int i = 0; i < kSsimWindow; ++i) {
    const double d = i - half;
    w[i] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
    sum += w[i];
  }
  for (double& v : w) v /= sum;
  return w;
}

// Separable weighted sum over every valid window position.
std::vector<double> window_filter(const std::vector<double>& src, int w, int h,
                                  const std::vector<double>& win) {
  const int ow = w - kSsimWindow + 1;
  const int oh = h - kSsimWindow + 1;
  std::vector<double> horiz(static_cast<std::size_t>(ow) * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int k = 0; k < kSsimWindow; ++k) acc += win[k] * src[static_cast<std::size_t>(y) * w + x + k];
      horiz[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(ow) * oh);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int k = 0; k < kSsimWindow; ++k) acc += win[k] * horiz[static_cast<std::size_t>(y + k) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  }
  return out;
}

}  // namespace

double pairwise_sum(std::span<const double> values) {
  if (values.size() <= kPairwiseBlock) {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

PsnrResult psnr(std::span<const ImagePlane* const> a, std::span<const ImagePlane* const> b,
                double peak) {
  if (a.size() != b.size() || a.empty()) throw ValidationError("psnr: channel count mismatch");
  std::vector<double> sq;
  for (std::size_t c = 0; c < a.size(); ++c) {
    if (!a[c]->same_shape(*b[c])) throw ValidationError("psnr: image dimensions differ");
    const auto sa = a[c]->samples();
    const auto sb = b[c]->samples();
    for (std::size_t i = 0; i < sa.size(); ++i) {
      const double d = static_cast<double>(sa[i]) - sb[i];
      sq.push_back(d * d);
    }
  }
  const double mse = pairwise_sum(sq) / static_cast<double>(sq.size());
  if (mse == 0.0) return {kPsnrCap, true};
  return {std::min(kPsnrCap, 10.0 * std::log10(peak * peak / mse)), false};
}

PsnrResult psnr(const ImagePlane& a, const ImagePlane& b, double peak) {
  const ImagePlane* pa[] = {&a};
  const ImagePlane* pb[] = {&b};
  return psnr(pa, pb, peak);
}

double ssim(const ImagePlane& a, const ImagePlane& b) {
  if (!a.same_shape(b)) throw ValidationError("ssim: image dimensions differ");
  if (a.width() < kSsimWindow || a.height() < kSsimWindow) {
    throw ValidationError("ssim needs images of at least 11x11");
  }
  const int w = a.width();
  const int h = a.height();
  const std::size_t n = a.size();
  std::vector<double> va(n), vb(n), aa(n), bb(n), ab(n);
  const auto sa = a.samples();
  const auto sb = b.samples();
  for (std::size_t i = 0; i < n; ++i) {
    va[i] = sa[i];
    vb[i] = sb[i];
    aa[i] = va[i] * va[i];
    bb[i] = vb[i] * vb[i];
    ab[i] = va[i] * vb[i];
  }
  const auto win = gaussian_window();
  const auto mu_a = window_filter(va, w, h, win);
  const auto mu_b = window_filter(vb, w, h, win);
  const auto e_aa = window_filter(aa, w, h, win);
  const auto e_bb = window_filter(bb, w, h, win);
  const auto e_ab = window_filter(ab, w, h, win);
  const double c1 = (kSsimK1 * 1.0) * (kSsimK1 * 1.0);
  const double c2 = (kSsimK2 * 1.0) * (kSsimK2 * 1.0);
  std::vector<double> map(mu_a.size());
  for (std::size_t i = 0; i < map.size(); ++i) {
    const double ma = mu_a[i];
    const double mb = mu_b[i];
    const double var_a = e_aa[i] - ma * ma;
    const double var_b = e_bb[i] - mb * mb;
    const double cov = e_ab[i] - ma * mb;
    map[i] = ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) /
             ((ma * ma + mb * mb + c1) * (var_a + var_b + c2));
  }
  return pairwise_sum(map) / static_cast<double>(map.size());
}

LatentBatch::LatentBatch(int batch, int channels, int height, int width, std::vector<float> samples)
    : batch_(batch), channels_(channels), height_(height), width_(width), samples_(std::move(samples)) {
  if (batch < 1 || channels < 1 || height < 1 || width < 1) {
    throw ValidationError("latent batch axes must all be >= 1");
  }
  if (samples_.size() != static_cast<std::size_t>(batch) * channels * height * width) {
    throw ValidationError("latent sample count does not match its shape");
  }
  for (float v : samples_) {
    if (!std::isfinite(v)) throw ValidationError("latent batch contains NaN or Inf");
  }
}

LatentStats latent_scaling_factor(const LatentBatch& z) {
  const auto s = z.samples();
  if (s.size() < 2) throw ValidationError("scaling factor needs at least 2 latent elements");
  std::vector<double> v(s.begin(), s.end());
  const double n = static_cast<double>(v.size());
  const double mean = pairwise_sum(v) / n;
  for (double& x : v) x = (x - mean) * (x - mean);
  return {mean, std::sqrt(pairwise_sum(v) / n)};
}

LatentBatch rescale_latents(const LatentBatch& z, double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw DegenerateBatchError("degenerate latent batch: sigma must be > 0 to rescale");
  }
  std::vector<float> out(z.samples().begin(), z.samples().end());
  for (float& v : out) v = static_cast<float>(static_cast<double>(v) / sigma);
  return LatentBatch(z.batch(), z.channels(), z.height(), z.width(), std::move(out));
}

void LossWeights::validate() const {
  if (!(raw >= 0.0) || !(srgb >= 0.0)) throw ValidationError("loss weights must be >= 0");
  if (raw == 0.0 && srgb == 0.0) throw ValidationError("loss weights must not both be zero");
}

DualDomainLoss dual_domain_mse(const LinearImage& pred, const LinearImage& gt, const PtpParams& p,
                               const LossWeights& w) {
  w.validate();
  p.validate();
  if (!pred.same_shape(gt)) throw ValidationError("dual_domain_mse: image dimensions differ");
  const std::size_t pixels = pred.pixel_count();
  const double n = 3.0 * static_cast<double>(pixels);
  std::vector<double> raw_sq(pixels), srgb_sq(pixels);
  std::vector<std::uint8_t> mask(pixels);
  DualDomainLoss out;
  out.gradient = FieldImage(pred.width(), pred.height());
  parallel_for(pixels, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const Vec3 xp = pred.pixel(i);
      const Vec3 xg = gt.pixel(i);
      bool sat = false;
      const Mat3 jac = ptp_jacobian_pixel(xp, p, &sat);
      const Vec3 yp = ptp_forward_pixel(xp, p);
      const Vec3 yg = ptp_forward_pixel(xg, p);
      double rs = 0.0, ss = 0.0;
      Vec3 grad{};
      for (int k = 0; k < 3; ++k) {
        const double dr = xp[k] - xg[k];
        const double ds = yp[k] - yg[k];
        rs += dr * dr;
        ss += ds * ds;
        grad[k] = 2.0 * w.raw * dr / n;
      }
      if (w.srgb != 0.0) {
        for (int col = 0; col < 3; ++col) {
          double acc = 0.0;
          for (int row = 0; row < 3; ++row) acc += jac[3 * row + col] * (yp[row] - yg[row]);
          grad[col] += 2.0 * w.srgb * acc / n;
        }
      }
      raw_sq[i] = rs;
      srgb_sq[i] = ss;
      mask[i] = sat ? 1 : 0;
      out.gradient.set_pixel(i, grad);
    }
  });
  out.raw_mse = pairwise_sum(raw_sq) / n;
  out.srgb_mse = pairwise_sum(srgb_sq) / n;
  out.loss = w.raw * out.raw_mse + w.srgb * out.srgb_mse;
  std::size_t masked = 0;
  for (auto m : mask) masked += m;
  out.mask_fraction = static_cast<double>(masked) / static_cast<double>(pixels);
  return out;
}

}  // namespace rawforge
