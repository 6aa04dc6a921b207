#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "rawforge/imagecore.hpp"
#include "rawforge/ptp.hpp"

namespace rawforge {

/// Reported when two images are identical (MSE = 0).
inline constexpr double kPsnrCap = 100.0;

struct PsnrResult {
  double db = 0.0;
  bool exact_match = false;
};

/// 10*log10(peak^2 / MSE), MSE taken over every sample of every plane jointly.
PsnrResult psnr(std::span<const ImagePlane* const> a, std::span<const ImagePlane* const> b,
                double peak = 1.0);
PsnrResult psnr(const ImagePlane& a, const ImagePlane& b, double peak = 1.0);
template <class Tag>
PsnrResult psnr(const ColorImage<Tag>& a, const ColorImage<Tag>& b, double peak = 1.0) {
  const ImagePlane* pa[] = {&a.r, &a.g, &a.b};
  const ImagePlane* pb[] = {&b.r, &b.g, &b.b};
  return psnr(pa, pb, peak);
}

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimK1 = 0.01;
inline constexpr double kSsimK2 = 0.03;

/// Mean SSIM over valid (fully inside) 11x11 Gaussian windows, dynamic range 1.
double ssim(const ImagePlane& a, const ImagePlane& b);
/// Per-channel SSIM averaged over the three channels.
template <class Tag>
double ssim(const ColorImage<Tag>& a, const ColorImage<Tag>& b) {
  return (ssim(a.r, b.r) + ssim(a.g, b.g) + ssim(a.b, b.b)) / 3.0;
}

/// Order-fixed pairwise summation in double.
double pairwise_sum(std::span<const double> values);

/// Dense (batch, channel, height, width) block of latents.
class LatentBatch {
 public:
  LatentBatch(int batch, int channels, int height, int width, std::vector<float> samples);

  int batch() const { return batch_; }
  int channels() const { return channels_; }
  int height() const { return height_; }
  int width() const { return width_; }
  std::span<const float> samples() const { return samples_; }

 private:
  int batch_, channels_, height_, width_;
  std::vector<float> samples_;
};

struct LatentStats {
  double mean = 0.0;
  double sigma = 0.0;
};

/// Raised when latents have zero spread and cannot be rescaled.
class DegenerateBatchError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Grand mean and grand (population) standard deviation over all axes.
LatentStats latent_scaling_factor(const LatentBatch& z);
/// z / sigma. Throws DegenerateBatchError when sigma <= 0.
LatentBatch rescale_latents(const LatentBatch& z, double sigma);

struct LossWeights {
  double raw = 1.0;   // linear-domain MSE weight
  double srgb = 1.0;  // weight of the MSE after post tone processing

  void validate() const;
};

struct DualDomainLoss {
  double loss = 0.0;
  double raw_mse = 0.0;
  double srgb_mse = 0.0;
  /// dL/dpred; clamp-active directions receive zero gradient.
  FieldImage gradient;
  /// Fraction of pred pixels where a clamp boundary was touched.
  double mask_fraction = 0.0;
};

/// raw * MSE(pred, gt) + srgb * MSE(ptp(pred), ptp(gt)), means over all samples,
/// with the analytic gradient through the per-pixel PTP Jacobian.
DualDomainLoss dual_domain_mse(const LinearImage& pred, const LinearImage& gt, const PtpParams& p,
                               const LossWeights& w);

}  // namespace rawforge
