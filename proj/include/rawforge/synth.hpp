#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rawforge/cfa.hpp"
#include "rawforge/degrade.hpp"
#include "rawforge/imagecore.hpp"
#include "rawforge/noise.hpp"
#include "rawforge/ptp.hpp"

namespace rawforge {

inline constexpr const char* kPipelineVersion = "rawforge-synth/1";

/// How PTP parameters are drawn for a synthesized pair.
struct PtpSampling {
  /// g_r and g_b are log-uniform in [1/max_gain, max_gain]; g_g = 1.
  double max_gain = 1.4;
  /// The CCM is identity blended toward this matrix (rows sum to 1).
  Mat3 camera_ccm = {1.6, -0.45, -0.15, -0.25, 1.5, -0.25, -0.05, -0.55, 1.6};
  GammaCurve gamma = GammaCurve::srgb();
  ToneCurve tone = ToneCurve::Smoothstep;
};

PtpParams sample_ptp_params(Rng& rng, const PtpSampling& s = {});

/// Mosaic noise synthesis: add_shot_read_noise(mosaic(x, pattern)).
RawImage mns(const LinearImage& x, BayerPattern pattern, const NoiseParams& p,
             std::uint64_t noise_seed, CaptureMetadata meta = {});

struct SynthesisOptions {
  DegradationConfig degradation = DegradationConfig::standard();
  NoiseRanges noise;
  PtpSampling ptp;
  /// Replaces sampled noise parameters (e.g. zero noise).
  std::optional<NoiseParams> noise_override;
};

/// {"degradation": {...}, "noise": {...}, "noise_override": {"shot", "read"},
/// "ptp": {"max_gain", "camera_ccm"}}; every key optional. A bare degradation
/// config document (one with "stages") is also accepted.
SynthesisOptions synthesis_options_from_json(const nlohmann::json& j);
nlohmann::json synthesis_options_to_json(const SynthesisOptions& o);

struct SynthesisRecord {
  std::string source;
  std::string raw_lq_path;
  std::string linear_hq_path;
  std::string srgb_hq_path;
  std::string raw_detail_path;  // empty unless detail pairs were requested
  CaptureMetadata meta;
  PtpParams ptp;
  DegradationPlan degradation;
  std::uint64_t seed = 0;
  std::string content_hash;
  std::string pipeline_version = kPipelineVersion;
};

nlohmann::json record_to_json(const SynthesisRecord& r);

struct SynthesisPair {
  RawImage raw_lq;        // degraded, mosaiced, noisy
  LinearImage linear_hq;  // ground truth
  SrgbImage srgb_lq;      // detail-degraded sRGB before the inverse chain
  SynthesisRecord record;
};

/// LQ: mns(ptp_inverse(degrade_detail(hq))); GT: ptp_inverse(hq); both with the
/// same sampled PtpParams. All randomness derives from `seed`.
SynthesisPair synthesize_pair(const SrgbImage& hq, const SynthesisOptions& opts,
                              BayerPattern pattern, std::uint64_t seed);

struct DetailPair {
  RawImage raw_detail;
  LinearImage linear_hq;
  PtpParams ptp;
};

/// Pairs for a demosaic/denoise network: mns(ptp_inverse(hq)), no detail
/// degradation. PtpParams and noise parameters match synthesize_pair for the same seed.
DetailPair synthesize_ddnet_pair(const SrgbImage& hq, const SynthesisOptions& opts,
                                 BayerPattern pattern, std::uint64_t seed);

struct FeedForwardOptions {
  bool prefilter = false;
};

/// Malvar demosaic followed by ptp_forward with the RAW's own metadata.
SrgbImage feed_forward_isp(const RawImage& raw, FeedForwardOptions opts = {});
SrgbImage feed_forward_isp(const RawImage& raw, const PtpParams& p, FeedForwardOptions opts = {});
/// Loads RAW plus sidecar; a missing sidecar is an error.
SrgbImage feed_forward_isp(const std::filesystem::path& raw_path, FeedForwardOptions opts = {});

struct RunConfig {
  std::filesystem::path src_dir;
  std::filesystem::path out_dir;
  SynthesisOptions options;
  std::uint64_t master_seed = 0;
  /// Fixed pattern; round-robin over RGGB, BGGR, GRBG, GBRG when empty.
  std::optional<BayerPattern> pattern;
  bool ddnet_pairs = false;
};

struct Manifest {
  std::vector<SynthesisRecord> records;
  std::uint64_t master_seed = 0;
  std::string source_dataset;
  int failure_count = 0;
  std::vector<std::string> failed_sources;
  int resumed_count = 0;
};

nlohmann::json manifest_to_json(const Manifest& m);

/// Per-record seed for source index `i`.
std::uint64_t record_seed(std::uint64_t master_seed, std::size_t index);

/// One record per readable PNG in src_dir (sorted by name); writes
/// <out>/<stem>/... and <out>/manifest.json. Completed records whose content
/// hash matches are reused.
Manifest run_manifest(const RunConfig& cfg);

/// FNV-1a 64-bit.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL);

}  // namespace rawforge
