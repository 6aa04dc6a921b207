#include "rawforge/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <mutex>
#include <set>

#include "rawforge/image_io.hpp"
#include "rawforge/parallel.hpp"

namespace rawforge {

namespace {

using nlohmann::json;

// Independent random streams of one record.
enum Stream : std::uint64_t {
  kStreamPtp = 1,
  kStreamNoiseParams = 2,
  kStreamNoiseField = 3,
  kStreamDegrade = 4,
  kStreamDetailNoise = 5,
};

constexpr std::array<BayerPattern, 4> kRoundRobin = {BayerPattern::RGGB, BayerPattern::BGGR,
                                                     BayerPattern::GRBG, BayerPattern::GBRG};

NoiseParams draw_noise(const SynthesisOptions& opts, std::uint64_t seed) {
  if (opts.noise_override) return *opts.noise_override;
  Rng rng(derive_seed(seed, kStreamNoiseParams));
  return sample_noise_params(rng, opts.noise);
}

PtpParams draw_ptp(const SynthesisOptions& opts, std::uint64_t seed) {
  Rng rng(derive_seed(seed, kStreamPtp));
  return sample_ptp_params(rng, opts.ptp);
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// Drop a trailing row/column so every image covers whole Bayer quads.
SrgbImage crop_even(const SrgbImage& img) {
  const int w = img.width() & ~1;
  const int h = img.height() & ~1;
  if (w < 2 || h < 2) throw ValidationError("source image smaller than 2x2");
  if (w == img.width() && h == img.height()) return img;
  return crop(img, 0, 0, w, h);
}

bool record_complete(const fs::path& dir, const std::string& hash) {
  const fs::path rec = dir / "record.json";
  if (!fs::exists(rec)) return false;
  try {
    const json j = read_json_file(rec);
    if (j.value("content_hash", std::string()) != hash) return false;
    for (const char* key : {"raw_lq_path", "linear_hq_path", "srgb_hq_path", "raw_detail_path"}) {
      const std::string rel = j.value(key, std::string());
      if (!rel.empty() && !fs::exists(dir.parent_path() / rel)) return false;
    }
    return true;
  } catch (const std::exception&) {
    return false;
  }
}

SynthesisRecord record_from_json(const json& j) {
  SynthesisRecord r;
  r.source = j.at("source").get<std::string>();
  r.raw_lq_path = j.at("raw_lq_path").get<std::string>();
  r.linear_hq_path = j.at("linear_hq_path").get<std::string>();
  r.srgb_hq_path = j.at("srgb_hq_path").get<std::string>();
  r.raw_detail_path = j.value("raw_detail_path", std::string());
  r.meta = metadata_from_json(j.at("meta"));
  r.ptp = ptp_params_from_json(j.at("ptp"));
  r.degradation = plan_from_json(j.at("degradation"));
  r.seed = j.at("seed").get<std::uint64_t>();
  r.content_hash = j.at("content_hash").get<std::string>();
  r.pipeline_version = j.at("pipeline_version").get<std::string>();
  return r;
}

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

PtpParams sample_ptp_params(Rng& rng, const PtpSampling& s) {
  if (!(s.max_gain >= 1.0)) throw ValidationError("max_gain must be >= 1");
  const double lg = std::log(s.max_gain);
  PtpParams p;
  p.wb_gains = {std::exp(rng.uniform(-lg, lg)), 1.0, std::exp(rng.uniform(-lg, lg))};
  const double t = rng.uniform();
  for (int r = 0; r < 3; ++r) {
    double sum = 0.0;
    for (int c = 0; c < 3; ++c) {
      const double v = (1.0 - t) * kIdentity3[3 * r + c] + t * s.camera_ccm[3 * r + c];
      p.ccm[3 * r + c] = v;
      sum += v;
    }
    for (int c = 0; c < 3; ++c) p.ccm[3 * r + c] /= sum;
  }
  p.gamma = s.gamma;
  p.tone = s.tone;
  p.validate();
  return p;
}

RawImage mns(const LinearImage& x, BayerPattern pattern, const NoiseParams& p,
             std::uint64_t noise_seed, CaptureMetadata meta) {
  return add_shot_read_noise(mosaic(x, pattern, meta), p, noise_seed);
}

json record_to_json(const SynthesisRecord& r) {
  json ptp;
  ptp_params_to_json(r.ptp, ptp);
  json j = {{"source", r.source},
            {"raw_lq_path", r.raw_lq_path},
            {"linear_hq_path", r.linear_hq_path},
            {"srgb_hq_path", r.srgb_hq_path},
            {"meta", metadata_to_json(r.meta)},
            {"ptp", ptp},
            {"degradation", plan_to_json(r.degradation)},
            {"seed", r.seed},
            {"content_hash", r.content_hash},
            {"pipeline_version", r.pipeline_version}};
  if (!r.raw_detail_path.empty()) j["raw_detail_path"] = r.raw_detail_path;
  return j;
}

SynthesisPair synthesize_pair(const SrgbImage& hq, const SynthesisOptions& opts,
                              BayerPattern pattern, std::uint64_t seed) {
  const PtpParams ptp = draw_ptp(opts, seed);
  const NoiseParams noise = draw_noise(opts, seed);
  DegradeResult lq = degrade_detail(hq, opts.degradation, derive_seed(seed, kStreamDegrade));
  if (lq.image.width() % 2 != 0 || lq.image.height() % 2 != 0) {
    throw ValidationError("degraded image must have even dimensions");
  }
  CaptureMetadata meta;
  meta.wb_gains = ptp.wb_gains;
  meta.ccm = ptp.ccm;
  const LinearImage linear_lq = ptp_inverse(lq.image, ptp);
  RawImage raw = mns(linear_lq, pattern, noise, derive_seed(seed, kStreamNoiseField), meta);

  SynthesisRecord rec;
  rec.meta = raw.meta;
  rec.ptp = ptp;
  rec.degradation = std::move(lq.plan);
  rec.seed = seed;
  return {std::move(raw), ptp_inverse(hq, ptp), std::move(lq.image), std::move(rec)};
}

DetailPair synthesize_ddnet_pair(const SrgbImage& hq, const SynthesisOptions& opts,
                                 BayerPattern pattern, std::uint64_t seed) {
  const PtpParams ptp = draw_ptp(opts, seed);
  const NoiseParams noise = draw_noise(opts, seed);
  CaptureMetadata meta;
  meta.wb_gains = ptp.wb_gains;
  meta.ccm = ptp.ccm;
  LinearImage linear = ptp_inverse(hq, ptp);
  RawImage raw = mns(linear, pattern, noise, derive_seed(seed, kStreamDetailNoise), meta);
  return {std::move(raw), std::move(linear), ptp};
}

SrgbImage feed_forward_isp(const RawImage& raw, FeedForwardOptions opts) {
  return feed_forward_isp(raw, ptp_params_from(raw.meta), opts);
}

SrgbImage feed_forward_isp(const RawImage& raw, const PtpParams& p, FeedForwardOptions opts) {
  DemosaicOptions d;
  d.prefilter = opts.prefilter;
  return ptp_forward(demosaic_malvar(raw, d), p);
}

SrgbImage feed_forward_isp(const fs::path& raw_path, FeedForwardOptions opts) {
  const fs::path side = sidecar_path(raw_path);
  if (!fs::exists(side)) {
    throw IoError("feed-forward ISP needs metadata: " + side.string() + " not found");
  }
  const json j = read_json_file(side);
  const RawImage raw = load_raw(raw_path);
  PtpParams p = ptp_params_from(raw.meta);
  if (j.contains("gamma") || j.contains("tone")) p = ptp_params_from_json(j);
  return feed_forward_isp(raw, p, opts);
}

std::uint64_t record_seed(std::uint64_t master_seed, std::size_t index) {
  return derive_seed(master_seed, 0x5eed0000ULL + index);
}

SynthesisOptions synthesis_options_from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("synthesis config must be a JSON object");
  SynthesisOptions o;
  if (j.contains("stages")) {
    o.degradation = degradation_config_from_json(j);
    return o;
  }
  for (const auto& [key, value] : j.items()) {
    if (key != "degradation" && key != "noise" && key != "noise_override" && key != "ptp") {
      throw ValidationError("unknown synthesis config key: " + key);
    }
  }
  try {
    if (j.contains("degradation")) o.degradation = degradation_config_from_json(j.at("degradation"));
    if (j.contains("noise")) {
      const json& n = j.at("noise");
      if (n.contains("shot_min")) o.noise.shot_log_min = std::log(n.at("shot_min").get<double>());
      if (n.contains("shot_max")) o.noise.shot_log_max = std::log(n.at("shot_max").get<double>());
      o.noise.read_slope = n.value("read_slope", o.noise.read_slope);
      o.noise.read_intercept = n.value("read_intercept", o.noise.read_intercept);
      o.noise.read_sigma = n.value("read_sigma", o.noise.read_sigma);
      o.noise.validate();
    }
    if (j.contains("noise_override")) {
      const json& n = j.at("noise_override");
      NoiseParams p{n.at("shot").get<double>(), n.at("read").get<double>()};
      p.validate();
      o.noise_override = p;
    }
    if (j.contains("ptp")) {
      const json& p = j.at("ptp");
      o.ptp.max_gain = p.value("max_gain", o.ptp.max_gain);
      if (!(o.ptp.max_gain >= 1.0)) throw ValidationError("ptp.max_gain must be >= 1");
      if (p.contains("camera_ccm")) o.ptp.camera_ccm = p.at("camera_ccm").get<Mat3>();
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("invalid synthesis config: ") + e.what());
  }
  return o;
}

json synthesis_options_to_json(const SynthesisOptions& o) {
  json j = {{"degradation", degradation_config_to_json(o.degradation)},
            {"noise",
             {{"shot_min", std::exp(o.noise.shot_log_min)},
              {"shot_max", std::exp(o.noise.shot_log_max)},
              {"read_slope", o.noise.read_slope},
              {"read_intercept", o.noise.read_intercept},
              {"read_sigma", o.noise.read_sigma}}},
            {"ptp", {{"max_gain", o.ptp.max_gain}, {"camera_ccm", o.ptp.camera_ccm}}}};
  if (o.noise_override) {
    j["noise_override"] = {{"shot", o.noise_override->shot}, {"read", o.noise_override->read}};
  }
  return j;
}

json manifest_to_json(const Manifest& m) {
  json records = json::array();
  for (const auto& r : m.records) records.push_back(record_to_json(r));
  return {{"records", records},
          {"master_seed", m.master_seed},
          {"source_dataset", m.source_dataset},
          {"failure_count", m.failure_count},
          {"failed_sources", m.failed_sources},
          {"pipeline_version", kPipelineVersion}};
}

Manifest run_manifest(const RunConfig& cfg) {
  if (!fs::is_directory(cfg.src_dir)) throw IoError("source directory not found: " + cfg.src_dir.string());
  cfg.options.degradation.validate();
  cfg.options.noise.validate();
  fs::create_directories(cfg.out_dir);

  std::vector<fs::path> sources;
  for (const auto& entry : fs::directory_iterator(cfg.src_dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".png") sources.push_back(entry.path());
  }
  std::sort(sources.begin(), sources.end());

  Manifest manifest;
  manifest.master_seed = cfg.master_seed;
  manifest.source_dataset = fs::absolute(cfg.src_dir).lexically_normal().filename().string();
  if (manifest.source_dataset.empty()) {
    manifest.source_dataset = fs::absolute(cfg.src_dir).lexically_normal().parent_path().filename().string();
  }

  std::set<std::uint64_t> seeds;
  for (std::size_t i = 0; i < sources.size(); ++i) {
    if (!seeds.insert(record_seed(cfg.master_seed, i)).second) {
      throw ValidationError("record seed collision in manifest");
    }
  }

  const std::string config_text = synthesis_options_to_json(cfg.options).dump();
  std::vector<std::optional<SynthesisRecord>> results(sources.size());
  std::vector<std::string> errors(sources.size());
  std::vector<std::uint8_t> resumed(sources.size(), 0);
  std::mutex log_mutex;

  // Records are spread over workers; pixel loops inside run inline.
  parallel_for(sources.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const fs::path& src = sources[i];
      const std::string stem = src.stem().string();
      const fs::path dir = cfg.out_dir / stem;
      const std::uint64_t seed = record_seed(cfg.master_seed, i);
      const BayerPattern pattern = cfg.pattern ? *cfg.pattern : kRoundRobin[i % kRoundRobin.size()];
      try {
        const std::string bytes = read_file_bytes(src);
        std::uint64_t h = fnv1a64(bytes);
        h = fnv1a64(config_text, h);
        h = fnv1a64(std::to_string(seed) + "|" + pattern_name(pattern) + "|" +
                        (cfg.ddnet_pairs ? "ddnet" : "") + "|" + kPipelineVersion, h);
        const std::string hash = hex64(h);
        if (record_complete(dir, hash)) {
          results[i] = record_from_json(read_json_file(dir / "record.json"));
          resumed[i] = 1;
          continue;
        }
        const SrgbImage hq = crop_even(load_srgb(src));
        SynthesisPair pair = synthesize_pair(hq, cfg.options, pattern, seed);
        fs::create_directories(dir);
        SynthesisRecord& rec = pair.record;
        rec.source = src.filename().string();
        rec.raw_lq_path = stem + "/raw_lq.rfim";
        rec.linear_hq_path = stem + "/linear_hq.rfim";
        rec.srgb_hq_path = stem + "/srgb_hq.png";
        rec.content_hash = hash;
        save_image(pair.raw_lq, cfg.out_dir / rec.raw_lq_path);
        {
          // Sidecar also carries the curve selection so the ISP can be replayed.
          json side = metadata_to_json(pair.raw_lq.meta);
          ptp_params_to_json(rec.ptp, side);
          write_json_file(side, sidecar_path(cfg.out_dir / rec.raw_lq_path));
        }
        save_image(pair.linear_hq, cfg.out_dir / rec.linear_hq_path);
        save_image(hq, cfg.out_dir / rec.srgb_hq_path, 16);
        if (cfg.ddnet_pairs) {
          const DetailPair detail = synthesize_ddnet_pair(hq, cfg.options, pattern, seed);
          rec.raw_detail_path = stem + "/raw_detail.rfim";
          save_image(detail.raw_detail, cfg.out_dir / rec.raw_detail_path);
        }
        json rec_json = record_to_json(rec);
        write_json_file(rec_json, dir / "record.json");
        results[i] = std::move(rec);
      } catch (const std::exception& e) {
        errors[i] = e.what();
        std::lock_guard lock(log_mutex);
        std::cerr << "synth: skipping " << src.filename().string() << ": " << e.what() << "\n";
      }
    }
  });

  for (std::size_t i = 0; i < sources.size(); ++i) {
    if (results[i]) {
      manifest.records.push_back(*results[i]);
      manifest.resumed_count += resumed[i];
    } else {
      ++manifest.failure_count;
      manifest.failed_sources.push_back(sources[i].filename().string());
    }
  }
  write_json_file(manifest_to_json(manifest), cfg.out_dir / "manifest.json");
  return manifest;
}

}  // namespace rawforge
