#include <doctest.h>

#include <fstream>
#include <set>

#include "rawforge/cfa.hpp"
#include "rawforge/image_io.hpp"
#include "rawforge/metrics.hpp"
#include "rawforge/parallel.hpp"
#include "rawforge/scenes.hpp"
#include "rawforge/synth.hpp"
#include "support.hpp"

using namespace rawforge;
namespace fs = std::filesystem;

namespace {

SynthesisOptions clean_options() {
  SynthesisOptions o;
  o.degradation = DegradationConfig::identity();
  o.noise_override = NoiseParams{0.0, 0.0};
  return o;
}

std::map<std::string, std::string> tree_bytes(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = read_file_bytes(e.path());
  }
  return out;
}

void write_corpus(const fs::path& dir, int n, int w, int h) {
  fs::create_directories(dir);
  for (int i = 0; i < n; ++i) {
    save_image(textured_scene(500 + i, w, h), dir / ("img" + std::to_string(i) + ".png"), 8);
  }
}

}  // namespace

TEST_CASE("mns with zero noise is the mosaic") {
  const LinearImage x = band_limited_scene(1, 20, 14);
  for (BayerPattern p : {BayerPattern::RGGB, BayerPattern::BGGR, BayerPattern::GRBG, BayerPattern::GBRG}) {
    const RawImage a = mns(x, p, {0.0, 0.0}, 3);
    CHECK(a.plane == mosaic(x, p).plane);
    CHECK(a.meta.pattern == p);
  }
  const RawImage n1 = mns(x, BayerPattern::RGGB, {1e-3, 1e-4}, 3);
  const RawImage n2 = mns(x, BayerPattern::RGGB, {1e-3, 1e-4}, 4);
  CHECK_FALSE(n1.plane == n2.plane);
  CHECK(n1.plane == mns(x, BayerPattern::RGGB, {1e-3, 1e-4}, 3).plane);
}

TEST_CASE("sampled PTP parameters") {
  Rng rng(2);
  for (int i = 0; i < 200; ++i) {
    const PtpParams p = sample_ptp_params(rng);
    CHECK_NOTHROW(p.validate());
    CHECK(p.wb_gains[1] == 1.0);
    CHECK(p.wb_gains[0] >= 1.0 / 1.4 - 1e-12);
    CHECK(p.wb_gains[0] <= 1.4 + 1e-12);
    CHECK(p.wb_gains[2] >= 1.0 / 1.4 - 1e-12);
    CHECK(p.wb_gains[2] <= 1.4 + 1e-12);
  }
}

TEST_CASE("clean synthesis reproduces the source") {
  const SynthesisOptions opts = clean_options();
  for (int s = 0; s < 3; ++s) {
    const SrgbImage hq = textured_scene(40 + s, 128, 128);
    const SynthesisPair pair = synthesize_pair(hq, opts, BayerPattern::RGGB, 1000 + s);
    CHECK(pair.linear_hq.r == ptp_inverse(hq, pair.record.ptp).r);
    CHECK(pair.raw_lq.plane == mosaic(ptp_inverse(pair.srgb_lq, pair.record.ptp), BayerPattern::RGGB).plane);
    CHECK(pair.raw_lq.meta.wb_gains == pair.record.ptp.wb_gains);
    CHECK(pair.raw_lq.meta.ccm == pair.record.ptp.ccm);
    CHECK(psnr(demosaic_malvar(pair.raw_lq), pair.linear_hq).db >= 35.0);
    CHECK(psnr(feed_forward_isp(pair.raw_lq, pair.record.ptp), hq).db >= 30.0);
  }
}

TEST_CASE("lq and gt share PTP parameters") {
  SynthesisOptions opts = clean_options();
  opts.degradation = DegradationConfig::standard();
  const SrgbImage hq = textured_scene(9, 96, 64);
  const SynthesisPair pair = synthesize_pair(hq, opts, BayerPattern::GBRG, 77);
  // LQ raw is the mosaic of the inverse chain applied to the degraded sRGB.
  const LinearImage lq_linear = ptp_inverse(pair.srgb_lq, pair.record.ptp);
  CHECK(pair.raw_lq.plane == mosaic(lq_linear, BayerPattern::GBRG).plane);
  CHECK(pair.linear_hq.r == ptp_inverse(hq, pair.record.ptp).r);

  const DetailPair d = synthesize_ddnet_pair(hq, clean_options(), BayerPattern::GBRG, 77);
  CHECK(d.ptp == pair.record.ptp);
  CHECK(d.raw_detail.plane == mosaic(d.linear_hq, BayerPattern::GBRG).plane);

  const SynthesisPair other = synthesize_pair(hq, SynthesisOptions{}, BayerPattern::GBRG, 78);
  const SynthesisPair again = synthesize_pair(hq, SynthesisOptions{}, BayerPattern::GBRG, 78);
  CHECK(other.raw_lq.plane == again.raw_lq.plane);
  CHECK(other.record.meta.noise.shot > 0.0);
}

TEST_CASE("ddnet pairs at default noise demosaic well") {
  double total = 0.0;
  const int n = 6;
  for (int s = 0; s < n; ++s) {
    const SrgbImage hq = textured_scene(60 + s, 96, 96);
    const DetailPair d = synthesize_ddnet_pair(hq, SynthesisOptions{}, BayerPattern::RGGB, 2000 + s);
    total += psnr(demosaic_malvar(d.raw_detail), d.linear_hq).db;
  }
  CHECK(total / n >= 28.0);
}

TEST_CASE("feed-forward ISP") {
  CaptureMetadata meta;
  meta.pattern = BayerPattern::BGGR;
  const RawImage flat(ImagePlane(16, 16, 0.25f), meta);
  const SrgbImage out = feed_forward_isp(flat);
  const Vec3 expect = ptp_forward_pixel({0.25, 0.25, 0.25}, ptp_params_from(meta));
  CHECK(testing::max_abs_diff(out.r, ImagePlane(16, 16, static_cast<float>(expect[0]))) < 1e-6);

  testing::TempDir tmp;
  save_image(flat, tmp / "a.rfim");
  fs::remove(sidecar_path(tmp / "a.rfim"));
  CHECK_THROWS_AS(feed_forward_isp(tmp / "a.rfim"), IoError);
  write_json_file(metadata_to_json(meta), sidecar_path(tmp / "a.rfim"));
  CHECK(testing::max_abs_diff(feed_forward_isp(tmp / "a.rfim").g, out.g) == 0.0);
}

TEST_CASE("synthesis options json") {
  SynthesisOptions o;
  o.noise.read_sigma = 0.05;
  o.noise_override = NoiseParams{1e-3, 2e-4};
  o.ptp.max_gain = 1.2;
  const SynthesisOptions back = synthesis_options_from_json(synthesis_options_to_json(o));
  CHECK(synthesis_options_to_json(back) == synthesis_options_to_json(o));
  CHECK(back.noise_override->read == 2e-4);

  const SynthesisOptions bare = synthesis_options_from_json(degradation_config_to_json(DegradationConfig::identity()));
  CHECK(degradation_config_to_json(bare.degradation) == degradation_config_to_json(DegradationConfig::identity()));
  CHECK_THROWS_AS(synthesis_options_from_json({{"bogus", 1}}), ValidationError);
}

TEST_CASE("record seeds") {
  std::set<std::uint64_t> seen;
  for (std::size_t i = 0; i < 10000; ++i) seen.insert(record_seed(1, i));
  CHECK(seen.size() == 10000);
  CHECK(record_seed(1, 0) != record_seed(2, 0));
}

TEST_CASE("manifest runs") {
  testing::TempDir tmp;
  write_corpus(tmp / "src", 4, 48, 34);
  RunConfig cfg;
  cfg.src_dir = tmp / "src";
  cfg.out_dir = tmp / "out";
  cfg.master_seed = 11;
  cfg.ddnet_pairs = true;
  const Manifest m = run_manifest(cfg);
  REQUIRE(m.records.size() == 4);
  CHECK(m.failure_count == 0);
  std::set<BayerPattern> patterns;
  for (const auto& r : m.records) {
    patterns.insert(r.meta.pattern);
    CHECK(fs::exists(cfg.out_dir / r.raw_lq_path));
    CHECK(fs::exists(sidecar_path(cfg.out_dir / r.raw_lq_path)));
    CHECK(fs::exists(cfg.out_dir / r.raw_detail_path));
    CHECK(load_raw(cfg.out_dir / r.raw_lq_path).meta.pattern == r.meta.pattern);
  }
  CHECK(patterns.size() == 4);
  CHECK(fs::exists(cfg.out_dir / "manifest.json"));

  const auto first = tree_bytes(cfg.out_dir);
  const Manifest again = run_manifest(cfg);
  CHECK(again.resumed_count == 4);
  CHECK(tree_bytes(cfg.out_dir) == first);

  cfg.out_dir = tmp / "fresh";
  set_thread_count(1);
  run_manifest(cfg);
  set_thread_count(0);
  CHECK(tree_bytes(cfg.out_dir) == first);

  // A deleted output is regenerated identically; a changed config is not reused.
  cfg.out_dir = tmp / "out";
  fs::remove(cfg.out_dir / "img2" / "raw_lq.rfim");
  CHECK(run_manifest(cfg).resumed_count == 3);
  CHECK(tree_bytes(cfg.out_dir) == first);
  cfg.master_seed = 12;
  CHECK(run_manifest(cfg).resumed_count == 0);
}

TEST_CASE("manifest skips unreadable sources") {
  testing::TempDir tmp;
  write_corpus(tmp / "src", 2, 32, 32);
  std::ofstream(tmp / "src" / "broken.png") << "not a png";
  RunConfig cfg;
  cfg.src_dir = tmp / "src";
  cfg.out_dir = tmp / "out";
  cfg.pattern = BayerPattern::GRBG;
  const Manifest m = run_manifest(cfg);
  CHECK(m.records.size() == 2);
  CHECK(m.failure_count == 1);
  CHECK(m.failed_sources == std::vector<std::string>{"broken.png"});
  for (const auto& r : m.records) CHECK(r.meta.pattern == BayerPattern::GRBG);
  const auto j = read_json_file(cfg.out_dir / "manifest.json");
  CHECK(j.at("failure_count") == 1);

  cfg.src_dir = tmp / "missing";
  CHECK_THROWS_AS(run_manifest(cfg), IoError);
}
