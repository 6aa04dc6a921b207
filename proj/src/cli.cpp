#include "rawforge/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstring>
#include <filesystem>
#include <functional>
#include <map>

#include <CLI11.hpp>
#include <json.hpp>

#include "rawforge/cfa.hpp"
#include "rawforge/degrade.hpp"
#include "rawforge/image_io.hpp"
#include "rawforge/metrics.hpp"
#include "rawforge/noise.hpp"
#include "rawforge/parallel.hpp"
#include "rawforge/ptp.hpp"
#include "rawforge/selftest.hpp"
#include "rawforge/synth.hpp"

namespace rawforge {

using nlohmann::json;

namespace {

class Log {
 public:
  Log(const GlobalOptions& g, std::ostream& err) : g_(g), err_(err) {}
  template <class... T>
  void info(const T&... parts) {
    if (g_.log_level != LogLevel::Quiet) ((err_ << parts), ...) << "\n";
  }
  template <class... T>
  void debug(const T&... parts) {
    if (g_.log_level == LogLevel::Debug) ((err_ << parts), ...) << "\n";
  }

 private:
  const GlobalOptions& g_;
  std::ostream& err_;
};

void print_json(std::ostream& out, const json& j) { out << j.dump(2) << "\n"; }

PtpParams load_ptp_params(const std::string& meta_path) {
  return ptp_params_from_json(read_json_file(meta_path));
}

std::string meta_for(const std::string& explicit_meta, const std::string& image) {
  if (!explicit_meta.empty()) return explicit_meta;
  return sidecar_path(image).string();
}

// Fraction of pixels with some channel exactly at 0 or 1.
double clipped_fraction(const std::vector<const ImagePlane*>& planes) {
  const std::size_t n = planes.front()->size();
  std::size_t hit = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (const ImagePlane* p : planes) {
      const float v = p->samples()[i];
      if (v == 0.0f || v == 1.0f) {
        ++hit;
        break;
      }
    }
  }
  return static_cast<double>(hit) / static_cast<double>(n);
}

ImagePlane luma(const ImagePlane& r, const ImagePlane& g, const ImagePlane& b) {
  ImagePlane y(r.width(), r.height());
  for (std::size_t i = 0; i < r.size(); ++i) {
    y.samples()[i] = static_cast<float>(0.299 * r.samples()[i] + 0.587 * g.samples()[i] + 0.114 * b.samples()[i]);
  }
  return y;
}

std::vector<ImagePlane> planes_of(const AnyImage& img) {
  return std::visit(
      [](const auto& im) -> std::vector<ImagePlane> {
        using T = std::decay_t<decltype(im)>;
        if constexpr (std::is_same_v<T, RawImage>) {
          return {im.plane};
        } else {
          return {im.r, im.g, im.b};
        }
      },
      img);
}

LatentBatch read_latents(const std::vector<std::string>& paths) {
  std::vector<float> all;
  int channels = 0, height = 0, width = 0;
  for (const auto& path : paths) {
    const std::string bytes = read_file_bytes(path);
    int c = 1, h = 1, w = 0;
    std::vector<float> samples;
    if (bytes.size() >= 4 && bytes.compare(0, 4, "RFIM") == 0) {
      FloatContainer fc = read_float_container(path);
      c = static_cast<int>(fc.channels);
      h = static_cast<int>(fc.height);
      w = static_cast<int>(fc.width);
      samples = std::move(fc.samples);
    } else {
      // Headerless little-endian float32.
      if (bytes.empty() || bytes.size() % 4 != 0) throw ValidationError("not a float32 file: " + path);
      samples.resize(bytes.size() / 4);
      std::memcpy(samples.data(), bytes.data(), bytes.size());
      w = static_cast<int>(samples.size());
    }
    if (channels == 0) {
      channels = c;
      height = h;
      width = w;
    } else if (c != channels || h != height || w != width) {
      throw ValidationError("latent inputs differ in shape: " + path);
    }
    all.insert(all.end(), samples.begin(), samples.end());
  }
  return LatentBatch(static_cast<int>(paths.size()), channels, height, width, std::move(all));
}

struct Context {
  GlobalOptions global;
  std::ostream& out;
  std::ostream& err;
  Log log;

  Context(std::ostream& o, std::ostream& e) : out(o), err(e), log(global, e) {}

  SynthesisOptions synthesis_options() const {
    if (!global.config_path) return {};
    return synthesis_options_from_json(read_json_file(*global.config_path));
  }

  DegradationConfig degradation_config() const {
    if (!global.config_path) return DegradationConfig::standard();
    const json j = read_json_file(*global.config_path);
    if (j.is_object() && j.contains("degradation")) return degradation_config_from_json(j.at("degradation"));
    return degradation_config_from_json(j);
  }
};

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Context ctx(out, err);
  GlobalOptions& g = ctx.global;
  std::function<int()> action;

  CLI::App app{"RAW-domain dataset synthesis, ISP and evaluation tools", "rawforge"};
  app.fallthrough();
  app.require_subcommand(1);
  std::string log_level = "info";
  int threads = 0;
  std::string config;
  app.add_option("--seed", g.seed, "Master / operation seed");
  app.add_option("--threads", threads, "Worker threads (default: RAWFORGE_THREADS or all cores)")
      ->check(CLI::PositiveNumber);
  app.add_option("--log-level", log_level, "quiet, info or debug")
      ->check(CLI::IsMember({"quiet", "info", "debug"}));
  app.add_option("--config", config, "JSON configuration file");

  // synth run
  auto* synth = app.add_subcommand("synth", "Dataset synthesis");
  synth->require_subcommand(1);
  auto* synth_run = synth->add_subcommand("run", "Synthesize LQ-RAW / HQ-linear pairs for a directory of PNGs");
  std::string src, out_dir, pattern;
  bool round_robin = false, ddnet = false;
  double scale = 0.0;
  synth_run->add_option("--src", src, "Source directory of sRGB PNGs")->required();
  synth_run->add_option("--out", out_dir, "Output directory")->required();
  auto* pattern_opt = synth_run->add_option("--pattern", pattern, "Fixed Bayer pattern");
  synth_run->add_flag("--round-robin", round_robin, "Cycle RGGB, BGGR, GRBG, GBRG (default)")->excludes(pattern_opt);
  synth_run->add_flag("--ddnet-pairs", ddnet, "Also write mns(ptp_inverse(hq)) detail pairs");
  synth_run->add_option("--scale", scale, "LQ/HQ size ratio")->check(CLI::PositiveNumber);
  synth_run->callback([&] {
    action = [&] {
      RunConfig cfg;
      cfg.src_dir = src;
      cfg.out_dir = out_dir;
      cfg.options = ctx.synthesis_options();
      if (scale > 0.0) cfg.options.degradation.final_scale = scale;
      cfg.master_seed = g.seed;
      if (!pattern.empty()) cfg.pattern = parse_pattern(pattern);
      cfg.ddnet_pairs = ddnet;
      const Manifest m = run_manifest(cfg);
      ctx.log.info("synth: ", m.records.size(), " records (", m.resumed_count, " reused), ", m.failure_count,
                   " failed");
      print_json(out, {{"manifest", (std::filesystem::path(out_dir) / "manifest.json").string()},
                       {"records", m.records.size()},
                       {"resumed", m.resumed_count},
                       {"failure_count", m.failure_count},
                       {"failed_sources", m.failed_sources}});
      return m.failure_count == 0 ? kExitOk : kExitIo;
    };
  });

  // degrade
  auto* degrade = app.add_subcommand("degrade", "Blur / resize / JPEG detail degradation of an sRGB image");
  std::string in_path, out_path;
  int bitdepth = 8;
  degrade->add_option("--in", in_path, "Input sRGB image")->required();
  degrade->add_option("--out", out_path, "Output image (.png or .rfim)")->required();
  degrade->add_option("--scale", scale, "Output size ratio")->check(CLI::PositiveNumber);
  degrade->add_option("--bitdepth", bitdepth, "PNG bit depth")->check(CLI::IsMember({8, 16}));
  degrade->callback([&] {
    action = [&] {
      DegradationConfig cfg = ctx.degradation_config();
      if (scale > 0.0) cfg.final_scale = scale;
      const SrgbImage hq = load_srgb(in_path);
      const DegradeResult r = degrade_detail(hq, cfg, g.seed);
      save_image(r.image, out_path, bitdepth);
      print_json(out, {{"output", out_path}, {"plan", plan_to_json(r.plan)}});
      return kExitOk;
    };
  });

  // isp forward | invert
  auto* isp = app.add_subcommand("isp", "Post tone processing and its inverse");
  isp->require_subcommand(1);
  std::string meta_path;
  int isp_bitdepth = 16;
  auto* isp_fwd = isp->add_subcommand("forward", "Linear RGB -> sRGB");
  auto* isp_inv = isp->add_subcommand("invert", "sRGB -> linear RGB");
  for (auto* sc : {isp_fwd, isp_inv}) {
    sc->add_option("--in", in_path, "Input image")->required();
    sc->add_option("--out", out_path, "Output image (.png or .rfim)")->required();
    sc->add_option("--meta", meta_path, "Metadata JSON (default: the input's sidecar)");
    sc->add_option("--bitdepth", isp_bitdepth, "PNG bit depth")->check(CLI::IsMember({8, 16}));
  }
  isp_fwd->callback([&] {
    action = [&] {
      const LinearImage x = load_linear(in_path);
      const PtpParams p = load_ptp_params(meta_for(meta_path, in_path));
      save_image(ptp_forward(x, p), out_path, isp_bitdepth);
      print_json(out, {{"output", out_path}});
      return kExitOk;
    };
  });
  isp_inv->callback([&] {
    action = [&] {
      const SrgbImage y = load_srgb(in_path);
      const PtpParams p = load_ptp_params(meta_for(meta_path, in_path));
      save_image(ptp_inverse(y, p), out_path, isp_bitdepth);
      print_json(out, {{"output", out_path}});
      return kExitOk;
    };
  });

  // mosaic
  auto* mosaic_cmd = app.add_subcommand("mosaic", "Sample a linear RGB image onto a Bayer mosaic");
  std::string mosaic_pattern = "rggb";
  mosaic_cmd->add_option("--in", in_path, "Linear RGB input")->required();
  mosaic_cmd->add_option("--out", out_path, "RAW output (.png or .rfim; sidecar written alongside)")->required();
  mosaic_cmd->add_option("--pattern", mosaic_pattern, "rggb, bggr, grbg or gbrg");
  mosaic_cmd->add_option("--meta", meta_path, "Metadata JSON whose gains and ccm are carried over");
  mosaic_cmd->callback([&] {
    action = [&] {
      const BayerPattern p = parse_pattern(mosaic_pattern);
      CaptureMetadata meta;
      if (!meta_path.empty()) meta = metadata_from_json(read_json_file(meta_path));
      const LinearImage x = load_linear(in_path);
      save_image(mosaic(x, p, meta), out_path);
      print_json(out, {{"output", out_path}, {"pattern", pattern_name(p)}});
      return kExitOk;
    };
  });

  // demosaic
  auto* demosaic_cmd = app.add_subcommand("demosaic", "Interpolate a Bayer RAW to linear RGB");
  std::string method = "malvar";
  bool prefilter = false;
  demosaic_cmd->add_option("--in", in_path, "RAW input (with sidecar)")->required();
  demosaic_cmd->add_option("--out", out_path, "Linear RGB output")->required();
  demosaic_cmd->add_option("--method", method, "bilinear or malvar")
      ->check(CLI::IsMember({"bilinear", "malvar"}));
  demosaic_cmd->add_flag("--prefilter", prefilter, "Same-colour Gaussian prefilter");
  demosaic_cmd->callback([&] {
    action = [&] {
      const RawImage raw = load_raw(in_path);
      const DemosaicOptions opts{prefilter};
      const LinearImage rgb = method == "bilinear" ? demosaic_bilinear(raw, opts) : demosaic_malvar(raw, opts);
      save_image(rgb, out_path);
      print_json(out, {{"output", out_path}, {"method", method}});
      return kExitOk;
    };
  });

  // noise add | estimate
  auto* noise = app.add_subcommand("noise", "Sensor noise synthesis and estimation");
  noise->require_subcommand(1);
  auto* noise_add = noise->add_subcommand("add", "Add shot/read noise to a RAW");
  double shot = 0.0, read = 0.0;
  bool no_clamp = false;
  noise_add->add_option("--in", in_path, "RAW input")->required();
  noise_add->add_option("--out", out_path, "RAW output")->required();
  noise_add->add_option("--shot", shot, "Shot-noise variance slope")->required();
  noise_add->add_option("--read", read, "Read-noise variance")->required();
  noise_add->add_flag("--no-clamp", no_clamp, "Keep samples outside [0,1] (.rfim output only)");
  noise_add->callback([&] {
    action = [&] {
      const NoiseParams p{shot, read};
      p.validate();
      const RawImage raw = load_raw(in_path);
      save_image(add_shot_read_noise(raw, p, g.seed, {.clamp = !no_clamp}), out_path);
      print_json(out, {{"output", out_path}, {"shot", shot}, {"read", read}, {"seed", g.seed}});
      return kExitOk;
    };
  });
  auto* noise_est = noise->add_subcommand("estimate", "Fit shot/read parameters from a noisy/clean RAW pair");
  std::string noisy_path, clean_path;
  noise_est->add_option("--noisy", noisy_path, "Noisy RAW")->required();
  noise_est->add_option("--clean", clean_path, "Clean RAW")->required();
  noise_est->callback([&] {
    action = [&] {
      const NoiseEstimate e = estimate_noise_curve(load_raw(noisy_path), load_raw(clean_path));
      print_json(out, {{"shot", e.shot}, {"read", e.read}, {"bins_used", e.bins_used}});
      return kExitOk;
    };
  });

  // eval
  auto* eval = app.add_subcommand("eval", "PSNR / SSIM of a prediction against ground truth");
  std::string gt_path, pred_path, domain = "auto";
  bool use_luma = false;
  eval->add_option("--gt", gt_path, "Ground-truth image")->required();
  eval->add_option("--pred", pred_path, "Predicted image")->required();
  eval->add_option("--domain", domain, "auto, srgb, linear or raw")
      ->check(CLI::IsMember({"auto", "srgb", "linear", "raw"}));
  eval->add_flag("--luma", use_luma, "Score BT.601 luma only");
  eval->callback([&] {
    action = [&] {
      const std::map<std::string, Domain> domains = {
          {"auto", Domain::Auto}, {"srgb", Domain::Srgb}, {"linear", Domain::Linear}, {"raw", Domain::Raw}};
      std::vector<ImagePlane> a = planes_of(load_image(gt_path, domains.at(domain)));
      std::vector<ImagePlane> b = planes_of(load_image(pred_path, domains.at(domain)));
      if (a.size() != b.size() || !a[0].same_shape(b[0])) {
        throw ValidationError("eval: images differ in shape or channel count");
      }
      std::vector<const ImagePlane*> pred_planes;
      for (const auto& p : b) pred_planes.push_back(&p);
      const double mask = clipped_fraction(pred_planes);
      if (use_luma && a.size() == 3) {
        a = {luma(a[0], a[1], a[2])};
        b = {luma(b[0], b[1], b[2])};
      }
      std::vector<const ImagePlane*> pa, pb;
      double s = 0.0;
      for (std::size_t c = 0; c < a.size(); ++c) {
        pa.push_back(&a[c]);
        pb.push_back(&b[c]);
        s += ssim(a[c], b[c]);
      }
      const PsnrResult pr = psnr(pa, pb);
      print_json(out, {{"psnr", pr.db},
                       {"ssim", s / static_cast<double>(a.size())},
                       {"exact_match", pr.exact_match},
                       {"mask_fraction", mask}});
      return kExitOk;
    };
  });

  // stats latent
  auto* stats = app.add_subcommand("stats", "Dataset statistics");
  stats->require_subcommand(1);
  auto* latent = stats->add_subcommand("latent", "Grand mean and standard deviation of latents");
  std::vector<std::string> latent_inputs;
  latent->add_option("--input", latent_inputs, "Float container(s) or raw float32 files, one batch item each")
      ->required();
  latent->callback([&] {
    action = [&] {
      const LatentStats s = latent_scaling_factor(read_latents(latent_inputs));
      print_json(out, {{"mean", s.mean}, {"sigma", s.sigma}});
      return kExitOk;
    };
  });

  // gradcheck
  auto* gradcheck = app.add_subcommand("gradcheck", "Check PTP and loss derivatives against finite differences");
  int pixels = 1000, loss_cases = 50;
  gradcheck->add_option("--pixels", pixels, "Interior pixels to check")->check(CLI::PositiveNumber);
  gradcheck->add_option("--loss-cases", loss_cases, "Random loss cases")->check(CLI::PositiveNumber);
  gradcheck->callback([&] {
    action = [&] {
      constexpr double kTol = 1e-3;
      const GradcheckResult ptp = ptp_gradcheck(g.seed, pixels);
      const GradcheckResult loss = loss_gradcheck(g.seed, loss_cases);
      const bool ok = ptp.checked >= pixels && ptp.max_rel_err < kTol && loss.max_rel_err < kTol;
      print_json(out, {{"ptp", {{"max_rel_err", ptp.max_rel_err}, {"checked", ptp.checked}}},
                       {"loss", {{"max_rel_err", loss.max_rel_err}, {"checked", loss.checked}}},
                       {"tolerance", kTol},
                       {"passed", ok}});
      ctx.log.info("gradcheck: ", ok ? "pass" : "FAIL");
      return ok ? kExitOk : kExitCheckFailed;
    };
  });

  // selftest
  auto* selftest = app.add_subcommand("selftest", "Run the embedded invariant suites");
  selftest->callback([&] {
    action = [&] {
      const auto t0 = std::chrono::steady_clock::now();
      const json report = run_selftest(g.seed);
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      print_json(out, report);
      for (const auto& r : report.at("results")) {
        if (!r.at("passed").get<bool>()) ctx.log.info("selftest: FAIL ", r.at("name").get<std::string>());
      }
      ctx.log.info("selftest: ", report.at("passed").get<int>(), " passed, ", report.at("failed").get<int>(),
                   " failed in ", secs, " s");
      return report.at("failed").get<int>() == 0 ? kExitOk : kExitCheckFailed;
    };
  });

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "rawforge: " << e.what() << "\n\n" << app.help();
    return kExitValidation;
  }
  if (!action) {
    err << app.help();
    return kExitValidation;
  }

  try {
    g.log_level = log_level == "quiet" ? LogLevel::Quiet : log_level == "debug" ? LogLevel::Debug : LogLevel::Info;
    if (!config.empty()) g.config_path = config;
    if (threads > 0) g.threads = threads;
    set_thread_count(g.threads.value_or(0));
    ctx.log.debug("threads: ", thread_count(), ", seed: ", g.seed);
    return action();
  } catch (const IoError& e) {
    err << "rawforge: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "rawforge: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    err << "rawforge: " << e.what() << "\n";
    return kExitValidation;
  }
}

}  // namespace rawforge
