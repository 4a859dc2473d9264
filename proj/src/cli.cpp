#include "ppwarp/cli.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <set>

#include <CLI11.hpp>

#include "ppwarp/errors.hpp"
#include "ppwarp/io_json.hpp"
#include "ppwarp/png_io.hpp"
#include "ppwarp/warp.hpp"

namespace ppw {

namespace {

using nlohmann::json;

void require_keys(const json& j, const std::set<std::string>& allowed,
                  const std::string& ctx) {
  for (const auto& [key, value] : j.items())
    if (!allowed.count(key))
      throw ValidationError("unknown key \"" + key + "\" in " + ctx);
}

double get_number(const json& j, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number())
    throw ValidationError(std::string(key) + " must be a number");
  return j[key].get<double>();
}

std::array<double, 4> get_quad(const json& j, const char* key,
                               std::array<double, 4> fallback) {
  if (!j.contains(key)) return fallback;
  const json& v = j[key];
  if (v.is_number()) {
    const double x = v.get<double>();
    return {x, x, x, x};
  }
  if (v.is_array() && v.size() == 4) {
    std::array<double, 4> out{};
    for (size_t i = 0; i < 4; ++i) {
      if (!v[i].is_number())
        throw ValidationError(std::string(key) + " entries must be numbers");
      out[i] = v[i].get<double>();
    }
    return out;
  }
  throw ValidationError(std::string(key) +
                        " must be a number or an array of 4 numbers");
}

Point2 get_point(const json& j, const std::string& ctx) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    throw ValidationError(ctx + " must be a [x, y] pair of numbers");
  return {j[0].get<double>(), j[1].get<double>()};
}

// params object; v falls back to the image center when absent.
WarpParams params_from_json(const json& j, ImageSize image) {
  if (!j.is_object()) throw ValidationError("params must be an object");
  require_keys(j,
               {"v", "theta", "alpha", "nu", "nu_hat", "lambda",
                "kernel_sigma_frac"},
               "params");
  WarpParams p;
  p.v = j.contains("v") ? get_point(j["v"], "params.v")
                        : Point2{image.w / 2.0, image.h / 2.0};
  p.theta = get_quad(j, "theta", p.theta);
  p.alpha = get_quad(j, "alpha", p.alpha);
  p.nu = get_number(j, "nu", p.nu);
  p.nu_hat = get_number(j, "nu_hat", p.nu_hat);
  p.lambda = get_number(j, "lambda", p.lambda);
  p.kernel_sigma_frac = get_number(j, "kernel_sigma_frac", p.kernel_sigma_frac);
  return p;
}

ImageSize size_from_json(const json& j, const std::string& ctx) {
  if (!j.is_object() || !j.contains("w") || !j.contains("h") ||
      !j["w"].is_number_integer() || !j["h"].is_number_integer())
    throw ValidationError(ctx + " must be {\"w\": int, \"h\": int}");
  require_keys(j, {"w", "h"}, ctx);
  return {j["w"].get<int>(), j["h"].get<int>()};
}

LatencyModel latency_from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("stream.latency must be an object");
  require_keys(j, {"kind", "mean_ms", "std_ms"}, "stream.latency");
  LatencyModel m;
  if (j.contains("kind")) {
    const std::string kind = j["kind"].get<std::string>();
    if (kind == "constant")
      m.kind = LatencyModel::Kind::Constant;
    else if (kind == "gaussian")
      m.kind = LatencyModel::Kind::Gaussian;
    else
      throw ValidationError(
          "stream.latency.kind must be \"constant\" or \"gaussian\"");
  }
  m.mean_ms = get_number(j, "mean_ms", m.mean_ms);
  m.std_ms = get_number(j, "std_ms", m.std_ms);
  if (m.mean_ms < 0.0 || m.std_ms < 0.0)
    throw ValidationError("latency parameters must be non-negative");
  return m;
}

MockConfig mock_from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("stream.mock must be an object");
  require_keys(j, {"jitter_px", "drop_small_prob", "score_noise"},
               "stream.mock");
  MockConfig m;
  m.jitter_px = get_number(j, "jitter_px", m.jitter_px);
  m.drop_small_prob = get_number(j, "drop_small_prob", m.drop_small_prob);
  m.score_noise = get_number(j, "score_noise", m.score_noise);
  return m;
}

StreamSettings stream_from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("stream must be an object");
  require_keys(j, {"fps", "latency", "mock", "seed"}, "stream");
  StreamSettings s;
  s.fps = get_number(j, "fps", s.fps);
  if (s.fps < 0.0) throw ValidationError("stream.fps must be non-negative");
  if (j.contains("latency")) s.latency = latency_from_json(j["latency"]);
  if (j.contains("mock")) s.mock = mock_from_json(j["mock"]);
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned() && !j["seed"].is_number_integer())
      throw ValidationError("stream.seed must be an unsigned integer");
    const auto v = j["seed"].get<std::int64_t>();
    if (v < 0) throw ValidationError("stream.seed must be an unsigned integer");
    s.seed = static_cast<std::uint64_t>(v);
  }
  return s;
}

}  // namespace

Config config_from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("config must be a JSON object");
  require_keys(j,
               {"version", "params", "multi_vp", "image", "scale", "grid",
                "cache_dir", "vp_mode", "vp_list", "n_v", "stream"},
               "config");
  if (!j.contains("version") || !j["version"].is_number_integer() ||
      j["version"].get<int>() != 1)
    throw ValidationError("config version must be 1");

  Config cfg;
  if (j.contains("image")) cfg.image = size_from_json(j["image"], "image");
  if (j.contains("grid")) {
    const ImageSize g = size_from_json(j["grid"], "grid");
    cfg.grid = GridSize{g.w, g.h};
  }
  if (j.contains("scale")) {
    cfg.scale = get_number(j, "scale", cfg.scale);
    if (!(cfg.scale > 0.0) || cfg.scale > 1.0)
      throw ValidationError("scale must lie in (0, 1]");
  }
  if (j.contains("cache_dir")) {
    if (!j["cache_dir"].is_string())
      throw ValidationError("cache_dir must be a string");
    cfg.cache_dir = j["cache_dir"].get<std::string>();
  }
  if (j.contains("vp_mode")) {
    const std::string mode = j["vp_mode"].get<std::string>();
    if (mode == "fixed")
      cfg.vp_mode = VpMode::Fixed;
    else if (mode == "average")
      cfg.vp_mode = VpMode::Average;
    else if (mode == "per_frame")
      cfg.vp_mode = VpMode::PerFrame;
    else
      throw ValidationError(
          "vp_mode must be \"fixed\", \"average\", or \"per_frame\"");
  }
  if (j.contains("vp_list")) {
    if (!j["vp_list"].is_array())
      throw ValidationError("vp_list must be an array of [x, y] pairs");
    for (size_t i = 0; i < j["vp_list"].size(); ++i)
      cfg.vp_list.push_back(get_point(
          j["vp_list"][i], "vp_list[" + std::to_string(i) + "]"));
  }
  if (j.contains("n_v")) {
    if (!j["n_v"].is_number_integer() || j["n_v"].get<int>() < 0)
      throw ValidationError("n_v must be a non-negative integer");
    cfg.n_v = j["n_v"].get<int>();
  }
  if (j.contains("stream")) cfg.stream = stream_from_json(j["stream"]);

  if (j.contains("params") && j.contains("multi_vp"))
    throw ValidationError("config provides either params or multi_vp, not both");
  if (j.contains("multi_vp")) {
    if (cfg.vp_mode != VpMode::Fixed)
      throw ValidationError("multi_vp already lists its vanishing points; "
                            "vp_mode must stay \"fixed\"");
    if (!j["multi_vp"].is_array() || j["multi_vp"].empty())
      throw ValidationError("multi_vp must be a non-empty array");
    MultiVpConfig mv;
    for (size_t i = 0; i < j["multi_vp"].size(); ++i) {
      const json& je = j["multi_vp"][i];
      const std::string ctx = "multi_vp[" + std::to_string(i) + "]";
      if (!je.is_object()) throw ValidationError(ctx + " must be an object");
      require_keys(je, {"params", "weight"}, ctx);
      if (!je.contains("params"))
        throw ValidationError(ctx + " needs a params object");
      VpEntry e;
      e.params = checked(params_from_json(je["params"], cfg.image));
      e.weight = get_number(je, "weight", 1.0);
      mv.entries.push_back(std::move(e));
    }
    cfg.multi_vp = std::move(mv);
  } else {
    cfg.params = params_from_json(j.contains("params") ? j["params"]
                                                       : json::object(),
                                  cfg.image);
    cfg.params = checked(cfg.params);
  }

  if ((cfg.vp_mode == VpMode::Average || cfg.vp_mode == VpMode::PerFrame) &&
      cfg.vp_list.empty())
    throw ValidationError("vp_mode \"average\" and \"per_frame\" need vp_list");
  return cfg;
}

namespace {

Point2 resolve_v(const Config& cfg) {
  switch (cfg.vp_mode) {
    case VpMode::Average: {
      Point2 m{0.0, 0.0};
      for (const Point2& p : cfg.vp_list) {
        m.x += p.x;
        m.y += p.y;
      }
      m.x /= static_cast<double>(cfg.vp_list.size());
      m.y /= static_cast<double>(cfg.vp_list.size());
      return m;
    }
    case VpMode::PerFrame:
      return cfg.vp_list.front();
    case VpMode::Fixed:
    default:
      return cfg.params.v;
  }
}

SaliencyMap build_map(const Config& cfg, ImageSize target) {
  if (cfg.multi_vp) {
    if (!cfg.cache_dir.empty())
      return cache_get_or_build(CacheStore(cfg.cache_dir), *cfg.multi_vp,
                                target, cfg.grid);
    return multi_vp_saliency(*cfg.multi_vp, target, cfg.grid);
  }
  WarpParams p = cfg.params;
  p.v = resolve_v(cfg);
  if (!cfg.cache_dir.empty())
    return cache_get_or_build(CacheStore(cfg.cache_dir), p, target, cfg.grid);
  return two_plane_saliency(p, target, cfg.grid);
}

int do_vp(const std::string& lines_path, const std::string& out_path,
          std::ostream& out) {
  const auto segs = lines_from_json(load_json_file(lines_path));
  const Point2 v = vp_from_lines(segs);
  const json doc{{"v", {v.x, v.y}}};
  if (out_path.empty())
    out << doc.dump(2) << "\n";
  else
    save_json_file(out_path, doc);
  return 0;
}

int do_saliency(const Config& cfg, const std::string& out_path,
                std::ostream& out) {
  const SaliencyMap S = build_map(cfg, cfg.image);
  const double maxv = *std::max_element(S.cells.begin(), S.cells.end());
  Image img = Image::make({S.grid_w, S.grid_h}, 1);
  for (int y = 0; y < S.grid_h; ++y)
    for (int x = 0; x < S.grid_w; ++x)
      img.at(0, x, y) = static_cast<float>(S.at(x, y) / maxv);
  write_png(out_path, img);
  out << hash_hex(S.param_hash) << "\n";
  return 0;
}

int do_warp(const Config& cfg, const std::string& in_path,
            const std::string& out_path, const std::string& field_out,
            bool constant_saliency, bool endpoint_rescale, int threads) {
  const Image img = read_png(in_path);
  const ImageSize out_size{
      static_cast<int>(std::lround(cfg.scale * img.size.w)),
      static_cast<int>(std::lround(cfg.scale * img.size.h))};
  if (out_size.w < 2 || out_size.h < 2)
    throw ValidationError("scaled output would be smaller than 2x2");

  SaliencyMap S;
  if (constant_saliency) {
    S.grid_w = cfg.grid.w;
    S.grid_h = cfg.grid.h;
    S.cells.assign(
        static_cast<size_t>(cfg.grid.w) * static_cast<size_t>(cfg.grid.h),
        1.0);
    S.target_size = img.size;
  } else {
    S = build_map(cfg, img.size);
  }

  const double sigma_frac = cfg.multi_vp
                                ? cfg.multi_vp->entries.front().params
                                      .kernel_sigma_frac
                                : cfg.params.kernel_sigma_frac;
  const WarpField wf = build_warp(S, out_size, sigma_frac, endpoint_rescale);
  write_png(out_path, warp_image(img, wf, threads));
  if (!field_out.empty()) save_json_file(field_out, field_to_json(wf));
  return 0;
}

int do_unwarp(const std::string& field_path, const std::string& in_path,
              const std::string& out_path, bool forward) {
  const WarpField wf = field_from_json(load_json_file(field_path));
  auto frames = frames_from_json(load_json_file(in_path));
  for (GroundTruthFrame& f : frames)
    f.boxes = forward ? warp_boxes(f.boxes, wf) : unwarp_boxes(f.boxes, wf);
  save_json_file(out_path, frames_to_json(frames));
  return 0;
}

int do_stream(const Config& cfg, const std::string& gts_path,
              const std::string& report_path,
              std::optional<std::uint64_t> seed_override, std::ostream& out) {
  auto frames = frames_from_json(load_json_file(gts_path));
  if (frames.empty()) throw ValidationError("ground truth holds no frames");
  if (cfg.stream.fps > 0.0)
    for (size_t i = 0; i < frames.size(); ++i)
      frames[i].t_ms = static_cast<double>(i) * 1000.0 / cfg.stream.fps;

  const std::uint64_t seed = seed_override.value_or(cfg.stream.seed);
  const StreamTimeline tl =
      simulate_stream(frames, cfg.stream.mock, cfg.stream.latency, seed);
  const ApReport sap = streaming_ap(tl, frames);

  json report;
  report["throughput_fps"] = throughput_fps(tl);
  report["events"] = tl.events.size();
  report["horizon_ms"] = tl.horizon_ms;
  report["sap"] = ap_report_to_json(sap);
  json ids = json::array(), emits = json::array();
  for (const StreamEvent& e : tl.events) {
    ids.push_back(e.frame_id);
    emits.push_back(e.emit_ms);
  }
  report["processed_frames"] = std::move(ids);
  report["emit_ms"] = std::move(emits);

  // Per-frame vanishing points exercise the saliency cache on the refresh
  // schedule; the report counts rebuilds so a fixed camera shows one.
  if (cfg.vp_mode == VpMode::PerFrame) {
    const VpRefresh refresh{cfg.n_v};
    long rebuilds = 0, hits = 0;
    for (size_t i = 0; i < frames.size(); ++i) {
      if (!refresh.due(static_cast<long>(i))) continue;
      WarpParams p = cfg.params;
      p.v = cfg.vp_list[i % cfg.vp_list.size()];
      ++rebuilds;
      if (!cfg.cache_dir.empty()) {
        const CacheStore store(cfg.cache_dir);
        p = checked(p);
        if (store.get(param_digest(p, cfg.image, cfg.grid))) ++hits;
        cache_get_or_build(store, p, cfg.image, cfg.grid);
      } else {
        two_plane_saliency(p, cfg.image, cfg.grid);
      }
    }
    report["saliency_refreshes"] = rebuilds;
    report["cache_hits"] = hits;
  }

  save_json_file(report_path, report);
  out << "throughput_fps " << throughput_fps(tl) << "\n";
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err) {
  CLI::App app{
      "Saliency-guided separable image warping and streaming evaluation"};
  app.name("ppwarp");

  std::string config_path, cache_dir_cli;
  std::uint64_t seed_cli = 0;
  bool no_endpoint_rescale = false;
  int threads = 1;
  app.add_option("--config", config_path, "JSON configuration file");
  auto* seed_opt =
      app.add_option("--seed", seed_cli, "Override the configured stream seed");
  auto* cache_opt = app.add_option("--cache-dir", cache_dir_cli,
                                   "Override the saliency cache directory");
  app.add_flag("--no-endpoint-rescale", no_endpoint_rescale,
               "Keep raw kernel centroids instead of rescaling axis maps to "
               "cover the full input range");
  app.add_option("--threads", threads, "Worker threads for image warping")
      ->check(CLI::Range(1, 256));

  auto* vp_cmd = app.add_subcommand(
      "vp", "Estimate the vanishing point from annotated line segments");
  std::string vp_lines, vp_out;
  vp_cmd->add_option("--lines", vp_lines, "Line segments JSON")->required();
  vp_cmd->add_option("--out", vp_out, "Output JSON path (stdout when absent)");

  auto* sal_cmd = app.add_subcommand(
      "saliency", "Render the saliency grid as a grayscale heatmap PNG");
  std::string sal_out;
  sal_cmd->add_option("--out", sal_out, "Output PNG path")->required();

  auto* warp_cmd = app.add_subcommand(
      "warp", "Warp an image through the saliency-driven field");
  std::string warp_in, warp_out, warp_field_out;
  bool constant_saliency = false;
  warp_cmd->add_option("--in", warp_in, "Input PNG")->required();
  warp_cmd->add_option("--out", warp_out, "Output PNG")->required();
  warp_cmd->add_option("--field-out", warp_field_out,
                       "Also write the warp field as JSON");
  warp_cmd->add_flag("--constant-saliency", constant_saliency,
                     "Use a uniform saliency grid instead of the configured "
                     "prior (plain resize)");

  auto* unwarp_cmd = app.add_subcommand(
      "unwarp", "Map detection boxes from warped to original coordinates");
  std::string uw_field, uw_in, uw_out;
  bool uw_forward = false;
  unwarp_cmd->add_option("--field", uw_field, "Warp field JSON")->required();
  unwarp_cmd->add_option("--in", uw_in, "Detections JSON (frames schema)")
      ->required();
  unwarp_cmd->add_option("--out", uw_out, "Output detections JSON")->required();
  unwarp_cmd->add_flag("--forward", uw_forward,
                       "Map original to warped coordinates instead");

  auto* stream_cmd = app.add_subcommand(
      "stream", "Run the streaming simulation and write an evaluation report");
  std::string st_gts, st_out;
  stream_cmd->add_option("--gts", st_gts, "Ground-truth frames JSON")
      ->required();
  stream_cmd->add_option("--out", st_out, "Report JSON path")->required();

  app.require_subcommand(1);

  try {
    std::vector<const char*> argv;
    argv.reserve(args.size() + 1);
    argv.push_back("ppwarp");
    for (const std::string& a : args) argv.push_back(a.c_str());
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return 0;
    }
    err << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    std::optional<std::uint64_t> seed_override;
    if (seed_opt->count() > 0) seed_override = seed_cli;

    const auto load_config = [&]() {
      if (config_path.empty())
        throw ValidationError("--config is required for this command");
      Config cfg = config_from_json(load_json_file(config_path));
      if (cache_opt->count() > 0) cfg.cache_dir = cache_dir_cli;
      return cfg;
    };

    if (vp_cmd->parsed()) return do_vp(vp_lines, vp_out, out);
    if (sal_cmd->parsed()) return do_saliency(load_config(), sal_out, out);
    if (warp_cmd->parsed())
      return do_warp(load_config(), warp_in, warp_out, warp_field_out,
                     constant_saliency, !no_endpoint_rescale, threads);
    if (unwarp_cmd->parsed()) return do_unwarp(uw_field, uw_in, uw_out, uw_forward);
    if (stream_cmd->parsed())
      return do_stream(load_config(), st_gts, st_out, seed_override, out);
    err << "error: no command selected\n";
    return 2;
  } catch (const IoError& e) {
    err << "io error: " << e.what() << "\n";
    return 1;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace ppw
