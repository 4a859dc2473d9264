#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ppwarp/eval.hpp"
#include "ppwarp/saliency.hpp"

namespace ppw {

// Streaming-run settings. fps > 0 regenerates frame arrival times as
// index * 1000 / fps, overriding whatever t_ms the ground-truth file holds;
// fps == 0 keeps the file's timestamps.
struct StreamSettings {
  double fps = 0.0;
  LatencyModel latency{};
  MockConfig mock{};
  std::uint64_t seed = 1;
};

// How the vanishing point is chosen when building saliency.
//   Fixed:    params.v as given.
//   Average:  mean of vp_list.
//   PerFrame: vp_list indexed by frame (stream refreshes every n_v frames);
//             single-image commands use vp_list[0].
enum class VpMode { Fixed, Average, PerFrame };

struct Config {
  WarpParams params{};
  std::optional<MultiVpConfig> multi_vp;
  ImageSize image{1920, 1200};
  double scale = 0.5;  // output size factor, (0, 1]
  GridSize grid{};
  std::string cache_dir;
  VpMode vp_mode = VpMode::Fixed;
  std::vector<Point2> vp_list;
  int n_v = 30;  // vanishing-point refresh interval in frames, 0 disables
  StreamSettings stream{};
};

// Strict parse: version must equal 1 and unknown keys anywhere in the
// document are fatal, so a typo like "nuhat" cannot silently fall back to a
// default. Component bounds are re-validated via checked().
Config config_from_json(const nlohmann::json& j);

// Full command-line entry point; args excludes the program name. Writes
// normal output to `out` and diagnostics to `err`. Returns the process exit
// code: 0 success, 2 validation/usage failure, 1 IO failure.
int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err);

}  // namespace ppw
