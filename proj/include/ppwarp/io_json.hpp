#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "ppwarp/eval.hpp"
#include "ppwarp/geometry.hpp"
#include "ppwarp/warp.hpp"

namespace ppw {

// File helpers. A missing or unreadable file raises IoError; text that is
// not valid JSON raises ValidationError.
nlohmann::json load_json_file(const std::string& path);
void save_json_file(const std::string& path, const nlohmann::json& j);

// {"lines": [[[x1,y1],[x2,y2]], ...]}
std::vector<LineSegment> lines_from_json(const nlohmann::json& j);

// {"frames": [{"id": n, "t_ms": f, "boxes": [{"xyxy": [x1,y1,x2,y2],
//   "score": f, "class": n, "track": n}]}]}
// score defaults to 1, class to 0; track and t_ms are optional; id defaults
// to the frame's position. Unknown keys are rejected to surface typos.
std::vector<GroundTruthFrame> frames_from_json(const nlohmann::json& j);
nlohmann::json frames_to_json(const std::vector<GroundTruthFrame>& frames);

// {"tx": [...], "ty": [...], "in_size": [w,h]}
WarpField field_from_json(const nlohmann::json& j);
nlohmann::json field_to_json(const WarpField& wf);

// All ApReport fields; absent buckets serialize as null.
nlohmann::json ap_report_to_json(const ApReport& r);

}  // namespace ppw
