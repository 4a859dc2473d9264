#include "ppwarp/io_json.hpp"

#include <fstream>
#include <set>

#include "ppwarp/errors.hpp"

namespace ppw {

namespace {

using nlohmann::json;

void require_keys(const json& j, const std::set<std::string>& allowed,
                  const std::string& ctx) {
  for (const auto& [key, value] : j.items())
    if (!allowed.count(key))
      throw ValidationError("unknown key \"" + key + "\" in " + ctx);
}

double as_number(const json& j, const std::string& ctx) {
  if (!j.is_number())
    throw ValidationError(ctx + " must be a number");
  return j.get<double>();
}

long as_integer(const json& j, const std::string& ctx) {
  if (!j.is_number_integer())
    throw ValidationError(ctx + " must be an integer");
  return j.get<long>();
}

Point2 point_from_json(const json& j, const std::string& ctx) {
  if (!j.is_array() || j.size() != 2)
    throw ValidationError(ctx + " must be a [x, y] pair");
  return {as_number(j[0], ctx + "[0]"), as_number(j[1], ctx + "[1]")};
}

Box box_from_json(const json& j, const std::string& ctx) {
  if (!j.is_object()) throw ValidationError(ctx + " must be an object");
  require_keys(j, {"xyxy", "score", "class", "track"}, ctx);
  if (!j.contains("xyxy") || !j["xyxy"].is_array() || j["xyxy"].size() != 4)
    throw ValidationError(ctx + " needs \"xyxy\": [x1, y1, x2, y2]");
  Box b;
  b.x1 = as_number(j["xyxy"][0], ctx + ".xyxy[0]");
  b.y1 = as_number(j["xyxy"][1], ctx + ".xyxy[1]");
  b.x2 = as_number(j["xyxy"][2], ctx + ".xyxy[2]");
  b.y2 = as_number(j["xyxy"][3], ctx + ".xyxy[3]");
  if (j.contains("score")) b.score = as_number(j["score"], ctx + ".score");
  if (j.contains("class"))
    b.cls = static_cast<int>(as_integer(j["class"], ctx + ".class"));
  if (j.contains("track") && !j["track"].is_null())
    b.track = as_integer(j["track"], ctx + ".track");
  return b;
}

json box_to_json(const Box& b) {
  json j;
  j["xyxy"] = {b.x1, b.y1, b.x2, b.y2};
  j["score"] = b.score;
  j["class"] = b.cls;
  if (b.track) j["track"] = *b.track;
  return j;
}

}  // namespace

json load_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError("invalid JSON in " + path + ": " + e.what());
  }
}

void save_json_file(const std::string& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed: " + path);
}

std::vector<LineSegment> lines_from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("lines document must be an object");
  require_keys(j, {"lines"}, "lines document");
  if (!j.contains("lines") || !j["lines"].is_array())
    throw ValidationError("lines document needs a \"lines\" array");
  std::vector<LineSegment> out;
  out.reserve(j["lines"].size());
  for (size_t i = 0; i < j["lines"].size(); ++i) {
    const json& seg = j["lines"][i];
    const std::string ctx = "lines[" + std::to_string(i) + "]";
    if (!seg.is_array() || seg.size() != 2)
      throw ValidationError(ctx + " must be [[x1,y1],[x2,y2]]");
    out.push_back({point_from_json(seg[0], ctx + "[0]"),
                   point_from_json(seg[1], ctx + "[1]")});
  }
  return out;
}

std::vector<GroundTruthFrame> frames_from_json(const json& j) {
  if (!j.is_object())
    throw ValidationError("frames document must be an object");
  require_keys(j, {"frames"}, "frames document");
  if (!j.contains("frames") || !j["frames"].is_array())
    throw ValidationError("frames document needs a \"frames\" array");
  std::vector<GroundTruthFrame> out;
  out.reserve(j["frames"].size());
  for (size_t i = 0; i < j["frames"].size(); ++i) {
    const json& jf = j["frames"][i];
    const std::string ctx = "frames[" + std::to_string(i) + "]";
    if (!jf.is_object()) throw ValidationError(ctx + " must be an object");
    require_keys(jf, {"id", "t_ms", "boxes"}, ctx);
    GroundTruthFrame f;
    f.id = jf.contains("id") ? as_integer(jf["id"], ctx + ".id")
                             : static_cast<long>(i);
    f.t_ms = jf.contains("t_ms") ? as_number(jf["t_ms"], ctx + ".t_ms") : 0.0;
    if (jf.contains("boxes")) {
      if (!jf["boxes"].is_array())
        throw ValidationError(ctx + ".boxes must be an array");
      for (size_t b = 0; b < jf["boxes"].size(); ++b)
        f.boxes.push_back(box_from_json(
            jf["boxes"][b], ctx + ".boxes[" + std::to_string(b) + "]"));
    }
    out.push_back(std::move(f));
  }
  return out;
}

json frames_to_json(const std::vector<GroundTruthFrame>& frames) {
  json arr = json::array();
  for (const GroundTruthFrame& f : frames) {
    json jf;
    jf["id"] = f.id;
    jf["t_ms"] = f.t_ms;
    json boxes = json::array();
    for (const Box& b : f.boxes) boxes.push_back(box_to_json(b));
    jf["boxes"] = std::move(boxes);
    arr.push_back(std::move(jf));
  }
  return json{{"frames", std::move(arr)}};
}

WarpField field_from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("field document must be an object");
  require_keys(j, {"tx", "ty", "in_size"}, "field document");
  for (const char* key : {"tx", "ty"})
    if (!j.contains(key) || !j[key].is_array())
      throw ValidationError(std::string("field document needs array \"") +
                            key + "\"");
  if (!j.contains("in_size") || !j["in_size"].is_array() ||
      j["in_size"].size() != 2)
    throw ValidationError("field document needs \"in_size\": [w, h]");

  const int w = static_cast<int>(as_integer(j["in_size"][0], "in_size[0]"));
  const int h = static_cast<int>(as_integer(j["in_size"][1], "in_size[1]"));
  auto axis = [&](const char* key) {
    std::vector<double> v;
    v.reserve(j[key].size());
    for (size_t i = 0; i < j[key].size(); ++i)
      v.push_back(
          as_number(j[key][i], std::string(key) + "[" + std::to_string(i) + "]"));
    return v;
  };
  return WarpField{AxisMap(axis("tx"), w), AxisMap(axis("ty"), h), {w, h}};
}

json field_to_json(const WarpField& wf) {
  return json{{"tx", wf.tx.values()},
              {"ty", wf.ty.values()},
              {"in_size", {wf.in_size.w, wf.in_size.h}}};
}

json ap_report_to_json(const ApReport& r) {
  auto opt = [](const std::optional<double>& v) {
    return v ? json(*v) : json(nullptr);
  };
  json per_class = json::object();
  for (const auto& [cls, ap] : r.per_class)
    per_class[std::to_string(cls)] = ap;
  return json{{"ap", opt(r.ap)},     {"ap50", opt(r.ap50)},
              {"ap75", opt(r.ap75)}, {"ap_s", opt(r.ap_s)},
              {"ap_m", opt(r.ap_m)}, {"ap_l", opt(r.ap_l)},
              {"per_class", std::move(per_class)}};
}

}  // namespace ppw
