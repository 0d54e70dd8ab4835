#pragma once

// JSON file formats: camera-space scene files, grid layout files and
// refinement trajectories.

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lap/actions.hpp"
#include "lap/error.hpp"
#include "lap/metrics.hpp"
#include "lap/refine.hpp"
#include "lap/scene.hpp"

namespace lap {

using json = nlohmann::json;

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::FormatError, "cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::FormatError, "cannot write " + path.string());
  out << text;
}

inline json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::FormatError, what + ": " + e.what());
  }
}

namespace detail {

inline const json& field(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.is_object() || !obj.contains(key)) throw Error(ErrorCode::FormatError, path + "." + key + ": missing");
  return obj.at(key);
}

inline double number(const json& v, const std::string& path) {
  if (!v.is_number()) throw Error(ErrorCode::FormatError, path + ": expected a number");
  return v.get<double>();
}

inline int integer(const json& v, const std::string& path) {
  if (!v.is_number_integer()) throw Error(ErrorCode::FormatError, path + ": expected an integer");
  return v.get<int>();
}

inline Vec3 vec3(const json& v, const std::string& path) {
  if (!v.is_array() || v.size() != 3) throw Error(ErrorCode::FormatError, path + ": expected 3 numbers");
  return Vec3(number(v[0], path + "[0]"), number(v[1], path + "[1]"), number(v[2], path + "[2]"));
}

template <std::size_t N>
std::array<int, N> ints(const json& v, const std::string& path) {
  if (!v.is_array() || v.size() != N)
    throw Error(ErrorCode::FormatError, path + ": expected " + std::to_string(N) + " integers");
  std::array<int, N> out{};
  for (std::size_t i = 0; i < N; ++i) out[i] = integer(v[i], path + "[" + std::to_string(i) + "]");
  return out;
}

inline json to_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

} // namespace detail

// ---------------------------------------------------------------------------
// Scene files

struct Scene {
  std::vector<CameraBox> boxes;
  CameraIntrinsics intrinsics;
  std::string image;
};

/// Validates and orthonormalizes a scene document. Boxes give either z_axis or
/// y_axis next to x_axis; a y_axis is converted with z = y x x.
inline Scene scene_from_json(const json& doc) {
  using namespace detail;
  Scene s;
  const json& k = field(doc, "intrinsics", "scene");
  s.intrinsics.fx = number(field(k, "fx", "intrinsics"), "intrinsics.fx");
  s.intrinsics.fy = number(field(k, "fy", "intrinsics"), "intrinsics.fy");
  s.intrinsics.cx = number(field(k, "cx", "intrinsics"), "intrinsics.cx");
  s.intrinsics.cy = number(field(k, "cy", "intrinsics"), "intrinsics.cy");
  s.intrinsics.width = integer(field(k, "width", "intrinsics"), "intrinsics.width");
  s.intrinsics.height = integer(field(k, "height", "intrinsics"), "intrinsics.height");
  try {
    s.intrinsics.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::FormatError, std::string("intrinsics: ") + e.what());
  }
  if (doc.contains("image") && doc["image"].is_string()) s.image = doc["image"].get<std::string>();

  const json& boxes = field(doc, "boxes", "scene");
  if (!boxes.is_array()) throw Error(ErrorCode::FormatError, "scene.boxes: expected an array");
  std::set<int> ids;
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const std::string p = "boxes[" + std::to_string(i) + "]";
    const json& b = boxes[i];
    CameraBox box;
    box.id = integer(field(b, "id", p), p + ".id");
    if (!ids.insert(box.id).second) throw Error(ErrorCode::DuplicateId, p + ".id: duplicate id " + std::to_string(box.id));
    const json& cls = field(b, "class", p);
    if (!cls.is_string()) throw Error(ErrorCode::FormatError, p + ".class: expected a string");
    box.class_name = cls.get<std::string>();
    box.center = vec3(field(b, "center", p), p + ".center");
    box.size = vec3(field(b, "size", p), p + ".size");
    if ((box.size.array() <= 0.0).any()) throw Error(ErrorCode::FormatError, p + ".size: components must be positive");
    const Vec3 ax = vec3(field(b, "x_axis", p), p + ".x_axis");
    Vec3 az;
    if (b.contains("z_axis")) az = vec3(b["z_axis"], p + ".z_axis");
    else az = vec3(field(b, "y_axis", p), p + ".y_axis").cross(ax);
    try {
      std::tie(box.ax_x, box.ax_z) = orthonormalize_axes(ax, az);
    } catch (const Error& e) {
      throw Error(ErrorCode::FormatError, p + ": " + e.what());
    }
    s.boxes.push_back(std::move(box));
  }
  return s;
}

inline Scene load_scene(const std::filesystem::path& path) {
  return scene_from_json(parse_json(read_text_file(path), path.string()));
}

inline json scene_to_json(const Scene& s) {
  json doc;
  doc["intrinsics"] = {{"fx", s.intrinsics.fx}, {"fy", s.intrinsics.fy}, {"cx", s.intrinsics.cx},
                       {"cy", s.intrinsics.cy}, {"width", s.intrinsics.width}, {"height", s.intrinsics.height}};
  if (!s.image.empty()) doc["image"] = s.image;
  doc["boxes"] = json::array();
  for (const auto& b : s.boxes)
    doc["boxes"].push_back({{"id", b.id},
                            {"class", b.class_name},
                            {"center", detail::to_json(b.center)},
                            {"size", detail::to_json(b.size)},
                            {"x_axis", detail::to_json(b.ax_x)},
                            {"z_axis", detail::to_json(b.ax_z)}});
  return doc;
}

// ---------------------------------------------------------------------------
// Grid layout files

inline json layout_to_json(const GridLayout& l) {
  json doc;
  doc["config"] = {{"delta", l.config.delta}, {"n_theta", l.config.n_theta}, {"offset", detail::to_json(l.config.offset)}};
  json frame = json::array();
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) frame.push_back(l.frame(r, c));
  doc["frame"] = frame;
  doc["translation"] = detail::to_json(l.translation);
  doc["objects"] = json::array();
  for (const auto& g : l.objects)
    doc["objects"].push_back({{"id", g.id},
                              {"class", g.class_name},
                              {"bbox2d", g.bbox2d},
                              {"pos", g.pos},
                              {"size", g.size},
                              {"yaw", g.yaw_idx}});
  return doc;
}

inline GridLayout layout_from_json(const json& doc) {
  using namespace detail;
  GridLayout l;
  const json& cfg = field(doc, "config", "layout");
  l.config.delta = number(field(cfg, "delta", "config"), "config.delta");
  l.config.n_theta = integer(field(cfg, "n_theta", "config"), "config.n_theta");
  l.config.offset = vec3(field(cfg, "offset", "config"), "config.offset");
  l.config.validate();
  const json& frame = field(doc, "frame", "layout");
  if (!frame.is_array() || frame.size() != 9) throw Error(ErrorCode::FormatError, "layout.frame: expected 9 numbers");
  for (int i = 0; i < 9; ++i) l.frame(i / 3, i % 3) = number(frame[i], "layout.frame[" + std::to_string(i) + "]");
  if (doc.contains("translation")) l.translation = vec3(doc["translation"], "layout.translation");
  const json& objs = field(doc, "objects", "layout");
  if (!objs.is_array()) throw Error(ErrorCode::FormatError, "layout.objects: expected an array");
  std::set<int> ids;
  for (std::size_t i = 0; i < objs.size(); ++i) {
    const std::string p = "objects[" + std::to_string(i) + "]";
    const json& o = objs[i];
    GridBox g;
    g.id = integer(field(o, "id", p), p + ".id");
    if (!ids.insert(g.id).second) throw Error(ErrorCode::DuplicateId, p + ".id: duplicate id " + std::to_string(g.id));
    const json& cls = field(o, "class", p);
    if (!cls.is_string()) throw Error(ErrorCode::FormatError, p + ".class: expected a string");
    g.class_name = cls.get<std::string>();
    g.bbox2d = ints<4>(field(o, "bbox2d", p), p + ".bbox2d");
    g.pos = ints<3>(field(o, "pos", p), p + ".pos");
    g.size = ints<3>(field(o, "size", p), p + ".size");
    g.yaw_idx = integer(field(o, "yaw", p), p + ".yaw");
    if (g.pos[1] < 0) throw Error(ErrorCode::FormatError, p + ".pos[1]: below ground");
    for (int k = 0; k < 3; ++k)
      if (g.size[k] < 1) throw Error(ErrorCode::FormatError, p + ".size: components must be >= 1");
    if (g.yaw_idx < 0 || g.yaw_idx >= l.config.n_theta) throw Error(ErrorCode::FormatError, p + ".yaw: out of range");
    l.objects.push_back(std::move(g));
  }
  return l;
}

inline GridLayout load_layout(const std::filesystem::path& path) {
  return layout_from_json(parse_json(read_text_file(path), path.string()));
}

// ---------------------------------------------------------------------------
// Trajectories and reports

inline json trajectory_to_json(const RefineResult& r, const std::string& policy) {
  const Trajectory& t = r.trajectory;
  json doc;
  doc["policy"] = policy;
  doc["converged"] = t.converged;
  doc["rounds_used"] = t.rounds_used;
  doc["initial"] = layout_to_json(t.states.front());
  doc["rounds"] = json::array();
  for (std::size_t i = 0; i < t.sequences.size(); ++i) {
    json diags = json::array();
    for (const auto& d : t.diagnostics[i]) diags.push_back({{"line", d.line}, {"text", d.text}, {"reason", d.reason}});
    doc["rounds"].push_back({{"actions", serialize(t.sequences[i])}, {"diagnostics", diags},
                             {"state", layout_to_json(t.states[i + 1])}});
  }
  if (r.error) doc["error"] = r.error->what();
  return doc;
}

inline json report_to_json(const MetricReport& r) {
  json doc = json::object();
  const auto cols = metric_columns();
  const auto vals = metric_values(r);
  for (std::size_t i = 0; i < cols.size(); ++i) doc[cols[i]] = vals[i];
  return doc;
}

inline json diagnostics_to_json(const std::vector<Diagnostic>& diags) {
  json out = json::array();
  for (const auto& d : diags) out.push_back({{"line", d.line}, {"text", d.text}, {"reason", d.reason}});
  return out;
}

} // namespace lap
