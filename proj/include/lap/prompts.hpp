#pragma once

// Prompt text for the planner, perceiver and contact-graph roles. Layout text
// blocks list objects as obj_<index>, the same index SELECT uses.

#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "lap/scene.hpp"

namespace lap {

namespace detail {

inline std::string cell_size_text(double delta) {
  const double cm = delta * 100.0;
  std::ostringstream os;
  if (std::abs(cm - std::round(cm)) < 1e-9) os << static_cast<long long>(std::llround(cm));
  else os << cm;
  return os.str() + " cm";
}

inline std::string fmt_int_list(const int* v, int n) {
  std::string s = "[";
  for (int i = 0; i < n; ++i) {
    if (i) s += ", ";
    s += std::to_string(v[i]);
  }
  return s + "]";
}

} // namespace detail

inline std::string planner_system_prompt(const GridConfig& cfg = {}) {
  const std::string cell = detail::cell_size_text(cfg.delta);
  const std::string step = [&] {
    std::ostringstream os;
    os << 360.0 / cfg.n_theta;
    return os.str();
  }();
  std::string s;
  s += "You are a 3D layout refinement agent. Given an image and the current 3D layout of detected objects, "
       "your task is to correct errors in object positions, orientations, and sizes. If the layout is already "
       "correct, output STOP immediately.\n";
  s += "\n";
  s += "## Scene Representation\n";
  s += "Each object in the scene is described with:\n";
  s += "  - obj_id and category: object identity\n";
  s += "  - bbox: [x1, y1, x2, y2] # 2D bounding box in normalized image pixel coordinates (0–1000)\n";
  s += "  - pos: [gx, gy, gz] # 3D position in grid units (1 grid unit = " + cell +
       "), where gy is the bottom of the object\n";
  s += "  - size: [gw, gh, gl] # width, height, length in grid units\n";
  s += "  - yaw: orientation index (0–" + std::to_string(cfg.n_theta - 1) + ", each step = " + step +
       "°)\n";
  s += "\n";
  s += "## Coordinate Axes\n";
  s += "  - X: horizontal, increases toward image right\n";
  s += "  - Y: vertical, increases upward\n";
  s += "  - Z: depth, increases forward into the scene\n";
  s += "\n";
  s += "## Action Space\n";
  s += "SELECT obj_N   # choose target object\n";
  s += "MOVE [dx, dy, dz]   # adjust position\n";
  s += "ROTATE_Y [d]      # adjust orientation (each unit = " + step + "°)\n";
  s += "RESIZE [d]      # uniformly adjust size\n";
  s += "STOP          # end the sequence\n";
  s += "\n";
  s += "## Rules\n";
  s += "  - Output ONLY actions, one per line, integers only.\n";
  s += "  - SELECT before correcting an object.\n";
  s += "  - If the layout already looks correct, output STOP immediately.\n";
  s += "  - Fix the most significant errors first.\n";
  s += "  - Prefer fewer actions. Stop when no further correction is needed.";
  return s;
}

/// The "## Scene Layout" block: one five-line entry per object.
inline std::string layout_block(const GridLayout& layout) {
  std::string s = "## Scene Layout (grid-based, 1 unit = " + detail::cell_size_text(layout.config.delta) + ")";
  for (std::size_t i = 0; i < layout.objects.size(); ++i) {
    const GridBox& g = layout.objects[i];
    s += "\nobj_" + std::to_string(i) + " " + g.class_name;
    s += "\n  bbox: " + detail::fmt_int_list(g.bbox2d.data(), 4);
    s += "\n  pos: " + detail::fmt_int_list(g.pos.data(), 3);
    s += "\n  size: " + detail::fmt_int_list(g.size.data(), 3);
    s += "\n  yaw: " + std::to_string(g.yaw_idx);
  }
  return s;
}

inline std::string planner_user_prompt(const GridLayout& layout) {
  return "<image>\n\nExamine the image and the detected 3D layout below. Identify and correct any errors in object "
         "positions, orientations, or sizes.\n\nCurrent scene layout:\n" +
         layout_block(layout);
}

struct Detection2D {
  int id = 0;
  std::string class_name;
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;
};

namespace detail {

inline std::string detection_line(const Detection2D& d) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "(%d, %s, %.4f, %.4f, %.4f, %.4f)", d.id, d.class_name.c_str(), d.x1, d.y1, d.x2,
                d.y2);
  return buf;
}

} // namespace detail

inline std::string perceiver_prompt(const std::vector<Detection2D>& dets) {
  std::string s = "Here are the detected 2D bounding boxes in this image, format: (id, class, x1, y1, x2, y2): ";
  for (std::size_t i = 0; i < dets.size(); ++i) s += (i ? "\n" : "") + detail::detection_line(dets[i]);
  s += "\n\n";
  s += "Output a json list, where each entry is a 3D bounding box in the CAMERA coordinate system that corresponds "
       "to a given 2D bounding box. Each 3D bounding box must follow exactly this schema:\n\n";
  s += "{\"id\": int,\n";
  s += "  \"class\": str,\n";
  s += "  \"center\": [position_u, position_v, position_x],\n";
  s += "  \"size\": [scale_x, scale_y, scale_z],\n";
  s += "  \"x_axis\": [x1, x2, x3],\n";
  s += "  \"y_axis\": [y1, y2, y3]}\n\n";
  s += "Rules: The coordinate system is CAMERA: +u right, +v down, +x away from camera.\n";
  s += "\"center\" is the 3D box center in the GLOBAL camera coordinates.\n";
  s += "\"size\" is the length of the three edges along the box axes.\n";
  s += "\"x_axis\" and \"y_axis\" are unit vectors defining the LOCAL object frame of the box, must be orthogonal.\n";
  s += "Do NOT include explanations or extra text.\n";
  s += "All numbers must be valid floating point values.";
  return s;
}

inline std::string contact_prompt(const std::string& image_ref, const std::vector<Detection2D>& dets) {
  std::string s;
  s += "Given an indoor image and a list of detected 2D bounding boxes, identify the physical contact relation for "
       "each object. For every detected object, assign exactly one of the following contact types:\n\n";
  s += "  - FLOOR: the object rests directly on the floor\n";
  s += "  - ON obj_id: the object rests on top of another detected object\n";
  s += "  - FREE: the object has no contact with the floor or any other object (e.g., wall-mounted, hanging, "
       "floating)\n\n";
  s += "For each detected object, output a single line:\n\n";
  s += "  <CONTACT> id: {id} class: {class} relation: {FLOOR | ON obj_id | FREE} </CONTACT>\n\n";
  s += "Examples:\n";
  s += "  <CONTACT> id: 3 class: bed relation: FLOOR </CONTACT>\n";
  s += "  <CONTACT> id: 2 class: pillow relation: ON 3 </CONTACT>\n";
  s += "  <CONTACT> id: 1 class: lamp relation: ON 5 </CONTACT>\n\n";
  s += "Input image: " + image_ref + "\n";
  s += "Detections (id, class, x1, y1, x2, y2):\n";
  for (const auto& d : dets) s += detail::detection_line(d) + "\n";
  s += "\nOutput one <CONTACT>...</CONTACT> line per detected object. Do NOT skip any object.";
  return s;
}

} // namespace lap
