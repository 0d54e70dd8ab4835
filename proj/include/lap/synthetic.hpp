#pragma once

// Random scenes: continuous camera-space scenes, and clean grid layouts with
// floor furniture, stacked objects and wall-mounted objects.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "lap/contact.hpp"
#include "lap/metrics.hpp"
#include "lap/perturb.hpp"
#include "lap/scene.hpp"

namespace lap {

/// A gravity-aligned frame for a camera pitched and rolled by the given angles
/// (radians), expressed as canonical = frame * camera + translation.
inline Mat3 tilted_camera_frame(double pitch, double roll) {
  const Vec3 down(std::sin(roll), std::cos(roll) * std::cos(pitch), -std::cos(roll) * std::sin(pitch));
  return build_frame(-down, Vec3::UnitX());
}

/// 5-30 boxes (by default) with random pose and size, all in front of the camera.
inline std::vector<CameraBox> random_camera_scene(Rng& rng, int min_boxes = 5, int max_boxes = 30) {
  std::uniform_real_distribution<double> angle(-0.25, 0.25);
  const Mat3 frame = tilted_camera_frame(angle(rng), 0.5 * angle(rng));
  const Vec3 translation(0.0, std::uniform_real_distribution<double>(1.0, 2.0)(rng), 0.0);
  const int n = std::uniform_int_distribution<int>(min_boxes, max_boxes)(rng);

  std::uniform_real_distribution<double> ux(-3.0, 3.0), uz(-10.0, -3.0), usize(0.2, 2.0), uyaw(-std::numbers::pi, std::numbers::pi);
  std::uniform_real_distribution<double> lift(0.0, 1.5);
  std::bernoulli_distribution on_floor(0.6);
  std::vector<CameraBox> out;
  int id = 0;
  while (static_cast<int>(out.size()) < n) {
    CanonicalBox cb;
    cb.id = id;
    cb.class_name = "object";
    cb.size = Vec3(usize(rng), usize(rng), usize(rng));
    cb.pos = Vec3(ux(rng), on_floor(rng) ? 0.0 : lift(rng), uz(rng));
    cb.yaw = uyaw(rng);
    const std::vector<CanonicalBox> one{cb};
    CameraBox b = decanonicalize(one, frame, translation).front();
    bool visible = true;
    for (const auto& v : b.vertices()) visible = visible && v.z() > 0.05;
    if (!visible) continue;
    out.push_back(std::move(b));
    ++id;
  }
  return out;
}

struct SyntheticOptions {
  int min_objects = 3;
  int max_objects = 10;
  int min_size = 5;
  double stack_prob = 0.4;
  double wall_prob = 0.15;
};

namespace detail {

inline const std::vector<std::string>& floor_classes() {
  static const std::vector<std::string> v{"bed", "cabinet", "table", "sofa", "chair", "desk", "dresser", "bookshelf"};
  return v;
}
inline const std::vector<std::string>& top_classes() {
  static const std::vector<std::string> v{"lamp", "monitor", "plant", "box", "vase", "pillow", "speaker"};
  return v;
}
inline const std::vector<std::string>& wall_classes() {
  static const std::vector<std::string> v{"painting", "clock", "mirror", "board"};
  return v;
}

template <class T>
const T& pick(Rng& rng, const std::vector<T>& v) {
  return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
}

inline bool aabb_overlaps_any(const GridLayout& l, const GridBox& g, int margin) {
  Aabb a = aabb(g, l.config.n_theta);
  for (int k : {0, 2}) {
    a.lo[k] -= margin;
    a.hi[k] += margin;
  }
  for (const auto& o : l.objects)
    if (aabb_penetrates(a, aabb(o, l.config.n_theta))) return true;
  return false;
}

} // namespace detail

/// Scene-sized grid config, frame and translation so that layout_to_camera
/// puts every object in front of the camera.
inline GridLayout empty_synthetic_layout() {
  GridLayout l;
  l.config.delta = 0.1;
  l.config.n_theta = 24;
  l.config.offset = Vec3(-4.0, 0.0, -10.0);
  l.frame = tilted_camera_frame(-0.12, 0.0);
  l.translation = Vec3(0.0, 1.5, 0.0);
  return l;
}

/// A physically clean layout: floor objects with at least one unit of
/// horizontal clearance, stacked objects fully inside their supporter's
/// footprint, and wall objects hanging clear of everything. Every size
/// component is at least `min_size`.
inline GridLayout random_gt_layout(Rng& rng, const SyntheticOptions& opt = {}) {
  GridLayout l = empty_synthetic_layout();
  const int nt = l.config.n_theta;
  const int n = std::uniform_int_distribution<int>(opt.min_objects, opt.max_objects)(rng);
  const int lo = opt.min_size;
  std::uniform_int_distribution<int> pos(12, 68), yaw_any(0, nt - 1), yaw_quarter(0, 3);
  std::bernoulli_distribution coin(0.5);
  std::uniform_real_distribution<double> u01(0.0, 1.0);

  for (int attempt = 0; attempt < 400 && static_cast<int>(l.objects.size()) < n; ++attempt) {
    GridBox g;
    g.id = static_cast<int>(l.objects.size());
    const double r = u01(rng);
    if (r < opt.wall_prob) {
      g.class_name = detail::pick(rng, detail::wall_classes());
      g.size = {std::uniform_int_distribution<int>(lo, lo + 6)(rng), std::uniform_int_distribution<int>(lo, lo + 5)(rng), lo};
      g.pos = {pos(rng), std::uniform_int_distribution<int>(32, 40)(rng), pos(rng)};
      g.yaw_idx = yaw_quarter(rng) * nt / 4;
      if (detail::aabb_overlaps_any(l, g, 1)) continue;
    } else if (r < opt.wall_prob + opt.stack_prob && !l.objects.empty()) {
      const GridBox sup = detail::pick(rng, l.objects);
      if (sup.yaw_idx % (nt / 4) != 0 || sup.pos[1] > 0) continue;
      const Aabb sb = aabb(sup, nt);
      g.class_name = detail::pick(rng, detail::top_classes());
      g.yaw_idx = coin(rng) ? yaw_quarter(rng) * nt / 4 : yaw_any(rng);
      g.size = {std::uniform_int_distribution<int>(lo, lo + 4)(rng), std::uniform_int_distribution<int>(lo, lo + 6)(rng),
                std::uniform_int_distribution<int>(lo, lo + 4)(rng)};
      g.pos[1] = sup.top();
      if (g.top() > 30) continue;
      GridBox probe = g;
      probe.pos = {0, g.pos[1], 0};
      const Aabb pb = aabb(probe, nt);
      const double room_x = (sb.hi[0] - sb.lo[0]) - (pb.hi[0] - pb.lo[0]);
      const double room_z = (sb.hi[2] - sb.lo[2]) - (pb.hi[2] - pb.lo[2]);
      if (room_x < 0 || room_z < 0) continue;
      // Integer centers keeping the rotated extent inside the supporter.
      const int x0 = static_cast<int>(std::ceil(sb.lo[0] - pb.lo[0])), x1 = static_cast<int>(std::floor(sb.hi[0] - pb.hi[0]));
      const int z0 = static_cast<int>(std::ceil(sb.lo[2] - pb.lo[2])), z1 = static_cast<int>(std::floor(sb.hi[2] - pb.hi[2]));
      if (x0 > x1 || z0 > z1) continue;
      g.pos[0] = std::uniform_int_distribution<int>(x0, x1)(rng);
      g.pos[2] = std::uniform_int_distribution<int>(z0, z1)(rng);
      if (detail::aabb_overlaps_any(l, g, 0)) continue;
    } else {
      g.class_name = detail::pick(rng, detail::floor_classes());
      g.yaw_idx = coin(rng) ? yaw_quarter(rng) * nt / 4 : yaw_any(rng);
      g.size = {std::uniform_int_distribution<int>(lo + 2, lo + 15)(rng), std::uniform_int_distribution<int>(lo, lo + 15)(rng),
                std::uniform_int_distribution<int>(lo + 2, lo + 15)(rng)};
      g.pos = {pos(rng), 0, pos(rng)};
      if (detail::aabb_overlaps_any(l, g, 1)) continue;
    }
    l.objects.push_back(std::move(g));
  }
  return l;
}

/// The camera-space scene a grid layout depicts, with bbox2d filled in.
inline std::vector<CameraBox> camera_boxes_for(GridLayout& layout, const CameraIntrinsics& K) {
  auto boxes = layout_to_camera(layout);
  for (std::size_t i = 0; i < boxes.size(); ++i) layout.objects[i].bbox2d = normalized_bbox2d(boxes[i], K);
  return boxes;
}

} // namespace lap
