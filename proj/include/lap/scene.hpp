#pragma once

// Camera-space boxes, gravity-aligned canonicalization and grid discretization.
//
// Conventions:
//  * Camera frame: +u right, +v down, +x away from the camera. Vectors are
//    stored in that order, so depth is component 2.
//  * A box is spanned by its two bottom axes ax_x, ax_z and the derived
//    ax_y = ax_x x ax_z. Sizes (w, h, l) run along (ax_x, ax_y, ax_z).
//  * Canonical frame rows are (x, y, z) with y = gravity and z = x x y.
//    Canonical and grid positions store the box bottom in y.
//  * Yaw theta in [-pi, pi) rotates the canonical box x-axis to
//    (cos theta, 0, -sin theta).

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "lap/error.hpp"
#include "lap/geometry.hpp"

namespace lap {

using IVec3 = std::array<int, 3>;

struct CameraBox {
  int id = 0;
  std::string class_name;
  Vec3 center = Vec3::Zero();
  Vec3 size = Vec3::Ones();
  Vec3 ax_x = Vec3::UnitX();
  Vec3 ax_z = Vec3::UnitZ();

  Vec3 ax_y() const { return ax_x.cross(ax_z); }

  /// Corner i has signs (bit0 -> x, bit1 -> y, bit2 -> z).
  std::array<Vec3, 8> vertices() const {
    std::array<Vec3, 8> out;
    const Vec3 hx = 0.5 * size.x() * ax_x;
    const Vec3 hy = 0.5 * size.y() * ax_y();
    const Vec3 hz = 0.5 * size.z() * ax_z;
    for (int i = 0; i < 8; ++i) {
      out[i] = center + ((i & 1) ? hx : Vec3(-hx)) + ((i & 2) ? hy : Vec3(-hy)) +
               ((i & 4) ? hz : Vec3(-hz));
    }
    return out;
  }
};

struct CanonicalBox {
  int id = 0;
  std::string class_name;
  Vec3 pos = Vec3::Zero(); // x, z at the center; y at the bottom face
  Vec3 size = Vec3::Ones();
  double yaw = 0.0;
};

struct GridConfig {
  double delta = 0.1;
  int n_theta = 24;
  Vec3 offset = Vec3::Zero();

  void validate() const {
    if (!(delta > 0.0)) throw Error(ErrorCode::FormatError, "grid cell size must be positive");
    if (n_theta < 4 || n_theta % 2 != 0)
      throw Error(ErrorCode::FormatError, "yaw bin count must be even and >= 4");
  }

  double yaw_step() const { return 2.0 * std::numbers::pi / n_theta; }

  bool operator==(const GridConfig& o) const {
    return delta == o.delta && n_theta == o.n_theta && offset == o.offset;
  }
};

struct GridBox {
  int id = 0;
  std::string class_name;
  std::array<int, 4> bbox2d{0, 0, 0, 0};
  IVec3 pos{0, 0, 0}; // gy is the bottom of the object
  IVec3 size{1, 1, 1};
  int yaw_idx = 0;

  int top() const { return pos[1] + size[1]; }
  long long volume() const { return 1LL * size[0] * size[1] * size[2]; }

  bool operator==(const GridBox&) const = default;
};

/// A discretized scene plus what is needed to map it back to camera space.
struct GridLayout {
  GridConfig config;
  Mat3 frame = Mat3::Identity();
  Vec3 translation = Vec3::Zero(); // canonical = frame * camera + translation
  std::vector<GridBox> objects;

  bool operator==(const GridLayout& o) const {
    return config == o.config && frame == o.frame && translation == o.translation &&
           objects == o.objects;
  }
};

struct CameraIntrinsics {
  double fx = 500.0;
  double fy = 500.0;
  double cx = 320.0;
  double cy = 240.0;
  int width = 640;
  int height = 480;

  void validate() const {
    if (!(fx > 0.0) || !(fy > 0.0))
      throw Error(ErrorCode::FormatError, "focal lengths must be positive");
  }
};

struct Canonicalization {
  std::vector<CanonicalBox> boxes;
  Mat3 frame = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
};

// ---------------------------------------------------------------------------
// Axes and gravity

inline Vec3 up_axis(const Vec3& ax_x, const Vec3& ax_z) {
  const Vec3 c = ax_x.cross(ax_z);
  const double n = c.norm();
  if (n < 1e-6) throw Error(ErrorCode::DegenerateAxes, "bottom axes are parallel");
  return c / n;
}

/// Gram-Schmidt ax_z against ax_x. Predictor outputs are only approximately
/// orthogonal; corrections above `max_correction_deg` are rejected.
inline std::pair<Vec3, Vec3> orthonormalize_axes(const Vec3& ax_x, const Vec3& ax_z,
                                                 double max_correction_deg = 10.0) {
  const double nx = ax_x.norm();
  const double nz = ax_z.norm();
  if (nx < 1e-9 || nz < 1e-9) throw Error(ErrorCode::DegenerateAxes, "zero-length axis");
  const Vec3 x = ax_x / nx;
  const Vec3 z0 = ax_z / nz;
  const Vec3 z1 = z0 - z0.dot(x) * x;
  const double n1 = z1.norm();
  if (n1 < 1e-6) throw Error(ErrorCode::DegenerateAxes, "bottom axes are parallel");
  const Vec3 z = z1 / n1;
  const double correction = std::acos(std::clamp(z0.dot(z), -1.0, 1.0)) * 180.0 / std::numbers::pi;
  if (correction > max_correction_deg)
    throw Error(ErrorCode::DegenerateAxes,
                "axes deviate from orthogonality by " + std::to_string(correction) + " deg");
  return {x, z};
}

/// Dominant direction of the stacked bottom-face normals, oriented along their mean.
inline Vec3 estimate_gravity(std::span<const CameraBox> boxes) {
  if (boxes.empty()) throw Error(ErrorCode::EmptyScene, "no boxes");
  Mat3 scatter = Mat3::Zero();
  Vec3 mean = Vec3::Zero();
  for (const auto& b : boxes) {
    const Vec3 n = up_axis(b.ax_x, b.ax_z);
    scatter += n * n.transpose();
    mean += n;
  }
  // Right singular vectors of the stacked normals are the eigenvectors of N^T N.
  Eigen::SelfAdjointEigenSolver<Mat3> eig(scatter);
  Vec3 g = eig.eigenvectors().col(2).normalized();
  if (g.dot(mean) < 0) g = -g;
  return g;
}

/// Rows (x, y, z): y = gravity, x = cam_right projected off y, z = x x y.
inline Mat3 build_frame(const Vec3& gravity, const Vec3& cam_right) {
  const Vec3 y = gravity.normalized();
  const Vec3 r = cam_right.normalized();
  if (std::abs(y.dot(r)) >= 0.99)
    throw Error(ErrorCode::DegenerateFrame, "gravity is parallel to the camera right axis");
  const Vec3 x = (r - r.dot(y) * y).normalized();
  const Vec3 z = x.cross(y);
  Mat3 frame;
  frame.row(0) = x.transpose();
  frame.row(1) = y.transpose();
  frame.row(2) = z.transpose();
  return frame;
}

inline double wrap_yaw(double theta) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double t = std::fmod(theta + std::numbers::pi, two_pi);
  if (t < 0) t += two_pi;
  t -= std::numbers::pi;
  if (t >= std::numbers::pi) t -= two_pi;
  return t;
}

inline std::vector<CameraBox> orthonormalized(std::span<const CameraBox> boxes) {
  std::vector<CameraBox> out(boxes.begin(), boxes.end());
  for (auto& b : out) std::tie(b.ax_x, b.ax_z) = orthonormalize_axes(b.ax_x, b.ax_z);
  return out;
}

inline Canonicalization canonicalize(std::span<const CameraBox> input) {
  if (input.empty()) throw Error(ErrorCode::EmptyScene, "no boxes");
  const std::vector<CameraBox> boxes = orthonormalized(input);

  Canonicalization out;
  out.frame = build_frame(estimate_gravity(boxes), Vec3::UnitX());

  double min_bottom = std::numeric_limits<double>::infinity();
  Vec3 mean = Vec3::Zero();
  out.boxes.reserve(boxes.size());
  for (const auto& b : boxes) {
    const Vec3 c = out.frame * b.center;
    const Vec3 a = out.frame * b.ax_x;
    CanonicalBox cb;
    cb.id = b.id;
    cb.class_name = b.class_name;
    cb.size = b.size;
    cb.pos = Vec3(c.x(), c.y() - 0.5 * b.size.y(), c.z());
    cb.yaw = wrap_yaw(std::atan2(-a.z(), a.x()));
    min_bottom = std::min(min_bottom, cb.pos.y());
    mean += c;
    out.boxes.push_back(std::move(cb));
  }
  mean /= static_cast<double>(boxes.size());

  out.translation = Vec3(-mean.x(), -min_bottom, -mean.z());
  for (auto& cb : out.boxes) cb.pos += out.translation;
  return out;
}

inline std::vector<CameraBox> decanonicalize(std::span<const CanonicalBox> layout, const Mat3& frame,
                                             const Vec3& translation) {
  const Mat3 inv = frame.transpose();
  std::vector<CameraBox> out;
  out.reserve(layout.size());
  for (const auto& cb : layout) {
    const double c = std::cos(cb.yaw);
    const double s = std::sin(cb.yaw);
    const Vec3 center(cb.pos.x(), cb.pos.y() + 0.5 * cb.size.y(), cb.pos.z());
    CameraBox b;
    b.id = cb.id;
    b.class_name = cb.class_name;
    b.size = cb.size;
    b.center = inv * (center - translation);
    b.ax_x = inv * Vec3(c, 0.0, -s);
    b.ax_z = inv * Vec3(-s, 0.0, -c);
    out.push_back(std::move(b));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Grid discretization

inline int yaw_to_index(double theta, int n_theta) {
  const double step = 2.0 * std::numbers::pi / n_theta;
  const long k = std::lround((theta + std::numbers::pi) / step);
  return static_cast<int>(((k % n_theta) + n_theta) % n_theta);
}

inline double index_to_yaw(int idx, int n_theta) {
  return idx * (2.0 * std::numbers::pi / n_theta) - std::numbers::pi;
}

inline std::vector<GridBox> discretize(std::span<const CanonicalBox> layout, const GridConfig& cfg) {
  cfg.validate();
  std::vector<GridBox> out;
  out.reserve(layout.size());
  for (const auto& cb : layout) {
    GridBox g;
    g.id = cb.id;
    g.class_name = cb.class_name;
    for (int k = 0; k < 3; ++k) {
      const long v = std::lround((cb.pos[k] - cfg.offset[k]) / cfg.delta);
      if (v < 0)
        throw Error(ErrorCode::NegativeIndex, "object " + std::to_string(cb.id) + " axis " +
                                                  std::to_string(k) + " maps to " + std::to_string(v));
      g.pos[k] = static_cast<int>(v);
      g.size[k] = std::max(1, static_cast<int>(std::lround(cb.size[k] / cfg.delta)));
    }
    g.yaw_idx = yaw_to_index(cb.yaw, cfg.n_theta);
    out.push_back(std::move(g));
  }
  return out;
}

/// Per-scene offset: horizontal minimum minus one cell; the ground plane stays at gy = 0.
inline Vec3 auto_offset(std::span<const CanonicalBox> layout, double delta) {
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  for (const auto& cb : layout) lo = lo.cwiseMin(cb.pos);
  if (layout.empty()) lo = Vec3::Zero();
  return Vec3(lo.x() - delta, std::min(0.0, lo.y()), lo.z() - delta);
}

inline std::vector<CanonicalBox> undiscretize(std::span<const GridBox> grid, const GridConfig& cfg) {
  std::vector<CanonicalBox> out;
  out.reserve(grid.size());
  for (const auto& g : grid) {
    CanonicalBox cb;
    cb.id = g.id;
    cb.class_name = g.class_name;
    for (int k = 0; k < 3; ++k) {
      cb.pos[k] = g.pos[k] * cfg.delta + cfg.offset[k];
      cb.size[k] = g.size[k] * cfg.delta;
    }
    cb.yaw = index_to_yaw(g.yaw_idx, cfg.n_theta);
    out.push_back(std::move(cb));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Projection

inline Vec2 project_point(const Vec3& p, const CameraIntrinsics& K) {
  return Vec2(K.fx * p.x() / p.z() + K.cx, K.fy * p.y() / p.z() + K.cy);
}

/// Silhouette of the box in pixels: the counterclockwise hull of its projected corners.
inline Polygon project_box(const CameraBox& box, const CameraIntrinsics& K) {
  std::vector<Vec2> pts;
  pts.reserve(8);
  for (const auto& v : box.vertices()) {
    if (v.z() <= 1e-3)
      throw Error(ErrorCode::BehindCamera, "object " + std::to_string(box.id) + " crosses the image plane");
    pts.push_back(project_point(v, K));
  }
  return convex_hull(std::move(pts));
}

/// 2D box of the projection in normalized 0-1000 image coordinates.
inline std::array<int, 4> normalized_bbox2d(const CameraBox& box, const CameraIntrinsics& K) {
  Polygon hull;
  try {
    hull = project_box(box, K);
  } catch (const Error&) {
    return {0, 0, 0, 0};
  }
  double x0 = std::numeric_limits<double>::infinity(), y0 = x0, x1 = -x0, y1 = -x0;
  for (const auto& p : hull) {
    x0 = std::min(x0, p.x());
    y0 = std::min(y0, p.y());
    x1 = std::max(x1, p.x());
    y1 = std::max(y1, p.y());
  }
  auto norm = [](double v, int extent) {
    return static_cast<int>(std::lround(std::clamp(v / extent, 0.0, 1.0) * 1000.0));
  };
  return {norm(x0, K.width), norm(y0, K.height), norm(x1, K.width), norm(y1, K.height)};
}

// ---------------------------------------------------------------------------
// Pipelines

/// Camera boxes -> canonical frame -> grid, with 2D boxes attached from the intrinsics.
inline GridLayout build_grid_layout(std::span<const CameraBox> boxes, const CameraIntrinsics& K,
                                    double delta = 0.1, int n_theta = 24) {
  const Canonicalization canon = canonicalize(boxes);
  GridLayout layout;
  layout.config.delta = delta;
  layout.config.n_theta = n_theta;
  layout.config.offset = auto_offset(canon.boxes, delta);
  layout.frame = canon.frame;
  layout.translation = canon.translation;
  layout.objects = discretize(canon.boxes, layout.config);
  for (std::size_t i = 0; i < boxes.size(); ++i)
    layout.objects[i].bbox2d = normalized_bbox2d(boxes[i], K);
  return layout;
}

inline std::vector<CameraBox> layout_to_camera(const GridLayout& layout) {
  const auto canon = undiscretize(layout.objects, layout.config);
  return decanonicalize(canon, layout.frame, layout.translation);
}

} // namespace lap
