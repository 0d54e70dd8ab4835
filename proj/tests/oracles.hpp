#pragma once

// Brute-force reference computations used only by the tests. None of them
// calls into the library's geometry code.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "lap/scene.hpp"

namespace oracle {

using lap::Vec2;
using lap::Vec3;

inline std::array<Vec3, 8> corners(const lap::CameraBox& b) {
  const Vec3 ay = b.ax_x.cross(b.ax_z);
  std::array<Vec3, 8> out;
  int k = 0;
  for (int sx : {-1, 1})
    for (int sy : {-1, 1})
      for (int sz : {-1, 1})
        out[k++] = b.center + 0.5 * (sx * b.size.x() * b.ax_x + sy * b.size.y() * ay + sz * b.size.z() * b.ax_z);
  return out;
}

/// Largest vertex distance between two boxes with the same corner ordering.
inline double max_vertex_deviation(const lap::CameraBox& a, const lap::CameraBox& b) {
  const auto ca = corners(a), cb = corners(b);
  double m = 0.0;
  for (int i = 0; i < 8; ++i) m = std::max(m, (ca[i] - cb[i]).norm());
  return m;
}

/// Dominant eigenvector of sum(n n^T) by power iteration, oriented along the mean.
inline Vec3 dominant_normal(const std::vector<Vec3>& normals) {
  double m[3][3] = {};
  Vec3 mean = Vec3::Zero();
  for (const auto& n : normals) {
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) m[i][j] += n[i] * n[j];
    mean += n;
  }
  Vec3 v(0.3, 0.5, 0.7);
  for (int it = 0; it < 2000; ++it) {
    Vec3 w = Vec3::Zero();
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) w[i] += m[i][j] * v[j];
    v = w / w.norm();
  }
  return v.dot(mean) < 0 ? Vec3(-v) : v;
}

// ---------------------------------------------------------------------------
// Image-plane rasterization

struct Projected {
  std::array<Vec2, 8> pts;
};

inline Projected project(const lap::CameraBox& b, const lap::CameraIntrinsics& K) {
  Projected p;
  const auto c = corners(b);
  for (int i = 0; i < 8; ++i) p.pts[i] = Vec2(K.fx * c[i].x() / c[i].z() + K.cx, K.fy * c[i].y() / c[i].z() + K.cy);
  return p;
}

/// Horizontal extent of the silhouette on row y: every segment between two
/// projected corners lies inside the silhouette and its boundary is made of
/// such segments, so the row's extent is the min/max over all crossings.
inline bool row_extent(const Projected& p, double y, double& lo, double& hi) {
  lo = std::numeric_limits<double>::infinity();
  hi = -lo;
  for (int i = 0; i < 8; ++i)
    for (int j = i + 1; j < 8; ++j) {
      const Vec2 a = p.pts[i], b = p.pts[j];
      if ((a.y() - y) * (b.y() - y) > 0) continue;
      if (a.y() == b.y()) {
        if (a.y() != y) continue;
        lo = std::min({lo, a.x(), b.x()});
        hi = std::max({hi, a.x(), b.x()});
        continue;
      }
      const double t = (y - a.y()) / (b.y() - a.y());
      const double x = a.x() + t * (b.x() - a.x());
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
  return lo <= hi;
}

/// Number of sample centers k * step + step / 2 in [lo, hi].
inline long samples_in(double lo, double hi, double step) {
  if (hi < lo) return 0;
  const long a = static_cast<long>(std::ceil(lo / step - 0.5));
  const long b = static_cast<long>(std::floor(hi / step - 0.5));
  return std::max(0L, b - a + 1);
}

struct RasterCounts {
  long a = 0, b = 0, both = 0;
};

/// Sample counts of two silhouettes on a grid `factor` times finer than pixels.
inline RasterCounts rasterize_pair(const Projected& pa, const Projected& pb, int factor = 4) {
  const double step = 1.0 / factor;
  double y0 = std::numeric_limits<double>::infinity(), y1 = -y0;
  for (const auto* p : {&pa, &pb})
    for (const auto& v : p->pts) {
      y0 = std::min(y0, v.y());
      y1 = std::max(y1, v.y());
    }
  RasterCounts c;
  for (long r = static_cast<long>(std::floor(y0 / step)); r * step <= y1; ++r) {
    const double y = (r + 0.5) * step;
    double alo, ahi, blo, bhi;
    const bool ha = row_extent(pa, y, alo, ahi);
    const bool hb = row_extent(pb, y, blo, bhi);
    if (ha) c.a += samples_in(alo, ahi, step);
    if (hb) c.b += samples_in(blo, bhi, step);
    if (ha && hb) c.both += samples_in(std::max(alo, blo), std::min(ahi, bhi), step);
  }
  return c;
}

inline double raster_iou(const lap::CameraBox& a, const lap::CameraBox& b, const lap::CameraIntrinsics& K, int factor = 4) {
  const auto c = rasterize_pair(project(a, K), project(b, K), factor);
  const long uni = c.a + c.b - c.both;
  return uni > 0 ? static_cast<double>(c.both) / uni : 0.0;
}

inline double raster_area(const lap::CameraBox& a, const lap::CameraIntrinsics& K, int factor = 4) {
  const auto p = project(a, K);
  const auto c = rasterize_pair(p, p, factor);
  return static_cast<double>(c.a) / (factor * factor);
}

// ---------------------------------------------------------------------------
// Grid-space voxelization

/// Whether point (x, z) lies in the yaw-rotated footprint of g.
inline bool in_footprint(const lap::GridBox& g, int n_theta, double x, double z) {
  const double theta = (g.yaw_idx - n_theta / 2) * 2.0 * std::numbers::pi / n_theta;
  const double c = std::cos(theta), s = std::sin(theta);
  const double dx = x - g.pos[0], dz = z - g.pos[2];
  // Box axes in XZ: x-axis (c, -s), z-axis (-s, -c).
  const double u = dx * c - dz * s;
  const double w = -dx * s - dz * c;
  return std::abs(u) <= 0.5 * g.size[0] && std::abs(w) <= 0.5 * g.size[2];
}

/// Intersection volume counted on a grid with `sub` cells per grid unit.
inline double voxel_intersection_volume(const lap::GridBox& a, const lap::GridBox& b, int n_theta, int sub = 8) {
  const int y0 = std::max(a.pos[1], b.pos[1]), y1 = std::min(a.pos[1] + a.size[1], b.pos[1] + b.size[1]);
  if (y1 <= y0) return 0.0;
  const long ny = static_cast<long>(y1 - y0) * sub;
  const double ra = 0.5 * std::hypot(a.size[0], a.size[2]) + 1, rb = 0.5 * std::hypot(b.size[0], b.size[2]) + 1;
  const double x0 = std::max(a.pos[0] - ra, b.pos[0] - rb), x1 = std::min(a.pos[0] + ra, b.pos[0] + rb);
  const double z0 = std::max(a.pos[2] - ra, b.pos[2] - rb), z1 = std::min(a.pos[2] + ra, b.pos[2] + rb);
  if (x1 <= x0 || z1 <= z0) return 0.0;
  const double h = 1.0 / sub;
  long cells = 0;
  for (long i = static_cast<long>(std::floor(x0 * sub)); i * h <= x1; ++i)
    for (long k = static_cast<long>(std::floor(z0 * sub)); k * h <= z1; ++k) {
      const double x = (i + 0.5) * h, z = (k + 0.5) * h;
      if (in_footprint(a, n_theta, x, z) && in_footprint(b, n_theta, x, z)) ++cells;
    }
  return static_cast<double>(cells * ny) * h * h * h;
}

inline double voxel_volume(const lap::GridBox& a, int n_theta, int sub = 8) {
  return voxel_intersection_volume(a, a, n_theta, sub);
}

/// Fraction of a's footprint covered by b's, by sampling.
inline double sampled_footprint_overlap(const lap::GridBox& a, const lap::GridBox& b, int n_theta, int sub = 8) {
  const double ra = 0.5 * std::hypot(a.size[0], a.size[2]) + 1;
  const double h = 1.0 / sub;
  long in_a = 0, in_both = 0;
  for (long i = static_cast<long>(std::floor((a.pos[0] - ra) * sub)); i * h <= a.pos[0] + ra; ++i)
    for (long k = static_cast<long>(std::floor((a.pos[2] - ra) * sub)); k * h <= a.pos[2] + ra; ++k) {
      const double x = (i + 0.5) * h, z = (k + 0.5) * h;
      if (!in_footprint(a, n_theta, x, z)) continue;
      ++in_a;
      if (in_footprint(b, n_theta, x, z)) ++in_both;
    }
  return in_a ? static_cast<double>(in_both) / in_a : 0.0;
}

/// Support check written out from the metric's definition, with sampled overlap.
inline bool supported(const lap::GridLayout& l, std::size_t i, int sub = 8) {
  const auto& a = l.objects[i];
  if (a.pos[1] <= 1) return true;
  for (std::size_t j = 0; j < l.objects.size(); ++j) {
    if (j == i) continue;
    const auto& b = l.objects[j];
    if (std::abs(b.pos[1] + b.size[1] - a.pos[1]) > 1) continue;
    if (sampled_footprint_overlap(a, b, l.config.n_theta, sub) >= 0.5) return true;
  }
  return false;
}

} // namespace oracle
