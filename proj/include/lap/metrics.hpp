#pragma once

// Layout quality metrics: reprojection IoU and precision, depth error, support
// violation rate, collision count and rotation error.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "lap/error.hpp"
#include "lap/geometry.hpp"
#include "lap/scene.hpp"

namespace lap {

// ---------------------------------------------------------------------------
// Class exclusions

namespace detail {

inline std::vector<std::string> label_words(std::string_view label) {
  std::vector<std::string> words;
  std::string cur;
  auto flush = [&] {
    if (cur.empty()) return;
    // Naive singularization so "lamps" matches "lamp" but "glass" stays put.
    if (cur.size() > 3 && cur.back() == 's' && cur[cur.size() - 2] != 's') cur.pop_back();
    words.push_back(cur);
    cur.clear();
  };
  for (char ch : label) {
    const auto u = static_cast<unsigned char>(ch);
    if (std::isalnum(u)) cur += static_cast<char>(std::tolower(u));
    else flush();
  }
  flush();
  return words;
}

} // namespace detail

inline std::string normalize_label(std::string_view label) {
  std::string out;
  for (const auto& w : detail::label_words(label)) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

/// True if some term of `terms` occurs in `label` as a contiguous run of
/// whole words, after lowercasing and singularizing both.
inline bool label_matches(std::string_view label, const std::vector<std::string>& terms) {
  const auto words = detail::label_words(label);
  for (const auto& term : terms) {
    const auto tw = detail::label_words(term);
    if (tw.empty() || tw.size() > words.size()) continue;
    for (std::size_t i = 0; i + tw.size() <= words.size(); ++i)
      if (std::equal(tw.begin(), tw.end(), words.begin() + static_cast<std::ptrdiff_t>(i))) return true;
  }
  return false;
}

struct ExclusionConfig {
  std::vector<std::string> svr_wall_mounted{"paintings", "mirrors", "boards", "clocks"};
  std::vector<std::string> svr_small{"cups", "bottles", "books", "towels"};
  std::vector<std::string> rot_symmetric{"lamps", "round tables", "stools"};

  /// Lowercases and deduplicates every list.
  ExclusionConfig& normalize() {
    for (auto* list : {&svr_wall_mounted, &svr_small, &rot_symmetric}) {
      for (auto& s : *list)
        std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
      std::sort(list->begin(), list->end());
      list->erase(std::unique(list->begin(), list->end()), list->end());
    }
    return *this;
  }

  bool svr_excluded(std::string_view label) const {
    return label_matches(label, svr_wall_mounted) || label_matches(label, svr_small);
  }
  bool rotation_excluded(std::string_view label) const { return label_matches(label, rot_symmetric); }
};

// ---------------------------------------------------------------------------
// Image-plane metrics

inline double polygon_iou(const Polygon& a, const Polygon& b) {
  const double aa = area(a);
  const double ab = area(b);
  if (aa <= 0.0 || ab <= 0.0) return 0.0;
  const double inter = convex_intersection_area(a, b);
  const double uni = aa + ab - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

struct MatchedIoU {
  int id = 0;
  double iou = 0.0;
};

struct ReprojResult {
  double mean = 0.0;
  std::vector<MatchedIoU> per_object;
};

/// IoU of the projected silhouettes; a box crossing the image plane scores 0.
inline double box_reproj_iou(const CameraBox& pred, const CameraBox& gt, const CameraIntrinsics& K) {
  try {
    return polygon_iou(project_box(pred, K), project_box(gt, K));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::BehindCamera) return 0.0;
    throw;
  }
}

namespace detail {

template <class Box>
std::vector<std::pair<const Box*, const Box*>> match_by_id(std::span<const Box> pred, std::span<const Box> gt) {
  std::unordered_map<int, const Box*> by_id;
  for (const auto& g : gt) by_id.emplace(g.id, &g);
  std::vector<std::pair<const Box*, const Box*>> out;
  for (const auto& p : pred)
    if (auto it = by_id.find(p.id); it != by_id.end()) out.emplace_back(&p, it->second);
  return out;
}

} // namespace detail

inline ReprojResult reproj_iou(std::span<const CameraBox> pred, std::span<const CameraBox> gt,
                               const CameraIntrinsics& K) {
  const auto pairs = detail::match_by_id(pred, gt);
  if (pairs.empty()) throw Error(ErrorCode::NoMatches, "no prediction shares an id with the ground truth");
  ReprojResult out;
  for (const auto& [p, g] : pairs) {
    const double iou = box_reproj_iou(*p, *g, K);
    out.per_object.push_back({p->id, iou});
    out.mean += iou;
  }
  out.mean /= static_cast<double>(pairs.size());
  return out;
}

/// Minimum-cost assignment of rows to columns (rows <= columns). Returns the
/// column assigned to each row.
inline std::vector<int> hungarian(const std::vector<std::vector<double>>& cost) {
  const int n = static_cast<int>(cost.size());
  if (n == 0) return {};
  const int m = static_cast<int>(cost.front().size());
  if (m < n) throw Error(ErrorCode::ShapeMismatch, "hungarian needs rows <= columns");
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0), minv(m + 1);
  std::vector<int> p(m + 1, 0), way(m + 1, 0);
  std::vector<char> used(m + 1);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> row_to_col(n, -1);
  for (int j = 1; j <= m; ++j)
    if (p[j]) row_to_col[p[j] - 1] = j - 1;
  return row_to_col;
}

/// Fallback for predictions without detection ids: one-to-one matching that
/// maximizes total reprojection IoU. Per-object ids are the prediction ids.
inline ReprojResult reproj_iou_unmatched(std::span<const CameraBox> pred, std::span<const CameraBox> gt,
                                         const CameraIntrinsics& K) {
  if (pred.empty() || gt.empty()) throw Error(ErrorCode::NoMatches, "empty box set");
  const bool transpose = pred.size() > gt.size();
  const auto& rows = transpose ? gt : pred;
  const auto& cols = transpose ? pred : gt;
  std::vector<std::vector<double>> iou(rows.size(), std::vector<double>(cols.size()));
  std::vector<std::vector<double>> cost = iou;
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j) {
      iou[i][j] = transpose ? box_reproj_iou(cols[j], rows[i], K) : box_reproj_iou(rows[i], cols[j], K);
      cost[i][j] = 1.0 - iou[i][j];
    }
  const auto assign = hungarian(cost);
  ReprojResult out;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const int j = assign[i];
    const int pred_id = transpose ? cols[j].id : rows[i].id;
    out.per_object.push_back({pred_id, iou[i][j]});
    out.mean += iou[i][j];
  }
  out.mean /= static_cast<double>(rows.size());
  return out;
}

inline double precision_at(std::span<const MatchedIoU> ious, double tau) {
  if (ious.empty()) return 0.0;
  const auto hits = std::count_if(ious.begin(), ious.end(), [tau](const MatchedIoU& m) { return m.iou > tau; });
  return static_cast<double>(hits) / static_cast<double>(ious.size());
}

inline double precision_at(std::span<const double> ious, double tau) {
  if (ious.empty()) return 0.0;
  const auto hits = std::count_if(ious.begin(), ious.end(), [tau](double v) { return v > tau; });
  return static_cast<double>(hits) / static_cast<double>(ious.size());
}

/// Mean absolute difference of center depth (the away-from-camera component).
inline double avg_depth_error(std::span<const CameraBox> pred, std::span<const CameraBox> gt) {
  const auto pairs = detail::match_by_id(pred, gt);
  if (pairs.empty()) throw Error(ErrorCode::NoMatches, "no prediction shares an id with the ground truth");
  double sum = 0.0;
  for (const auto& [p, g] : pairs) sum += std::abs(p->center.z() - g->center.z());
  return sum / static_cast<double>(pairs.size());
}

// ---------------------------------------------------------------------------
// Grid-space footprints

/// (cos, sin) of a yaw bin, exact at quarter turns.
inline std::pair<double, double> yaw_cos_sin(int yaw_idx, int n_theta) {
  const int k = yaw_idx - n_theta / 2; // theta = k * 2pi / n
  if (n_theta % 4 == 0 && (k * 4) % n_theta == 0) {
    const int q = (((k * 4) / n_theta) % 4 + 4) % 4;
    static constexpr double cs[4][2] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
    return {cs[q][0], cs[q][1]};
  }
  const double t = k * 2.0 * std::numbers::pi / n_theta;
  return {std::cos(t), std::sin(t)};
}

/// Footprint in the XZ plane (grid units), as a counterclockwise polygon.
inline Polygon footprint(const GridBox& g, int n_theta) {
  const auto [c, s] = yaw_cos_sin(g.yaw_idx, n_theta);
  const Vec2 center(g.pos[0], g.pos[2]);
  const Vec2 ex = 0.5 * g.size[0] * Vec2(c, -s);
  const Vec2 ez = 0.5 * g.size[2] * Vec2(-s, -c);
  return make_ccw({center - ex - ez, center + ex - ez, center + ex + ez, center - ex + ez});
}

struct Aabb {
  std::array<double, 3> lo{};
  std::array<double, 3> hi{};
};

inline Aabb aabb(const GridBox& g, int n_theta) {
  const auto [c, s] = yaw_cos_sin(g.yaw_idx, n_theta);
  const double hx = 0.5 * (std::abs(c) * g.size[0] + std::abs(s) * g.size[2]);
  const double hz = 0.5 * (std::abs(s) * g.size[0] + std::abs(c) * g.size[2]);
  return {{g.pos[0] - hx, static_cast<double>(g.pos[1]), g.pos[2] - hz},
          {g.pos[0] + hx, static_cast<double>(g.top()), g.pos[2] + hz}};
}

/// Overlap length of two AABBs along each axis (negative when separated).
inline std::array<double, 3> aabb_overlap(const Aabb& a, const Aabb& b) {
  std::array<double, 3> out{};
  for (int k = 0; k < 3; ++k) out[k] = std::min(a.hi[k], b.hi[k]) - std::max(a.lo[k], b.lo[k]);
  return out;
}

inline bool aabb_penetrates(const Aabb& a, const Aabb& b) {
  const auto o = aabb_overlap(a, b);
  return o[0] > 0 && o[1] > 0 && o[2] > 0;
}

/// Fraction of `a`'s footprint covered by `b`'s footprint.
inline double footprint_overlap_fraction(const GridBox& a, const GridBox& b, int n_theta) {
  const double fa = static_cast<double>(a.size[0]) * a.size[2];
  if (fa <= 0) return 0.0;
  return convex_intersection_area(footprint(a, n_theta), footprint(b, n_theta)) / fa;
}

/// Exact intersection volume of two yaw-rotated boxes (footprint clip times vertical overlap).
inline double prism_intersection_volume(const GridBox& a, const GridBox& b, int n_theta) {
  const double dy = std::min(a.top(), b.top()) - std::max(a.pos[1], b.pos[1]);
  if (dy <= 0) return 0.0;
  return convex_intersection_area(footprint(a, n_theta), footprint(b, n_theta)) * dy;
}

// ---------------------------------------------------------------------------
// Physical plausibility

/// Ground contact within one unit, or a supporter whose top is within one unit
/// of this bottom and covers at least half of this footprint.
inline bool is_supported(const GridLayout& layout, std::size_t i) {
  const GridBox& a = layout.objects[i];
  if (a.pos[1] <= 1) return true;
  for (std::size_t j = 0; j < layout.objects.size(); ++j) {
    if (j == i) continue;
    const GridBox& b = layout.objects[j];
    if (std::abs(b.top() - a.pos[1]) > 1) continue;
    if (footprint_overlap_fraction(a, b, layout.config.n_theta) >= 0.5) return true;
  }
  return false;
}

/// Percentage of considered objects without support. Excluded classes and
/// `skip_ids` are not considered.
inline double support_violation_rate(const GridLayout& layout, const ExclusionConfig& excl = {},
                                     const std::set<int>& skip_ids = {}) {
  int considered = 0, violations = 0;
  for (std::size_t i = 0; i < layout.objects.size(); ++i) {
    const GridBox& g = layout.objects[i];
    if (skip_ids.count(g.id) || excl.svr_excluded(g.class_name)) continue;
    ++considered;
    if (!is_supported(layout, i)) ++violations;
  }
  return considered ? 100.0 * violations / considered : 0.0;
}

using IdPair = std::pair<int, int>;

inline IdPair make_id_pair(int a, int b) { return a < b ? IdPair{a, b} : IdPair{b, a}; }

/// True when the boxes share more than 20% of the smaller volume.
inline bool boxes_collide(const GridBox& a, const GridBox& b, int n_theta) {
  const double smaller = static_cast<double>(std::min(a.volume(), b.volume()));
  return prism_intersection_volume(a, b, n_theta) > 0.2 * smaller;
}

inline std::set<IdPair> collision_pairs(const GridLayout& layout) {
  std::set<IdPair> out;
  const auto& o = layout.objects;
  for (std::size_t i = 0; i < o.size(); ++i)
    for (std::size_t j = i + 1; j < o.size(); ++j)
      if (boxes_collide(o[i], o[j], layout.config.n_theta)) out.insert(make_id_pair(o[i].id, o[j].id));
  return out;
}

/// Colliding pairs not already present in the ground truth.
inline int collision_count(const GridLayout& layout, const std::set<IdPair>& gt_collisions = {}) {
  int n = 0;
  for (const auto& p : collision_pairs(layout))
    if (!gt_collisions.count(p)) ++n;
  return n;
}

inline int aabb_collision_count(const GridLayout& layout) {
  int n = 0;
  const auto& o = layout.objects;
  const int nt = layout.config.n_theta;
  for (std::size_t i = 0; i < o.size(); ++i)
    for (std::size_t j = i + 1; j < o.size(); ++j)
      if (aabb_penetrates(aabb(o[i], nt), aabb(o[j], nt))) ++n;
  return n;
}

inline double wrapped_angle_deg(double a_deg, double b_deg) {
  const double d = std::fmod(std::abs(a_deg - b_deg), 360.0);
  return std::min(d, 360.0 - d);
}

/// Mean wrapped yaw difference in degrees over id-matched, non-symmetric objects.
inline double rotation_error(const GridLayout& pred, const GridLayout& gt, const ExclusionConfig& excl = {}) {
  const auto pairs = detail::match_by_id<GridBox>(pred.objects, gt.objects);
  const double step_p = 360.0 / pred.config.n_theta;
  const double step_g = 360.0 / gt.config.n_theta;
  double sum = 0.0;
  int n = 0;
  for (const auto& [p, g] : pairs) {
    if (excl.rotation_excluded(g->class_name)) continue;
    sum += wrapped_angle_deg(p->yaw_idx * step_p, g->yaw_idx * step_g);
    ++n;
  }
  if (n == 0) throw Error(ErrorCode::NoMatches, "no rotation-eligible matched objects");
  return sum / n;
}

/// L1 distance between matched grid positions, summed over objects.
inline long position_error_l1(const GridLayout& a, const GridLayout& b) {
  long sum = 0;
  for (const auto& [p, g] : detail::match_by_id<GridBox>(a.objects, b.objects))
    for (int k = 0; k < 3; ++k) sum += std::abs(p->pos[k] - g->pos[k]);
  return sum;
}

// ---------------------------------------------------------------------------
// Reports

struct MetricReport {
  double reproj_iou = 0.0;
  double prec_at_25 = 0.0;
  double prec_at_50 = 0.0;
  double avg_depth_error = 0.0;
  double svr = 0.0;
  double collision_count = 0.0;
  double rotation_error = 0.0;
};

inline const std::vector<std::string>& metric_columns() {
  static const std::vector<std::string> cols{"Reproj. IoU", "Prec.@(IoU=0.25)", "Prec.@(IoU=0.5)", "Avg. DE",
                                             "SVR", "# Collisions", "Rot. Err."};
  return cols;
}

inline std::vector<double> metric_values(const MetricReport& r) {
  return {r.reproj_iou, r.prec_at_25, r.prec_at_50, r.avg_depth_error, r.svr, r.collision_count, r.rotation_error};
}

struct EvalContext {
  std::span<const CameraBox> gt_camera; // may be empty: image-plane metrics are then skipped
  CameraIntrinsics intrinsics;
  ExclusionConfig exclusions;
  std::set<IdPair> gt_collisions;
};

/// Full report of `pred` against `gt`. Rotation error is 0 when no eligible pair exists.
inline MetricReport evaluate(const GridLayout& pred, const GridLayout& gt, const EvalContext& ctx) {
  MetricReport r;
  if (!ctx.gt_camera.empty()) {
    const auto cam = layout_to_camera(pred);
    const auto reproj = reproj_iou(cam, ctx.gt_camera, ctx.intrinsics);
    r.reproj_iou = reproj.mean;
    r.prec_at_25 = precision_at(std::span<const MatchedIoU>(reproj.per_object), 0.25);
    r.prec_at_50 = precision_at(std::span<const MatchedIoU>(reproj.per_object), 0.5);
    r.avg_depth_error = avg_depth_error(cam, ctx.gt_camera);
  }
  r.svr = support_violation_rate(pred, ctx.exclusions);
  r.collision_count = collision_count(pred, ctx.gt_collisions);
  try {
    r.rotation_error = rotation_error(pred, gt, ctx.exclusions);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::NoMatches) throw;
  }
  return r;
}

/// Component-wise mean of a set of reports.
inline MetricReport mean_report(std::span<const MetricReport> reports) {
  MetricReport m;
  if (reports.empty()) return m;
  for (const auto& r : reports) {
    m.reproj_iou += r.reproj_iou;
    m.prec_at_25 += r.prec_at_25;
    m.prec_at_50 += r.prec_at_50;
    m.avg_depth_error += r.avg_depth_error;
    m.svr += r.svr;
    m.collision_count += r.collision_count;
    m.rotation_error += r.rotation_error;
  }
  const double n = static_cast<double>(reports.size());
  m.reproj_iou /= n;
  m.prec_at_25 /= n;
  m.prec_at_50 /= n;
  m.avg_depth_error /= n;
  m.svr /= n;
  m.collision_count /= n;
  m.rotation_error /= n;
  return m;
}

} // namespace lap
