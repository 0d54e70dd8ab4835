#pragma once

// Training data synthesis: reversible perturbations of ground-truth layouts,
// corrupted corrective sequences for preference pairs, and record emission.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "lap/actions.hpp"
#include "lap/error.hpp"
#include "lap/metrics.hpp"
#include "lap/prompts.hpp"

namespace lap {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

/// Per-scene seed, independent of processing order.
inline std::uint64_t scene_seed(std::uint64_t seed, std::string_view scene_id) {
  return splitmix64(seed ^ splitmix64(fnv1a(scene_id)));
}

// ---------------------------------------------------------------------------
// Perturbation

struct PerturbConfig {
  double p_continue = 0.5;
  int move_max = 3;   // MOVE components in [-move_max, move_max], not all zero
  int rotate_max = 4; // ROTATE_Y in [-rotate_max, rotate_max] \ {0}
  int resize_max = 2; // RESIZE in [-resize_max, resize_max] \ {0}

  void validate() const {
    if (!(p_continue >= 0.0 && p_continue < 1.0)) throw Error(ErrorCode::FormatError, "p_continue must be in [0, 1)");
    if (move_max < 1 || rotate_max < 1 || resize_max < 1 || resize_max > 9)
      throw Error(ErrorCode::FormatError, "perturbation ranges must admit a nonzero action");
  }
};

struct Perturbation {
  GridLayout perturbed;
  ActionSequence perturb_seq;
  ActionSequence gt_seq;
};

namespace detail {

inline int nonzero_in(Rng& rng, int max_abs) {
  std::uniform_int_distribution<int> d(1, max_abs);
  std::bernoulli_distribution neg(0.5);
  const int v = d(rng);
  return neg(rng) ? -v : v;
}

} // namespace detail

/// Perturbs objects drawn without replacement, each with 1-3 distinct action
/// types, continuing with probability p_continue. Returns the corrective
/// sequence alongside.
inline Perturbation sample_perturbation(const GridLayout& layout, const PerturbConfig& cfg, Rng& rng) {
  cfg.validate();
  if (layout.objects.empty()) throw Error(ErrorCode::EmptyScene, "cannot perturb an empty layout");

  std::vector<int> order(layout.objects.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::shuffle(order.begin(), order.end(), rng);

  std::uniform_int_distribution<int> type_count(1, 3);
  std::uniform_int_distribution<int> move_comp(-cfg.move_max, cfg.move_max);
  std::bernoulli_distribution again(cfg.p_continue);

  ActionSequence seq;
  GridLayout state = layout;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const int obj = order[k];
    std::array<int, 3> types{0, 1, 2};
    std::shuffle(types.begin(), types.end(), rng);
    const int n_types = type_count(rng);
    seq.push_back(Select{obj});
    for (int t = 0; t < n_types; ++t) {
      Action a;
      switch (types[t]) {
        case 0: {
          const int floor_dy = -state.objects[obj].pos[1];
          Move m;
          do {
            m = {move_comp(rng), move_comp(rng), move_comp(rng)};
          } while ((m.dx == 0 && m.dy == 0 && m.dz == 0) || m.dy < floor_dy);
          a = m;
          break;
        }
        case 1: a = RotateY{detail::nonzero_in(rng, cfg.rotate_max)}; break;
        default: a = Resize{detail::nonzero_in(rng, cfg.resize_max)}; break;
      }
      state = lap::apply(state, {Select{obj}, a});
      seq.push_back(a);
    }
    if (k + 1 == order.size() || !again(rng)) break;
  }
  seq.push_back(Stop{});

  Perturbation out;
  out.perturbed = lap::apply(layout, seq);
  out.perturb_seq = std::move(seq);
  out.gt_seq = invert(out.perturb_seq, layout, out.perturbed);
  return out;
}

// ---------------------------------------------------------------------------
// Degradation

enum class DegradationKind {
  NumericalShift,
  MagnitudeUndershoot,
  MagnitudeOvershoot,
  NuisanceInsertion,
  OverCorrection,
  MissingActions,
  PrematureStop,
  WrongActionType,
  DirectionFlip,
};

inline constexpr std::array<DegradationKind, 9> all_degradations{
    DegradationKind::NumericalShift,    DegradationKind::MagnitudeUndershoot, DegradationKind::MagnitudeOvershoot,
    DegradationKind::NuisanceInsertion, DegradationKind::OverCorrection,      DegradationKind::MissingActions,
    DegradationKind::PrematureStop,     DegradationKind::WrongActionType,     DegradationKind::DirectionFlip,
};

inline std::string to_string(DegradationKind k) {
  switch (k) {
    case DegradationKind::NumericalShift: return "numerical_shift";
    case DegradationKind::MagnitudeUndershoot: return "magnitude_undershoot";
    case DegradationKind::MagnitudeOvershoot: return "magnitude_overshoot";
    case DegradationKind::NuisanceInsertion: return "nuisance_insertion";
    case DegradationKind::OverCorrection: return "over_correction";
    case DegradationKind::MissingActions: return "missing_actions";
    case DegradationKind::PrematureStop: return "premature_stop";
    case DegradationKind::WrongActionType: return "wrong_action_type";
    case DegradationKind::DirectionFlip: return "direction_flip";
  }
  return "unknown";
}

namespace detail {

inline int clamp_resize(int ds) { return std::max(ds, -9); }

/// Calls f(int&) on every integer parameter of a transform.
template <class F>
void for_each_param(Action& a, F&& f) {
  if (auto* m = std::get_if<Move>(&a)) {
    f(m->dx);
    f(m->dy);
    f(m->dz);
  } else if (auto* r = std::get_if<RotateY>(&a)) {
    f(r->d);
  } else if (auto* z = std::get_if<Resize>(&a)) {
    f(z->ds);
    z->ds = clamp_resize(z->ds);
  }
}

inline int scale_param(int p, double factor) {
  if (p == 0) return 0;
  const int v = static_cast<int>(std::lround(p * factor));
  return v == 0 ? (p > 0 ? 1 : -1) : v;
}

inline std::vector<std::size_t> transform_positions(const ActionSequence& seq) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < seq.size(); ++i)
    if (is_transform(seq[i])) out.push_back(i);
  return out;
}

inline ActionSequence without_stop(ActionSequence seq) {
  seq.erase(std::remove_if(seq.begin(), seq.end(), [](const Action& a) { return std::holds_alternative<Stop>(a); }),
            seq.end());
  return seq;
}

/// Drops SELECTs that are not followed by any transform before the next SELECT.
inline ActionSequence drop_empty_blocks(const ActionSequence& seq) {
  ActionSequence out;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    if (std::holds_alternative<Select>(seq[i]) && (i + 1 >= seq.size() || !is_transform(seq[i + 1]))) continue;
    out.push_back(seq[i]);
  }
  return out;
}

inline Action random_transform(Rng& rng, int exclude_type = -1) {
  std::uniform_int_distribution<int> pick(0, 2);
  int t;
  do t = pick(rng);
  while (t == exclude_type);
  std::uniform_int_distribution<int> comp(-3, 3);
  switch (t) {
    case 0: {
      Move m;
      do m = {comp(rng), comp(rng), comp(rng)};
      while (m.dx == 0 && m.dy == 0 && m.dz == 0);
      return m;
    }
    case 1: return RotateY{nonzero_in(rng, 4)};
    default: return Resize{nonzero_in(rng, 2)};
  }
}

inline int type_of(const Action& a) {
  if (std::holds_alternative<Move>(a)) return 0;
  if (std::holds_alternative<RotateY>(a)) return 1;
  if (std::holds_alternative<Resize>(a)) return 2;
  return -1;
}

/// Applies one degradation in place to a STOP-free body.
inline void degrade_once(ActionSequence& body, DegradationKind kind, std::size_t object_count, Rng& rng) {
  const auto tpos = transform_positions(body);
  switch (kind) {
    case DegradationKind::NumericalShift:
      for (std::size_t i : tpos) for_each_param(body[i], [&](int& p) { p += nonzero_in(rng, 3); });
      break;
    case DegradationKind::MagnitudeUndershoot:
    case DegradationKind::MagnitudeOvershoot: {
      const bool under = kind == DegradationKind::MagnitudeUndershoot;
      std::uniform_real_distribution<double> f(under ? 0.3 : 1.5, under ? 0.7 : 2.5);
      for (std::size_t i : tpos) {
        const double factor = f(rng);
        for_each_param(body[i], [&](int& p) { p = scale_param(p, factor); });
      }
      break;
    }
    case DegradationKind::NuisanceInsertion: {
      std::vector<std::size_t> selects;
      for (std::size_t i = 0; i < body.size(); ++i)
        if (std::holds_alternative<Select>(body[i])) selects.push_back(i);
      std::bernoulli_distribution dup(0.5);
      if (!selects.empty() && dup(rng)) {
        const std::size_t at = selects[std::uniform_int_distribution<std::size_t>(0, selects.size() - 1)(rng)];
        body.insert(body.begin() + static_cast<std::ptrdiff_t>(at), body[at]);
        break;
      }
      Action fwd = random_transform(rng);
      Action back = fwd;
      for_each_param(back, [](int& p) { p = -p; });
      if (auto* z = std::get_if<Resize>(&fwd)) {
        // Resizes do not cancel exactly; use a rotation pair instead.
        fwd = RotateY{z->ds};
        back = RotateY{-z->ds};
      }
      if (!selects.empty()) {
        const std::size_t at = selects[std::uniform_int_distribution<std::size_t>(0, selects.size() - 1)(rng)];
        body.insert(body.begin() + static_cast<std::ptrdiff_t>(at) + 1, {fwd, back});
      } else if (object_count > 0) {
        const int obj = static_cast<int>(std::uniform_int_distribution<std::size_t>(0, object_count - 1)(rng));
        body.insert(body.begin(), {Select{obj}, fwd, back});
      }
      break;
    }
    case DegradationKind::OverCorrection: {
      const auto touched = touched_objects(body);
      std::vector<int> untouched;
      for (std::size_t i = 0; i < object_count; ++i)
        if (!touched.count(static_cast<int>(i))) untouched.push_back(static_cast<int>(i));
      if (untouched.empty()) break;
      std::shuffle(untouched.begin(), untouched.end(), rng);
      const std::size_t n = std::uniform_int_distribution<std::size_t>(1, std::min<std::size_t>(2, untouched.size()))(rng);
      for (std::size_t k = 0; k < n; ++k) {
        body.push_back(Select{untouched[k]});
        body.push_back(random_transform(rng));
      }
      break;
    }
    case DegradationKind::MissingActions: {
      if (tpos.empty()) break;
      std::vector<std::size_t> drop = tpos;
      std::shuffle(drop.begin(), drop.end(), rng);
      drop.resize(std::uniform_int_distribution<std::size_t>(1, drop.size())(rng));
      std::sort(drop.rbegin(), drop.rend());
      for (std::size_t i : drop) body.erase(body.begin() + static_cast<std::ptrdiff_t>(i));
      body = drop_empty_blocks(body);
      break;
    }
    case DegradationKind::PrematureStop: body.clear(); break;
    case DegradationKind::WrongActionType: {
      if (tpos.empty()) break;
      const std::size_t i = tpos[std::uniform_int_distribution<std::size_t>(0, tpos.size() - 1)(rng)];
      body[i] = random_transform(rng, type_of(body[i]));
      break;
    }
    case DegradationKind::DirectionFlip:
      for (std::size_t i : tpos) for_each_param(body[i], [](int& p) { p = -p; });
      break;
  }
}

} // namespace detail

/// Corrupts `gt_seq` with the given kinds in order. Retries with fresh
/// randomness until the result differs textually; gives up after 8 attempts.
inline ActionSequence degrade(const ActionSequence& gt_seq, std::span<const DegradationKind> kinds,
                              std::size_t object_count, Rng& rng) {
  const std::string source = serialize(gt_seq);
  for (int attempt = 0; attempt < 8; ++attempt) {
    ActionSequence body = detail::without_stop(gt_seq);
    for (DegradationKind k : kinds) detail::degrade_once(body, k, object_count, rng);
    body.push_back(Stop{});
    if (serialize(body) != source) return body;
  }
  std::string names;
  for (DegradationKind k : kinds) names += (names.empty() ? "" : "+") + to_string(k);
  throw Error(ErrorCode::DegenerateDegradation, "could not produce a differing sequence with " + names);
}

/// 1-2 distinct kinds drawn uniformly.
inline std::vector<DegradationKind> sample_degradation_kinds(Rng& rng) {
  std::vector<DegradationKind> kinds(all_degradations.begin(), all_degradations.end());
  std::shuffle(kinds.begin(), kinds.end(), rng);
  kinds.resize(std::uniform_int_distribution<int>(1, 2)(rng));
  return kinds;
}

// ---------------------------------------------------------------------------
// Preference pairs

/// (SVR, collisions, rotation error, L1 position error) of a layout against the
/// ground truth. Lower is better in every component.
struct MetricVector {
  double svr = 0.0;
  double collisions = 0.0;
  double rotation_error = 0.0;
  double position_error = 0.0;

  std::array<double, 4> values() const { return {svr, collisions, rotation_error, position_error}; }
};

inline MetricVector metric_vector(const GridLayout& layout, const GridLayout& gt, const ExclusionConfig& excl = {},
                                  const std::set<IdPair>& gt_collisions = {}) {
  MetricVector v;
  v.svr = support_violation_rate(layout, excl);
  v.collisions = collision_count(layout, gt_collisions);
  try {
    v.rotation_error = rotation_error(layout, gt, excl);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::NoMatches) throw;
  }
  v.position_error = static_cast<double>(position_error_l1(layout, gt));
  return v;
}

/// True when `a` is no worse than `b` in every component and better in one.
inline bool dominates(const MetricVector& a, const MetricVector& b) {
  const auto x = a.values();
  const auto y = b.values();
  bool strict = false;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] > y[i]) return false;
    if (x[i] < y[i]) strict = true;
  }
  return strict;
}

struct PromptContext {
  std::string image;
  std::string system;
  std::string user;
};

struct PreferencePair {
  PromptContext context;
  ActionSequence selected;
  ActionSequence rejected;
  std::vector<std::string> provenance;
  MetricVector selected_metrics;
  MetricVector rejected_metrics;
};

struct Candidate {
  ActionSequence seq;
  std::vector<std::string> tags;
};

struct DpoResult {
  std::vector<PreferencePair> pairs;
  std::size_t discarded = 0;
};

/// Keeps a candidate as the rejected side only when its touched objects and
/// the ground truth's are nested (one a subset of the other) and the ground
/// truth's outcome strictly dominates the candidate's.
inline DpoResult build_dpo_pairs(const GridLayout& layout, const ActionSequence& gt_seq,
                                 const std::vector<Candidate>& candidates, const GridLayout& gt_layout,
                                 const ExclusionConfig& excl = {}, const std::string& image = {}) {
  DpoResult out;
  const auto gt_touched = touched_objects(gt_seq);
  const auto gt_collisions = collision_pairs(gt_layout);
  const MetricVector gt_metrics = metric_vector(lap::apply(layout, gt_seq, ApplyMode::Lenient), gt_layout, excl, gt_collisions);
  const std::string gt_text = serialize(gt_seq);
  const PromptContext ctx{image, planner_system_prompt(layout.config), planner_user_prompt(layout)};
  for (const Candidate& c : candidates) {
    const auto touched = touched_objects(c.seq);
    const bool nested = std::includes(gt_touched.begin(), gt_touched.end(), touched.begin(), touched.end()) ||
                        std::includes(touched.begin(), touched.end(), gt_touched.begin(), gt_touched.end());
    if (!nested || serialize(c.seq) == gt_text) {
      ++out.discarded;
      continue;
    }
    const MetricVector m = metric_vector(lap::apply(layout, c.seq, ApplyMode::Lenient), gt_layout, excl, gt_collisions);
    if (!dominates(gt_metrics, m)) {
      ++out.discarded;
      continue;
    }
    out.pairs.push_back({ctx, gt_seq, c.seq, c.tags, gt_metrics, m});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Records

struct SftRecord {
  std::string system;
  std::string user;
  std::string completion;
};

inline SftRecord build_sft_record(const GridLayout& layout, const ActionSequence& gt_seq) {
  return {planner_system_prompt(layout.config), planner_user_prompt(layout), serialize(gt_seq)};
}

struct CorpusScene {
  std::string scene_id;
  std::string image;
  GridLayout layout; // ground truth
};

struct ForgeConfig {
  std::uint64_t seed = 0;
  double stop_fraction = 0.2; // remainder is perturbed
  int rejected_per_scene = 2;
  PerturbConfig perturb;
  ExclusionConfig exclusions;
};

struct ForgeStats {
  std::size_t sft_records = 0;
  std::size_t dpo_records = 0;
  std::size_t discarded_pairs = 0;
  std::size_t failed_degradations = 0;
};

/// Records for one scene as JSON lines. Depends only on (scene, cfg).
inline std::vector<std::string> forge_scene(const CorpusScene& scene, const ForgeConfig& cfg, ForgeStats* stats = nullptr) {
  using ordered = nlohmann::ordered_json;
  const std::uint64_t seed = scene_seed(cfg.seed, scene.scene_id);
  Rng rng(seed);

  GridLayout start = scene.layout;
  ActionSequence gt_seq{Stop{}};
  std::string provenance = "gt-stop";
  if (std::uniform_real_distribution<double>(0.0, 1.0)(rng) >= cfg.stop_fraction && !scene.layout.objects.empty()) {
    const auto p = sample_perturbation(scene.layout, cfg.perturb, rng);
    start = p.perturbed;
    gt_seq = p.gt_seq;
    provenance = "perturbed";
  }

  auto meta = [&](const std::vector<std::string>& degradations) {
    ordered m;
    m["scene_id"] = scene.scene_id;
    m["seed"] = seed;
    m["provenance"] = provenance;
    m["degradations"] = degradations;
    m["image"] = scene.image;
    return m;
  };

  std::vector<std::string> lines;
  const SftRecord sft = build_sft_record(start, gt_seq);
  ordered rec;
  rec["kind"] = "SFT";
  rec["system"] = sft.system;
  rec["user"] = sft.user;
  rec["completion"] = sft.completion;
  rec["meta"] = meta({});
  lines.push_back(rec.dump());
  if (stats) ++stats->sft_records;

  std::vector<Candidate> candidates;
  for (int k = 0; k < cfg.rejected_per_scene; ++k) {
    const auto kinds = sample_degradation_kinds(rng);
    std::vector<std::string> tags;
    for (auto kd : kinds) tags.push_back(to_string(kd));
    try {
      candidates.push_back({degrade(gt_seq, kinds, start.objects.size(), rng), tags});
    } catch (const Error& e) {
      if (e.code() != ErrorCode::DegenerateDegradation) throw;
      if (stats) ++stats->failed_degradations;
    }
  }
  const DpoResult dpo = build_dpo_pairs(start, gt_seq, candidates, scene.layout, cfg.exclusions, scene.image);
  if (stats) stats->discarded_pairs += dpo.discarded;
  for (const auto& pair : dpo.pairs) {
    ordered r;
    r["kind"] = "DPO";
    r["system"] = pair.context.system;
    r["user"] = pair.context.user;
    r["selected"] = serialize(pair.selected);
    r["rejected"] = serialize(pair.rejected);
    r["meta"] = meta(pair.provenance);
    lines.push_back(r.dump());
    if (stats) ++stats->dpo_records;
  }
  return lines;
}

} // namespace lap
