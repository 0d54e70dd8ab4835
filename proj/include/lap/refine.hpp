#pragma once

// Iterative refinement: a policy proposes an action sequence, the sequence is
// applied, and the loop repeats until the policy answers STOP alone or the
// round limit is reached.

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "lap/actions.hpp"
#include "lap/contact.hpp"
#include "lap/error.hpp"
#include "lap/metrics.hpp"

namespace lap {

struct PolicyContext {
  std::string image;
  const GridLayout* layout = nullptr;
  int round = 0;
};

struct PolicyOutput {
  ActionSequence seq;
  std::vector<Diagnostic> diagnostics;
};

class Policy {
public:
  virtual ~Policy() = default;
  virtual PolicyOutput propose(const PolicyContext& ctx) = 0;
  virtual std::string name() const = 0;
};

class StopPolicy : public Policy {
public:
  PolicyOutput propose(const PolicyContext&) override { return {{Stop{}}, {}}; }
  std::string name() const override { return "stop"; }
};

/// Replays fixed action text, one entry per round, then STOP.
class ScriptedPolicy : public Policy {
public:
  explicit ScriptedPolicy(std::vector<std::string> rounds) : rounds_(std::move(rounds)) {}

  PolicyOutput propose(const PolicyContext& ctx) override {
    if (ctx.round >= static_cast<int>(rounds_.size())) return {{Stop{}}, {}};
    auto parsed = parse(rounds_[ctx.round], ParseMode::Lenient);
    return {std::move(parsed.actions), std::move(parsed.diagnostics)};
  }
  std::string name() const override { return "scripted"; }

private:
  std::vector<std::string> rounds_;
};

// ---------------------------------------------------------------------------
// Rule-based correction

namespace detail {

struct RuleState {
  GridLayout layout;
  const ContactGraph* graph;
  std::map<int, std::size_t> index;
  std::map<int, std::vector<int>> children;
  ActionSequence seq;

  RuleState(const GridLayout& l, const ContactGraph& g) : layout(l), graph(&g) {
    for (std::size_t i = 0; i < layout.objects.size(); ++i) index[layout.objects[i].id] = i;
    for (const auto& [id, r] : g)
      if (r.kind == Relation::Kind::On && index.count(id) && index.count(r.supporter)) children[r.supporter].push_back(id);
  }

  Relation relation(int id) const {
    const auto it = graph->find(id);
    return it == graph->end() ? Relation::floor() : it->second;
  }

  GridBox& obj(int id) { return layout.objects[index.at(id)]; }

  /// The object and everything transitively ON it.
  std::vector<int> with_descendants(int id) const {
    std::vector<int> out{id};
    for (std::size_t k = 0; k < out.size(); ++k) {
      const auto c = children.find(out[k]);
      if (c != children.end())
        for (int ch : c->second)
          if (std::find(out.begin(), out.end(), ch) == out.end()) out.push_back(ch);
    }
    return out;
  }

  void emit_move(int id, int dx, int dy, int dz) {
    if (dx == 0 && dy == 0 && dz == 0) return;
    const int idx = static_cast<int>(index.at(id));
    if (!seq.empty() && std::holds_alternative<Move>(seq.back()) && seq.size() >= 2 &&
        std::holds_alternative<Select>(seq[seq.size() - 2]) && std::get<Select>(seq[seq.size() - 2]).target == idx) {
      auto& m = std::get<Move>(seq.back());
      m.dx += dx;
      m.dy += dy;
      m.dz += dz;
    } else {
      seq.push_back(Select{idx});
      seq.push_back(Move{dx, dy, dz});
    }
    GridBox& g = obj(id);
    g.pos[0] += dx;
    g.pos[1] += dy;
    g.pos[2] += dz;
  }

  void move_group(const std::vector<int>& ids, int dx, int dy, int dz) {
    for (int id : ids) emit_move(id, dx, dy, dz);
  }

  /// Supporters before supportees; FREE objects and their supportees included.
  std::vector<int> topological_order() const {
    std::vector<int> out;
    for (const auto& o : layout.objects) {
      const Relation r = relation(o.id);
      if (r.kind == Relation::Kind::On && index.count(r.supporter)) continue;
      for (int id : with_descendants(o.id)) out.push_back(id);
    }
    return out;
  }
};

inline bool any_penetration(const GridLayout& layout, const std::vector<int>& moved, const std::map<int, std::size_t>& index) {
  const int nt = layout.config.n_theta;
  for (int id : moved) {
    const Aabb a = aabb(layout.objects[index.at(id)], nt);
    for (const auto& o : layout.objects) {
      if (std::find(moved.begin(), moved.end(), o.id) != moved.end()) continue;
      if (aabb_penetrates(a, aabb(o, nt))) return true;
    }
  }
  return false;
}

} // namespace detail

/// One pass of de-floating then de-collision, expressed as MOVE actions.
/// De-floating snaps every unsupported object onto its supporter's top (when
/// it still covers half of it) or down to the ground, supporters first.
/// De-collision separates AABB-penetrating pairs: a supportee is lifted onto
/// its supporter, otherwise the object with the smaller footprint (lower id on
/// ties) is pushed horizontally, together with everything resting on it, by
/// the penetration depth plus one unit along the shallower axis. FREE objects
/// are never lowered and move sideways only when the other object is FREE too.
/// Returns [STOP] when nothing needs fixing.
inline ActionSequence rule_policy(const GridLayout& layout, const ContactGraph& graph) {
  detail::RuleState st(layout, graph);
  const int nt = layout.config.n_theta;

  for (int id : st.topological_order()) {
    const Relation r = st.relation(id);
    if (r.kind == Relation::Kind::Free) continue;
    const std::size_t i = st.index.at(id);
    if (is_supported(st.layout, i)) continue;
    GridBox& g = st.obj(id);
    int target = 0;
    if (r.kind == Relation::Kind::On && st.index.count(r.supporter)) {
      const GridBox& s = st.obj(r.supporter);
      if (footprint_overlap_fraction(g, s, nt) >= 0.5) target = s.top();
    }
    st.emit_move(id, 0, target - g.pos[1], 0);
  }

  auto footprint_area = [](const GridBox& g) { return 1LL * g.size[0] * g.size[2]; };
  const std::size_t n = st.layout.objects.size();
  for (std::size_t pass = 0; pass < n * n + 1; ++pass) {
    bool fixed_one = false;
    for (std::size_t i = 0; i < n && !fixed_one; ++i)
      for (std::size_t j = i + 1; j < n && !fixed_one; ++j) {
        GridBox& a = st.layout.objects[i];
        GridBox& b = st.layout.objects[j];
        const Aabb ba = aabb(a, nt), bb = aabb(b, nt);
        if (!aabb_penetrates(ba, bb)) continue;
        const Relation ra = st.relation(a.id), rb = st.relation(b.id);

        // Direct support with enough overlap: lift the supportee onto the supporter.
        if (ra.kind == Relation::Kind::On && ra.supporter == b.id && footprint_overlap_fraction(a, b, nt) >= 0.5) {
          st.move_group(st.with_descendants(a.id), 0, b.top() - a.pos[1], 0);
          fixed_one = true;
          continue;
        }
        if (rb.kind == Relation::Kind::On && rb.supporter == a.id && footprint_overlap_fraction(b, a, nt) >= 0.5) {
          st.move_group(st.with_descendants(b.id), 0, a.top() - b.pos[1], 0);
          fixed_one = true;
          continue;
        }

        const bool a_free = ra.kind == Relation::Kind::Free, b_free = rb.kind == Relation::Kind::Free;
        const auto fa = footprint_area(a), fb = footprint_area(b);
        const bool a_first = fa != fb ? fa < fb : a.id < b.id;
        std::vector<int> order = a_first ? std::vector<int>{a.id, b.id} : std::vector<int>{b.id, a.id};
        std::stable_partition(order.begin(), order.end(), [&](int id) { return !(id == a.id ? a_free : b_free); });

        bool moved = false;
        std::optional<std::tuple<std::vector<int>, int, int>> fallback;
        for (int mover : order) {
          const int other = mover == a.id ? b.id : a.id;
          const auto group = st.with_descendants(mover);
          if (std::find(group.begin(), group.end(), other) != group.end()) continue;
          const Aabb mb = aabb(st.obj(mover), nt), ob = aabb(st.obj(other), nt);
          const auto ov = aabb_overlap(mb, ob);
          const double cx = 0.5 * (mb.lo[0] + mb.hi[0]) - 0.5 * (ob.lo[0] + ob.hi[0]);
          const double cz = 0.5 * (mb.lo[2] + mb.hi[2]) - 0.5 * (ob.lo[2] + ob.hi[2]);
          const int px = static_cast<int>(std::ceil(ov[0] - 1e-9)) + 1;
          const int pz = static_cast<int>(std::ceil(ov[2] - 1e-9)) + 1;
          const int sx = cx < 0 ? -1 : 1, sz = cz < 0 ? -1 : 1;
          // Shallower axis first, away from the other object first.
          std::vector<std::pair<int, int>> dirs = ov[0] <= ov[2]
              ? std::vector<std::pair<int, int>>{{sx * px, 0}, {0, sz * pz}, {-sx * px, 0}, {0, -sz * pz}}
              : std::vector<std::pair<int, int>>{{0, sz * pz}, {sx * px, 0}, {0, -sz * pz}, {-sx * px, 0}};
          if (!fallback) fallback.emplace(group, dirs[0].first, dirs[0].second);

          std::set<int> supported_before;
          for (int id : group)
            if (is_supported(st.layout, st.index.at(id))) supported_before.insert(id);
          for (int extra = 0; extra <= 40 && !moved; extra += 2) {
            for (const auto& [dx0, dz0] : dirs) {
              const int dx = dx0 + (dx0 > 0 ? extra : dx0 < 0 ? -extra : 0);
              const int dz = dz0 + (dz0 > 0 ? extra : dz0 < 0 ? -extra : 0);
              GridLayout trial = st.layout;
              for (int id : group) {
                trial.objects[st.index.at(id)].pos[0] += dx;
                trial.objects[st.index.at(id)].pos[2] += dz;
              }
              if (detail::any_penetration(trial, group, st.index)) continue;
              bool keeps_support = true;
              for (int id : supported_before)
                if (!is_supported(trial, st.index.at(id))) keeps_support = false;
              if (!keeps_support) continue;
              st.move_group(group, dx, 0, dz);
              moved = true;
              break;
            }
          }
          if (moved) break;
        }
        if (!moved && fallback) {
          const auto& [group, dx, dz] = *fallback;
          st.move_group(group, dx, 0, dz);
          moved = true;
        }
        fixed_one = moved;
      }
    if (!fixed_one) break;
  }

  if (st.seq.empty()) return {Stop{}};
  st.seq.push_back(Stop{});
  return st.seq;
}

class RulePolicy : public Policy {
public:
  explicit RulePolicy(ContactGraph graph) : graph_(std::move(graph)) {}

  PolicyOutput propose(const PolicyContext& ctx) override { return {rule_policy(*ctx.layout, graph_), {}}; }
  std::string name() const override { return "rule"; }

  const ContactGraph& graph() const { return graph_; }

private:
  ContactGraph graph_;
};

// ---------------------------------------------------------------------------
// Loop

struct RefineConfig {
  int max_rounds = 5;
  ApplyMode mode = ApplyMode::Lenient;
  std::optional<std::string> endpoint;
  double timeout_s = 60.0;

  void validate() const {
    if (max_rounds < 1 || max_rounds > 32) throw Error(ErrorCode::FormatError, "max_rounds must be in [1, 32]");
    if (!(timeout_s > 0.0)) throw Error(ErrorCode::FormatError, "timeout must be positive");
  }
};

struct Trajectory {
  std::vector<GridLayout> states;
  std::vector<ActionSequence> sequences;
  std::vector<std::vector<Diagnostic>> diagnostics;
  bool converged = false;
  int rounds_used = 0;
};

struct RefineResult {
  Trajectory trajectory;
  std::optional<Error> error; // set when a round failed; the trajectory stops before it
};

inline RefineResult refine(const GridLayout& layout, Policy& policy, const RefineConfig& cfg,
                           const std::string& image = {}) {
  cfg.validate();
  RefineResult out;
  Trajectory& t = out.trajectory;
  t.states.push_back(layout);
  for (int round = 0; round < cfg.max_rounds; ++round) {
    try {
      PolicyOutput p = policy.propose({image, &t.states.back(), round});
      GridLayout next = lap::apply(t.states.back(), p.seq, cfg.mode);
      t.states.push_back(std::move(next));
      t.sequences.push_back(p.seq);
      t.diagnostics.push_back(std::move(p.diagnostics));
      t.rounds_used = round + 1;
      if (is_stop_only(p.seq)) {
        t.converged = true;
        break;
      }
    } catch (const Error& e) {
      out.error = Error(ErrorCode::PolicyError, "round " + std::to_string(round) + ": " + e.what());
      break;
    }
  }
  return out;
}

inline Trajectory iterate_rule_to_fixpoint(const GridLayout& layout, const ContactGraph& graph,
                                           const RefineConfig& cfg) {
  if (has_cycle(graph)) throw Error(ErrorCode::CyclicSupport, "contact graph has a cycle");
  RulePolicy policy(graph);
  RefineResult r = refine(layout, policy, cfg);
  if (r.error) throw *r.error;
  return std::move(r.trajectory);
}

} // namespace lap
