#pragma once

// In-memory editing sessions. Every mutation is recorded as an action sequence
// so replaying the history from the initial layout reproduces the current one.

#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "lap/actions.hpp"
#include "lap/benchmark.hpp"
#include "lap/config.hpp"
#include "lap/contact.hpp"
#include "lap/io.hpp"
#include "lap/metrics.hpp"
#include "lap/refine.hpp"

namespace lap {

struct HistoryEntry {
  ActionSequence seq;
  GridLayout before;
};

struct Session {
  std::string id;
  Scene scene;
  GridLayout initial;
  GridLayout current;
  std::vector<HistoryEntry> history;
  AppConfig cfg;
  std::mutex mu;
};

struct ActResult {
  GridLayout layout;
  std::vector<Diagnostic> diagnostics;
};

struct RefineSummary {
  GridLayout layout;
  int rounds_used = 0;
  bool converged = false;
  std::vector<std::string> sequences;
  std::optional<std::string> error;
};

/// Applies every recorded sequence to the initial layout.
inline GridLayout replay(const Session& s) {
  GridLayout l = s.initial;
  for (const auto& h : s.history) l = lap::apply(l, h.seq, ApplyMode::Lenient);
  return l;
}

class SessionStore {
public:
  explicit SessionStore(AppConfig cfg = {}) : cfg_(std::move(cfg)), rng_(std::random_device{}()) {}

  std::string create(const Scene& scene) {
    auto s = std::make_shared<Session>();
    s->scene = scene;
    s->cfg = cfg_;
    s->initial = build_grid_layout(scene.boxes, scene.intrinsics, cfg_.delta, cfg_.n_theta);
    s->current = s->initial;
    std::lock_guard lock(mu_);
    char buf[24];
    do {
      std::snprintf(buf, sizeof buf, "s%016llx", static_cast<unsigned long long>(rng_()));
    } while (sessions_.count(buf));
    s->id = buf;
    sessions_[s->id] = s;
    return s->id;
  }

  std::shared_ptr<Session> get(const std::string& id) const {
    std::lock_guard lock(mu_);
    const auto it = sessions_.find(id);
    if (it == sessions_.end()) throw Error(ErrorCode::UnknownSession, id);
    return it->second;
  }

  std::size_t size() const {
    std::lock_guard lock(mu_);
    return sessions_.size();
  }

  GridLayout state(const std::string& id) const {
    auto s = get(id);
    std::lock_guard lock(s->mu);
    return s->current;
  }

  /// Lenient parse and apply; rejected lines come back as diagnostics.
  ActResult act(const std::string& id, const std::string& text) {
    auto s = get(id);
    auto parsed = parse(text, ParseMode::Lenient);
    std::lock_guard lock(s->mu);
    auto violations = validate(parsed.actions, s->current);
    for (const auto& v : violations)
      parsed.diagnostics.push_back({0, v.index < parsed.actions.size() ? to_string(parsed.actions[v.index]) : "", v.message});
    record(*s, parsed.actions, lap::apply(s->current, parsed.actions, ApplyMode::Lenient));
    return {s->current, std::move(parsed.diagnostics)};
  }

  GridLayout undo(const std::string& id) {
    auto s = get(id);
    std::lock_guard lock(s->mu);
    if (s->history.empty()) throw Error(ErrorCode::ApplyError, "nothing to undo");
    s->current = std::move(s->history.back().before);
    s->history.pop_back();
    return s->current;
  }

  /// Runs the refinement loop from the current state; every round becomes one
  /// history entry. A failing round keeps the rounds before it.
  RefineSummary refine_session(const std::string& id, PolicyKind kind, std::optional<int> max_rounds,
                               const std::optional<std::string>& endpoint, const std::optional<std::string>& contact) {
    auto s = get(id);
    std::lock_guard lock(s->mu);
    RefineConfig rc = s->cfg.refine;
    if (max_rounds) rc.max_rounds = *max_rounds;
    if (endpoint) rc.endpoint = endpoint;
    rc.validate();
    const ContactGraph graph = contact_graph(*s, contact);
    auto policy = make_policy(kind, graph, rc);
    RefineResult r = refine(s->current, *policy, rc, s->scene.image);
    RefineSummary out;
    for (std::size_t k = 0; k < r.trajectory.sequences.size(); ++k) {
      record(*s, r.trajectory.sequences[k], r.trajectory.states[k + 1]);
      out.sequences.push_back(serialize(r.trajectory.sequences[k]));
    }
    out.layout = s->current;
    out.rounds_used = r.trajectory.rounds_used;
    out.converged = r.trajectory.converged;
    if (r.error) out.error = r.error->what();
    return out;
  }

  /// Scores the current state against the session's initial layout and the
  /// source scene.
  MetricReport metrics(const std::string& id) const {
    auto s = get(id);
    std::lock_guard lock(s->mu);
    EvalContext ctx;
    ctx.gt_camera = s->scene.boxes;
    ctx.intrinsics = s->scene.intrinsics;
    ctx.exclusions = s->cfg.exclusions;
    ctx.gt_collisions = collision_pairs(s->initial);
    return evaluate(s->current, s->initial, ctx);
  }

  /// Gravity settling of the current state, recorded as MOVE actions.
  std::pair<GridLayout, std::vector<std::string>> assemble(const std::string& id, const std::optional<std::string>& contact) {
    auto s = get(id);
    std::lock_guard lock(s->mu);
    std::vector<std::string> diags;
    ContactGraph graph;
    if (contact) {
      auto res = resolve_contact(parse_contact(*contact), s->current);
      graph = std::move(res.graph);
      diags = std::move(res.diagnostics);
    } else {
      graph = infer_contact_graph(s->initial);
    }
    const GridLayout settled = settle(s->current, graph, s->cfg.clearance);
    ActionSequence seq = diff_sequence(s->current, settled);
    if (!seq.empty() && !is_stop_only(seq)) record(*s, seq, lap::apply(s->current, seq, ApplyMode::Lenient));
    return {s->current, std::move(diags)};
  }

  /// "grid" and "camera" return JSON documents, "mesh" returns OBJ text.
  std::string export_as(const std::string& id, const std::string& format) const {
    auto s = get(id);
    std::lock_guard lock(s->mu);
    if (format == "grid") return layout_to_json(s->current).dump(2);
    if (format == "camera") {
      Scene out;
      out.intrinsics = s->scene.intrinsics;
      out.image = s->scene.image;
      out.boxes = layout_to_camera(s->current);
      return scene_to_json(out).dump(2);
    }
    if (format == "mesh") return export_box_mesh(s->current);
    throw Error(ErrorCode::FormatError, "unknown export format '" + format + "' (expected grid, camera or mesh)");
  }

  bool replay_matches(const std::string& id) const {
    auto s = get(id);
    std::lock_guard lock(s->mu);
    return replay(*s) == s->current;
  }

private:
  static void record(Session& s, ActionSequence seq, GridLayout next) {
    s.history.push_back({std::move(seq), std::move(s.current)});
    s.current = std::move(next);
  }

  static ContactGraph contact_graph(const Session& s, const std::optional<std::string>& contact) {
    if (contact) return resolve_contact(parse_contact(*contact), s.current).graph;
    return infer_contact_graph(s.initial);
  }

  AppConfig cfg_;
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::mt19937_64 rng_;
};

} // namespace lap
