#pragma once

// Before/after refinement evaluation over a corpus of scene files.

#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "lap/config.hpp"
#include "lap/contact.hpp"
#include "lap/external_policy.hpp"
#include "lap/io.hpp"
#include "lap/metrics.hpp"
#include "lap/perturb.hpp"
#include "lap/refine.hpp"

namespace lap {

enum class PolicyKind { Stop, Rule, External };

inline PolicyKind policy_kind_from_string(const std::string& s) {
  if (s == "stop") return PolicyKind::Stop;
  if (s == "rule") return PolicyKind::Rule;
  if (s == "external") return PolicyKind::External;
  throw Error(ErrorCode::FormatError, "unknown policy '" + s + "' (expected rule, external or stop)");
}

inline std::unique_ptr<Policy> make_policy(PolicyKind kind, const ContactGraph& graph, const RefineConfig& cfg) {
  switch (kind) {
    case PolicyKind::Stop: return std::make_unique<StopPolicy>();
    case PolicyKind::Rule: return std::make_unique<RulePolicy>(graph);
    case PolicyKind::External:
      if (!cfg.endpoint) throw Error(ErrorCode::FormatError, "external policy needs an endpoint");
      return std::make_unique<ExternalPolicy>(*cfg.endpoint, cfg.timeout_s);
  }
  return nullptr;
}

struct BenchmarkConfig {
  PolicyKind policy = PolicyKind::Rule;
  AppConfig app;
  std::uint64_t seed = 0;
  bool perturb = true; // synthetic mode: perturb the ground truth before refining
};

struct BenchmarkRow {
  std::string scene_id;
  MetricReport before;
  MetricReport after;
  int rounds = 0;
  bool converged = false;
};

struct QuarantineEntry {
  std::string scene_id;
  std::string error;
};

struct BenchmarkRun {
  std::string policy;
  std::uint64_t seed = 0;
  std::vector<BenchmarkRow> rows;
  std::vector<QuarantineEntry> quarantine;
  MetricReport mean_before;
  MetricReport mean_after;
  double wall_seconds = 0.0;
};

/// Contact graph for a scene: "<scene>.contact.txt" next to the scene file when
/// present, otherwise read off the ground-truth layout.
inline ContactGraph scene_contact_graph(const std::filesystem::path& scene_path, const GridLayout& gt) {
  auto contact = scene_path;
  contact.replace_extension(".contact.txt");
  if (std::filesystem::exists(contact)) return resolve_contact(parse_contact(read_text_file(contact)), gt).graph;
  return infer_contact_graph(gt);
}

inline BenchmarkRow evaluate_scene(const std::string& scene_id, const Scene& scene, const ContactGraph* graph_override,
                                   const BenchmarkConfig& cfg) {
  const AppConfig& app = cfg.app;
  const GridLayout gt = build_grid_layout(scene.boxes, scene.intrinsics, app.delta, app.n_theta);
  GridLayout start = gt;
  if (cfg.perturb && !gt.objects.empty()) {
    Rng rng(scene_seed(cfg.seed, scene_id));
    start = sample_perturbation(gt, app.perturb, rng).perturbed;
  }
  const ContactGraph graph = graph_override ? *graph_override : infer_contact_graph(gt);

  EvalContext ctx;
  ctx.gt_camera = scene.boxes;
  ctx.intrinsics = scene.intrinsics;
  ctx.exclusions = app.exclusions;
  ctx.gt_collisions = collision_pairs(gt);

  BenchmarkRow row;
  row.scene_id = scene_id;
  row.before = evaluate(start, gt, ctx);
  auto policy = make_policy(cfg.policy, graph, app.refine);
  RefineResult r = refine(start, *policy, app.refine, scene.image);
  if (r.error) throw *r.error;
  row.after = evaluate(r.trajectory.states.back(), gt, ctx);
  row.rounds = r.trajectory.rounds_used;
  row.converged = r.trajectory.converged;
  return row;
}

inline std::vector<std::filesystem::path> list_scene_files(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> out;
  if (!std::filesystem::is_directory(dir)) throw Error(ErrorCode::FormatError, dir.string() + " is not a directory");
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".json") out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

/// Evaluates every scene; failures are quarantined and the run continues.
inline BenchmarkRun run_benchmark(const std::vector<std::filesystem::path>& scenes, const BenchmarkConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  struct Slot {
    std::optional<BenchmarkRow> row;
    std::optional<QuarantineEntry> failure;
  };
  std::vector<Slot> slots(scenes.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < scenes.size(); i = next++) {
      const std::string id = scenes[i].stem().string();
      try {
        const Scene scene = load_scene(scenes[i]);
        const GridLayout gt = build_grid_layout(scene.boxes, scene.intrinsics, cfg.app.delta, cfg.app.n_theta);
        const ContactGraph graph = scene_contact_graph(scenes[i], gt);
        slots[i].row = evaluate_scene(id, scene, &graph, cfg);
      } catch (const std::exception& e) {
        slots[i].failure = QuarantineEntry{id, e.what()};
      }
    }
  };
  const int n_threads = std::max(1, std::min<int>(cfg.app.workers, static_cast<int>(scenes.size())));
  std::vector<std::thread> pool;
  for (int t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  BenchmarkRun run;
  run.seed = cfg.seed;
  run.policy = cfg.policy == PolicyKind::Rule ? "rule" : cfg.policy == PolicyKind::Stop ? "stop" : "external";
  std::vector<MetricReport> before, after;
  for (auto& s : slots) {
    if (s.row) {
      before.push_back(s.row->before);
      after.push_back(s.row->after);
      run.rows.push_back(std::move(*s.row));
    } else if (s.failure) {
      run.quarantine.push_back(std::move(*s.failure));
    }
  }
  run.mean_before = mean_report(before);
  run.mean_after = mean_report(after);
  run.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return run;
}

inline std::string format_g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Two rows per scene (before, after) followed by the mean rows.
inline std::string benchmark_csv(const BenchmarkRun& run) {
  std::string s = "scene,state";
  for (const auto& c : metric_columns()) s += "," + c;
  s += "\n";
  auto row = [&](const std::string& scene, const char* state, const MetricReport& r) {
    s += scene + "," + state;
    for (double v : metric_values(r)) s += "," + format_g17(v);
    s += "\n";
  };
  for (const auto& r : run.rows) {
    row(r.scene_id, "before", r.before);
    row(r.scene_id, "after", r.after);
  }
  row("mean", "before", run.mean_before);
  row("mean", "after", run.mean_after);
  return s;
}

inline nlohmann::json benchmark_json(const BenchmarkRun& run) {
  nlohmann::json doc;
  doc["policy"] = run.policy;
  doc["seed"] = run.seed;
  doc["scenes_evaluated"] = run.rows.size();
  doc["wall_seconds"] = run.wall_seconds;
  doc["before"] = report_to_json(run.mean_before);
  doc["after"] = report_to_json(run.mean_after);
  nlohmann::json delta = nlohmann::json::object();
  const auto cols = metric_columns();
  const auto b = metric_values(run.mean_before), a = metric_values(run.mean_after);
  for (std::size_t i = 0; i < cols.size(); ++i) delta[cols[i]] = a[i] - b[i];
  doc["delta"] = delta;
  doc["quarantine"] = nlohmann::json::array();
  for (const auto& q : run.quarantine) doc["quarantine"].push_back({{"scene", q.scene_id}, {"error", q.error}});
  return doc;
}

} // namespace lap
