// Acceptance harness: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "fixtures.hpp"
#include "lap/lap.hpp"
#include "oracles.hpp"

#include <httplib.h>

using namespace lap;

namespace {

constexpr std::uint64_t kSeed = 2026;

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(const std::string& name, const std::function<Outcome()>& run) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = run();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!o.pass) ++failures;
  std::printf("%s %s: %s [%.2f s]\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(), secs);
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Outcome canonicalization_round_trip() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(kSeed);
  std::vector<double> dev;
  for (int s = 0; s < 1000; ++s) {
    const auto boxes = random_camera_scene(rng, 5, 30);
    const auto c = canonicalize(boxes);
    const auto back = decanonicalize(c.boxes, c.frame, c.translation);
    for (std::size_t i = 0; i < boxes.size(); ++i) dev.push_back(oracle::max_vertex_deviation(boxes[i], back[i]));
  }
  const double secs = seconds_since(t0);
  std::sort(dev.begin(), dev.end());
  const double max = dev.back(), median = dev[dev.size() / 2];
  return {max < 1e-3 && median < 2e-4 && secs < 10.0,
          fmt("1000 scenes, %zu boxes, max %.3g m (< 1e-3), median %.3g m (< 2e-4), %.2f s (< 10)", dev.size(), max,
              median, secs)};
}

Outcome rule_refinement() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(kSeed + 1);
  int svr_bad = 0, coll_bad = 0, rot_bad = 0, not_converged = 0;
  double svr_before = 0.0;
  const ExclusionConfig excl;
  for (int s = 0; s < 500; ++s) {
    const GridLayout gt = random_gt_layout(rng);
    const auto p = sample_perturbation(gt, PerturbConfig{}, rng);
    const ContactGraph g = infer_contact_graph(gt);
    const auto traj = iterate_rule_to_fixpoint(p.perturbed, g, RefineConfig{});
    const GridLayout& end = traj.states.back();
    const auto gt_pairs = collision_pairs(gt);
    svr_before += support_violation_rate(p.perturbed, excl);
    svr_bad += support_violation_rate(end, excl) != 0.0;
    coll_bad += collision_count(end, gt_pairs) != 0;
    rot_bad += rotation_error(end, gt, excl) != rotation_error(p.perturbed, gt, excl);
    not_converged += !traj.converged;
  }
  const double secs = seconds_since(t0);
  return {svr_bad == 0 && coll_bad == 0 && rot_bad == 0 && secs < 60.0,
          fmt("500 scenes, mean SVR before %.2f%%, scenes with SVR>0 after %d, with collisions %d, with rotation "
              "delta %d, unconverged %d, %.2f s (< 60)",
              svr_before / 500, svr_bad, coll_bad, rot_bad, not_converged, secs)};
}

Outcome action_inversion() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(kSeed + 2);
  const int n = 10000;
  int pos_yaw = 0, full = 0;
  for (int s = 0; s < n; ++s) {
    const GridLayout l = random_gt_layout(rng);
    const auto p = sample_perturbation(l, PerturbConfig{}, rng);
    const GridLayout back = lap::apply(p.perturbed, p.gt_seq);
    bool ok = true;
    for (std::size_t i = 0; i < l.objects.size(); ++i)
      ok = ok && back.objects[i].pos == l.objects[i].pos && back.objects[i].yaw_idx == l.objects[i].yaw_idx;
    pos_yaw += ok;
    full += back == l;
  }
  const double secs = seconds_since(t0);
  const double full_rate = 100.0 * full / n;
  return {pos_yaw == n && full_rate >= 95.0 && secs < 30.0,
          fmt("%d pairs, pos+yaw restored %d/%d (100%%), full layout restored %.2f%% (>= 95%%), %.2f s (< 30)", n,
              pos_yaw, n, full_rate, secs)};
}

Outcome reprojection_oracle() {
  Rng rng(kSeed + 3);
  const CameraIntrinsics K;
  std::normal_distribution<double> jitter(0.0, 0.2);
  std::uniform_real_distribution<double> yaw(-0.5, 0.5), scale(0.7, 1.3);
  int pairs = 0, bad = 0;
  double worst = 0.0;
  while (pairs < 1000) {
    const CameraBox gt = random_camera_scene(rng, 1, 1)[0];
    CameraBox pred = gt;
    pred.center += Vec3(jitter(rng), jitter(rng), jitter(rng));
    pred.size = pred.size.cwiseProduct(Vec3(scale(rng), scale(rng), scale(rng)));
    const Eigen::AngleAxisd r(yaw(rng), gt.ax_y());
    pred.ax_x = r * gt.ax_x;
    pred.ax_z = r * gt.ax_z;
    bool visible = true;
    for (const CameraBox* b : std::array<const CameraBox*, 2>{&gt, &pred})
      for (const auto& v : b->vertices()) visible = visible && v.z() > 0.05;
    if (!visible) continue;
    ++pairs;
    const double d = std::abs(box_reproj_iou(pred, gt, K) - oracle::raster_iou(pred, gt, K));
    worst = std::max(worst, d);
    bad += d > 0.01;
  }
  return {bad == 0, fmt("1000 pairs, max |IoU - raster IoU| %.4f (<= 0.01), pairs outside %d", worst, bad)};
}

Outcome collision_oracle() {
  Rng rng(kSeed + 4);
  std::uniform_int_distribution<int> sz(3, 20), yaw(0, 23), y(0, 6), off(-20, 20);
  int bad_volume = 0, bad_verdict = 0, collisions = 0, fine_agrees = 0;
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    GridBox a, b;
    a.id = 0;
    b.id = 1;
    a.pos = {40, y(rng), 40};
    a.size = {sz(rng), sz(rng), sz(rng)};
    a.yaw_idx = yaw(rng);
    b.size = {sz(rng), sz(rng), sz(rng)};
    const int reach = (std::max(a.size[0], a.size[2]) + std::max(b.size[0], b.size[2])) / 2;
    b.pos = {40 + off(rng) * reach / 20, y(rng), 40 + off(rng) * reach / 20};
    b.yaw_idx = yaw(rng);
    const double smaller = static_cast<double>(std::min(a.volume(), b.volume()));
    const double exact = prism_intersection_volume(a, b, 24);
    const double vox = oracle::voxel_intersection_volume(a, b, 24);
    const double rel = std::abs(exact - vox) / smaller;
    worst = std::max(worst, rel);
    bad_volume += rel > 0.02;
    const bool lib = boxes_collide(a, b, 24);
    collisions += lib;
    if (lib != (vox > 0.2 * smaller)) {
      ++bad_verdict;
      const double fine = oracle::voxel_intersection_volume(a, b, 24, 64);
      fine_agrees += lib == (fine > 0.2 * smaller);
    }
  }
  std::string detail = fmt("1000 pairs (%d colliding), max |V - V_vox| / min volume %.4f (<= 0.02), pairs outside %d, "
                           "verdict mismatches %d",
                           collisions, worst, bad_volume, bad_verdict);
  if (bad_verdict)
    detail += fmt(" (%d of them agree with a delta/64 voxelization)", fine_agrees);
  return {bad_volume == 0 && bad_verdict == 0, detail};
}

Outcome geo_film_checks() {
  Rng rng(kSeed + 5);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  const FeatureShape s{8, 8, 4};
  auto random_grid = [&](FeatureShape shape) {
    FeatureGrid g(shape);
    for (double& v : g.values) v = u(rng);
    return g;
  };
  const FeatureGrid f2d = random_grid(s), f3d = random_grid(s);
  ModulationParams closed{random_grid(s), random_grid(s), FeatureGrid({8, 8, 1}, 0.0)};
  ModulationParams open{FeatureGrid(s, 0.0), FeatureGrid(s, 0.0), FeatureGrid({8, 8, 1}, 1.0)};
  const bool closed_ok = fuse(f2d, f3d, closed).values == f2d.values;
  const bool open_ok = fuse(f2d, f3d, open).values == f3d.values;
  double worst = 0.0;
  for (unsigned seed = 0; seed < 5; ++seed) worst = std::max(worst, fuse_jacobian_check(s, seed));
  return {closed_ok && open_ok && worst < 1e-5,
          fmt("gate-closed identity %s, gate-open identity %s, max Jacobian relative error %.3g (< 1e-5) over 5 seeds",
              closed_ok ? "exact" : "broken", open_ok ? "exact" : "broken", worst)};
}

Outcome gravity_settling() {
  Rng rng(kSeed + 6);
  int svr_bad = 0, xz_bad = 0, idem_bad = 0;
  std::uniform_int_distribution<int> lift(0, 10);
  for (int s = 0; s < 500; ++s) {
    const GridLayout gt = random_gt_layout(rng);
    const ContactGraph g = infer_contact_graph(gt);
    const auto fixed = free_ids(g);
    GridLayout l = gt;
    for (auto& o : l.objects)
      if (!fixed.count(o.id)) o.pos[1] += lift(rng);
    const GridLayout settled = settle(l, g);
    svr_bad += support_violation_rate(settled, ExclusionConfig{}, fixed) != 0.0;
    for (std::size_t i = 0; i < l.objects.size(); ++i)
      xz_bad += settled.objects[i].pos[0] != l.objects[i].pos[0] || settled.objects[i].pos[2] != l.objects[i].pos[2];
    idem_bad += !(settle(settled, g) == settled);
  }
  return {svr_bad == 0 && xz_bad == 0 && idem_bad == 0,
          fmt("500 scenes, SVR>0 after settling %d, XZ changes %d, non-idempotent %d", svr_bad, xz_bad, idem_bad)};
}

Outcome dpo_soundness() {
  Rng rng(kSeed + 7);
  const ExclusionConfig excl;
  std::size_t pairs = 0, discarded = 0, failed = 0, unsound = 0, stale = 0;
  auto no_worse_somewhere_better = [](const MetricVector& a, const MetricVector& b) {
    const auto x = a.values(), y = b.values();
    bool strict = false;
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (x[i] > y[i]) return false;
      strict = strict || x[i] < y[i];
    }
    return strict;
  };
  while (pairs < 2000) {
    const GridLayout gt = random_gt_layout(rng);
    const auto p = sample_perturbation(gt, PerturbConfig{}, rng);
    std::vector<Candidate> cands;
    for (int k = 0; k < 4; ++k) {
      try {
        cands.push_back({degrade(p.gt_seq, sample_degradation_kinds(rng), gt.objects.size(), rng), {}});
      } catch (const Error&) {
        ++failed;
      }
    }
    const auto r = build_dpo_pairs(p.perturbed, p.gt_seq, cands, gt, excl);
    discarded += r.discarded;
    const auto gt_pairs = collision_pairs(gt);
    for (const auto& pair : r.pairs) {
      if (pairs == 2000) break;
      ++pairs;
      const MetricVector sel = metric_vector(lap::apply(p.perturbed, pair.selected, ApplyMode::Lenient), gt, excl, gt_pairs);
      const MetricVector rej = metric_vector(lap::apply(p.perturbed, pair.rejected, ApplyMode::Lenient), gt, excl, gt_pairs);
      unsound += !no_worse_somewhere_better(sel, rej);
      stale += sel.values() != pair.selected_metrics.values() || rej.values() != pair.rejected_metrics.values();
    }
  }
  const double rate = 100.0 * discarded / (discarded + pairs);
  return {unsound == 0 && stale == 0,
          fmt("2000 pairs, non-dominating %zu, stored metrics differing from recomputation %zu, discarded-pair rate "
              "%.1f%% (%zu discarded), failed degradations %zu",
              unsound, stale, rate, discarded, failed)};
}

std::string read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

Outcome corpus_determinism() {
  const auto dir = fixture::temp_dir("forge");
  const std::string cli = LAP_CLI_PATH;
  auto run = [&](const std::string& args) {
    const std::string cmd = "\"" + cli + "\" " + args + " 2>/dev/null";
    if (std::system(cmd.c_str()) != 0) throw std::runtime_error("command failed: " + cmd);
  };
  const std::string d = dir.string();
  run("synth --count 40 --seed 11 --out \"" + d + "/corpus\"");
  run("forge --corpus \"" + d + "/corpus\" --seed 5 --out \"" + d + "/a.jsonl\"");
  run("forge --corpus \"" + d + "/corpus\" --seed 5 --out \"" + d + "/b.jsonl\"");
  run("forge --synthetic 200 --seed 5 --out \"" + d + "/c.jsonl\"");
  run("forge --synthetic 200 --seed 5 --out \"" + d + "/e.jsonl\"");
  const std::string a = read_bytes(dir / "a.jsonl"), b = read_bytes(dir / "b.jsonl");
  const std::string c = read_bytes(dir / "c.jsonl"), e = read_bytes(dir / "e.jsonl");
  std::filesystem::remove_all(dir);
  const auto lines = [](const std::string& s) { return std::count(s.begin(), s.end(), '\n'); };
  const bool ok = !a.empty() && !c.empty() && a == b && c == e;
  return {ok, fmt("corpus run %s (%ld records), synthetic run %s (%ld records)", a == b ? "byte-identical" : "differs",
                  static_cast<long>(lines(a)), c == e ? "byte-identical" : "differs", static_cast<long>(lines(c)))};
}

Outcome external_policy_integration() {
  httplib::Server server;
  int calls = 0;
  const std::vector<std::string> script{"SELECT obj_1\nMOVE [0, -5, 2]\nSELECT obj_0\nROTATE_Y [3]\nRESIZE [1]",
                                        "SELECT obj_0\nMOVE [-4, 0, 0]\nSTOP", "STOP"};
  server.Post("/plan", [&](const httplib::Request&, httplib::Response& res) {
    const std::string text = script[std::min<std::size_t>(calls++, script.size() - 1)];
    res.set_content(nlohmann::json{{"text", text}}.dump(), "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  GridLayout l = empty_synthetic_layout();
  GridBox a, b;
  a.id = 0;
  a.class_name = "desk";
  a.pos = {30, 0, 30};
  a.size = {10, 8, 6};
  a.yaw_idx = 22;
  b.id = 1;
  b.class_name = "chair";
  b.pos = {50, 5, 30};
  b.size = {5, 9, 5};
  b.yaw_idx = 12;
  l.objects = {a, b};

  GridLayout want = l;
  want.objects[0].pos = {26, 0, 30};
  want.objects[0].yaw_idx = 1;
  want.objects[0].size = {11, 9, 7};
  want.objects[1].pos = {50, 0, 32};

  ExternalPolicy policy("http://127.0.0.1:" + std::to_string(port) + "/plan", 10.0);
  const RefineResult r = refine(l, policy, RefineConfig{});
  server.stop();
  th.join();
  const bool ok = !r.error && r.trajectory.converged && r.trajectory.rounds_used == 3 && r.trajectory.states.back() == want;
  return {ok, fmt("scripted endpoint, %d rounds, converged %s, terminal layout %s", r.trajectory.rounds_used,
                  r.trajectory.converged ? "yes" : "no", r.trajectory.states.back() == want ? "as expected" : "differs")};
}

} // namespace

int main() {
  report("canonicalization round trip", canonicalization_round_trip);
  report("rule-based refinement", rule_refinement);
  report("action inversion", action_inversion);
  report("reprojection IoU oracle", reprojection_oracle);
  report("collision volume oracle", collision_oracle);
  report("feature modulation checks", geo_film_checks);
  report("gravity settling", gravity_settling);
  report("preference pair soundness", dpo_soundness);
  report("corpus determinism", corpus_determinism);
  report("external policy integration", external_policy_integration);
  std::printf("%d criteria failed\n", failures);
  return failures ? 1 : 0;
}
