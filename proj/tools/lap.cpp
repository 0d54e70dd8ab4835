#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lap/lap.hpp"

namespace fs = std::filesystem;
using namespace lap;

namespace {

void emit(const std::string& text, const std::string& out) {
  if (out.empty() || out == "-") {
    std::cout << text;
    if (!text.empty() && text.back() != '\n') std::cout << '\n';
  } else {
    write_text_file(out, text);
  }
}

GridLayout layout_from_inputs(const std::string& scene_path, const std::string& layout_path, const AppConfig& cfg,
                              Scene* scene_out = nullptr) {
  if (!layout_path.empty()) return load_layout(layout_path);
  if (scene_path.empty()) throw Error(ErrorCode::FormatError, "need --scene or --layout");
  Scene scene = load_scene(scene_path);
  GridLayout l = build_grid_layout(scene.boxes, scene.intrinsics, cfg.delta, cfg.n_theta);
  if (scene_out) *scene_out = std::move(scene);
  return l;
}

std::string synthetic_id(int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "synth_%05d", i);
  return buf;
}

GridLayout synthetic_layout(std::uint64_t seed, const std::string& id) {
  Rng rng(scene_seed(seed, id));
  return random_gt_layout(rng);
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"lap: grid layouts, action sequences and iterative refinement for indoor scenes"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);

  // canonicalize
  auto* canon = app.add_subcommand("canonicalize", "camera-space scene file -> grid layout file");
  std::string c_scene, c_out;
  canon->add_option("--scene", c_scene, "scene file")->required()->check(CLI::ExistingFile);
  canon->add_option("--out", c_out, "layout file (stdout if omitted)");

  // perturb
  auto* pert = app.add_subcommand("perturb", "sample a perturbation and its restoring sequence");
  std::string p_scene, p_layout, p_out;
  std::uint64_t p_seed = 0;
  pert->add_option("--scene", p_scene, "scene file")->check(CLI::ExistingFile);
  pert->add_option("--layout", p_layout, "layout file")->check(CLI::ExistingFile);
  pert->add_option("--seed", p_seed, "seed");
  pert->add_option("--out", p_out, "output file (stdout if omitted)");

  // refine
  auto* ref = app.add_subcommand("refine", "run the refinement loop");
  std::string r_scene, r_layout, r_policy = "rule", r_out, r_contact, r_endpoint;
  std::optional<int> r_rounds;
  ref->add_option("--scene", r_scene, "scene file")->check(CLI::ExistingFile);
  ref->add_option("--layout", r_layout, "layout file")->check(CLI::ExistingFile);
  ref->add_option("--policy", r_policy, "rule, external or stop")->check(CLI::IsMember({"rule", "external", "stop"}));
  ref->add_option("--max-rounds", r_rounds, "round limit");
  ref->add_option("--out", r_out, "trajectory file (stdout if omitted)");
  ref->add_option("--contact", r_contact, "contact text file")->check(CLI::ExistingFile);
  ref->add_option("--endpoint", r_endpoint, "external policy URL");

  // bench
  auto* bench = app.add_subcommand("bench", "before/after metrics over a corpus of scene files");
  std::string b_corpus, b_policy = "rule", b_csv, b_json;
  std::uint64_t b_seed = 0;
  bool b_no_perturb = false;
  bench->add_option("--corpus", b_corpus, "directory of scene files")->required()->check(CLI::ExistingDirectory);
  bench->add_option("--policy", b_policy, "rule, external or stop")->check(CLI::IsMember({"rule", "external", "stop"}));
  bench->add_option("--seed", b_seed, "perturbation seed");
  bench->add_flag("--no-perturb", b_no_perturb, "refine the scenes as given");
  bench->add_option("--csv", b_csv, "per-scene table");
  bench->add_option("--json", b_json, "summary file (stdout if omitted)");

  // forge
  auto* forge = app.add_subcommand("forge", "emit SFT and DPO training records as JSON lines");
  std::string f_corpus, f_out;
  int f_synthetic = 0;
  std::uint64_t f_seed = 0;
  forge->add_option("--corpus", f_corpus, "directory of scene files")->check(CLI::ExistingDirectory);
  forge->add_option("--synthetic", f_synthetic, "number of generated scenes instead of a corpus");
  forge->add_option("--seed", f_seed, "seed");
  forge->add_option("--out", f_out, "records file")->required();

  // synth
  auto* synth = app.add_subcommand("synth", "write generated scene files");
  int s_count = 10;
  std::uint64_t s_seed = 0;
  std::string s_out;
  synth->add_option("--count", s_count, "number of scenes");
  synth->add_option("--seed", s_seed, "seed");
  synth->add_option("--out", s_out, "output directory")->required();

  // assemble
  auto* asmb = app.add_subcommand("assemble", "gravity settling of a layout");
  std::string a_layout, a_contact, a_out, a_mesh;
  asmb->add_option("--layout", a_layout, "layout file")->required()->check(CLI::ExistingFile);
  asmb->add_option("--contact", a_contact, "contact text file (inferred from the layout if omitted)")->check(CLI::ExistingFile);
  asmb->add_option("--out", a_out, "settled layout file (stdout if omitted)");
  asmb->add_option("--mesh", a_mesh, "also write an OBJ box mesh");

  // serve
  auto* serve = app.add_subcommand("serve", "session service over HTTP");
  int port = 8080;
  std::string host = "127.0.0.1";
  serve->add_option("--port", port, "port");
  serve->add_option("--host", host, "bind address");

  CLI11_PARSE(app, argc, argv);

  try {
    AppConfig cfg = load_config(config_path.empty() ? std::nullopt : std::optional<fs::path>(config_path));

    if (*canon) {
      emit(layout_to_json(layout_from_inputs(c_scene, "", cfg)).dump(2), c_out);
    } else if (*pert) {
      const GridLayout l = layout_from_inputs(p_scene, p_layout, cfg);
      const std::string id = fs::path(p_layout.empty() ? p_scene : p_layout).stem().string();
      Rng rng(scene_seed(p_seed, id));
      const Perturbation p = sample_perturbation(l, cfg.perturb, rng);
      json doc{{"perturbed", layout_to_json(p.perturbed)},
               {"perturbation", serialize(p.perturb_seq)},
               {"restore", serialize(p.gt_seq)}};
      emit(doc.dump(2), p_out);
    } else if (*ref) {
      Scene scene;
      const GridLayout l = layout_from_inputs(r_scene, r_layout, cfg, &scene);
      if (r_rounds) cfg.refine.max_rounds = *r_rounds;
      if (!r_endpoint.empty()) cfg.refine.endpoint = r_endpoint;
      cfg.refine.validate();
      ContactGraph graph;
      if (!r_contact.empty()) {
        auto res = resolve_contact(parse_contact(read_text_file(r_contact)), l);
        for (const auto& d : res.diagnostics) std::cerr << "contact: " << d << "\n";
        graph = std::move(res.graph);
      } else {
        graph = infer_contact_graph(l);
      }
      auto policy = make_policy(policy_kind_from_string(r_policy), graph, cfg.refine);
      const RefineResult r = refine(l, *policy, cfg.refine, scene.image);
      emit(trajectory_to_json(r, policy->name()).dump(2), r_out);
      if (r.error) {
        std::cerr << r.error->what() << "\n";
        return 3;
      }
    } else if (*bench) {
      BenchmarkConfig bc;
      bc.policy = policy_kind_from_string(b_policy);
      bc.app = cfg;
      bc.seed = b_seed;
      bc.perturb = !b_no_perturb;
      const BenchmarkRun run = run_benchmark(list_scene_files(b_corpus), bc);
      if (!b_csv.empty()) write_text_file(b_csv, benchmark_csv(run));
      emit(benchmark_json(run).dump(2), b_json);
      for (const auto& q : run.quarantine) std::cerr << "quarantined " << q.scene_id << ": " << q.error << "\n";
    } else if (*forge) {
      if (f_corpus.empty() == (f_synthetic <= 0)) throw Error(ErrorCode::FormatError, "give exactly one of --corpus or --synthetic");
      ForgeConfig fc;
      fc.seed = f_seed;
      fc.perturb = cfg.perturb;
      fc.exclusions = cfg.exclusions;
      ForgeStats stats;
      std::string text;
      auto add = [&](const CorpusScene& cs) {
        for (const auto& line : forge_scene(cs, fc, &stats)) text += line + "\n";
      };
      if (!f_corpus.empty()) {
        for (const auto& path : list_scene_files(f_corpus)) {
          const Scene scene = load_scene(path);
          add({path.stem().string(), scene.image,
               build_grid_layout(scene.boxes, scene.intrinsics, cfg.delta, cfg.n_theta)});
        }
      } else {
        for (int i = 0; i < f_synthetic; ++i) {
          const std::string id = synthetic_id(i);
          add({id, "", synthetic_layout(f_seed, id)});
        }
      }
      write_text_file(f_out, text);
      std::cerr << "sft " << stats.sft_records << ", dpo " << stats.dpo_records << ", discarded pairs "
                << stats.discarded_pairs << ", failed degradations " << stats.failed_degradations << "\n";
    } else if (*synth) {
      const CameraIntrinsics K;
      for (int i = 0; i < s_count; ++i) {
        const std::string id = synthetic_id(i);
        GridLayout l = synthetic_layout(s_seed, id);
        Scene scene;
        scene.intrinsics = K;
        scene.boxes = camera_boxes_for(l, K);
        write_text_file(fs::path(s_out) / (id + ".json"), scene_to_json(scene).dump(2));
      }
    } else if (*asmb) {
      const GridLayout l = load_layout(a_layout);
      ContactGraph graph;
      if (!a_contact.empty()) {
        auto res = resolve_contact(parse_contact(read_text_file(a_contact)), l);
        for (const auto& d : res.diagnostics) std::cerr << "contact: " << d << "\n";
        graph = std::move(res.graph);
      } else {
        graph = infer_contact_graph(l);
      }
      const GridLayout settled = settle(l, graph, cfg.clearance);
      emit(layout_to_json(settled).dump(2), a_out);
      if (!a_mesh.empty()) write_text_file(a_mesh, export_box_mesh(settled));
    } else if (*serve) {
      SessionStore store(cfg);
      httplib::Server srv;
      mount_routes(srv, store);
      std::cerr << "listening on " << host << ":" << port << "\n";
      if (!srv.listen(host, port)) throw Error(ErrorCode::TransportError, "cannot bind " + host + ":" + std::to_string(port));
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
