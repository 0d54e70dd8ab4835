#pragma once

// Application configuration: a JSON file with optional sections, overridden by
// LAP_ENDPOINT, LAP_TIMEOUT, LAP_DELTA, LAP_N_THETA and LAP_MAX_ROUNDS.

#include <cstdlib>
#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "lap/io.hpp"
#include "lap/metrics.hpp"
#include "lap/perturb.hpp"
#include "lap/refine.hpp"
#include "lap/scene.hpp"

namespace lap {

struct AppConfig {
  double delta = 0.1;
  int n_theta = 24;
  RefineConfig refine;
  PerturbConfig perturb;
  ExclusionConfig exclusions;
  int clearance = 1;
  int workers = 1;
};

namespace detail {

inline void read_strings(const nlohmann::json& j, const char* key, std::vector<std::string>& out) {
  if (j.contains(key)) out = j.at(key).get<std::vector<std::string>>();
}

inline std::optional<std::string> env(const char* name) {
  const char* v = std::getenv(name);
  if (!v || !*v) return std::nullopt;
  return std::string(v);
}

inline double env_number(const char* name, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw Error(ErrorCode::FormatError, std::string(name) + ": not a number: " + v);
  }
}

} // namespace detail

inline AppConfig config_from_json(const nlohmann::json& j) {
  AppConfig c;
  try {
    if (j.contains("grid")) {
      const auto& g = j["grid"];
      c.delta = g.value("delta", c.delta);
      c.n_theta = g.value("n_theta", c.n_theta);
    }
    if (j.contains("refine")) {
      const auto& r = j["refine"];
      c.refine.max_rounds = r.value("max_rounds", c.refine.max_rounds);
      c.refine.timeout_s = r.value("timeout", c.refine.timeout_s);
      if (r.contains("endpoint") && r["endpoint"].is_string()) c.refine.endpoint = r["endpoint"].get<std::string>();
      if (r.contains("mode")) c.refine.mode = r["mode"].get<std::string>() == "strict" ? ApplyMode::Strict : ApplyMode::Lenient;
    }
    if (j.contains("perturb")) {
      const auto& p = j["perturb"];
      c.perturb.p_continue = p.value("p_continue", c.perturb.p_continue);
      c.perturb.move_max = p.value("move_max", c.perturb.move_max);
      c.perturb.rotate_max = p.value("rotate_max", c.perturb.rotate_max);
      c.perturb.resize_max = p.value("resize_max", c.perturb.resize_max);
    }
    if (j.contains("exclusions")) {
      const auto& e = j["exclusions"];
      detail::read_strings(e, "svr_wall_mounted", c.exclusions.svr_wall_mounted);
      detail::read_strings(e, "svr_small", c.exclusions.svr_small);
      detail::read_strings(e, "rot_symmetric", c.exclusions.rot_symmetric);
    }
    c.clearance = j.value("clearance", c.clearance);
    c.workers = j.value("workers", c.workers);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::FormatError, std::string("config: ") + e.what());
  }
  c.exclusions.normalize();
  return c;
}

inline void apply_env_overrides(AppConfig& c) {
  if (auto v = detail::env("LAP_ENDPOINT")) c.refine.endpoint = *v;
  if (auto v = detail::env("LAP_TIMEOUT")) c.refine.timeout_s = detail::env_number("LAP_TIMEOUT", *v);
  if (auto v = detail::env("LAP_DELTA")) c.delta = detail::env_number("LAP_DELTA", *v);
  if (auto v = detail::env("LAP_N_THETA")) c.n_theta = static_cast<int>(detail::env_number("LAP_N_THETA", *v));
  if (auto v = detail::env("LAP_MAX_ROUNDS")) c.refine.max_rounds = static_cast<int>(detail::env_number("LAP_MAX_ROUNDS", *v));
}

inline AppConfig load_config(const std::optional<std::filesystem::path>& path) {
  AppConfig c;
  if (path) c = config_from_json(parse_json(read_text_file(*path), path->string()));
  apply_env_overrides(c);
  GridConfig{c.delta, c.n_theta, Vec3::Zero()}.validate();
  c.refine.validate();
  c.perturb.validate();
  if (c.workers < 1) c.workers = 1;
  return c;
}

} // namespace lap
