#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "lap/io.hpp"
#include "lap/synthetic.hpp"

namespace fixture {

/// Camera-space scene whose ground truth is a random synthetic layout.
inline lap::Scene synthetic_scene(lap::Rng& rng) {
  lap::GridLayout l = lap::random_gt_layout(rng);
  lap::Scene s;
  s.boxes = lap::camera_boxes_for(l, s.intrinsics);
  s.image = "synthetic.png";
  return s;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() /
                   ("lap_test_" + name + "_" + std::to_string(std::random_device{}()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

} // namespace fixture
