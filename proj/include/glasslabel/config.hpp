#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "glasslabel/camera.hpp"
#include "glasslabel/geometry.hpp"
#include "glasslabel/pipeline.hpp"
#include "glasslabel/pouring.hpp"

namespace glasslabel {

struct Pose {
  Mat3 R = Mat3::Identity();
  Vec3 t = Vec3::Zero();
};

struct RigCamera {
  CameraProfile profile;  // extrinsics of pose 0 unless overridden below
  bool has_depth = false;
  std::map<int, Pose> poses;
};

// Calibration rig: all cameras of a scene plus an optional known table plane.
struct Rig {
  std::vector<RigCamera> cameras;
  std::optional<Plane> table;

  const RigCamera* find(const std::string& name) const;
  // Profile with the pose's extrinsics applied. Throws InvalidInput.
  CameraProfile camera(const std::string& name, int pose = 0) const;
};

nlohmann::json camera_to_json(const CameraProfile& cam);
CameraProfile camera_from_json(const nlohmann::json& j);

nlohmann::json rig_to_json(const Rig& rig);
Rig rig_from_json(const nlohmann::json& j);
Rig load_rig(const std::string& path);
void save_rig(const Rig& rig, const std::string& path);

// Whitespace separated rows "u v X Y Z"; '#' starts a comment.
std::vector<Correspondence> parse_correspondences(const std::string& text);
std::vector<Correspondence> load_correspondences(const std::string& path);

struct HeatmapConfig {
  int kernel_size = 15;
  double sigma = 2.5;
};

struct AppConfig {
  std::vector<GlassClassSpec> classes = default_glass_classes();
  LabelConfig label;
  PouringConfig pouring;
  HeatmapConfig heatmap;
  double plugin_timeout_s = 30.0;
};

// Missing keys keep their defaults; unknown keys are rejected.
AppConfig config_from_json(const nlohmann::json& j);
AppConfig load_config(const std::string& path);

nlohmann::json read_json_file(const std::string& path);

}  // namespace glasslabel
