#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "glasslabel/config.hpp"

namespace glasslabel {

enum class Pass { Clean, Capped, Chalk };

std::string to_string(Pass pass);
const std::vector<Pass>& all_passes();

struct CameraSlot {
  std::string name;
  bool has_depth = false;
  int poses = 1;
};

// Capture layout: three head cameras at 25 poses, two static RGB-D cameras.
const std::vector<CameraSlot>& default_camera_layout();
constexpr int kFramesPerCompleteScene = 77;

struct PassFiles {
  std::optional<std::string> color;  // paths relative to the scene root
  std::optional<std::string> depth;
};

struct SceneFrame {
  std::string camera;
  int pose = 0;
  std::map<Pass, PassFiles> passes;

  std::string frame_id() const;
};

struct FileError {
  std::string path;
  std::string message;
};

struct SceneCapture {
  std::string scene_id;
  std::string root;
  std::optional<Rig> rig;
  std::vector<SceneFrame> frames;  // slots with at least one readable file
  std::vector<std::string> missing;  // expected relative paths that are absent
  std::vector<std::string> absent_passes;
  std::vector<FileError> errors;

  bool complete() const { return missing.empty() && errors.empty(); }
  const SceneFrame* find(const std::string& camera, int pose) const;
};

// Layout: <root>/<pass>/<camera>/<pose>.png (8-bit RGB) and
// <pose>.depth.png (16-bit mm) with two-digit poses, rig.json at the root.
// Never throws for missing or broken files; those land in the report.
SceneCapture load_scene(const std::string& root);

std::string color_file(Pass pass, const std::string& camera, int pose);
std::string depth_file(Pass pass, const std::string& camera, int pose);

struct SceneLabelOutput {
  std::vector<Annotation> annotations;  // glass and keypoint annotations
  std::vector<ReportEntry> report;
  StageCounts counts;
  std::optional<Plane> table;
};

// Labels every depth camera frame that has capped depth + color. The table
// plane comes from the rig when present, otherwise it is fitted per frame.
SceneLabelOutput label_scene(const SceneCapture& scene, const AppConfig& config, const Ports& ports);

}  // namespace glasslabel
