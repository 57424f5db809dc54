#include "glasslabel/scene.hpp"

#include <cstdio>
#include <filesystem>

#include "glasslabel/errors.hpp"
#include "glasslabel/imageio.hpp"

namespace fs = std::filesystem;

namespace glasslabel {

namespace {

std::string pose_stem(int pose) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%02d", pose);
  return buf;
}

std::string scene_id_from_root(const fs::path& root) {
  std::string name = fs::path(root).lexically_normal().filename().string();
  if (name.empty()) name = fs::path(root).lexically_normal().parent_path().filename().string();
  const std::string prefix = "scene_";
  if (name.rfind(prefix, 0) == 0) return name.substr(prefix.size());
  return name;
}

}  // namespace

std::string to_string(Pass pass) {
  switch (pass) {
    case Pass::Clean: return "clean";
    case Pass::Capped: return "capped";
    case Pass::Chalk: return "chalk";
  }
  return "?";
}

const std::vector<Pass>& all_passes() {
  static const std::vector<Pass> passes{Pass::Clean, Pass::Capped, Pass::Chalk};
  return passes;
}

const std::vector<CameraSlot>& default_camera_layout() {
  static const std::vector<CameraSlot> layout{
      {"head_realsense", true, 25}, {"left_eye", false, 25},   {"right_eye", false, 25},
      {"static_left", true, 1},     {"static_right", true, 1},
  };
  return layout;
}

std::string SceneFrame::frame_id() const { return pose_stem(pose); }

const SceneFrame* SceneCapture::find(const std::string& camera, int pose) const {
  for (const auto& f : frames)
    if (f.camera == camera && f.pose == pose) return &f;
  return nullptr;
}

std::string color_file(Pass pass, const std::string& camera, int pose) {
  return to_string(pass) + "/" + camera + "/" + pose_stem(pose) + ".png";
}

std::string depth_file(Pass pass, const std::string& camera, int pose) {
  return to_string(pass) + "/" + camera + "/" + pose_stem(pose) + ".depth.png";
}

SceneCapture load_scene(const std::string& root_str) {
  const fs::path root(root_str);
  if (!fs::is_directory(root)) throw InvalidInput("scene directory '" + root_str + "' does not exist");

  SceneCapture scene;
  scene.root = root_str;
  scene.scene_id = scene_id_from_root(root);

  const fs::path rig_path = root / "rig.json";
  if (fs::exists(rig_path)) {
    try {
      scene.rig = load_rig(rig_path.string());
    } catch (const Error& e) {
      scene.errors.push_back({"rig.json", e.what()});
    }
  } else {
    scene.missing.push_back("rig.json");
  }

  // A rig may mark cameras as RGB-D; fall back to the default layout.
  std::vector<CameraSlot> layout = default_camera_layout();
  if (scene.rig)
    for (auto& slot : layout)
      if (const RigCamera* rc = scene.rig->find(slot.name)) slot.has_depth = rc->has_depth;

  for (Pass pass : all_passes())
    if (!fs::is_directory(root / to_string(pass))) scene.absent_passes.push_back(to_string(pass));

  auto probe = [&](const std::string& rel, bool depth) -> bool {
    const fs::path p = root / rel;
    if (!fs::exists(p)) {
      scene.missing.push_back(rel);
      return false;
    }
    try {
      const PngHeader h = read_png_header(p.string());
      if (depth && (h.bit_depth != 16 || h.color_type != 0))
        throw ParseError("depth must be 16-bit single channel, found " + std::to_string(h.bit_depth) +
                         "-bit color type " + std::to_string(h.color_type));
      if (!depth && h.bit_depth != 8) throw ParseError("color must be 8-bit, found " + std::to_string(h.bit_depth));
    } catch (const ParseError& e) {
      scene.errors.push_back({rel, e.what()});
      return false;
    }
    return true;
  };

  for (const auto& slot : layout) {
    for (int pose = 0; pose < slot.poses; ++pose) {
      SceneFrame frame;
      frame.camera = slot.name;
      frame.pose = pose;
      bool any = false;
      for (Pass pass : all_passes()) {
        PassFiles files;
        const std::string color_rel = color_file(pass, slot.name, pose);
        if (probe(color_rel, false)) files.color = color_rel;
        if (slot.has_depth) {
          const std::string depth_rel = depth_file(pass, slot.name, pose);
          if (probe(depth_rel, true)) files.depth = depth_rel;
        }
        if (files.color || files.depth) {
          any = true;
          frame.passes[pass] = files;
        }
      }
      if (any) scene.frames.push_back(std::move(frame));
    }
  }
  return scene;
}

SceneLabelOutput label_scene(const SceneCapture& scene, const AppConfig& config, const Ports& ports) {
  if (!scene.rig) throw InvalidInput("scene '" + scene.scene_id + "' has no usable rig.json");
  SceneLabelOutput out;
  out.table = scene.rig->table;
  const fs::path root(scene.root);
  for (const auto& frame : scene.frames) {
    const RigCamera* rc = scene.rig->find(frame.camera);
    if (!rc || !rc->has_depth) continue;
    auto capped = frame.passes.find(Pass::Capped);
    if (capped == frame.passes.end() || !capped->second.color || !capped->second.depth) {
      out.report.push_back({-1, "input", frame.camera + "/" + frame.frame_id() + ": capped pass incomplete"});
      continue;
    }
    FrameInput input;
    input.scene_id = scene.scene_id;
    input.frame_id = frame.frame_id();
    try {
      input.capped_depth = read_depth_png((root / *capped->second.depth).string());
      input.capped_color = read_color_png((root / *capped->second.color).string());
    } catch (const ParseError& e) {
      out.report.push_back({-1, "input", e.what()});
      continue;
    }
    input.clean_image_path = (root / color_file(Pass::Clean, frame.camera, frame.pose)).string();

    const CameraProfile cam = scene.rig->camera(frame.camera, frame.pose);
    FrameResult fr = label_frame(input, cam, scene.rig->table, config.classes, config.label, ports);
    for (auto& e : fr.report) {
      e.message = frame.camera + "/" + frame.frame_id() + ": " + e.message;
      out.report.push_back(std::move(e));
    }
    out.counts.candidates += fr.counts.candidates;
    out.counts.height += fr.counts.height;
    out.counts.color += fr.counts.color;
    out.counts.verifier += fr.counts.verifier;
    out.counts.segmenter += fr.counts.segmenter;
    out.counts.mask_filter += fr.counts.mask_filter;
    if (!out.table) out.table = fr.table;
    for (auto& a : fr.annotations) out.annotations.push_back(std::move(a));
    for (auto& k : fr.keypoints) out.annotations.push_back(std::move(k));
  }
  return out;
}

}  // namespace glasslabel
