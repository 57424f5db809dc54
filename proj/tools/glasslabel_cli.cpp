// glasslabel command line: labeling, projection, heatmaps, pouring plans,
// calibration, validation and overlays.
//
// Exit codes: 0 success, 1 validation failure, 2 input error, 3 plugin or
// protocol error.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "glasslabel/basepoint.hpp"
#include "glasslabel/camera.hpp"
#include "glasslabel/coco.hpp"
#include "glasslabel/config.hpp"
#include "glasslabel/errors.hpp"
#include "glasslabel/imageio.hpp"
#include "glasslabel/overlay.hpp"
#include "glasslabel/pipeline.hpp"
#include "glasslabel/ports.hpp"
#include "glasslabel/pouring.hpp"
#include "glasslabel/scene.hpp"

using namespace glasslabel;
using nlohmann::json;

namespace {

enum Exit { kOk = 0, kValidation = 1, kInput = 2, kPlugin = 3 };

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string plugin_verifier;
  std::string plugin_segmenter;
  bool strict = false;

  AppConfig load() const {
    AppConfig cfg = config_path.empty() ? AppConfig{} : load_config(config_path);
    if (seed) cfg.label.ransac.seed = *seed;
    if (strict) cfg.label.strict = true;
    return cfg;
  }
};

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write '" + path + "'");
  out << text;
}

json report_entries(const std::vector<ReportEntry>& entries) {
  json out = json::array();
  for (const auto& e : entries) out.push_back({{"candidate", e.candidate}, {"stage", e.stage}, {"message", e.message}});
  return out;
}

int frame_pose(const std::string& frame_id) {
  try {
    return std::stoi(frame_id);
  } catch (const std::exception&) {
    throw InvalidInput("frame id '" + frame_id + "' is not a pose index");
  }
}

int run_label(const Globals& g, const std::string& scene_dir, const std::string& out_path,
              const std::string& report_path) {
  const AppConfig cfg = g.load();
  const SceneCapture scene = load_scene(scene_dir);

  const auto timeout = std::chrono::milliseconds(static_cast<long long>(cfg.plugin_timeout_s * 1000.0));
  std::unique_ptr<PluginVerifier> verifier;
  std::unique_ptr<PluginSegmenter> segmenter;
  Ports ports;
  if (!g.plugin_verifier.empty()) {
    verifier = std::make_unique<PluginVerifier>(std::make_shared<PluginProcess>(g.plugin_verifier, timeout));
    ports.verifier = verifier.get();
  }
  if (!g.plugin_segmenter.empty()) {
    segmenter = std::make_unique<PluginSegmenter>(std::make_shared<PluginProcess>(g.plugin_segmenter, timeout));
    ports.segmenter = segmenter.get();
  }

  const SceneLabelOutput labeled = label_scene(scene, cfg, ports);
  const CocoDocument doc = export_coco(labeled.annotations, scene_image_index(scene), cfg.classes);
  write_coco(doc, out_path);

  json report;
  report["scene_id"] = scene.scene_id;
  report["frames"] = scene.frames.size();
  report["complete"] = scene.complete();
  report["missing"] = scene.missing;
  report["absent_passes"] = scene.absent_passes;
  report["file_errors"] = json::array();
  for (const auto& e : scene.errors) report["file_errors"].push_back({{"path", e.path}, {"message", e.message}});
  report["counts"] = {{"candidates", labeled.counts.candidates}, {"height", labeled.counts.height},
                      {"color", labeled.counts.color},           {"verifier", labeled.counts.verifier},
                      {"segmenter", labeled.counts.segmenter},   {"mask_filter", labeled.counts.mask_filter}};
  report["annotations"] = doc.annotations.size();
  report["dropped"] = report_entries(labeled.report);
  if (!report_path.empty()) write_text(report_path, report.dump(2) + "\n");

  std::cerr << scene.frames.size() << " frames, " << labeled.counts.candidates << " candidates, "
            << doc.annotations.size() << " annotations -> " << out_path << "\n";

  bool stage_failure = false;
  for (const auto& e : labeled.report)
    if (e.message.find("stage error") != std::string::npos) stage_failure = true;
  return stage_failure && cfg.label.strict ? kPlugin : kOk;
}

// Source images of one camera are moved into the target camera. Each target
// pose takes the source image of the same pose, or pose 0 when the source
// camera has a single pose (static cameras).
int run_project(const Globals& g, const std::string& coco_path, const std::string& rig_path, std::string source,
                const std::string& target, const std::string& out_path) {
  const AppConfig cfg = g.load();
  const Rig rig = load_rig(rig_path);
  if (!rig.table) throw InvalidInput("rig has no table plane");
  const CocoDocument in = load_coco(coco_path);
  const RigCamera* target_cam = rig.find(target);
  if (!target_cam) throw InvalidInput("rig has no camera '" + target + "'");
  if (source.empty()) {
    if (in.images.empty()) throw InvalidInput("'" + coco_path + "' has no images");
    source = in.images.front().camera;
  }
  if (!rig.find(source)) throw InvalidInput("rig has no camera '" + source + "'");

  std::map<int, std::vector<Annotation>> by_image;
  const std::vector<Annotation> anns = coco_to_annotations(in);
  for (std::size_t i = 0; i < anns.size(); ++i) by_image[in.annotations[i].image_id].push_back(anns[i]);

  std::map<std::pair<std::string, int>, const CocoImage*> sources;  // (scene, pose)
  std::set<std::string> scenes;
  for (const auto& img : in.images)
    if (img.camera == source) {
      sources[{img.scene_id, frame_pose(img.frame_id)}] = &img;
      scenes.insert(img.scene_id);
    }
  std::vector<int> target_poses;
  for (const auto& [pose, unused] : target_cam->poses) target_poses.push_back(pose);
  if (target_poses.empty()) target_poses.push_back(0);

  std::vector<Annotation> projected;
  std::vector<CocoImage> images;
  std::vector<ReportEntry> report;
  std::size_t considered = 0;
  for (const auto& scene_id : scenes) {
    for (int pose : target_poses) {
      auto it = sources.find({scene_id, pose});
      if (it == sources.end()) it = sources.find({scene_id, 0});
      if (it == sources.end()) continue;
      const CocoImage& src = *it->second;
      const CameraProfile from = rig.camera(source, frame_pose(src.frame_id));
      const CameraProfile to = rig.camera(target, pose);
      char frame_id[16];
      std::snprintf(frame_id, sizeof frame_id, "%02d", pose);
      CocoImage out_img;
      out_img.scene_id = scene_id;
      out_img.camera = target;
      out_img.frame_id = frame_id;
      out_img.width = to.width;
      out_img.height = to.height;
      out_img.file_name = color_file(Pass::Clean, target, pose);
      images.push_back(out_img);
      auto found = by_image.find(src.id);
      if (found == by_image.end()) continue;
      considered += found->second.size();
      for (auto& a : project_annotations(found->second, from, to, *rig.table, cfg.classes, &report)) {
        a.frame_id = frame_id;
        projected.push_back(std::move(a));
      }
    }
  }
  const CocoDocument doc = export_coco(projected, images, cfg.classes);
  write_coco(doc, out_path);
  for (const auto& e : report) std::cerr << "dropped annotation " << e.candidate << ": " << e.message << "\n";
  std::cerr << projected.size() << " of " << considered << " annotations projected from " << source << " into "
            << target << "\n";
  return kOk;
}

int run_heatmap(const Globals& g, const std::string& proposals_path, const std::string& out_path,
                const std::string& png_path) {
  const AppConfig cfg = g.load();
  const json j = read_json_file(proposals_path);
  std::vector<KeypointProposal> proposals;
  int width = 0, height = 0;
  std::vector<Bbox> boxes;
  try {
    width = j.at("width").get<int>();
    height = j.at("height").get<int>();
    for (const auto& p : j.at("proposals")) {
      const auto c = p.at("center").get<std::vector<double>>();
      if (c.size() != 2) throw ParseError("proposal center must be [u, v]");
      proposals.push_back({Vec2(c[0], c[1]), p.at("score").get<double>()});
    }
    for (const auto& b : j.value("boxes", json::array())) {
      const auto v = b.get<std::vector<double>>();
      if (v.size() != 4) throw ParseError("box must be [x, y, w, h]");
      boxes.push_back({v[0], v[1], v[2], v[3]});
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("proposals: ") + e.what());
  }
  const Heatmap hm = render_heatmap(proposals, width, height, cfg.heatmap.kernel_size, cfg.heatmap.sigma);
  write_heatmap(hm, out_path);
  if (!png_path.empty()) write_heatmap_png(hm, png_path);
  json out = {{"width", width}, {"height", height}, {"max", hm.max()}, {"points", json::array()}};
  for (const auto& p : extract_base_points(hm, boxes))
    out["points"].push_back({{"box", p.box_index}, {"u", p.u}, {"v", p.v}, {"value", p.value}});
  std::cout << out.dump(2) << "\n";
  return kOk;
}

int run_pour_plan(const Globals& g, const std::string& coco_path, int annotation_id, const std::string& rig_path) {
  const AppConfig cfg = g.load();
  const Rig rig = load_rig(rig_path);
  if (!rig.table) throw InvalidInput("rig has no table plane");
  const CocoDocument doc = load_coco(coco_path);
  const std::vector<Annotation> anns = coco_to_annotations(doc);
  for (std::size_t i = 0; i < anns.size(); ++i) {
    if (doc.annotations[i].id != annotation_id) continue;
    const Annotation& a = anns[i];
    const GlassClassSpec* cls = find_class(cfg.classes, a.class_id);
    if (!cls) throw InvalidInput("annotation " + std::to_string(annotation_id) + " is not a glass class");
    const CameraProfile cam = rig.camera(a.camera, frame_pose(a.frame_id));
    const PouringPlan plan = build_pouring_plan(a, *cls, cam, *rig.table, cfg.pouring);
    auto vec = [](const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); };
    json out = {{"annotation_id", annotation_id},
                {"class", cls->name},
                {"base", vec(plan.base)},
                {"glass_axis", vec(plan.glass_axis)},
                {"hull_offset", plan.hull_offset},
                {"epsilon", plan.scaling.epsilon},
                {"gamma", plan.scaling.gamma},
                {"tau", plan.scaling.tau},
                {"outside_workspace", plan.scaling.outside_workspace},
                {"p_x", plan.offsets.p_x},
                {"p_y", plan.offsets.p_y},
                {"target", vec(plan.target)}};
    std::cout << out.dump(2) << "\n";
    return plan.scaling.outside_workspace ? kValidation : kOk;
  }
  throw InvalidInput("no annotation with id " + std::to_string(annotation_id));
}

int run_calibrate(const std::string& corr_path, const std::string& rig_path, const std::string& camera,
                  bool fix_intrinsics, const std::string& out_path) {
  Rig rig = load_rig(rig_path);
  const RigCamera* entry = rig.find(camera);
  if (!entry) throw InvalidInput("rig has no camera '" + camera + "'");
  const auto corrs = load_correspondences(corr_path);
  CalibrationOptions opts;
  opts.fix_intrinsics = fix_intrinsics;
  CalibrationResult result;
  int code = kOk;
  try {
    result = calibrate(corrs, entry->profile, opts);
  } catch (const CalibrationDiverged& e) {
    std::cerr << "calibration did not converge: " << e.what() << "\n";
    result = e.best();
    code = kValidation;
  }
  for (auto& rc : rig.cameras)
    if (rc.profile.name == camera) rc.profile = result.camera;
  json out = camera_to_json(result.camera);
  out["rms_px"] = result.rms;
  out["iterations"] = result.iterations;
  std::cout << out.dump(2) << "\n";
  if (!out_path.empty()) save_rig(rig, out_path);
  return code;
}

int run_validate(const std::string& coco_path) {
  const ValidationReport report = validate_coco_file(coco_path);
  json out = {{"ok", report.ok()}, {"violations", json::array()}};
  for (const auto& v : report.violations) {
    json e = {{"kind", to_string(v.kind)}, {"message", v.message}};
    if (v.annotation_id) e["annotation_id"] = *v.annotation_id;
    out["violations"].push_back(e);
  }
  std::cout << out.dump(2) << "\n";
  return report.ok() ? kOk : kValidation;
}

int run_overlay(const Globals& g, const std::string& image_path, const std::string& coco_path,
                const std::string& out_path, int image_id, const std::string& heatmap_path) {
  const AppConfig cfg = g.load();
  const ColorImage img = read_color_png(image_path);
  const CocoDocument doc = load_coco(coco_path);
  if (image_id < 0) {
    for (const auto& im : doc.images)
      if (image_path.size() >= im.file_name.size() &&
          image_path.compare(image_path.size() - im.file_name.size(), im.file_name.size(), im.file_name) == 0)
        image_id = im.id;
    if (image_id < 0 && doc.images.size() == 1) image_id = doc.images.front().id;
    if (image_id < 0) throw InvalidInput("cannot tell which COCO image '" + image_path + "' is; pass --image-id");
  }
  const std::vector<Annotation> all = coco_to_annotations(doc);
  std::vector<Annotation> selected;
  for (std::size_t i = 0; i < all.size(); ++i)
    if (doc.annotations[i].image_id == image_id) selected.push_back(all[i]);
  std::optional<Heatmap> hm;
  if (!heatmap_path.empty()) hm = read_heatmap(heatmap_path);
  write_color_png(render_overlay(img, selected, cfg.classes, hm ? &*hm : nullptr), out_path);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"glasslabel: automatic labels for transparent glasses"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  std::uint64_t seed = 0;
  app.add_option("--config", g.config_path, "JSON configuration file")->check(CLI::ExistingFile);
  auto* seed_opt = app.add_option("--seed", seed, "RNG seed for plane fitting");
  app.add_option("--plugin-verifier", g.plugin_verifier, "command of an external verifier plugin");
  app.add_option("--plugin-segmenter", g.plugin_segmenter, "command of an external segmenter plugin");
  app.add_flag("--strict", g.strict, "drop candidates whose verifier failed and exit 3 on plugin errors");

  std::string scene_dir, out, report, coco, rig, source, target, proposals, png, corr, camera, image, heatmap;
  int annotation_id = 0, image_id = -1;
  bool fix_intrinsics = false;

  auto* label = app.add_subcommand("label", "label a scene directory into COCO");
  label->add_option("scene", scene_dir)->required()->check(CLI::ExistingDirectory);
  label->add_option("-o,--output", out, "COCO output file")->required();
  label->add_option("--report", report, "JSON report of missing files and dropped candidates");

  auto* project = app.add_subcommand("project", "transfer annotations into another camera");
  project->add_option("coco", coco)->required()->check(CLI::ExistingFile);
  project->add_option("--rig", rig)->required()->check(CLI::ExistingFile);
  project->add_option("--source", source, "camera whose annotations are moved (default: first image's camera)");
  project->add_option("--target", target, "target camera name")->required();
  project->add_option("-o,--output", out)->required();

  auto* hm = app.add_subcommand("heatmap", "render a base-point heatmap from proposals");
  hm->add_option("proposals", proposals)->required()->check(CLI::ExistingFile);
  hm->add_option("-o,--output", out, "heatmap container")->required();
  hm->add_option("--png", png, "normalized PNG preview");

  auto* pour = app.add_subcommand("pour-plan", "pouring target for one annotation");
  pour->add_option("coco", coco)->required()->check(CLI::ExistingFile);
  pour->add_option("--annotation-id", annotation_id)->required();
  pour->add_option("--rig", rig)->required()->check(CLI::ExistingFile);

  auto* calib = app.add_subcommand("calibrate", "refine one rig camera from 2D-3D correspondences");
  calib->add_option("correspondences", corr)->required()->check(CLI::ExistingFile);
  calib->add_option("--rig", rig)->required()->check(CLI::ExistingFile);
  calib->add_option("--camera", camera)->required();
  calib->add_flag("--fix-intrinsics", fix_intrinsics, "refine the pose only");
  calib->add_option("-o,--output", out, "updated rig file");

  auto* validate = app.add_subcommand("validate", "check a COCO file");
  validate->add_option("coco", coco)->required();

  auto* overlay = app.add_subcommand("overlay", "draw annotations over an image");
  overlay->add_option("image", image)->required()->check(CLI::ExistingFile);
  overlay->add_option("coco", coco)->required()->check(CLI::ExistingFile);
  overlay->add_option("-o,--output", out)->required();
  overlay->add_option("--image-id", image_id);
  overlay->add_option("--heatmap", heatmap)->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInput;
  }
  if (seed_opt->count()) g.seed = seed;

  try {
    if (label->parsed()) return run_label(g, scene_dir, out, report);
    if (project->parsed()) return run_project(g, coco, rig, source, target, out);
    if (hm->parsed()) return run_heatmap(g, proposals, out, png);
    if (pour->parsed()) return run_pour_plan(g, coco, annotation_id, rig);
    if (calib->parsed()) return run_calibrate(corr, rig, camera, fix_intrinsics, out);
    if (validate->parsed()) return run_validate(coco);
    if (overlay->parsed()) return run_overlay(g, image, coco, out, image_id, heatmap);
  } catch (const StageError& e) {
    std::cerr << "plugin error: " << e.what() << "\n";
    return kPlugin;
  } catch (const ParseError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kInput;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kValidation;
  } catch (const Error& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kInput;
  }
  return kInput;
}
