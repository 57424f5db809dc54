#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "glasslabel/errors.hpp"
#include "glasslabel/imageio.hpp"
#include "glasslabel/scene.hpp"
#include "synthetic_scene.hpp"

using namespace glasslabel;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// path -> (contents, mtime)
std::map<std::string, std::pair<std::string, fs::file_time_type>> snapshot(const fs::path& root) {
  std::map<std::string, std::pair<std::string, fs::file_time_type>> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out[e.path().string()] = {slurp(e.path()), fs::last_write_time(e.path())};
  return out;
}

bool contains(const std::vector<std::string>& v, const std::string& s) {
  return std::find(v.begin(), v.end(), s) != v.end();
}

}  // namespace

TEST_CASE("scene file naming") {
  CHECK(color_file(Pass::Clean, "left_eye", 3) == "clean/left_eye/03.png");
  CHECK(depth_file(Pass::Capped, "head_realsense", 24) == "capped/head_realsense/24.depth.png");
  CHECK(to_string(Pass::Chalk) == "chalk");
  int frames = 0;
  for (const auto& s : default_camera_layout()) frames += s.poses;
  CHECK(frames == kFramesPerCompleteScene);
  CHECK(kFramesPerCompleteScene == 2 + 25 * 3);
}

TEST_CASE("complete synthetic scene loads all 77 frames without touching files") {
  TempDir dir("scene_unit_full");
  synth::write_scene_directory(synth::four_glass_scene(), dir.path.string(), 0.1);
  const auto before = snapshot(dir.path);

  const SceneCapture s = load_scene(dir.path.string());
  CHECK(s.scene_id == "unit_full");
  CHECK(s.frames.size() == 77);
  CHECK(s.missing.empty());
  CHECK(s.errors.empty());
  CHECK(s.absent_passes.empty());
  CHECK(s.complete());
  REQUIRE(s.rig);
  CHECK(s.rig->cameras.size() == 5);

  const SceneFrame* f = s.find("static_right", 0);
  REQUIRE(f);
  CHECK(f->passes.size() == 3);
  CHECK(f->passes.at(Pass::Capped).depth.has_value());
  const SceneFrame* eye = s.find("left_eye", 24);
  REQUIRE(eye);
  CHECK_FALSE(eye->passes.at(Pass::Clean).depth.has_value());
  CHECK(eye->frame_id() == "24");
  CHECK(s.find("left_eye", 25) == nullptr);

  const auto after = snapshot(dir.path);
  CHECK(before == after);
}

TEST_CASE("scene without the chalk pass is partial") {
  TempDir dir("scene_unit_nochalk");
  synth::write_scene_directory(synth::four_glass_scene(), dir.path.string(), 0.1, false);
  const SceneCapture s = load_scene(dir.path.string());
  CHECK(s.frames.size() == 77);
  CHECK(s.absent_passes == std::vector<std::string>{"chalk"});
  CHECK_FALSE(s.complete());
  CHECK(contains(s.missing, "chalk/head_realsense/00.depth.png"));
  for (const auto& m : s.missing) CHECK(m.rfind("chalk/", 0) == 0);
}

TEST_CASE("empty directory yields a full missing report") {
  TempDir dir("scene_unit_empty");
  const SceneCapture s = load_scene(dir.path.string());
  CHECK(s.frames.empty());
  CHECK_FALSE(s.rig);
  CHECK(s.absent_passes.size() == 3);
  // per pass: 77 color files + depth for head_realsense (25) and two static cameras
  CHECK(s.missing.size() == 1 + 3 * (77 + 25 + 2));
  CHECK(contains(s.missing, "rig.json"));
  CHECK(contains(s.missing, "clean/static_left/00.depth.png"));
  CHECK_FALSE(contains(s.missing, "clean/left_eye/00.depth.png"));
  CHECK_THROWS_AS(label_scene(s, AppConfig{}, Ports{}), InvalidInput);
}

TEST_CASE("missing directory is an input error") {
  CHECK_THROWS_AS(load_scene("/nonexistent/scene_x"), InvalidInput);
}

TEST_CASE("bad files are reported per file") {
  TempDir dir("scene_unit_bad");
  synth::write_scene_directory(synth::four_glass_scene(), dir.path.string(), 0.1);
  // 8-bit color where 16-bit depth is expected
  const fs::path depth = dir.path / "capped/static_left/00.depth.png";
  ColorImage img(8, 8);
  write_color_png(img, depth.string());
  std::ofstream(dir.path / "clean/left_eye/05.png") << "not a png";

  const SceneCapture s = load_scene(dir.path.string());
  REQUIRE(s.errors.size() == 2);
  std::vector<std::string> paths{s.errors[0].path, s.errors[1].path};
  CHECK(contains(paths, "capped/static_left/00.depth.png"));
  CHECK(contains(paths, "clean/left_eye/05.png"));
  CHECK_FALSE(s.complete());
  CHECK(s.frames.size() == 77);  // other passes of those slots still load
}

TEST_CASE("png io round trips") {
  TempDir dir("glasslabel_unit_png");
  DepthFrame d;
  d.width = 5;
  d.height = 3;
  d.depth_mm = {0, 1, 2, 3, 65535, 1000, 1200, 1300, 1400, 1500, 7, 8, 9, 10, 11};
  write_depth_png(d, (dir.path / "d.png").string());
  const PngHeader h = read_png_header((dir.path / "d.png").string());
  CHECK(h.width == 5);
  CHECK(h.height == 3);
  CHECK(h.bit_depth == 16);
  CHECK(h.color_type == 0);
  CHECK(read_depth_png((dir.path / "d.png").string()).depth_mm == d.depth_mm);

  ColorImage c(4, 2);
  for (std::size_t i = 0; i < c.rgb.size(); ++i) c.rgb[i] = static_cast<std::uint8_t>(i * 11);
  write_color_png(c, (dir.path / "c.png").string());
  CHECK(read_png_header((dir.path / "c.png").string()).color_type == 2);
  CHECK(read_color_png((dir.path / "c.png").string()).rgb == c.rgb);

  CHECK_THROWS_AS(read_depth_png((dir.path / "c.png").string()), ParseError);
  std::ofstream(dir.path / "x.png") << "garbage";
  CHECK_THROWS_AS(read_png_header((dir.path / "x.png").string()), ParseError);
  CHECK_THROWS_AS(read_color_png((dir.path / "missing.png").string()), ParseError);
}

TEST_CASE("label_scene labels the depth cameras") {
  TempDir dir("scene_unit_label");
  synth::write_scene_directory(synth::four_glass_scene(), dir.path.string(), 0.5, false);
  const SceneCapture s = load_scene(dir.path.string());
  const SceneLabelOutput out = label_scene(s, AppConfig{}, Ports{});
  REQUIRE(out.table);
  int glasses = 0;
  for (const auto& a : out.annotations) {
    CHECK((a.camera == "head_realsense" || a.camera == "static_left" || a.camera == "static_right"));
    CHECK(a.scene_id == "unit_label");
    if (a.class_id != kKeypointCategoryId) ++glasses;
  }
  // every glass is visible from the head camera in all 25 poses
  CHECK(glasses >= 4 * 25);
  CHECK(out.counts.mask_filter == static_cast<std::size_t>(glasses));
}
