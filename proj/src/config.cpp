#include "glasslabel/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "glasslabel/errors.hpp"

namespace glasslabel {

using nlohmann::json;

namespace {

void check_keys(const json& j, const std::string& where, const std::set<std::string>& allowed) {
  if (!j.is_object()) throw ParseError(where + ": expected an object");
  for (const auto& [key, _] : j.items())
    if (!allowed.count(key)) throw ParseError(where + ": unknown key '" + key + "'");
}

template <typename T>
void read_opt(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("key '") + key + "': " + e.what());
  }
}

Mat3 mat3_from_json(const json& j) {
  if (!j.is_array() || j.size() != 9) throw ParseError("rotation must be 9 numbers in row-major order");
  Mat3 R;
  for (int i = 0; i < 9; ++i) R(i / 3, i % 3) = j[i].get<double>();
  return R;
}

json mat3_to_json(const Mat3& R) {
  json out = json::array();
  for (int i = 0; i < 9; ++i) out.push_back(R(i / 3, i % 3));
  return out;
}

Vec3 vec3_from_json(const json& j) {
  if (!j.is_array() || j.size() != 3) throw ParseError("translation must be 3 numbers");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

Interval interval_from_json(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 2) throw ParseError(std::string(what) + " must be [lo, hi]");
  return {j[0].get<double>(), j[1].get<double>()};
}

}  // namespace

const RigCamera* Rig::find(const std::string& name) const {
  for (const auto& c : cameras)
    if (c.profile.name == name) return &c;
  return nullptr;
}

CameraProfile Rig::camera(const std::string& name, int pose) const {
  const RigCamera* rc = find(name);
  if (!rc) throw InvalidInput("rig has no camera '" + name + "'");
  CameraProfile cam = rc->profile;
  auto it = rc->poses.find(pose);
  if (it != rc->poses.end()) {
    cam.R = it->second.R;
    cam.t = it->second.t;
  } else if (pose != 0) {
    throw InvalidInput("camera '" + name + "' has no pose " + std::to_string(pose));
  }
  return cam;
}

json camera_to_json(const CameraProfile& cam) {
  json j;
  j["name"] = cam.name;
  j["model"] = to_string(cam.model);
  j["fx"] = cam.fx;
  j["fy"] = cam.fy;
  j["cx"] = cam.cx;
  j["cy"] = cam.cy;
  j["dist"] = cam.dist;
  j["R"] = mat3_to_json(cam.R);
  j["t"] = {cam.t.x(), cam.t.y(), cam.t.z()};
  j["width"] = cam.width;
  j["height"] = cam.height;
  return j;
}

CameraProfile camera_from_json(const json& j) {
  check_keys(j, "camera", {"name", "model", "fx", "fy", "cx", "cy", "dist", "R", "t", "width", "height", "depth",
                           "poses"});
  CameraProfile cam;
  try {
    cam.name = j.at("name").get<std::string>();
    if (j.contains("model")) cam.model = distortion_model_from_string(j.at("model").get<std::string>());
    cam.fx = j.at("fx").get<double>();
    cam.fy = j.at("fy").get<double>();
    cam.cx = j.at("cx").get<double>();
    cam.cy = j.at("cy").get<double>();
    if (j.contains("dist")) {
      const auto& d = j.at("dist");
      if (!d.is_array() || d.size() > 5) throw ParseError("dist takes at most 5 coefficients");
      for (std::size_t i = 0; i < d.size(); ++i) cam.dist[i] = d[i].get<double>();
    }
    if (j.contains("R")) cam.R = mat3_from_json(j.at("R"));
    if (j.contains("t")) cam.t = vec3_from_json(j.at("t"));
    cam.width = j.at("width").get<int>();
    cam.height = j.at("height").get<int>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("camera: ") + e.what());
  } catch (const InvalidInput& e) {
    throw ParseError(std::string("camera: ") + e.what());
  }
  cam.validate();
  return cam;
}

json rig_to_json(const Rig& rig) {
  json j;
  j["cameras"] = json::array();
  for (const auto& rc : rig.cameras) {
    json c = camera_to_json(rc.profile);
    c["depth"] = rc.has_depth;
    if (!rc.poses.empty()) {
      c["poses"] = json::array();
      for (const auto& [index, pose] : rc.poses)
        c["poses"].push_back({{"index", index}, {"R", mat3_to_json(pose.R)}, {"t", {pose.t.x(), pose.t.y(), pose.t.z()}}});
    }
    j["cameras"].push_back(c);
  }
  if (rig.table) j["table"] = {rig.table->a, rig.table->b, rig.table->c, rig.table->d};
  return j;
}

Rig rig_from_json(const json& j) {
  check_keys(j, "rig", {"cameras", "table"});
  Rig rig;
  if (!j.contains("cameras") || !j.at("cameras").is_array()) throw ParseError("rig: 'cameras' array required");
  for (const auto& c : j.at("cameras")) {
    RigCamera rc;
    rc.profile = camera_from_json(c);
    if (rig.find(rc.profile.name)) throw ParseError("rig: duplicate camera '" + rc.profile.name + "'");
    read_opt(c, "depth", rc.has_depth);
    if (c.contains("poses")) {
      for (const auto& p : c.at("poses")) {
        check_keys(p, "pose", {"index", "R", "t"});
        Pose pose;
        try {
          pose.R = mat3_from_json(p.at("R"));
          pose.t = vec3_from_json(p.at("t"));
          rc.poses[p.at("index").get<int>()] = pose;
        } catch (const json::exception& e) {
          throw ParseError(std::string("pose: ") + e.what());
        }
      }
    }
    rig.cameras.push_back(std::move(rc));
  }
  if (j.contains("table")) {
    const auto& t = j.at("table");
    if (!t.is_array() || t.size() != 4) throw ParseError("rig: table must be [a, b, c, d]");
    Plane p{t[0].get<double>(), t[1].get<double>(), t[2].get<double>(), t[3].get<double>()};
    if (p.normal_norm() == 0.0) throw ParseError("rig: table normal is zero");
    rig.table = p.canonicalized();
  }
  return rig;
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError("'" + path + "': " + e.what());
  }
}

Rig load_rig(const std::string& path) { return rig_from_json(read_json_file(path)); }

void save_rig(const Rig& rig, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write '" + path + "'");
  out << rig_to_json(rig).dump(2) << "\n";
}

std::vector<Correspondence> parse_correspondences(const std::string& text) {
  std::vector<Correspondence> out;
  std::istringstream lines(text);
  std::string line;
  int lineno = 0;
  while (std::getline(lines, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    std::vector<double> v;
    double x;
    while (fields >> x) v.push_back(x);
    if (!fields.eof()) throw ParseError("line " + std::to_string(lineno) + ": not a number");
    if (v.empty()) continue;
    if (v.size() != 5) throw ParseError("line " + std::to_string(lineno) + ": expected 'u v X Y Z'");
    out.push_back({Vec2(v[0], v[1]), Vec3(v[2], v[3], v[4])});
  }
  return out;
}

std::vector<Correspondence> load_correspondences(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_correspondences(ss.str());
}

AppConfig config_from_json(const json& j) {
  check_keys(j, "config", {"classes", "label", "pouring", "heatmap", "plugin_timeout_s"});
  AppConfig cfg;
  try {
    if (j.contains("classes")) {
      cfg.classes.clear();
      for (const auto& c : j.at("classes")) {
        check_keys(c, "class", {"id", "name", "height", "diameter", "height_tolerance"});
        GlassClassSpec spec;
        spec.id = c.at("id").get<int>();
        spec.name = c.at("name").get<std::string>();
        spec.height = c.at("height").get<double>();
        spec.diameter = c.at("diameter").get<double>();
        if (c.contains("height_tolerance")) spec.height_tolerance = c.at("height_tolerance").get<double>();
        cfg.classes.push_back(spec);
      }
    }
    if (j.contains("label")) {
      const json& l = j.at("label");
      check_keys(l, "label", {"deviation_threshold", "ransac_threshold", "ransac_iterations", "cluster_eps",
                              "cluster_min_points", "height_tolerance", "color_gate", "verify_iou", "strict",
                              "width_factor", "max_samples", "cap_fraction", "keypoint_box_size",
                              "verifier_prompts"});
      LabelConfig& lc = cfg.label;
      read_opt(l, "deviation_threshold", lc.candidates.deviation_threshold);
      read_opt(l, "ransac_threshold", lc.ransac.inlier_threshold);
      read_opt(l, "ransac_iterations", lc.ransac.iterations);
      read_opt(l, "cluster_eps", lc.candidates.cluster.eps);
      read_opt(l, "cluster_min_points", lc.candidates.cluster.min_points);
      read_opt(l, "height_tolerance", lc.height_tolerance);
      read_opt(l, "verify_iou", lc.verify_iou);
      read_opt(l, "strict", lc.strict);
      read_opt(l, "width_factor", lc.width_factor);
      read_opt(l, "max_samples", lc.max_samples);
      read_opt(l, "cap_fraction", lc.cap_fraction);
      read_opt(l, "keypoint_box_size", lc.keypoint_box_size);
      read_opt(l, "verifier_prompts", lc.verifier_prompts);
      if (l.contains("color_gate")) {
        const json& g = l.at("color_gate");
        check_keys(g, "color_gate", {"L", "a", "b", "min_fraction"});
        if (g.contains("L")) lc.color_gate.L = interval_from_json(g.at("L"), "L");
        if (g.contains("a")) lc.color_gate.a = interval_from_json(g.at("a"), "a");
        if (g.contains("b")) lc.color_gate.b = interval_from_json(g.at("b"), "b");
        read_opt(g, "min_fraction", lc.color_gate.min_fraction);
      }
    }
    if (j.contains("pouring")) {
      const json& p = j.at("pouring");
      check_keys(p, "pouring", {"workspace", "p_x_min", "p_y_min", "p_x_max", "p_y_max", "hull_offsets"});
      PouringConfig& pc = cfg.pouring;
      if (p.contains("workspace")) {
        const json& w = p.at("workspace");
        check_keys(w, "workspace", {"x_min", "x_max", "y_min", "y_max", "h_min", "h_max"});
        read_opt(w, "x_min", pc.workspace.x_min);
        read_opt(w, "x_max", pc.workspace.x_max);
        read_opt(w, "y_min", pc.workspace.y_min);
        read_opt(w, "y_max", pc.workspace.y_max);
        read_opt(w, "h_min", pc.workspace.h_min);
        read_opt(w, "h_max", pc.workspace.h_max);
      }
      read_opt(p, "p_x_min", pc.p_x_min);
      read_opt(p, "p_y_min", pc.p_y_min);
      read_opt(p, "p_x_max", pc.p_x_max);
      read_opt(p, "p_y_max", pc.p_y_max);
      if (p.contains("hull_offsets"))
        for (const auto& [key, value] : p.at("hull_offsets").items()) pc.hull_offsets[std::stoi(key)] = value.get<double>();
    }
    if (j.contains("heatmap")) {
      const json& h = j.at("heatmap");
      check_keys(h, "heatmap", {"kernel_size", "sigma"});
      read_opt(h, "kernel_size", cfg.heatmap.kernel_size);
      read_opt(h, "sigma", cfg.heatmap.sigma);
    }
    read_opt(j, "plugin_timeout_s", cfg.plugin_timeout_s);
  } catch (const json::exception& e) {
    throw ParseError(std::string("config: ") + e.what());
  } catch (const std::invalid_argument&) {
    throw ParseError("config: hull_offsets keys must be class ids");
  }
  try {
    validate_classes(cfg.classes);
    cfg.label.color_gate.validate();
    cfg.pouring.workspace.validate();
  } catch (const InvalidInput& e) {
    throw ParseError(std::string("config: ") + e.what());
  }
  if (cfg.heatmap.kernel_size <= 0 || cfg.heatmap.kernel_size % 2 == 0 || !(cfg.heatmap.sigma > 0.0))
    throw ParseError("config: heatmap kernel_size must be odd and sigma positive");
  return cfg;
}

AppConfig load_config(const std::string& path) { return config_from_json(read_json_file(path)); }

}  // namespace glasslabel
