#include "glasslabel/coco.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include <unistd.h>

#include "glasslabel/errors.hpp"
#include "glasslabel/imageio.hpp"

namespace fs = std::filesystem;

namespace glasslabel {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string format_float(double v) {
  if (!std::isfinite(v)) throw InvalidInput("cannot serialize a non-finite number");
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  std::string s(buf);
  if (s == "-0.000000") s = "0.000000";
  return s;
}

bool is_scalar(const ordered_json& j) { return !j.is_object() && !j.is_array(); }

void emit(const ordered_json& j, std::string& out, int indent) {
  const std::string pad(indent + 2, ' ');
  if (j.is_object()) {
    if (j.empty()) {
      out += "{}";
      return;
    }
    out += "{\n";
    bool first = true;
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (!first) out += ",\n";
      first = false;
      out += pad + ordered_json(it.key()).dump() + ": ";
      emit(it.value(), out, indent + 2);
    }
    out += "\n" + std::string(indent, ' ') + "}";
  } else if (j.is_array()) {
    if (j.empty()) {
      out += "[]";
      return;
    }
    if (std::all_of(j.begin(), j.end(), is_scalar)) {
      out += "[";
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) out += ", ";
        emit(j[i], out, indent);
      }
      out += "]";
      return;
    }
    out += "[\n";
    for (std::size_t i = 0; i < j.size(); ++i) {
      if (i) out += ",\n";
      out += pad;
      emit(j[i], out, indent + 2);
    }
    out += "\n" + std::string(indent, ' ') + "]";
  } else if (j.is_number_float()) {
    out += format_float(j.get<double>());
  } else {
    out += j.dump();
  }
}

std::tuple<std::string, std::string, std::string> image_key(const std::string& scene, const std::string& camera,
                                                            const std::string& frame) {
  return {scene, camera, frame};
}

template <typename T>
T field(const json& j, const char* key, const char* where) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ParseError(std::string(where) + "." + key + ": " + e.what());
  }
}

}  // namespace

std::vector<CocoCategory> coco_categories(const std::vector<GlassClassSpec>& classes) {
  validate_classes(classes);
  std::vector<CocoCategory> cats;
  for (const auto& c : classes) cats.push_back({c.id, c.name, "glass"});
  std::sort(cats.begin(), cats.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  cats.push_back({kKeypointCategoryId, kKeypointCategoryName, "keypoint"});
  return cats;
}

std::vector<CocoImage> scene_image_index(const SceneCapture& scene) {
  std::vector<CocoImage> images;
  for (const auto& frame : scene.frames) {
    const RigCamera* rc = scene.rig ? scene.rig->find(frame.camera) : nullptr;
    if (!rc || !rc->has_depth) continue;
    auto clean = frame.passes.find(Pass::Clean);
    if (clean == frame.passes.end() || !clean->second.color) continue;
    CocoImage img;
    img.file_name = *clean->second.color;
    img.width = rc->profile.width;
    img.height = rc->profile.height;
    img.scene_id = scene.scene_id;
    img.camera = frame.camera;
    img.frame_id = frame.frame_id();
    images.push_back(img);
  }
  return images;
}

CocoDocument export_coco(const std::vector<Annotation>& annotations, std::vector<CocoImage> images,
                         const std::vector<GlassClassSpec>& classes) {
  CocoDocument doc;
  doc.categories = coco_categories(classes);

  std::sort(images.begin(), images.end(), [](const CocoImage& a, const CocoImage& b) {
    return image_key(a.scene_id, a.camera, a.frame_id) < image_key(b.scene_id, b.camera, b.frame_id);
  });
  std::map<std::tuple<std::string, std::string, std::string>, int> index;
  for (std::size_t i = 0; i < images.size(); ++i) {
    images[i].id = static_cast<int>(i) + 1;
    if (!index.emplace(image_key(images[i].scene_id, images[i].camera, images[i].frame_id), images[i].id).second)
      throw InvalidInput("duplicate image " + images[i].file_name);
  }
  doc.images = std::move(images);

  std::set<int> category_ids;
  for (const auto& c : doc.categories) category_ids.insert(c.id);

  std::vector<std::size_t> offenders;
  std::vector<std::pair<int, std::size_t>> order;
  for (std::size_t i = 0; i < annotations.size(); ++i) {
    const Annotation& a = annotations[i];
    auto it = index.find(image_key(a.scene_id, a.camera, a.frame_id));
    if (it == index.end() || !category_ids.count(a.class_id)) {
      offenders.push_back(i);
      continue;
    }
    order.emplace_back(it->second, i);
  }
  if (!offenders.empty()) {
    std::ostringstream msg;
    msg << offenders.size() << " annotation(s) reference unknown images or categories:";
    for (std::size_t i : offenders) msg << ' ' << i;
    throw DanglingReferences(msg.str(), offenders);
  }
  std::stable_sort(order.begin(), order.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

  int next_id = 1;
  for (const auto& [image_id, i] : order) {
    const Annotation& a = annotations[i];
    CocoAnnotation c;
    c.id = next_id++;
    c.image_id = image_id;
    c.category_id = a.class_id;
    c.bbox = a.bbox;
    c.score = a.score;
    c.clipped = a.clipped;
    c.base_point = a.base_pixel;
    if (a.mask) {
      c.segmentation = encode_rle(*a.mask);
      c.area = static_cast<double>(a.mask->count());
    } else {
      c.area = a.bbox.area();
    }
    doc.annotations.push_back(std::move(c));
  }
  return doc;
}

std::string serialize_coco(const CocoDocument& doc) {
  ordered_json j;
  j["info"] = {{"description", doc.description}, {"version", doc.version}};
  j["licenses"] = ordered_json::array();
  j["images"] = ordered_json::array();
  for (const auto& img : doc.images) {
    ordered_json o;
    o["id"] = img.id;
    o["file_name"] = img.file_name;
    o["width"] = img.width;
    o["height"] = img.height;
    o["scene_id"] = img.scene_id;
    o["camera"] = img.camera;
    o["frame_id"] = img.frame_id;
    j["images"].push_back(o);
  }
  j["categories"] = ordered_json::array();
  for (const auto& c : doc.categories)
    j["categories"].push_back(ordered_json{{"id", c.id}, {"name", c.name}, {"supercategory", c.supercategory}});
  j["annotations"] = ordered_json::array();
  for (const auto& a : doc.annotations) {
    ordered_json o;
    o["id"] = a.id;
    o["image_id"] = a.image_id;
    o["category_id"] = a.category_id;
    o["bbox"] = {static_cast<double>(a.bbox.x), static_cast<double>(a.bbox.y), static_cast<double>(a.bbox.w),
                 static_cast<double>(a.bbox.h)};
    o["area"] = static_cast<double>(a.area);
    o["iscrowd"] = 0;
    o["score"] = static_cast<double>(a.score);
    if (a.segmentation)
      o["segmentation"] = {{"size", {a.segmentation->height, a.segmentation->width}},
                           {"counts", a.segmentation->counts}};
    if (a.base_point) o["base_point"] = {a.base_point->x(), a.base_point->y()};
    o["clipped"] = a.clipped;
    j["annotations"].push_back(o);
  }
  std::string out;
  emit(j, out, 0);
  out += "\n";
  return out;
}

void write_coco(const CocoDocument& doc, const std::string& path) {
  static std::atomic<unsigned> counter{0};
  const std::string text = serialize_coco(doc);
  const fs::path target(path);
  const fs::path tmp = target.string() + ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter++);
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw InvalidInput("cannot write '" + tmp.string() + "'");
    out << text;
    out.flush();
    if (!out) throw InvalidInput("short write to '" + tmp.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp);
    throw InvalidInput("cannot move '" + tmp.string() + "' to '" + path + "': " + ec.message());
  }
}

CocoDocument parse_coco(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("coco: ") + e.what());
  }
  if (!j.is_object()) throw ParseError("coco: top level must be an object");
  CocoDocument doc;
  if (j.contains("info")) {
    const json& info = j.at("info");
    if (info.contains("description")) doc.description = field<std::string>(info, "description", "info");
    if (info.contains("version")) doc.version = field<std::string>(info, "version", "info");
  }
  for (const auto& o : j.value("images", json::array())) {
    CocoImage img;
    img.id = field<int>(o, "id", "image");
    img.file_name = field<std::string>(o, "file_name", "image");
    img.width = field<int>(o, "width", "image");
    img.height = field<int>(o, "height", "image");
    img.scene_id = o.value("scene_id", "");
    img.camera = o.value("camera", "");
    img.frame_id = o.value("frame_id", "");
    doc.images.push_back(img);
  }
  for (const auto& o : j.value("categories", json::array()))
    doc.categories.push_back(
        {field<int>(o, "id", "category"), field<std::string>(o, "name", "category"), o.value("supercategory", "")});
  for (const auto& o : j.value("annotations", json::array())) {
    CocoAnnotation a;
    a.id = field<int>(o, "id", "annotation");
    a.image_id = field<int>(o, "image_id", "annotation");
    a.category_id = field<int>(o, "category_id", "annotation");
    const auto bbox = field<std::vector<double>>(o, "bbox", "annotation");
    if (bbox.size() != 4) throw ParseError("annotation.bbox: expected 4 numbers");
    a.bbox = {bbox[0], bbox[1], bbox[2], bbox[3]};
    a.area = field<double>(o, "area", "annotation");
    a.score = o.contains("score") ? field<double>(o, "score", "annotation") : 1.0;
    if (o.contains("segmentation")) {
      const json& s = o.at("segmentation");
      const auto size = field<std::vector<int>>(s, "size", "segmentation");
      if (size.size() != 2) throw ParseError("segmentation.size: expected [h, w]");
      RunLength rle;
      rle.height = size[0];
      rle.width = size[1];
      rle.counts = field<std::vector<std::uint32_t>>(s, "counts", "segmentation");
      a.segmentation = rle;
    }
    if (o.contains("base_point")) {
      const auto bp = field<std::vector<double>>(o, "base_point", "annotation");
      if (bp.size() != 2) throw ParseError("annotation.base_point: expected [u, v]");
      a.base_point = Vec2(bp[0], bp[1]);
    }
    a.clipped = o.contains("clipped") ? field<bool>(o, "clipped", "annotation") : false;
    doc.annotations.push_back(std::move(a));
  }
  return doc;
}

CocoDocument load_coco(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_coco(ss.str());
}

std::vector<Annotation> coco_to_annotations(const CocoDocument& doc) {
  std::map<int, const CocoImage*> images;
  for (const auto& img : doc.images) images[img.id] = &img;
  std::vector<Annotation> out;
  for (const auto& c : doc.annotations) {
    auto it = images.find(c.image_id);
    if (it == images.end()) throw InvalidInput("annotation " + std::to_string(c.id) + " references no image");
    Annotation a;
    a.class_id = c.category_id;
    a.bbox = c.bbox;
    a.score = c.score;
    a.camera = it->second->camera;
    a.scene_id = it->second->scene_id;
    a.frame_id = it->second->frame_id;
    a.base_pixel = c.base_point;
    a.clipped = c.clipped;
    if (c.segmentation) a.mask = decode_rle(*c.segmentation);
    out.push_back(std::move(a));
  }
  return out;
}

std::string to_string(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::MissingField: return "missing_field";
    case ViolationKind::DuplicateId: return "duplicate_id";
    case ViolationKind::DanglingImage: return "dangling_image";
    case ViolationKind::UndeclaredCategory: return "undeclared_category";
    case ViolationKind::NonPositiveBbox: return "non_positive_bbox";
    case ViolationKind::MaskSizeMismatch: return "mask_size_mismatch";
    case ViolationKind::RleCountMismatch: return "rle_count_mismatch";
  }
  return "?";
}

bool ValidationReport::has(ViolationKind kind) const {
  return std::any_of(violations.begin(), violations.end(), [&](const Violation& v) { return v.kind == kind; });
}

ValidationReport validate_coco(const json& doc) {
  ValidationReport report;
  auto add = [&](ViolationKind kind, std::optional<int> ann, std::string msg) {
    report.violations.push_back({kind, ann, std::move(msg)});
  };
  if (!doc.is_object()) {
    add(ViolationKind::MissingField, std::nullopt, "top level is not an object");
    return report;
  }
  for (const char* key : {"images", "annotations", "categories"})
    if (!doc.contains(key) || !doc.at(key).is_array())
      add(ViolationKind::MissingField, std::nullopt, std::string("'") + key + "' array missing");
  if (!report.ok()) return report;

  auto int_field = [](const json& o, const char* key) -> std::optional<long long> {
    if (!o.is_object() || !o.contains(key) || !o.at(key).is_number_integer()) return std::nullopt;
    return o.at(key).get<long long>();
  };

  std::map<long long, std::pair<long long, long long>> image_sizes;  // id -> (h, w)
  for (const auto& img : doc.at("images")) {
    auto id = int_field(img, "id");
    auto w = int_field(img, "width");
    auto h = int_field(img, "height");
    if (!id || !w || !h) {
      add(ViolationKind::MissingField, std::nullopt, "image lacks integer id/width/height");
      continue;
    }
    if (!image_sizes.emplace(*id, std::make_pair(*h, *w)).second)
      add(ViolationKind::DuplicateId, std::nullopt, "image id " + std::to_string(*id) + " repeated");
  }
  std::set<long long> categories;
  for (const auto& cat : doc.at("categories")) {
    auto id = int_field(cat, "id");
    if (!id || !cat.contains("name")) {
      add(ViolationKind::MissingField, std::nullopt, "category lacks id/name");
      continue;
    }
    if (!categories.insert(*id).second)
      add(ViolationKind::DuplicateId, std::nullopt, "category id " + std::to_string(*id) + " repeated");
  }

  std::set<long long> ann_ids;
  for (const auto& ann : doc.at("annotations")) {
    auto id = int_field(ann, "id");
    auto image_id = int_field(ann, "image_id");
    auto category_id = int_field(ann, "category_id");
    if (!id) {
      add(ViolationKind::MissingField, std::nullopt, "annotation without integer id");
      continue;
    }
    const int aid = static_cast<int>(*id);
    const std::string tag = "annotation " + std::to_string(aid);
    if (!ann_ids.insert(*id).second) add(ViolationKind::DuplicateId, aid, tag + ": id repeated");
    if (!image_id || !category_id) {
      add(ViolationKind::MissingField, aid, tag + ": image_id/category_id missing");
      continue;
    }
    auto img = image_sizes.find(*image_id);
    if (img == image_sizes.end())
      add(ViolationKind::DanglingImage, aid, tag + ": image " + std::to_string(*image_id) + " does not exist");
    if (!categories.count(*category_id))
      add(ViolationKind::UndeclaredCategory, aid,
          tag + ": category " + std::to_string(*category_id) + " is not declared");

    const json* bbox = ann.contains("bbox") ? &ann.at("bbox") : nullptr;
    if (!bbox || !bbox->is_array() || bbox->size() != 4 ||
        !std::all_of(bbox->begin(), bbox->end(), [](const json& v) { return v.is_number(); })) {
      add(ViolationKind::MissingField, aid, tag + ": bbox must be 4 numbers");
    } else if (!((*bbox)[2].get<double>() > 0.0) || !((*bbox)[3].get<double>() > 0.0)) {
      add(ViolationKind::NonPositiveBbox, aid, tag + ": bbox width and height must be positive");
    }

    if (ann.contains("segmentation")) {
      const json& seg = ann.at("segmentation");
      if (!seg.is_object() || !seg.contains("size") || !seg.contains("counts") || !seg.at("size").is_array() ||
          seg.at("size").size() != 2 || !seg.at("counts").is_array()) {
        add(ViolationKind::MissingField, aid, tag + ": segmentation needs size [h, w] and counts");
        continue;
      }
      const long long h = seg.at("size")[0].get<long long>();
      const long long w = seg.at("size")[1].get<long long>();
      if (img != image_sizes.end() && (h != img->second.first || w != img->second.second))
        add(ViolationKind::MaskSizeMismatch, aid,
            tag + ": mask is " + std::to_string(w) + "x" + std::to_string(h) + ", image is " +
                std::to_string(img->second.second) + "x" + std::to_string(img->second.first));
      long long total = 0;
      bool counts_ok = true;
      for (const auto& c : seg.at("counts")) {
        if (!c.is_number_integer() || c.get<long long>() < 0) counts_ok = false;
        else total += c.get<long long>();
      }
      if (!counts_ok || total != h * w)
        add(ViolationKind::RleCountMismatch, aid,
            tag + ": run lengths sum to " + std::to_string(total) + ", expected " + std::to_string(h * w));
    }
  }
  return report;
}

ValidationReport validate_coco_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError("'" + path + "': " + e.what());
  }
  return validate_coco(j);
}

}  // namespace glasslabel
