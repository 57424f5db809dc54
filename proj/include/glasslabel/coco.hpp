#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "glasslabel/image.hpp"
#include "glasslabel/pipeline.hpp"
#include "glasslabel/scene.hpp"

namespace glasslabel {

struct CocoImage {
  int id = 0;
  std::string file_name;
  int width = 0;
  int height = 0;
  std::string scene_id;
  std::string camera;
  std::string frame_id;
};

struct CocoCategory {
  int id = 0;
  std::string name;
  std::string supercategory;
};

struct CocoAnnotation {
  int id = 0;
  int image_id = 0;
  int category_id = 0;
  Bbox bbox;
  double area = 0.0;
  double score = 1.0;
  std::optional<RunLength> segmentation;
  std::optional<Vec2> base_point;
  bool clipped = false;
};

struct CocoDocument {
  std::string description = "glasslabel annotations";
  std::string version = "1.0";
  std::vector<CocoImage> images;
  std::vector<CocoAnnotation> annotations;
  std::vector<CocoCategory> categories;
};

// Thrown by export_coco; offenders are indices into the input annotations.
class DanglingReferences : public InvalidInput {
 public:
  DanglingReferences(const std::string& what, std::vector<std::size_t> offenders)
      : InvalidInput(what), offenders_(std::move(offenders)) {}
  const std::vector<std::size_t>& offenders() const { return offenders_; }

 private:
  std::vector<std::size_t> offenders_;
};

// Glass classes sorted by id followed by the keypoint class.
std::vector<CocoCategory> coco_categories(const std::vector<GlassClassSpec>& classes);

// One image per clean color frame of a depth camera, in layout order.
std::vector<CocoImage> scene_image_index(const SceneCapture& scene);

// Images are renumbered 1..N in (scene, camera, frame) order; annotations are
// sorted by image id, stable in input order, and numbered 1..M.
CocoDocument export_coco(const std::vector<Annotation>& annotations, std::vector<CocoImage> images,
                         const std::vector<GlassClassSpec>& classes);

// Canonical text: fixed key order, two-space indent, floats with 6 decimals.
std::string serialize_coco(const CocoDocument& doc);
// Writes to a temporary file next to `path` and renames it into place.
void write_coco(const CocoDocument& doc, const std::string& path);

CocoDocument parse_coco(const std::string& text);
CocoDocument load_coco(const std::string& path);

// Annotations of a document turned back into pipeline form.
std::vector<Annotation> coco_to_annotations(const CocoDocument& doc);

enum class ViolationKind {
  MissingField,
  DuplicateId,
  DanglingImage,
  UndeclaredCategory,
  NonPositiveBbox,
  MaskSizeMismatch,
  RleCountMismatch,
};

std::string to_string(ViolationKind kind);

struct Violation {
  ViolationKind kind;
  std::optional<int> annotation_id;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
  bool has(ViolationKind kind) const;
};

ValidationReport validate_coco(const nlohmann::json& doc);
// Throws ParseError when the file is not valid JSON.
ValidationReport validate_coco_file(const std::string& path);

}  // namespace glasslabel
