#pragma once

#include <optional>
#include <string>
#include <vector>

#include "glasslabel/basepoint.hpp"
#include "glasslabel/camera.hpp"
#include "glasslabel/color.hpp"
#include "glasslabel/geometry.hpp"
#include "glasslabel/image.hpp"
#include "glasslabel/ports.hpp"

namespace glasslabel {

struct GlassClassSpec {
  int id = 0;
  std::string name;
  double height = 0.0;    // m
  double diameter = 0.0;  // m
  std::optional<double> height_tolerance;  // overrides the global tolerance
};

// Category id reserved for base-point keypoint boxes.
constexpr int kKeypointCategoryId = 7;
inline const std::string kKeypointCategoryName = "keypoint";

// The six glass types of the capture setup, ids 1..6.
std::vector<GlassClassSpec> default_glass_classes();
void validate_classes(const std::vector<GlassClassSpec>& classes);
const GlassClassSpec* find_class(const std::vector<GlassClassSpec>& classes, int id);

struct Annotation {
  int class_id = 0;
  Bbox bbox;
  std::optional<Mask> mask;
  double score = 1.0;
  std::string camera;
  std::string scene_id;
  std::string frame_id;
  std::optional<Vec2> base_pixel;
  bool clipped = false;  // keypoint box reaches past the image border
};

struct ClusterCandidate {
  Cluster cluster;  // indices into the world cloud handed to extract_candidates
  double height = 0.0;
  std::optional<int> class_id;
  std::vector<Vec2> footprint_pixels;  // cap-top color samples
  bool color_ok = false;
  bool verifier_ok = false;
};

struct CandidateOptions {
  double deviation_threshold = 0.01;  // m above the table
  ClusterOptions cluster;
};

// Clusters the points lying more than deviation_threshold above the table and
// measures each cluster's height. Sorted by centroid x, then y.
std::vector<ClusterCandidate> extract_candidates(const PointCloud& world_cloud, const Plane& table,
                                                 const CandidateOptions& options);

// Closest class by height; nullopt if the best deviation exceeds the
// tolerance (per-class override first). Ties go to the smaller id.
std::optional<int> assign_class_by_height(double height, const std::vector<GlassClassSpec>& classes,
                                          double tolerance);

struct VerifierVerdict {
  bool accepted = false;
  double score = 0.0;  // best overlapping detection score
};

// Accepts when any detection overlaps the hint with IoU >= min_iou. Port
// failures propagate as StageError.
VerifierVerdict verify_with_detector(const PortRequest& request, VerifierPort& verifier, double min_iou);

// Prompts the segmenter with the in-image sample points. Throws InvalidInput
// when no sample lies inside the image.
Mask prompt_segmenter(PortRequest request, SegmenterPort& segmenter);

// Widest single-row extent of the mask (first to last set pixel, inclusive).
// Per-row so that tall glasses leaning in perspective are not penalized.
int mask_row_width(const Mask& mask);

// True when the mask width stays within width_factor times the class
// diameter projected at the base point's depth (inclusive).
bool filter_mask(const Mask& mask, const GlassClassSpec& cls, const CameraProfile& cam, const Vec3& base_point,
                 double width_factor);

// Greedy farthest-point subsampling seeded with the extreme points in u and v.
std::vector<Vec2> farthest_point_subsample(const std::vector<Vec2>& points, std::size_t count);

// Integer pixel bounds of the rasterized silhouette of an upright cylinder
// standing on the table at `base` (nullopt if entirely outside the image).
std::optional<Bbox> cylinder_bbox(const Vec3& base, const GlassClassSpec& cls, const CameraProfile& cam,
                                  const Plane& table);

struct LabelConfig {
  RansacOptions ransac;
  CandidateOptions candidates;
  double height_tolerance = 0.015;
  ColorGate color_gate;
  double verify_iou = 0.5;
  bool strict = false;
  double width_factor = 1.5;
  std::size_t max_samples = 64;
  double cap_fraction = 0.2;  // highest share of cluster points treated as cap
  int keypoint_box_size = kDefaultKeypointBoxSize;
  std::vector<std::string> verifier_prompts;  // empty: class names + "drink glass"
};

struct Ports {
  VerifierPort* verifier = nullptr;
  SegmenterPort* segmenter = nullptr;
};

struct FrameInput {
  std::string scene_id;
  std::string frame_id;
  DepthFrame capped_depth;
  ColorImage capped_color;
  std::string clean_image_path;  // image the annotations attach to
};

struct ReportEntry {
  int candidate = -1;
  std::string stage;
  std::string message;
};

struct StageCounts {
  std::size_t candidates = 0;
  std::size_t height = 0;
  std::size_t color = 0;
  std::size_t verifier = 0;
  std::size_t segmenter = 0;
  std::size_t mask_filter = 0;
};

struct FrameResult {
  std::vector<Annotation> annotations;  // glass classes
  std::vector<Annotation> keypoints;    // keypoint class, one per glass
  std::vector<ClusterCandidate> candidates;
  std::vector<ReportEntry> report;
  StageCounts counts;
  Plane table;
};

// Runs the whole cascade on one RGB-D frame. A candidate that fails a stage
// is dropped and reported; nothing short of bad frame input aborts the frame.
FrameResult label_frame(const FrameInput& input, const CameraProfile& cam, const std::optional<Plane>& table,
                        const std::vector<GlassClassSpec>& classes, const LabelConfig& config, const Ports& ports);

// Moves annotations into another camera through their base points: the base
// pixel is transferred over the table plane and the box is rebuilt from the
// class geometry. Masks are not carried over. Unreachable targets are
// dropped and listed in `report`.
std::vector<Annotation> project_annotations(const std::vector<Annotation>& annotations, const CameraProfile& from,
                                            const CameraProfile& to, const Plane& table,
                                            const std::vector<GlassClassSpec>& classes,
                                            std::vector<ReportEntry>* report = nullptr);

}  // namespace glasslabel
