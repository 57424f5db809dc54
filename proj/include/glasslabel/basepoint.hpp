#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "glasslabel/camera.hpp"
#include "glasslabel/image.hpp"

namespace glasslabel {

struct Annotation;

// Table-contact point of a glass: cap centroid dropped onto the table along
// the table normal, plus its image location.
struct BasePoint {
  Vec3 p = Vec3::Zero();       // cap centroid (world)
  Vec3 p_proj = Vec3::Zero();  // on the table (world)
  double d_proj = 0.0;         // signed cap height above the table
  Vec2 pixel = Vec2::Zero();
  Bbox keypoint_box;
};

constexpr int kDefaultKeypointBoxSize = 12;

BasePoint compute_base_point(const std::vector<Vec3>& cap_points, const Plane& table, const CameraProfile& cam,
                             int box_size = kDefaultKeypointBoxSize);

// Square box of side box_size centered on the rounded pixel; x = u - box_size/2
// (integer division).
Bbox keypoint_box(const Vec2& pixel, int box_size);

// Keypoint-class annotation for a base point. Boxes that reach past the image
// border are kept unclipped with `clipped` set. Throws InvalidInput if the
// pixel itself is outside the image.
Annotation to_keypoint_annotation(const BasePoint& bp, int box_size, int image_width, int image_height);

struct KeypointProposal {
  Vec2 center = Vec2::Zero();
  double score = 0.0;
};

struct Heatmap {
  int width = 0;
  int height = 0;
  std::vector<double> values;  // row-major

  Heatmap() = default;
  Heatmap(int w, int h) : width(w), height(h), values(static_cast<std::size_t>(w) * h, 0.0) {}
  double at(int u, int v) const { return values[static_cast<std::size_t>(v) * width + u]; }
  double max() const;
  Heatmap& operator+=(const Heatmap& other);
};

// G(x, y) = exp(-((x - xc)^2 + (y - yc)^2) / (2 sigma^2)) / (2 pi sigma^2)
double gaussian_kernel(double dx, double dy, double sigma);

// Sum of score-weighted k x k Gaussian windows. Every contribution is rounded
// to a multiple of 2^-36 before accumulation, so the sum is exact and does not
// depend on the order of the proposals.
Heatmap render_heatmap(const std::vector<KeypointProposal>& proposals, int width, int height, int k, double sigma);

struct ExtractedPoint {
  std::size_t box_index = 0;
  int u = 0;
  int v = 0;
  double value = 0.0;
};

// Per box: pixel of the largest heatmap value (ties -> smallest row, then
// column). Boxes whose maximum is zero produce nothing.
std::vector<ExtractedPoint> extract_base_points(const Heatmap& heatmap, const std::vector<Bbox>& boxes);

// Binary container: "GLHM", uint32 width, uint32 height (little endian),
// then width*height float32 values row-major.
void write_heatmap(const Heatmap& heatmap, const std::string& path);
Heatmap read_heatmap(const std::string& path);

}  // namespace glasslabel
