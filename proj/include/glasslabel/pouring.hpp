#pragma once

#include <map>
#include <string>

#include "glasslabel/camera.hpp"
#include "glasslabel/pipeline.hpp"

namespace glasslabel {

// Pouring workspace in the robot/world frame. x is the reach direction, y the
// lateral axis; y_min/y_max bound |y|. Heights are the smallest and highest
// glass class.
struct Workspace {
  double x_min = 0.30;
  double x_max = 0.65;  // 35 cm deep
  double y_min = 0.0;
  double y_max = 0.275;  // 55 cm wide, symmetric about y = 0
  double h_min = 0.055;
  double h_max = 0.230;

  void validate() const;
};

struct PouringConfig {
  Workspace workspace;
  double p_x_min = 0.020;
  double p_y_min = 0.015;
  double p_x_max = 0.030;
  double p_y_max = 0.020;
  // Per-class hull offset o_i (m) keyed by class id; missing -> diameter / 2.
  std::map<int, double> hull_offsets;
};

struct ScalingFactors {
  double epsilon = 0.0;
  double gamma = 0.0;
  double tau = 0.0;
  bool outside_workspace = false;
};

struct PouringOffsets {
  double p_x = 0.0;
  double p_y = 0.0;
};

struct PouringPlan {
  Vec3 base = Vec3::Zero();        // bbox bottom-center on the table
  Vec3 glass_axis = Vec3::Zero();  // base shifted by the hull offset
  Vec3 target = Vec3::Zero();
  PouringOffsets offsets;
  ScalingFactors scaling;
  double hull_offset = 0.0;
};

// Center of the box's bottom edge, in pixel-center coordinates.
Vec2 bbox_bottom_center(const Bbox& bbox);

// Casts the bottom-center of the box onto the table. Throws NoIntersection
// when that ray does not hit the table in front of the camera.
Vec3 glass_base_from_bbox(const Bbox& bbox, const CameraProfile& cam, const Plane& table);

// epsilon = (x - x_min) / (x_max - x_min), gamma = (|y| - y_min) / (y_max - y_min),
// tau = (h - h_min) / (h_max - h_min). Not clamped; out-of-range inputs set
// outside_workspace.
ScalingFactors scaling_factors(double x, double y, double h, const Workspace& ws);

// p_x = eps * p_x_min + eps * tau * p_x_max, p_y analogous with gamma.
PouringOffsets pouring_offsets(double epsilon, double gamma, double tau, const PouringConfig& cfg);

PouringPlan build_pouring_plan(const Annotation& annotation, const GlassClassSpec& cls, const CameraProfile& cam,
                               const Plane& table, const PouringConfig& cfg);

}  // namespace glasslabel
