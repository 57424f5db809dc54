#include "glasslabel/pouring.hpp"

#include <cmath>

#include "glasslabel/errors.hpp"

namespace glasslabel {

void Workspace::validate() const {
  if (!(x_max > x_min) || !(y_max > y_min) || !(h_max > h_min))
    throw InvalidInput("workspace bounds are degenerate");
}

Vec2 bbox_bottom_center(const Bbox& bbox) { return {bbox.x + (bbox.w - 1.0) / 2.0, bbox.y + bbox.h - 0.5}; }

Vec3 glass_base_from_bbox(const Bbox& bbox, const CameraProfile& cam, const Plane& table) {
  try {
    return cast_ray_to_plane(bbox_bottom_center(bbox), cam, table);
  } catch (const BehindCamera&) {
    // above the horizon: the ray only meets the table behind the camera
    throw NoIntersection("bottom edge of the box does not reach the table in front of camera '" + cam.name + "'");
  }
}

ScalingFactors scaling_factors(double x, double y, double h, const Workspace& ws) {
  ws.validate();
  ScalingFactors s;
  s.epsilon = (x - ws.x_min) / (ws.x_max - ws.x_min);
  s.gamma = (std::abs(y) - ws.y_min) / (ws.y_max - ws.y_min);
  s.tau = (h - ws.h_min) / (ws.h_max - ws.h_min);
  auto out = [](double f) { return f < 0.0 || f > 1.0; };
  s.outside_workspace = out(s.epsilon) || out(s.gamma) || out(s.tau);
  return s;
}

PouringOffsets pouring_offsets(double epsilon, double gamma, double tau, const PouringConfig& cfg) {
  return {epsilon * cfg.p_x_min + (epsilon * tau) * cfg.p_x_max, gamma * cfg.p_y_min + (gamma * tau) * cfg.p_y_max};
}

PouringPlan build_pouring_plan(const Annotation& annotation, const GlassClassSpec& cls, const CameraProfile& cam,
                               const Plane& table, const PouringConfig& cfg) {
  if (annotation.class_id != cls.id)
    throw InvalidInput("annotation class " + std::to_string(annotation.class_id) + " does not match class " +
                       std::to_string(cls.id));
  PouringPlan plan;
  plan.base = glass_base_from_bbox(annotation.bbox, cam, table);

  // The bottom-center pixel sees the camera-facing hull; push it away from
  // the camera, along the table, onto the glass axis.
  const Vec3 n = table.unit_normal();
  const Vec3 cam_on_table = project_point_to_plane(cam.center_world(), table).point;
  Vec3 inward = plan.base - cam_on_table;
  inward -= inward.dot(n) * n;
  if (inward.norm() > 1e-12) inward.normalize();
  auto it = cfg.hull_offsets.find(cls.id);
  plan.hull_offset = it != cfg.hull_offsets.end() ? it->second : cls.diameter / 2.0;
  plan.glass_axis = plan.base + plan.hull_offset * inward;

  plan.scaling = scaling_factors(plan.glass_axis.x(), plan.glass_axis.y(), cls.height, cfg.workspace);
  plan.offsets = pouring_offsets(plan.scaling.epsilon, plan.scaling.gamma, plan.scaling.tau, cfg);
  plan.target = plan.glass_axis + Vec3(plan.offsets.p_x, plan.offsets.p_y, 0.0) + cls.height * n;
  return plan;
}

}  // namespace glasslabel
