#pragma once

#include <array>
#include <string>
#include <vector>

#include "glasslabel/errors.hpp"
#include "glasslabel/geometry.hpp"

namespace glasslabel {

enum class DistortionModel { BrownConrady, FisheyeEquidistant };

std::string to_string(DistortionModel model);
DistortionModel distortion_model_from_string(const std::string& tag);

// Intrinsics, distortion and world->camera extrinsics of one sensor.
// Pixel coordinates have their origin at the center of the top-left pixel.
struct CameraProfile {
  std::string name;
  DistortionModel model = DistortionModel::BrownConrady;
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  // brown_conrady: k1 k2 p1 p2 k3; fisheye_equidistant: k1 k2 k3 k4 (5th unused)
  std::array<double, 5> dist{};
  Mat3 R = Mat3::Identity();
  Vec3 t = Vec3::Zero();
  int width = 0;
  int height = 0;

  Vec3 to_camera(const Vec3& p_world) const { return R * p_world + t; }
  Vec3 to_world(const Vec3& p_cam) const { return R.transpose() * (p_cam - t); }
  Vec3 center_world() const { return -(R.transpose() * t); }
  bool has_distortion() const;
  bool contains(const Vec2& pixel) const;

  // Throws InvalidInput when fx/fy/size are non-positive or R is not a proper
  // rotation (tolerance 1e-9).
  void validate() const;
};

// Normalized image coordinates -> distorted normalized coordinates.
Vec2 distort(const Vec2& normalized, const CameraProfile& cam);

// Projects a camera-frame point. Throws BehindCamera for z <= 0.
Vec2 project_camera_point(const Vec3& p_cam, const CameraProfile& cam);

// World point -> pixel through R, t, distortion and K.
Vec2 project(const Vec3& p_world, const CameraProfile& cam);

// Inverts the distortion for a pixel and returns the camera-frame ray
// direction (x, y, 1). Throws NumericError if the Newton solve stalls.
Vec3 undistort(const Vec2& pixel, const CameraProfile& cam);

// Intersects the back-projected ray of `pixel` with a world plane.
Vec3 cast_ray_to_plane(const Vec2& pixel, const CameraProfile& cam, const Plane& plane);

struct PixelTransfer {
  Vec2 pixel = Vec2::Zero();
  bool in_bounds = false;
};

// Casts a pixel of `from` onto the plane and re-projects it into `to`.
// Out-of-sensor results are returned unclamped with in_bounds = false.
PixelTransfer transfer_pixel(const Vec2& pixel, const CameraProfile& from, const CameraProfile& to,
                             const Plane& plane);

struct Correspondence {
  Vec2 pixel = Vec2::Zero();
  Vec3 world = Vec3::Zero();
};

double reprojection_rms(const CameraProfile& cam, const std::vector<Correspondence>& correspondences);

struct CalibrationOptions {
  bool fix_intrinsics = false;
  double initial_damping = 1e-3;
  double damping_up = 10.0;
  double damping_down = 0.1;
  int max_iterations = 200;
  double relative_tolerance = 1e-12;
};

struct CalibrationResult {
  CameraProfile camera;
  double rms = 0.0;
  int iterations = 0;
  // Cost (sum of squared residuals) after the initial evaluation and after
  // every accepted step.
  std::vector<double> accepted_costs;
};

// Thrown when LM runs out of iterations; carries the best estimate found.
class CalibrationDiverged : public NumericError {
 public:
  CalibrationDiverged(const std::string& what, CalibrationResult best)
      : NumericError(what), best_(std::move(best)) {}
  const CalibrationResult& best() const { return best_; }

 private:
  CalibrationResult best_;
};

// Levenberg-Marquardt refinement of a camera profile against 2D-3D
// correspondences. Rotation is updated on the manifold through an axis-angle
// increment and re-orthonormalized after each accepted step.
CalibrationResult calibrate(const std::vector<Correspondence>& correspondences, const CameraProfile& init,
                            const CalibrationOptions& options = {});

Mat3 rotation_from_axis_angle(const Vec3& omega);
// Nearest rotation matrix (SVD polar factor).
Mat3 orthonormalize(const Mat3& m);

}  // namespace glasslabel
