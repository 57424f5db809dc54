#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace glasslabel {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

struct CameraProfile;

enum class FrameKind { Camera, World };

// Coordinate frame a point cloud is expressed in. For camera frames `name`
// carries the camera identifier.
struct FrameTag {
  FrameKind kind = FrameKind::World;
  std::string name;
};

struct PointCloud {
  std::vector<Vec3> points;
  FrameTag frame;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

// Plane ax + by + cz + d = 0. Fitted planes are canonicalized to a unit
// normal with c >= 0 so that positive signed distance means "above".
struct Plane {
  double a = 0.0;
  double b = 0.0;
  double c = 1.0;
  double d = 0.0;

  Vec3 normal() const { return {a, b, c}; }
  double normal_norm() const { return normal().norm(); }
  Vec3 unit_normal() const;
  // (n.p + d) / |n|
  double signed_distance(const Vec3& p) const;
  // Unit normal, c >= 0 (ties broken on b then a). Throws InvalidInput on a
  // zero normal.
  Plane canonicalized() const;
};

struct Cluster {
  std::vector<std::size_t> indices;  // ascending, unique
  Vec3 centroid = Vec3::Zero();
  std::optional<double> plane_offset;
};

// 16-bit depth image in millimeters; 0 marks a missing measurement.
struct DepthFrame {
  int width = 0;
  int height = 0;
  std::vector<std::uint16_t> depth_mm;  // row-major

  std::uint16_t at(int u, int v) const {
    return depth_mm[static_cast<std::size_t>(v) * width + u];
  }
};

// Back-projects every valid depth pixel into the camera frame (meters).
PointCloud deproject_depth(const DepthFrame& frame, const CameraProfile& cam);

// Moves a camera-frame cloud into world coordinates using the camera extrinsics.
PointCloud camera_to_world(const PointCloud& cloud, const CameraProfile& cam);

struct PlaneFit {
  Plane plane;
  std::vector<std::uint8_t> inliers;  // 1 per point, parallel to the cloud
  std::size_t inlier_count = 0;
};

struct RansacOptions {
  double inlier_threshold = 0.005;  // m
  int iterations = 500;
  std::uint64_t seed = 0;
};

// RANSAC over 3-point samples followed by a least-squares refit on the
// consensus set. Bit-reproducible for a fixed seed.
PlaneFit fit_plane_ransac(const PointCloud& cloud, const RansacOptions& options);

// Total least squares plane through `points` (selected by `mask` if given).
Plane fit_plane_least_squares(const std::vector<Vec3>& points,
                              const std::vector<std::uint8_t>* mask = nullptr);

struct ClusterOptions {
  double eps = 0.02;  // m
  std::size_t min_points = 20;
};

// DBSCAN. A point's neighbourhood includes the point itself; a point is core
// when its neighbourhood holds at least min_points members. Border points join
// the first cluster (in index order) that reaches them.
std::vector<Cluster> cluster_points(const PointCloud& cloud, const ClusterOptions& options);

// Offset d' of the table-parallel plane through the cluster's top surface,
// taken at the 95th percentile of signed point-to-table distance.
double cluster_plane_offset(const Cluster& cluster, const PointCloud& cloud, const Plane& table);

// h = |d' - d| / |n|
double cluster_height(double plane_offset, const Plane& table);

struct PlaneProjection {
  double distance = 0.0;  // signed, meters
  Vec3 point = Vec3::Zero();
};

PlaneProjection project_point_to_plane(const Vec3& p, const Plane& plane);

// Linear-interpolated percentile (q in [0, 1]) of an unsorted sample.
double percentile(std::vector<double> values, double q);

}  // namespace glasslabel
