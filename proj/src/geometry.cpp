#include "glasslabel/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <random>
#include <unordered_map>

#include <Eigen/Eigenvalues>

#include "glasslabel/camera.hpp"
#include "glasslabel/errors.hpp"

namespace glasslabel {

Vec3 Plane::unit_normal() const {
  const double n = normal_norm();
  if (!(n > 0.0)) throw InvalidInput("plane has a zero normal");
  return normal() / n;
}

double Plane::signed_distance(const Vec3& p) const {
  const double n = normal_norm();
  if (!(n > 0.0)) throw InvalidInput("plane has a zero normal");
  return (a * p.x() + b * p.y() + c * p.z() + d) / n;
}

Plane Plane::canonicalized() const {
  const double n = normal_norm();
  if (!(n > 0.0) || !std::isfinite(n)) throw InvalidInput("plane has a zero normal");
  double s = 1.0 / n;
  if (c < 0.0 || (c == 0.0 && (b < 0.0 || (b == 0.0 && a < 0.0)))) s = -s;
  return {a * s, b * s, c * s, d * s};
}

PointCloud deproject_depth(const DepthFrame& frame, const CameraProfile& cam) {
  if (!(cam.fx > 0.0) || !(cam.fy > 0.0)) throw InvalidInput("camera focal lengths must be positive");
  if (frame.width != cam.width || frame.height != cam.height)
    throw InvalidInput("depth frame " + std::to_string(frame.width) + "x" + std::to_string(frame.height) +
                       " does not match camera " + cam.name);
  if (frame.depth_mm.size() != static_cast<std::size_t>(frame.width) * frame.height)
    throw InvalidInput("depth grid length does not match its dimensions");

  PointCloud cloud;
  cloud.frame = {FrameKind::Camera, cam.name};
  const bool distorted = cam.has_distortion();
  for (int v = 0; v < frame.height; ++v) {
    for (int u = 0; u < frame.width; ++u) {
      const std::uint16_t raw = frame.at(u, v);
      if (raw == 0) continue;
      const double z = raw * 1e-3;
      Vec3 ray;
      if (distorted) {
        ray = undistort(Vec2(u, v), cam);
      } else {
        ray = Vec3((u - cam.cx) / cam.fx, (v - cam.cy) / cam.fy, 1.0);
      }
      cloud.points.push_back(ray * z);
    }
  }
  return cloud;
}

PointCloud camera_to_world(const PointCloud& cloud, const CameraProfile& cam) {
  PointCloud out;
  out.frame = {FrameKind::World, ""};
  out.points.reserve(cloud.points.size());
  for (const auto& p : cloud.points) out.points.push_back(cam.to_world(p));
  return out;
}

Plane fit_plane_least_squares(const std::vector<Vec3>& points, const std::vector<std::uint8_t>* mask) {
  Vec3 centroid = Vec3::Zero();
  std::size_t n = 0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (mask && !(*mask)[i]) continue;
    centroid += points[i];
    ++n;
  }
  if (n < 3) throw FitFailure("least-squares plane needs at least 3 points");
  centroid /= static_cast<double>(n);

  Mat3 cov = Mat3::Zero();
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (mask && !(*mask)[i]) continue;
    const Vec3 q = points[i] - centroid;
    cov += q * q.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Mat3> solver(cov);
  if (solver.info() != Eigen::Success) throw FitFailure("eigen decomposition failed");
  // Second-smallest eigenvalue ~ 0 means the points are collinear.
  if (solver.eigenvalues()(1) <= 1e-18 * std::max(1.0, solver.eigenvalues()(2)))
    throw FitFailure("points are collinear");
  const Vec3 normal = solver.eigenvectors().col(0);
  return Plane{normal.x(), normal.y(), normal.z(), -normal.dot(centroid)}.canonicalized();
}

namespace {

std::size_t mark_inliers(const std::vector<Vec3>& points, const Plane& unit_plane, double threshold,
                         std::vector<std::uint8_t>& mask) {
  mask.assign(points.size(), 0);
  std::size_t count = 0;
  const Vec3 n = unit_plane.normal();
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (std::abs(n.dot(points[i]) + unit_plane.d) <= threshold) {
      mask[i] = 1;
      ++count;
    }
  }
  return count;
}

}  // namespace

PlaneFit fit_plane_ransac(const PointCloud& cloud, const RansacOptions& options) {
  const auto& pts = cloud.points;
  if (pts.size() < 3) throw FitFailure("RANSAC needs at least 3 points");
  if (!(options.inlier_threshold > 0.0)) throw InvalidInput("inlier threshold must be positive");
  if (options.iterations < 1) throw InvalidInput("RANSAC needs at least one iteration");

  std::mt19937_64 rng(options.seed);
  std::uniform_int_distribution<std::size_t> pick(0, pts.size() - 1);

  Plane best;
  std::size_t best_count = 0;
  bool found = false;
  std::vector<std::uint8_t> scratch;

  for (int it = 0; it < options.iterations; ++it) {
    const std::size_t i0 = pick(rng);
    std::size_t i1 = pick(rng);
    std::size_t i2 = pick(rng);
    if (i0 == i1 || i0 == i2 || i1 == i2) continue;
    const Vec3 e1 = pts[i1] - pts[i0];
    const Vec3 e2 = pts[i2] - pts[i0];
    const Vec3 n = e1.cross(e2);
    const double nn = n.norm();
    if (!(nn > 1e-12 * e1.norm() * e2.norm()) || nn == 0.0) continue;
    const Vec3 un = n / nn;
    const Plane candidate{un.x(), un.y(), un.z(), -un.dot(pts[i0])};
    const std::size_t count = mark_inliers(pts, candidate, options.inlier_threshold, scratch);
    if (!found || count > best_count) {
      best = candidate;
      best_count = count;
      found = true;
    }
  }
  if (!found) throw FitFailure("all RANSAC samples were degenerate");

  PlaneFit fit;
  mark_inliers(pts, best, options.inlier_threshold, fit.inliers);
  Plane refined = best;
  if (best_count >= 3) {
    try {
      refined = fit_plane_least_squares(pts, &fit.inliers);
    } catch (const FitFailure&) {
      refined = best;
    }
  }
  fit.plane = refined.canonicalized();
  fit.inlier_count = mark_inliers(pts, fit.plane, options.inlier_threshold, fit.inliers);
  return fit;
}

namespace {

struct CellKey {
  std::int64_t x, y, z;
  bool operator==(const CellKey&) const = default;
};

struct CellHash {
  std::size_t operator()(const CellKey& k) const {
    std::uint64_t h = static_cast<std::uint64_t>(k.x) * 73856093ULL;
    h ^= static_cast<std::uint64_t>(k.y) * 19349663ULL;
    h ^= static_cast<std::uint64_t>(k.z) * 83492791ULL;
    return static_cast<std::size_t>(h);
  }
};

class RadiusGrid {
 public:
  RadiusGrid(const std::vector<Vec3>& points, double eps) : points_(points), eps_(eps) {
    for (std::size_t i = 0; i < points.size(); ++i) cells_[key(points[i])].push_back(i);
  }

  void neighbours(std::size_t idx, std::vector<std::size_t>& out) const {
    out.clear();
    const CellKey k = key(points_[idx]);
    const double eps2 = eps_ * eps_;
    for (int dx = -1; dx <= 1; ++dx)
      for (int dy = -1; dy <= 1; ++dy)
        for (int dz = -1; dz <= 1; ++dz) {
          auto it = cells_.find({k.x + dx, k.y + dy, k.z + dz});
          if (it == cells_.end()) continue;
          for (std::size_t j : it->second)
            if ((points_[j] - points_[idx]).squaredNorm() <= eps2) out.push_back(j);
        }
  }

 private:
  CellKey key(const Vec3& p) const {
    return {static_cast<std::int64_t>(std::floor(p.x() / eps_)),
            static_cast<std::int64_t>(std::floor(p.y() / eps_)),
            static_cast<std::int64_t>(std::floor(p.z() / eps_))};
  }

  const std::vector<Vec3>& points_;
  double eps_;
  std::unordered_map<CellKey, std::vector<std::size_t>, CellHash> cells_;
};

}  // namespace

std::vector<Cluster> cluster_points(const PointCloud& cloud, const ClusterOptions& options) {
  if (!(options.eps > 0.0)) throw InvalidInput("cluster eps must be positive");
  if (options.min_points < 1) throw InvalidInput("min_points must be at least 1");
  const auto& pts = cloud.points;
  if (pts.empty()) return {};

  constexpr int kUnvisited = -2;
  constexpr int kNoise = -1;
  std::vector<int> label(pts.size(), kUnvisited);
  RadiusGrid grid(pts, options.eps);
  std::vector<std::size_t> nbs;
  int next_label = 0;

  for (std::size_t seed = 0; seed < pts.size(); ++seed) {
    if (label[seed] != kUnvisited) continue;
    grid.neighbours(seed, nbs);
    if (nbs.size() < options.min_points) {
      label[seed] = kNoise;
      continue;
    }
    const int cluster_id = next_label++;
    label[seed] = cluster_id;
    std::deque<std::size_t> frontier(nbs.begin(), nbs.end());
    while (!frontier.empty()) {
      const std::size_t q = frontier.front();
      frontier.pop_front();
      if (label[q] == kNoise) label[q] = cluster_id;  // border point
      if (label[q] != kUnvisited) continue;
      label[q] = cluster_id;
      grid.neighbours(q, nbs);
      if (nbs.size() >= options.min_points)
        for (std::size_t r : nbs)
          if (label[r] == kUnvisited || label[r] == kNoise) frontier.push_back(r);
    }
  }

  std::vector<Cluster> clusters(static_cast<std::size_t>(next_label));
  for (std::size_t i = 0; i < pts.size(); ++i)
    if (label[i] >= 0) clusters[static_cast<std::size_t>(label[i])].indices.push_back(i);
  for (auto& c : clusters) {
    for (std::size_t i : c.indices) c.centroid += pts[i];
    c.centroid /= static_cast<double>(c.indices.size());
  }
  return clusters;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw InvalidInput("percentile of an empty sample");
  std::sort(values.begin(), values.end());
  const double pos = std::clamp(q, 0.0, 1.0) * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

double cluster_plane_offset(const Cluster& cluster, const PointCloud& cloud, const Plane& table) {
  if (cluster.indices.empty()) throw InvalidInput("cluster has no points");
  const double norm = table.normal_norm();
  if (!(norm > 0.0)) throw InvalidInput("table plane has a zero normal");
  std::vector<double> distances;
  distances.reserve(cluster.indices.size());
  for (std::size_t i : cluster.indices) {
    if (i >= cloud.points.size()) throw InvalidInput("cluster index outside the cloud");
    distances.push_back(table.signed_distance(cloud.points[i]));
  }
  const double top = percentile(std::move(distances), 0.95);
  // Plane (a, b, c, d') holds points at signed distance `top` from the table.
  return table.d - top * norm;
}

double cluster_height(double plane_offset, const Plane& table) {
  const double norm = std::sqrt(table.a * table.a + table.b * table.b + table.c * table.c);
  if (!(norm > 0.0)) throw InvalidInput("table plane has a zero normal");
  return std::abs(plane_offset - table.d) / norm;
}

PlaneProjection project_point_to_plane(const Vec3& p, const Plane& plane) {
  const double norm = plane.normal_norm();
  if (!(norm > 0.0)) throw InvalidInput("plane has a zero normal");
  PlaneProjection out;
  out.distance = (plane.a * p.x() + plane.b * p.y() + plane.c * p.z() + plane.d) / norm;
  out.point = p - out.distance * (plane.normal() / norm);
  return out;
}

}  // namespace glasslabel
