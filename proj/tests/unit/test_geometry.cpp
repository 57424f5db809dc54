#include <doctest.h>

#include <algorithm>
#include <cstring>
#include <functional>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include <Eigen/Eigenvalues>

#include "glasslabel/camera.hpp"
#include "glasslabel/errors.hpp"
#include "glasslabel/geometry.hpp"

using namespace glasslabel;

namespace {

CameraProfile pinhole(double f, double cx, double cy, int w, int h) {
  CameraProfile c;
  c.name = "cam";
  c.fx = c.fy = f;
  c.cx = cx;
  c.cy = cy;
  c.width = w;
  c.height = h;
  return c;
}

// O(n^2) DBSCAN reference: core points, eps-connected core components, and
// for each point the set of components it can join.
struct BruteClusters {
  std::vector<int> core_component;                // -1 for non-core
  std::vector<std::set<int>> reachable;           // components within eps
};

BruteClusters brute_dbscan(const std::vector<Vec3>& pts, double eps, std::size_t min_points) {
  const std::size_t n = pts.size();
  std::vector<std::vector<std::size_t>> nb(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if ((pts[i] - pts[j]).norm() <= eps) nb[i].push_back(j);
  std::vector<bool> core(n);
  for (std::size_t i = 0; i < n; ++i) core[i] = nb[i].size() >= min_points;
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int x) { return parent[x] == x ? x : parent[x] = find(parent[x]); };
  for (std::size_t i = 0; i < n; ++i)
    if (core[i])
      for (std::size_t j : nb[i])
        if (core[j]) parent[find(static_cast<int>(i))] = find(static_cast<int>(j));
  BruteClusters out;
  out.core_component.assign(n, -1);
  out.reachable.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    if (core[i]) out.core_component[i] = find(static_cast<int>(i));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j : nb[i])
      if (core[j]) out.reachable[i].insert(out.core_component[j]);
  return out;
}

}  // namespace

TEST_CASE("deproject_depth follows the pinhole model") {
  CameraProfile cam = pinhole(600, 320, 240, 1000, 480);
  DepthFrame f;
  f.width = 1000;
  f.height = 480;
  f.depth_mm.assign(1000 * 480, 0);

  SUBCASE("all zero gives an empty cloud") { CHECK(deproject_depth(f, cam).empty()); }

  SUBCASE("principal point and an offset pixel") {
    f.depth_mm[240 * 1000 + 320] = 1000;
    f.depth_mm[240 * 1000 + 920] = 1000;
    const PointCloud pc = deproject_depth(f, cam);
    REQUIRE(pc.size() == 2);
    CHECK((pc.points[0] - Vec3(0, 0, 1.0)).norm() < 1e-12);
    CHECK((pc.points[1] - Vec3(1.0, 0, 1.0)).norm() < 1e-12);
    CHECK(pc.frame.kind == FrameKind::Camera);
    CHECK(pc.frame.name == "cam");
  }

  SUBCASE("dimension mismatch is rejected") {
    f.width = 999;
    CHECK_THROWS_AS(deproject_depth(f, cam), InvalidInput);
  }
}

TEST_CASE("deprojected points reproject onto their pixel centers") {
  CameraProfile cam = pinhole(615.3, 319.7, 241.2, 64, 48);
  DepthFrame f;
  f.width = 64;
  f.height = 48;
  f.depth_mm.resize(64 * 48);
  std::mt19937 rng(3);
  std::uniform_int_distribution<int> depth(300, 4000);
  for (auto& d : f.depth_mm) d = static_cast<std::uint16_t>(depth(rng));
  const PointCloud pc = deproject_depth(f, cam);
  REQUIRE(pc.size() == 64 * 48);
  double worst = 0.0;
  for (int v = 0, i = 0; v < 48; ++v)
    for (int u = 0; u < 64; ++u, ++i) {
      const Vec3& p = pc.points[i];
      const Vec2 px(cam.fx * p.x() / p.z() + cam.cx, cam.fy * p.y() / p.z() + cam.cy);
      worst = std::max(worst, (px - Vec2(u, v)).norm());
    }
  CHECK(worst < 1e-9);
}

TEST_CASE("camera_to_world inverts the extrinsics") {
  CameraProfile cam = pinhole(500, 10, 10, 20, 20);
  cam.R = rotation_from_axis_angle(Vec3(0.3, -1.1, 0.4));
  cam.t = Vec3(0.2, -0.5, 1.4);
  PointCloud pc;
  pc.frame = {FrameKind::Camera, "cam"};
  pc.points = {Vec3(0.1, 0.2, 1.0), Vec3(-0.3, 0.0, 2.5)};
  const PointCloud w = camera_to_world(pc, cam);
  CHECK(w.frame.kind == FrameKind::World);
  for (std::size_t i = 0; i < pc.size(); ++i) CHECK((cam.R * w.points[i] + cam.t - pc.points[i]).norm() < 1e-12);
}

TEST_CASE("RANSAC on exact points") {
  PointCloud pc;
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int i = 0; i < 1000; ++i) pc.points.emplace_back(u(rng), u(rng), 1.0);
  const PlaneFit fit = fit_plane_ransac(pc, {0.005, 200, 3});
  CHECK(fit.inlier_count == 1000);
  CHECK(fit.plane.a == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(fit.plane.b == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(fit.plane.c == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(fit.plane.d == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(std::abs(fit.plane.normal_norm() - 1.0) < 1e-12);
}

TEST_CASE("RANSAC with noise and outliers matches the fit on the known inliers") {
  PointCloud pc;
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1, 1);
  std::normal_distribution<double> noise(0.0, 0.002);
  std::vector<std::uint8_t> truth;
  for (int i = 0; i < 1000; ++i) {
    pc.points.emplace_back(u(rng), u(rng), 1.0 + noise(rng));
    truth.push_back(1);
  }
  for (int i = 0; i < 200; ++i) {
    pc.points.emplace_back(u(rng), u(rng), 1.0 + 0.5 * u(rng));
    truth.push_back(0);
  }
  const PlaneFit fit = fit_plane_ransac(pc, {0.006, 500, 42});

  // Oracle: plane through the centroid of the known inliers with the
  // smallest-eigenvalue direction of their scatter.
  Vec3 mean = Vec3::Zero();
  int n = 0;
  for (std::size_t i = 0; i < pc.size(); ++i)
    if (truth[i]) {
      mean += pc.points[i];
      ++n;
    }
  mean /= n;
  Mat3 scatter = Mat3::Zero();
  for (std::size_t i = 0; i < pc.size(); ++i)
    if (truth[i]) scatter += (pc.points[i] - mean) * (pc.points[i] - mean).transpose();
  Eigen::SelfAdjointEigenSolver<Mat3> es(scatter);
  Vec3 n_oracle = es.eigenvectors().col(0);
  if (n_oracle.z() < 0) n_oracle = -n_oracle;

  const Vec3 nf = fit.plane.unit_normal();
  const double angle = std::acos(std::min(1.0, nf.dot(Vec3(0, 0, 1)))) * 180.0 / M_PI;
  CHECK(angle < 0.5);
  CHECK(std::abs(fit.plane.d + 1.0) < 0.003);
  CHECK(std::acos(std::min(1.0, nf.dot(n_oracle))) * 180.0 / M_PI < 0.2);
  CHECK(std::abs(fit.plane.d + n_oracle.dot(mean)) < 0.002);
}

TEST_CASE("RANSAC is bit-reproducible and rejects degenerate input") {
  PointCloud pc;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int i = 0; i < 500; ++i) pc.points.emplace_back(u(rng), u(rng), 0.1 * u(rng));
  const PlaneFit a = fit_plane_ransac(pc, {0.01, 100, 9});
  const PlaneFit b = fit_plane_ransac(pc, {0.01, 100, 9});
  CHECK(std::memcmp(&a.plane, &b.plane, sizeof(Plane)) == 0);
  CHECK(a.inliers == b.inliers);

  PointCloud two;
  two.points = {Vec3(0, 0, 0), Vec3(1, 0, 0)};
  CHECK_THROWS_AS(fit_plane_ransac(two, {}), FitFailure);
  PointCloud line;
  for (int i = 0; i < 20; ++i) line.points.emplace_back(i, 2.0 * i, 0.0);
  CHECK_THROWS_AS(fit_plane_ransac(line, {}), FitFailure);
}

TEST_CASE("cluster_points examples") {
  SUBCASE("two blobs") {
    PointCloud pc;
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-0.005, 0.005);
    for (const Vec3& c : {Vec3(0, 0, 0), Vec3(0.5, 0, 0)})
      for (int i = 0; i < 50; ++i) pc.points.push_back(c + Vec3(u(rng), u(rng), u(rng)));
    const auto clusters = cluster_points(pc, {0.05, 5});
    REQUIRE(clusters.size() == 2);
    CHECK(clusters[0].indices.size() == 50);
    CHECK(clusters[1].indices.size() == 50);
    CHECK_FALSE(clusters[0].plane_offset.has_value());
  }
  SUBCASE("single point is noise") {
    PointCloud pc;
    pc.points = {Vec3(1, 2, 3)};
    CHECK(cluster_points(pc, {0.05, 5}).empty());
  }
  SUBCASE("identical points") {
    PointCloud pc;
    pc.points.assign(50, Vec3(0.1, 0.2, 0.3));
    const auto clusters = cluster_points(pc, {0.01, 5});
    REQUIRE(clusters.size() == 1);
    CHECK(clusters[0].indices.size() == 50);
    CHECK((clusters[0].centroid - Vec3(0.1, 0.2, 0.3)).norm() < 1e-15);
  }
  SUBCASE("empty input") { CHECK(cluster_points(PointCloud{}, {0.05, 5}).empty()); }
}

TEST_CASE("cluster_points equals brute-force eps-connectivity") {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 0.4);
    std::uniform_int_distribution<int> count(50, 500);
    PointCloud pc;
    const int n = count(rng);
    for (int i = 0; i < n; ++i) pc.points.emplace_back(u(rng), u(rng), 0.05 * u(rng));
    const double eps = 0.03;
    const std::size_t min_points = 4;
    const auto clusters = cluster_points(pc, {eps, min_points});
    const BruteClusters ref = brute_dbscan(pc.points, eps, min_points);

    std::vector<int> label(pc.size(), -1);
    for (std::size_t c = 0; c < clusters.size(); ++c) {
      Vec3 mean = Vec3::Zero();
      for (std::size_t i : clusters[c].indices) {
        CHECK(label[i] == -1);
        label[i] = static_cast<int>(c);
        mean += pc.points[i];
      }
      mean /= static_cast<double>(clusters[c].indices.size());
      CHECK((mean - clusters[c].centroid).norm() < 1e-12);
    }
    // Core points: same partition as the reference components.
    std::map<int, int> ref_to_ours;
    std::map<int, int> ours_to_ref;
    for (std::size_t i = 0; i < pc.size(); ++i) {
      if (ref.core_component[i] < 0) continue;
      REQUIRE(label[i] >= 0);
      auto [a, fresh_a] = ref_to_ours.emplace(ref.core_component[i], label[i]);
      auto [b, fresh_b] = ours_to_ref.emplace(label[i], ref.core_component[i]);
      CHECK(a->second == label[i]);
      CHECK(b->second == ref.core_component[i]);
    }
    // Non-core points: noise iff unreachable, otherwise in a reachable cluster.
    for (std::size_t i = 0; i < pc.size(); ++i) {
      if (ref.core_component[i] >= 0) continue;
      if (ref.reachable[i].empty()) {
        CHECK(label[i] == -1);
      } else {
        REQUIRE(label[i] >= 0);
        CHECK(ref.reachable[i].count(ours_to_ref.at(label[i])) == 1);
      }
    }
  }
}

TEST_CASE("cluster_plane_offset and cluster_height") {
  const Plane table{0, 0, 1, 0};
  PointCloud pc;
  Cluster flat;
  for (int i = 0; i < 10; ++i) {
    pc.points.emplace_back(0.01 * i, 0, 0);
    flat.indices.push_back(i);
  }
  CHECK(cluster_plane_offset(flat, pc, table) == doctest::Approx(table.d));

  SUBCASE("heights from 0 to 0.12 m") {
    PointCloud tall;
    Cluster c;
    std::vector<double> heights;
    for (int i = 0; i <= 120; ++i) {
      tall.points.emplace_back(0, 0, i * 0.001);
      c.indices.push_back(i);
      heights.push_back(i * 0.001);
    }
    // 95th percentile by sorting the distances by hand.
    std::sort(heights.begin(), heights.end());
    const double rank = 0.95 * (heights.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(rank));
    const double q = heights[lo] + (rank - lo) * (heights[lo + 1] - heights[lo]);
    CHECK(cluster_plane_offset(c, tall, table) == doctest::Approx(-q).epsilon(1e-12));
    CHECK(q == doctest::Approx(0.114));
  }

  SUBCASE("single point") {
    PointCloud one;
    one.points = {Vec3(0.3, 0.1, 0.2)};
    Cluster c;
    c.indices = {0};
    const double dp = cluster_plane_offset(c, one, table);
    CHECK(std::abs(dp - table.d) == doctest::Approx(0.2));
  }

  CHECK_THROWS_AS(cluster_plane_offset(Cluster{}, pc, table), InvalidInput);

  CHECK(cluster_height(-0.12, Plane{0, 0, 1, 0}) == doctest::Approx(0.12).epsilon(1e-15));
  CHECK(cluster_height(-0.24, Plane{0, 0, 2, 0}) == doctest::Approx(0.12).epsilon(1e-15));
  CHECK(cluster_height(0.37, Plane{0.1, 0.2, 0.9, 0.37}) == 0.0);
  CHECK_THROWS_AS(cluster_height(0.1, Plane{0, 0, 0, 1}), InvalidInput);
}

TEST_CASE("project_point_to_plane") {
  auto p1 = project_point_to_plane(Vec3(0.3, 0.1, 0.15), Plane{0, 0, 1, 0});
  CHECK(p1.distance == doctest::Approx(0.15));
  CHECK((p1.point - Vec3(0.3, 0.1, 0)).norm() < 1e-15);

  auto p2 = project_point_to_plane(Vec3(0.2, -0.4, 0.0), Plane{0, 0, 1, 0});
  CHECK(p2.distance == 0.0);
  CHECK(p2.point == Vec3(0.2, -0.4, 0.0));

  auto p3 = project_point_to_plane(Vec3(1, 1, 1), Plane{0, 0, 2, -1});
  CHECK(p3.distance == doctest::Approx(0.5).epsilon(1e-15));
  CHECK((p3.point - Vec3(1, 1, 0.5)).norm() < 1e-15);

  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-3, 3);
  for (int i = 0; i < 200; ++i) {
    const Plane pl{u(rng), u(rng), u(rng), u(rng)};
    const auto a = project_point_to_plane(Vec3(u(rng), u(rng), u(rng)), pl);
    const auto b = project_point_to_plane(a.point, pl);
    CHECK(std::abs(pl.signed_distance(a.point)) < 1e-12);
    CHECK((b.point - a.point).norm() < 1e-12);
  }
}

TEST_CASE("plane canonicalization") {
  const Plane p = Plane{0, 0, -2, 4}.canonicalized();
  CHECK(p.c == doctest::Approx(1.0));
  CHECK(p.d == doctest::Approx(-2.0));
  CHECK(std::abs(p.normal_norm() - 1.0) < 1e-12);
  CHECK_THROWS_AS(Plane({0, 0, 0, 1}).canonicalized(), InvalidInput);
}

TEST_CASE("percentile interpolates linearly") {
  CHECK(percentile({1, 2, 3, 4, 5}, 0.5) == 3.0);
  CHECK(percentile({5, 1, 4, 2, 3}, 0.0) == 1.0);
  CHECK(percentile({5, 1, 4, 2, 3}, 1.0) == 5.0);
  CHECK(percentile({0, 10}, 0.95) == doctest::Approx(9.5));
  CHECK_THROWS_AS(percentile({}, 0.5), InvalidInput);
}
