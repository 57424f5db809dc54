#include <doctest.h>

#include <cmath>
#include <random>

#include "glasslabel/camera.hpp"
#include "glasslabel/errors.hpp"
#include "synthetic_scene.hpp"

using namespace glasslabel;

namespace {

CameraProfile simple(double f, double cx, double cy) {
  CameraProfile c;
  c.name = "c";
  c.fx = c.fy = f;
  c.cx = cx;
  c.cy = cy;
  c.width = 640;
  c.height = 480;
  return c;
}

// Fixed-point inversion of Brown-Conrady distortion (the classic OpenCV
// iteration), independent of the library's Newton solver.
Vec2 fixed_point_undistort(const Vec2& px, const CameraProfile& c) {
  const double xd = (px.x() - c.cx) / c.fx, yd = (px.y() - c.cy) / c.fy;
  double x = xd, y = yd;
  const auto& k = c.dist;
  for (int i = 0; i < 2000; ++i) {
    const double r2 = x * x + y * y;
    const double radial = 1 + k[0] * r2 + k[1] * r2 * r2 + k[4] * r2 * r2 * r2;
    const double dx = 2 * k[2] * x * y + k[3] * (r2 + 2 * x * x);
    const double dy = k[2] * (r2 + 2 * y * y) + 2 * k[3] * x * y;
    x = (xd - dx) / radial;
    y = (yd - dy) / radial;
  }
  return {x, y};
}

CameraProfile distorted_camera() {
  CameraProfile c = synth::look_down({0.0, 0.0, 1.2}, 30.0).profile("d");
  c.dist = {-0.2, 0.1, 0.0012, -0.0009, -0.02};
  return c;
}

}  // namespace

TEST_CASE("project examples") {
  CameraProfile c = simple(500, 320, 240);
  CHECK((project(Vec3(0, 0, 1), c) - Vec2(320, 240)).norm() < 1e-12);
  CameraProfile d = simple(600, 320, 240);
  CHECK((project(Vec3(0.1, 0, 1), d) - Vec2(380, 240)).norm() < 1e-12);
  CHECK_THROWS_AS(project(Vec3(0, 0, -1), d), BehindCamera);
  CHECK_THROWS_AS(project(Vec3(0.1, 0, 0), d), BehindCamera);
}

TEST_CASE("undistort examples") {
  CameraProfile c = simple(600, 320, 240);
  const Vec3 ray = undistort(Vec2(380, 300), c);
  CHECK((ray - Vec3(0.1, 0.1, 1.0)).norm() < 1e-15);

  CameraProfile d = distorted_camera();
  const Vec3 axis = undistort(Vec2(d.cx, d.cy), d);
  CHECK((axis - Vec3(0, 0, 1)).norm() < 1e-15);

  double worst = 0.0, worst_oracle = 0.0;
  for (int i = 0; i <= 40; ++i)
    for (int j = 0; j <= 40; ++j) {
      const Vec2 px(i * (d.width - 1) / 40.0, j * (d.height - 1) / 40.0);
      const Vec3 r = undistort(px, d);
      const Vec2 back = project_camera_point(r, d);
      worst = std::max(worst, (back - px).norm());
      worst_oracle = std::max(worst_oracle, (Vec2(r.x(), r.y()) - fixed_point_undistort(px, d)).norm());
    }
  CHECK(worst < 1e-6);
  CHECK(worst_oracle < 1e-9);
}

TEST_CASE("fisheye undistort round trip") {
  CameraProfile f = synth::look_down({0.0, 0.0, 1.2}, 30.0).profile("f");
  f.model = DistortionModel::FisheyeEquidistant;
  f.dist = {0.05, -0.02, 0.004, -0.001, 0.0};
  CHECK(f.has_distortion());
  double worst = 0.0;
  for (int i = 0; i <= 30; ++i)
    for (int j = 0; j <= 30; ++j) {
      const Vec2 px(i * (f.width - 1) / 30.0, j * (f.height - 1) / 30.0);
      worst = std::max(worst, (project_camera_point(undistort(px, f), f) - px).norm());
    }
  CHECK(worst < 1e-6);

  // Equidistant model with zero coefficients: r_d = theta.
  CameraProfile e = f;
  e.dist = {};
  const Vec2 px = project_camera_point(Vec3(1.0, 0.0, 1.0), e);
  CHECK(px.x() == doctest::Approx(e.cx + e.fx * M_PI / 4).epsilon(1e-14));
}

TEST_CASE("cast_ray_to_plane") {
  CameraProfile nadir = synth::look_down({0.3, -0.2, 1.0}, 0.0).profile("n");
  const Plane table{0, 0, 1, 0};
  const Vec3 hit = cast_ray_to_plane(Vec2(nadir.cx, nadir.cy), nadir, table);
  CHECK((hit - Vec3(0.3, -0.2, 0.0)).norm() < 1e-12);

  CameraProfile cam = synth::look_down({0.0, 0.0, 1.2}, 30.0).profile("c");
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> ux(-0.4, 0.4), uy(0.3, 1.0);
  double worst = 0.0;
  for (int i = 0; i < 500; ++i) {
    const Vec3 p(ux(rng), uy(rng), 0.0);
    worst = std::max(worst, (cast_ray_to_plane(project(p, cam), cam, table) - p).norm());
  }
  CHECK(worst < 1e-9);

  CameraProfile d = distorted_camera();
  double worst_d = 0.0, on_plane = 0.0;
  for (int i = 0; i < 500; ++i) {
    const Vec3 p(ux(rng), uy(rng), 0.0);
    const Vec3 q = cast_ray_to_plane(project(p, d), d, table);
    worst_d = std::max(worst_d, (q - p).norm());
    on_plane = std::max(on_plane, std::abs(table.signed_distance(q)));
  }
  CHECK(worst_d < 1e-6);
  CHECK(on_plane < 1e-9);

  // Horizontal camera looking along +y: its optical axis is parallel to z = const.
  CameraProfile level = synth::look_down({0.0, 0.0, 1.0}, 90.0).profile("l");
  CHECK_THROWS_AS(cast_ray_to_plane(Vec2(level.cx, level.cy), level, table), NoIntersection);
  // Plane above the camera is hit behind it by a downward ray.
  CHECK_THROWS_AS(cast_ray_to_plane(Vec2(nadir.cx, nadir.cy), nadir, Plane{0, 0, 1, -2.0}), BehindCamera);
}

TEST_CASE("transfer_pixel") {
  const Plane table{0, 0, 1, 0};
  CameraProfile a = distorted_camera();
  CHECK((transfer_pixel(Vec2(100.5, 600.25), a, a, table).pixel - Vec2(100.5, 600.25)).norm() < 1e-6);

  CameraProfile b = synth::look_down({0.2, 0.05, 1.1}, 28.0, -6.0).profile("b");
  b.dist = {0.05, -0.01, 0.0, 0.0005, 0.0};
  double worst = 0.0;
  int n = 0;
  for (int i = 0; i < 30; ++i)
    for (int j = 0; j < 30; ++j) {
      const Vec2 px(i * 1279.0 / 29.0, j * 719.0 / 29.0);
      const PixelTransfer ab = transfer_pixel(px, a, b, table);
      if (!ab.in_bounds) continue;
      worst = std::max(worst, (transfer_pixel(ab.pixel, b, a, table).pixel - px).norm());
      ++n;
    }
  CHECK(n > 300);
  CHECK(worst < 0.5);

  // Far-right pixel of A lands outside B's sensor: flagged, not clamped.
  CameraProfile narrow = synth::look_down({-1.0, 0.0, 1.2}, 30.0, 0.0, 200, 200, 900.0).profile("narrow");
  const PixelTransfer out = transfer_pixel(Vec2(1279, 360), a, narrow, table);
  CHECK_FALSE(out.in_bounds);
  CHECK(out.pixel.x() > 200);

  // Target camera under the table sees the point behind it.
  CameraProfile below = b;
  below.t = b.R * -Vec3(0.0, 0.5, -1.0);
  CHECK_THROWS_AS(transfer_pixel(Vec2(640, 360), a, below, table), BehindCamera);
}

TEST_CASE("reprojection_rms examples") {
  CameraProfile c = simple(500, 320, 240);
  std::vector<Correspondence> corr{{project(Vec3(0.1, 0.2, 1.5), c), Vec3(0.1, 0.2, 1.5)},
                                   {project(Vec3(-0.3, 0.1, 2.0), c), Vec3(-0.3, 0.1, 2.0)}};
  CHECK(reprojection_rms(c, corr) < 1e-12);
  std::vector<Correspondence> one{{project(Vec3(0, 0, 1), c) + Vec2(3, 0), Vec3(0, 0, 1)}};
  CHECK(reprojection_rms(c, one) == doctest::Approx(3.0));
  std::vector<Correspondence> two{{project(Vec3(0, 0, 1), c), Vec3(0, 0, 1)},
                                  {project(Vec3(0.1, 0, 1), c) + Vec2(0, 4), Vec3(0.1, 0, 1)}};
  CHECK(reprojection_rms(c, two) == doctest::Approx(std::sqrt(8.0)));
  CHECK_THROWS_AS(reprojection_rms(c, {}), InvalidInput);
}

namespace {

CameraProfile truth_camera() {
  CameraProfile c;
  c.name = "truth";
  c.fx = 880;
  c.fy = 884;
  c.cx = 642;
  c.cy = 355;
  c.width = 1280;
  c.height = 720;
  c.dist = {-0.1, 0.05, 0.001, -0.0005, 0.0};
  c.R = rotation_from_axis_angle(Vec3(2.0, -0.2, 0.1));
  c.t = Vec3(-0.1, 0.3, 1.2);
  return c;
}

std::vector<Correspondence> sample(const CameraProfile& c, std::uint64_t seed, double noise, int n = 60) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ux(-0.6, 0.6), uy(-0.35, 0.35), uz(0.7, 2.2);
  std::normal_distribution<double> g(0.0, noise > 0 ? noise : 1.0);
  std::vector<Correspondence> out;
  while (static_cast<int>(out.size()) < n) {
    const double z = uz(rng);
    const Vec3 pw = c.to_world(Vec3(ux(rng) * z, uy(rng) * z, z));
    Vec2 px = project(pw, c);
    if (!c.contains(px)) continue;
    if (noise > 0) px += Vec2(g(rng), g(rng));
    out.push_back({px, pw});
  }
  return out;
}

CameraProfile perturbed(const CameraProfile& c) {
  CameraProfile p = c;
  p.fx *= 1.02;
  p.fy *= 0.97;
  p.cx -= 8;
  p.cy += 4;
  p.dist = {};
  p.R = rotation_from_axis_angle(Vec3(-0.01, 0.02, 0.015)) * c.R;
  p.t += Vec3(0.03, 0.02, -0.04);
  return p;
}

}  // namespace

TEST_CASE("calibrate recovers a noiseless camera") {
  const CameraProfile truth = truth_camera();
  const CalibrationResult res = calibrate(sample(truth, 1, 0.0), perturbed(truth));
  CHECK(res.rms < 1e-6);
  CHECK(std::abs(res.camera.fx - truth.fx) / truth.fx < 1e-4);
  CHECK(std::abs(res.camera.fy - truth.fy) / truth.fy < 1e-4);
  CHECK(std::abs(res.camera.cx - truth.cx) / truth.cx < 1e-4);
  CHECK(std::abs(res.camera.cy - truth.cy) / truth.cy < 1e-4);
  CHECK((res.camera.t - truth.t).norm() / truth.t.norm() < 1e-4);
  for (int i = 0; i < 5; ++i) CHECK(std::abs(res.camera.dist[i] - truth.dist[i]) < 1e-4);

  // Accepted costs never increase; R stays orthonormal.
  for (std::size_t i = 1; i < res.accepted_costs.size(); ++i)
    CHECK(res.accepted_costs[i] <= res.accepted_costs[i - 1]);
  const Mat3 RtR = res.camera.R.transpose() * res.camera.R;
  CHECK((RtR - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(res.camera.R.determinant() == doctest::Approx(1.0));
}

TEST_CASE("calibrate with pixel noise stays near the ground-truth residual") {
  const CameraProfile truth = truth_camera();
  double mean = 0.0;
  for (std::uint64_t seed = 10; seed < 15; ++seed) {
    const auto corr = sample(truth, seed, 0.5);
    const CalibrationResult res = calibrate(corr, perturbed(truth));
    // A least-squares optimum cannot be worse than the ground truth itself.
    CHECK(res.rms <= reprojection_rms(truth, corr) + 1e-9);
    mean += res.rms / 5.0;
  }
  CHECK(mean <= 0.7);
}

TEST_CASE("calibrate with fixed intrinsics refines the pose only") {
  const CameraProfile truth = truth_camera();
  CameraProfile init = truth;
  init.R = rotation_from_axis_angle(Vec3(0.02, 0.0, -0.01)) * truth.R;
  init.t += Vec3(0.01, -0.02, 0.02);
  CalibrationOptions opts;
  opts.fix_intrinsics = true;
  const CalibrationResult res = calibrate(sample(truth, 3, 0.0, 12), init, opts);
  CHECK(res.camera.fx == init.fx);
  CHECK(res.camera.dist == init.dist);
  CHECK(res.rms < 1e-6);
}

TEST_CASE("calibrate rejects degenerate input and reports divergence") {
  const CameraProfile truth = truth_camera();
  CHECK_THROWS_AS(calibrate(sample(truth, 4, 0.0, 5), truth), RankError);

  std::vector<Correspondence> same(10, sample(truth, 5, 0.0, 1).front());
  CHECK_THROWS_AS(calibrate(same, perturbed(truth)), RankError);

  CalibrationOptions opts;
  opts.max_iterations = 1;
  const auto corr = sample(truth, 6, 0.0);
  try {
    calibrate(corr, perturbed(truth), opts);
    FAIL("expected CalibrationDiverged");
  } catch (const CalibrationDiverged& e) {
    CHECK(e.best().rms <= reprojection_rms(perturbed(truth), corr));
    CHECK(e.best().iterations == 1);
  }
}

TEST_CASE("camera profile validation") {
  CameraProfile c = simple(500, 320, 240);
  CHECK_NOTHROW(c.validate());
  c.fx = 0;
  CHECK_THROWS_AS(c.validate(), InvalidInput);
  c = simple(500, 320, 240);
  c.R(0, 0) = 1.01;
  CHECK_THROWS_AS(c.validate(), InvalidInput);
  c = simple(500, 320, 240);
  c.R = -Mat3::Identity();
  CHECK_THROWS_AS(c.validate(), InvalidInput);
  c = simple(500, 320, 240);
  c.width = 0;
  CHECK_THROWS_AS(c.validate(), InvalidInput);

  CHECK(distortion_model_from_string("brown_conrady") == DistortionModel::BrownConrady);
  CHECK(to_string(DistortionModel::FisheyeEquidistant) == "fisheye_equidistant");
  CHECK_THROWS_AS(distortion_model_from_string("kannala"), InvalidInput);
}

TEST_CASE("rotation helpers") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-2, 2);
  for (int i = 0; i < 50; ++i) {
    const Vec3 w(u(rng), u(rng), u(rng));
    const Mat3 ref = Eigen::AngleAxisd(w.norm(), w.normalized()).toRotationMatrix();
    CHECK((rotation_from_axis_angle(w) - ref).cwiseAbs().maxCoeff() < 1e-12);
  }
  CHECK((rotation_from_axis_angle(Vec3::Zero()) - Mat3::Identity()).norm() == 0.0);
  const Mat3 noisy = rotation_from_axis_angle(Vec3(0.3, 0.2, 0.1)) + 1e-4 * Mat3::Ones();
  const Mat3 r = orthonormalize(noisy);
  CHECK((r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(r.determinant() == doctest::Approx(1.0));
}
