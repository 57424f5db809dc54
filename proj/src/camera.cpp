#include "glasslabel/camera.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>
#include <unsupported/Eigen/AutoDiff>

#include "camera_math.hpp"

namespace glasslabel {

std::string to_string(DistortionModel model) {
  return model == DistortionModel::BrownConrady ? "brown_conrady" : "fisheye_equidistant";
}

DistortionModel distortion_model_from_string(const std::string& tag) {
  if (tag == "brown_conrady") return DistortionModel::BrownConrady;
  if (tag == "fisheye_equidistant") return DistortionModel::FisheyeEquidistant;
  throw InvalidInput("unknown distortion model '" + tag + "'");
}

bool CameraProfile::has_distortion() const {
  return std::any_of(dist.begin(), dist.end(), [](double k) { return k != 0.0; }) ||
         model == DistortionModel::FisheyeEquidistant;
}

bool CameraProfile::contains(const Vec2& pixel) const {
  return pixel.x() >= -0.5 && pixel.y() >= -0.5 && pixel.x() < width - 0.5 && pixel.y() < height - 0.5;
}

void CameraProfile::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw InvalidInput("camera '" + name + "': focal lengths must be positive");
  if (width <= 0 || height <= 0) throw InvalidInput("camera '" + name + "': sensor size must be positive");
  const double ortho = (R.transpose() * R - Mat3::Identity()).cwiseAbs().maxCoeff();
  if (!(ortho < 1e-9) || std::abs(R.determinant() - 1.0) > 1e-9)
    throw InvalidInput("camera '" + name + "': R is not a proper rotation");
  if (!t.allFinite()) throw InvalidInput("camera '" + name + "': translation is not finite");
}

Vec2 distort(const Vec2& normalized, const CameraProfile& cam) {
  return detail::distort_normalized(normalized.x(), normalized.y(), cam.model, cam.dist.data());
}

Vec2 project_camera_point(const Vec3& p_cam, const CameraProfile& cam) {
  if (!(p_cam.z() > 0.0)) throw BehindCamera("point is behind camera '" + cam.name + "'");
  const Vec2 d = distort(Vec2(p_cam.x() / p_cam.z(), p_cam.y() / p_cam.z()), cam);
  return {cam.fx * d.x() + cam.cx, cam.fy * d.y() + cam.cy};
}

Vec2 project(const Vec3& p_world, const CameraProfile& cam) {
  return project_camera_point(cam.to_camera(p_world), cam);
}

namespace {

constexpr int kUndistortIterations = 50;

Vec2 undistort_brown(const Vec2& target, const CameraProfile& cam) {
  using Jet = Eigen::AutoDiffScalar<Eigen::Vector2d>;
  Vec2 p = target;
  for (int it = 0; it < kUndistortIterations; ++it) {
    const Jet x(p.x(), 2, 0);
    const Jet y(p.y(), 2, 1);
    Jet k[5];
    for (int i = 0; i < 5; ++i) k[i] = Jet(cam.dist[i], Eigen::Vector2d::Zero());
    const auto d = detail::distort_normalized<Jet>(x, y, cam.model, k);
    const Vec2 f(d(0).value() - target.x(), d(1).value() - target.y());
    if (f.norm() < 1e-15) return p;
    Eigen::Matrix2d J;
    J.row(0) = d(0).derivatives().transpose();
    J.row(1) = d(1).derivatives().transpose();
    const Vec2 step = J.partialPivLu().solve(f);
    if (!step.allFinite()) break;
    p -= step;
    if (step.norm() < 1e-16) return p;
  }
  const Vec2 residual = distort(p, cam) - target;
  if (residual.allFinite() && residual.norm() * std::max(cam.fx, cam.fy) < 1e-9) return p;
  throw NumericError("distortion inversion did not converge for camera '" + cam.name + "'");
}

Vec2 undistort_fisheye(const Vec2& target, const CameraProfile& cam) {
  const double theta_d = target.norm();
  if (theta_d < 1e-15) return target;
  const auto& k = cam.dist;
  double theta = std::min(theta_d, M_PI_2 * 0.999);
  bool converged = false;
  for (int it = 0; it < kUndistortIterations; ++it) {
    const double t2 = theta * theta;
    const double f = theta * (1 + t2 * (k[0] + t2 * (k[1] + t2 * (k[2] + t2 * k[3])))) - theta_d;
    const double df = 1 + t2 * (3 * k[0] + t2 * (5 * k[1] + t2 * (7 * k[2] + t2 * 9 * k[3])));
    const double step = f / df;
    if (!std::isfinite(step)) break;
    theta -= step;
    if (std::abs(step) < 1e-16 || std::abs(f) < 1e-15) {
      converged = true;
      break;
    }
  }
  if (!converged || !(theta >= 0.0) || theta >= M_PI_2)
    throw NumericError("fisheye inversion did not converge for camera '" + cam.name + "'");
  return target * (std::tan(theta) / theta_d);
}

}  // namespace

Vec3 undistort(const Vec2& pixel, const CameraProfile& cam) {
  if (!pixel.allFinite()) throw InvalidInput("pixel is not finite");
  const Vec2 distorted((pixel.x() - cam.cx) / cam.fx, (pixel.y() - cam.cy) / cam.fy);
  if (!cam.has_distortion()) return {distorted.x(), distorted.y(), 1.0};
  const Vec2 p = cam.model == DistortionModel::BrownConrady ? undistort_brown(distorted, cam)
                                                            : undistort_fisheye(distorted, cam);
  return {p.x(), p.y(), 1.0};
}

Vec3 cast_ray_to_plane(const Vec2& pixel, const CameraProfile& cam, const Plane& plane) {
  const Vec3 origin = cam.center_world();
  const Vec3 dir = cam.R.transpose() * undistort(pixel, cam);
  const Vec3 n = plane.unit_normal();
  const double d = plane.d / plane.normal_norm();
  const double denom = n.dot(dir);
  if (std::abs(denom) / dir.norm() <= 1e-9) throw NoIntersection("viewing ray is parallel to the plane");
  const double s = -(n.dot(origin) + d) / denom;
  if (!(s > 0.0)) throw BehindCamera("plane intersection lies behind camera '" + cam.name + "'");
  Vec3 hit = origin + s * dir;
  // One correction step removes the cancellation error of large s.
  hit -= (n.dot(hit) + d) * n;
  return hit;
}

PixelTransfer transfer_pixel(const Vec2& pixel, const CameraProfile& from, const CameraProfile& to,
                             const Plane& plane) {
  const Vec3 world = cast_ray_to_plane(pixel, from, plane);
  PixelTransfer out;
  out.pixel = project(world, to);
  out.in_bounds = to.contains(out.pixel);
  return out;
}

double reprojection_rms(const CameraProfile& cam, const std::vector<Correspondence>& correspondences) {
  if (correspondences.empty()) throw InvalidInput("reprojection RMS of an empty correspondence set");
  double sum = 0.0;
  for (const auto& c : correspondences) sum += (project(c.world, cam) - c.pixel).squaredNorm();
  return std::sqrt(sum / static_cast<double>(correspondences.size()));
}

Mat3 rotation_from_axis_angle(const Vec3& omega) { return detail::rodrigues<double>(omega); }

Mat3 orthonormalize(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 r = svd.matrixU() * svd.matrixV().transpose();
  if (r.determinant() < 0.0) {
    Mat3 u = svd.matrixU();
    u.col(2) *= -1.0;
    r = u * svd.matrixV().transpose();
  }
  return r;
}

namespace {

using Jet = Eigen::AutoDiffScalar<Eigen::VectorXd>;

// Parameter layout: [omega(3), t(3)] + optionally [fx, fy, cx, cy, k...].
class CalibrationProblem {
 public:
  CalibrationProblem(const std::vector<Correspondence>& corr, bool fix_intrinsics, DistortionModel model)
      : corr_(corr), fix_intrinsics_(fix_intrinsics), model_(model) {}

  int distortion_count() const { return model_ == DistortionModel::BrownConrady ? 5 : 4; }
  int parameter_count() const { return fix_intrinsics_ ? 6 : 10 + distortion_count(); }
  int residual_count() const { return static_cast<int>(corr_.size()) * 2; }

  Eigen::VectorXd pack(const CameraProfile& cam) const {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(parameter_count());
    x.segment<3>(3) = cam.t;
    if (!fix_intrinsics_) {
      x(6) = cam.fx;
      x(7) = cam.fy;
      x(8) = cam.cx;
      x(9) = cam.cy;
      for (int i = 0; i < distortion_count(); ++i) x(10 + i) = cam.dist[i];
    }
    return x;
  }

  // Applies x to `base`; base.R is the linearization point of omega.
  CameraProfile unpack(const Eigen::VectorXd& x, const CameraProfile& base) const {
    CameraProfile cam = base;
    cam.R = orthonormalize(rotation_from_axis_angle(x.segment<3>(0)) * base.R);
    cam.t = x.segment<3>(3);
    if (!fix_intrinsics_) {
      cam.fx = x(6);
      cam.fy = x(7);
      cam.cx = x(8);
      cam.cy = x(9);
      for (int i = 0; i < distortion_count(); ++i) cam.dist[i] = x(10 + i);
    }
    return cam;
  }

  // Residuals (projected - observed); returns false if any point falls behind
  // the camera or the projection is not finite.
  bool residuals(const CameraProfile& cam, Eigen::VectorXd& r) const {
    r.resize(residual_count());
    for (std::size_t i = 0; i < corr_.size(); ++i) {
      const Vec3 pc = cam.to_camera(corr_[i].world);
      if (!(pc.z() > 0.0)) return false;
      const Vec2 px = project_camera_point(pc, cam) - corr_[i].pixel;
      r.segment<2>(2 * static_cast<Eigen::Index>(i)) = px;
    }
    return r.allFinite();
  }

  // Jacobian of the residuals with respect to x at omega = 0.
  Eigen::MatrixXd jacobian(const CameraProfile& cam) const {
    const int n = parameter_count();
    const Eigen::VectorXd x0 = pack(cam);
    std::vector<Jet> x(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) x[i] = Jet(x0(i), n, i);
    auto constant = [n](double v) { return Jet(v, Eigen::VectorXd::Zero(n)); };

    Eigen::Matrix<Jet, 3, 1> omega(x[0], x[1], x[2]);
    const Eigen::Matrix<Jet, 3, 3> dR = detail::rodrigues<Jet>(omega);
    Eigen::Matrix<Jet, 3, 3> R0;
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) R0(a, b) = constant(cam.R(a, b));
    const Eigen::Matrix<Jet, 3, 3> R = dR * R0;
    const Eigen::Matrix<Jet, 3, 1> t(x[3], x[4], x[5]);

    Jet fx, fy, cx, cy;
    Jet k[5];
    if (fix_intrinsics_) {
      fx = constant(cam.fx);
      fy = constant(cam.fy);
      cx = constant(cam.cx);
      cy = constant(cam.cy);
      for (int i = 0; i < 5; ++i) k[i] = constant(cam.dist[i]);
    } else {
      fx = x[6];
      fy = x[7];
      cx = x[8];
      cy = x[9];
      for (int i = 0; i < 5; ++i) k[i] = i < distortion_count() ? x[10 + i] : constant(cam.dist[i]);
    }

    Eigen::MatrixXd J(residual_count(), n);
    for (std::size_t i = 0; i < corr_.size(); ++i) {
      Eigen::Matrix<Jet, 3, 1> X;
      for (int a = 0; a < 3; ++a) X(a) = constant(corr_[i].world(a));
      const Eigen::Matrix<Jet, 3, 1> pc = R * X + t;
      const Jet xn = pc(0) / pc(2);
      const Jet yn = pc(1) / pc(2);
      const auto d = detail::distort_normalized<Jet>(xn, yn, model_, k);
      const Jet u = fx * d(0) + cx;
      const Jet v = fy * d(1) + cy;
      const auto row = 2 * static_cast<Eigen::Index>(i);
      J.row(row) = u.derivatives().transpose();
      J.row(row + 1) = v.derivatives().transpose();
    }
    return J;
  }

 private:
  const std::vector<Correspondence>& corr_;
  bool fix_intrinsics_;
  DistortionModel model_;
};

}  // namespace

CalibrationResult calibrate(const std::vector<Correspondence>& correspondences, const CameraProfile& init,
                            const CalibrationOptions& options) {
  init.validate();
  if (correspondences.size() < 6)
    throw RankError("calibration needs at least 6 correspondences, got " + std::to_string(correspondences.size()));
  for (const auto& c : correspondences)
    if (!c.world.allFinite() || !c.pixel.allFinite()) throw InvalidInput("correspondence is not finite");

  CalibrationProblem problem(correspondences, options.fix_intrinsics, init.model);
  const int n = problem.parameter_count();
  if (problem.residual_count() < n)
    throw RankError("calibration has fewer residuals than parameters");

  CameraProfile current = init;
  Eigen::VectorXd r;
  if (!problem.residuals(current, r)) throw InvalidInput("initial guess places correspondences behind the camera");

  Eigen::MatrixXd J = problem.jacobian(current);
  {
    // Column-normalized rank test; scale differences between focal lengths and
    // distortion terms would otherwise dominate the threshold.
    Eigen::MatrixXd Jn = J;
    for (int c = 0; c < n; ++c) {
      const double norm = Jn.col(c).norm();
      if (norm > 0.0) Jn.col(c) /= norm;
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Jn);
    qr.setThreshold(1e-9);
    if (qr.rank() < n)
      throw RankError("correspondences are degenerate (rank " + std::to_string(qr.rank()) + " < " +
                      std::to_string(n) + ")");
  }

  CalibrationResult result;
  double cost = r.squaredNorm();
  result.accepted_costs.push_back(cost);
  double lambda = options.initial_damping;
  bool converged = false;
  const double cost_floor = 1e-26 * static_cast<double>(correspondences.size());

  int it = 0;
  for (; it < options.max_iterations; ++it) {
    if (cost <= cost_floor) {
      converged = true;
      break;
    }
    const Eigen::MatrixXd A = J.transpose() * J;
    const Eigen::VectorXd g = J.transpose() * r;
    Eigen::VectorXd diag = A.diagonal().cwiseMax(1e-12);
    Eigen::MatrixXd damped = A;
    damped.diagonal() += lambda * diag;
    const Eigen::VectorXd step = damped.ldlt().solve(-g);

    Eigen::VectorXd x = problem.pack(current) + step;
    const CameraProfile candidate = problem.unpack(x, current);
    Eigen::VectorXd r_new;
    const bool valid = step.allFinite() && problem.residuals(candidate, r_new);
    const double new_cost = valid ? r_new.squaredNorm() : std::numeric_limits<double>::infinity();

    if (new_cost < cost) {
      const double relative = (cost - new_cost) / cost;
      current = candidate;
      r = r_new;
      cost = new_cost;
      result.accepted_costs.push_back(cost);
      lambda = std::max(lambda * options.damping_down, 1e-15);
      if (relative < options.relative_tolerance) {
        converged = true;
        ++it;
        break;
      }
      J = problem.jacobian(current);
    } else {
      lambda *= options.damping_up;
      if (lambda > 1e16) {
        // No descent direction left at machine precision: local minimum.
        converged = true;
        ++it;
        break;
      }
    }
  }

  result.camera = current;
  result.iterations = it;
  result.rms = std::sqrt(cost / static_cast<double>(correspondences.size()));
  if (!converged)
    throw CalibrationDiverged("calibration did not converge in " + std::to_string(options.max_iterations) +
                                  " iterations",
                              result);
  return result;
}

}  // namespace glasslabel
