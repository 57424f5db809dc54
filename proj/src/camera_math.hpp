#pragma once

// Scalar-generic projection math shared by the camera model and the
// calibration solver (which instantiates it with autodiff scalars).

#include <cmath>

#include <Eigen/Core>

#include "glasslabel/camera.hpp"

namespace glasslabel::detail {

template <typename T>
Eigen::Matrix<T, 2, 1> distort_normalized(const T& x, const T& y, DistortionModel model, const T* k) {
  using std::atan2;
  using std::sqrt;
  if (model == DistortionModel::BrownConrady) {
    const T r2 = x * x + y * y;
    const T radial = T(1) + k[0] * r2 + k[1] * r2 * r2 + k[4] * r2 * r2 * r2;
    const T xy = x * y;
    const T xd = x * radial + T(2) * k[2] * xy + k[3] * (r2 + T(2) * x * x);
    const T yd = y * radial + k[2] * (r2 + T(2) * y * y) + T(2) * k[3] * xy;
    return {xd, yd};
  }
  const T r2 = x * x + y * y;
  if (r2 < T(1e-30)) return {x, y};
  const T r = sqrt(r2);
  const T theta = atan2(r, T(1));
  const T t2 = theta * theta;
  const T theta_d = theta * (T(1) + t2 * (k[0] + t2 * (k[1] + t2 * (k[2] + t2 * k[3]))));
  const T scale = theta_d / r;
  return {x * scale, y * scale};
}

// Axis-angle -> rotation matrix. The small-angle branch keeps derivatives
// exact at omega = 0, which is where the calibrator linearizes.
template <typename T>
Eigen::Matrix<T, 3, 3> rodrigues(const Eigen::Matrix<T, 3, 1>& omega) {
  using std::cos;
  using std::sin;
  using std::sqrt;
  Eigen::Matrix<T, 3, 3> K;
  K << T(0), -omega(2), omega(1), omega(2), T(0), -omega(0), -omega(1), omega(0), T(0);
  const T theta2 = omega.squaredNorm();
  Eigen::Matrix<T, 3, 3> I = Eigen::Matrix<T, 3, 3>::Identity();
  if (theta2 < T(1e-16)) return I + K + T(0.5) * K * K;
  const T theta = sqrt(theta2);
  return I + (sin(theta) / theta) * K + ((T(1) - cos(theta)) / theta2) * K * K;
}

}  // namespace glasslabel::detail
