#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "egobody/core/error.hpp"

namespace egobody {

template <class T>
using Vec3 = Eigen::Matrix<T, 3, 1>;
template <class T>
using Mat3 = Eigen::Matrix<T, 3, 3>;

/// Below this squared angle the second-order Taylor expansion is used.
inline constexpr double kSmallAngle = 1e-8;

template <class T>
Mat3<T> skew(const Vec3<T>& w) {
  Mat3<T> k;
  k << T(0), -w.z(), w.y(),  //
      w.z(), T(0), -w.x(),   //
      -w.y(), w.x(), T(0);
  return k;
}

/// Axis-angle to rotation matrix. Generic in the scalar so it can be
/// differentiated with Eigen's AutoDiffScalar; no finiteness check here.
template <class T>
Mat3<T> rodrigues_t(const Vec3<T>& omega) {
  using std::cos;
  using std::sin;
  using std::sqrt;
  const T sq = omega.squaredNorm();
  const Mat3<T> k = skew<T>(omega);
  Mat3<T> r = Mat3<T>::Identity();
  if (sq < T(kSmallAngle * kSmallAngle)) {
    r += k + T(0.5) * k * k;
    return r;
  }
  const T angle = sqrt(sq);
  const T a = sin(angle) / angle;
  const T b = (T(1) - cos(angle)) / sq;
  r += a * k + b * k * k;
  return r;
}

/// Axis-angle (radians) to rotation matrix. Throws InvalidArgument on NaN/inf.
inline Eigen::Matrix3d rodrigues(const Eigen::Vector3d& omega) {
  if (!omega.allFinite()) throw InvalidArgument("rodrigues: non-finite axis-angle");
  return rodrigues_t<double>(omega);
}

/// Rotation matrix to axis-angle with angle in [0, pi].
inline Eigen::Vector3d log_rotation(const Eigen::Matrix3d& r) {
  const Eigen::AngleAxisd aa(Eigen::Quaterniond(r).normalized());
  double angle = aa.angle();
  Eigen::Vector3d axis = aa.axis();
  if (angle > std::numbers::pi) {
    angle = 2 * std::numbers::pi - angle;
    axis = -axis;
  }
  if (angle < 1e-12) return Eigen::Vector3d::Zero();
  return axis * angle;
}

/// Maps any axis-angle vector to the equivalent one with |omega| <= pi.
inline Eigen::Vector3d canonical_axis_angle(const Eigen::Vector3d& omega) {
  if (omega.norm() <= std::numbers::pi) return omega;
  return log_rotation(rodrigues(omega));
}

/// Geodesic angle between two rotations.
inline double rotation_distance(const Eigen::Matrix3d& a, const Eigen::Matrix3d& b) {
  const double c = std::clamp(((a.transpose() * b).trace() - 1.0) * 0.5, -1.0, 1.0);
  return std::acos(c);
}

}  // namespace egobody
