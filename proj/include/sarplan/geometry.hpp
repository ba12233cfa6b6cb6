#pragma once

#include <cmath>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "sarplan/errors.hpp"

namespace sarplan {

/// Antenna frame at rest coincides with the world frame: x = scan direction,
/// y = boresight, z = up. Quaternions are scalar-first (w, x, y, z).
struct Pose {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Quaterniond orientation = Eigen::Quaterniond::Identity();
};

inline const Eigen::Vector3d kBoresightAxis = Eigen::Vector3d::UnitY();

inline Eigen::Vector3d boresight(const Eigen::Quaterniond& orientation) { return orientation * kBoresightAxis; }

/// Rotation whose boresight points from `from` towards `to`, keeping the
/// antenna x axis horizontal (no roll about the line of sight).
inline Eigen::Quaterniond look_at(const Eigen::Vector3d& from, const Eigen::Vector3d& to) {
  const Eigen::Vector3d direction = to - from;
  const double distance = direction.norm();
  if (!(distance > 1e-12)) {
    throw PlanError("look-at is degenerate: pose coincides with the target center");
  }
  const Eigen::Vector3d y_axis = direction / distance;
  Eigen::Vector3d x_axis = y_axis.cross(Eigen::Vector3d::UnitZ());
  if (x_axis.norm() < 1e-9) {
    throw PlanError("look-at is degenerate: line of sight is vertical");
  }
  x_axis.normalize();
  const Eigen::Vector3d z_axis = x_axis.cross(y_axis);
  Eigen::Matrix3d rotation;
  rotation.col(0) = x_axis;
  rotation.col(1) = y_axis;
  rotation.col(2) = z_axis;
  Eigen::Quaterniond q(rotation);
  q.normalize();
  if (q.w() < 0.0) q.coeffs() = -q.coeffs();
  return q;
}

/// Rotation vector (log map) of the rotation taking `from` onto `to`,
/// expressed in the world frame.
inline Eigen::Vector3d rotation_error(const Eigen::Quaterniond& to, const Eigen::Quaterniond& from) {
  Eigen::Quaterniond delta = to * from.conjugate();
  if (delta.w() < 0.0) delta.coeffs() = -delta.coeffs();
  const double vec_norm = delta.vec().norm();
  if (vec_norm < 1e-15) return 2.0 * delta.vec();
  const double angle = 2.0 * std::atan2(vec_norm, delta.w());
  return delta.vec() * (angle / vec_norm);
}

inline double angular_distance(const Eigen::Quaterniond& a, const Eigen::Quaterniond& b) {
  return rotation_error(a, b).norm();
}

}  // namespace sarplan
