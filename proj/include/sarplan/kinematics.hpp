#pragma once

// Forward and inverse kinematics of a 6-revolute serial arm described by
// standard Denavit-Hartenberg rows, plus trajectory-level solving and
// end-effector workspace checks.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <istream>
#include <numbers>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <Eigen/LU>

#include "sarplan/errors.hpp"
#include "sarplan/geometry.hpp"
#include "sarplan/trajectory.hpp"

namespace sarplan {

inline constexpr std::size_t kJointCount = 6;

using JointVector = Eigen::Matrix<double, 6, 1>;
using Jacobian = Eigen::Matrix<double, 6, 6>;

/// One standard DH row: T = Rz(q + angle_offset) Tz(offset) Tx(length) Rx(twist).
struct DhRow {
  double link_twist = 0.0;
  double link_length = 0.0;
  double link_offset = 0.0;
  double joint_angle_offset = 0.0;
};

struct JointLimit {
  double min = -std::numbers::pi;
  double max = std::numbers::pi;
};

struct ArmModel {
  std::string name = "custom";
  std::array<DhRow, kJointCount> dh_rows{};
  std::array<JointLimit, kJointCount> joint_limits{};
  /// Flange to antenna phase center.
  Eigen::Isometry3d tool_transform = Eigen::Isometry3d::Identity();
  double joint_rate_limit = 1.5;  // rad/s, every joint
  /// Reach annulus of the end-effector about the base origin.
  double min_reach = 0.0;
  double max_reach = 0.0;
  JointVector home = JointVector::Zero();

  /// Upper bound on the distance from the base origin to the tool point.
  double chain_length() const {
    double total = 0.0;
    for (const DhRow& row : dh_rows) total += std::hypot(row.link_length, row.link_offset);
    return total + tool_transform.translation().norm();
  }

  void validate() const {
    for (std::size_t i = 0; i < kJointCount; ++i) {
      if (!(joint_limits[i].min < joint_limits[i].max)) {
        throw KinematicsError("joint " + std::to_string(i + 1) + ": limit min must be < max");
      }
    }
    const Eigen::Matrix3d r = tool_transform.linear();
    if (std::abs(r.determinant() - 1.0) > 1e-9 || !(r.transpose() * r).isIdentity(1e-9)) {
      throw KinematicsError("tool_transform is not a proper rigid transform");
    }
    if (!(min_reach >= 0.0 && min_reach < max_reach)) {
      throw KinematicsError("reach annulus must satisfy 0 <= min_reach < max_reach");
    }
  }

  bool within_limits(const JointVector& q, double slack = 0.0) const {
    for (std::size_t i = 0; i < kJointCount; ++i) {
      if (q[i] < joint_limits[i].min - slack || q[i] > joint_limits[i].max + slack) return false;
    }
    return true;
  }

  JointVector clamp(JointVector q) const {
    for (std::size_t i = 0; i < kJointCount; ++i) q[i] = std::clamp(q[i], joint_limits[i].min, joint_limits[i].max);
    return q;
  }
};

/// Approximation of a bench-top 5-axis articulated arm with an added wrist
/// roll. The geometry is not taken from a datasheet: it is sized so the
/// default scene's scan plane lies well inside the workspace.
inline ArmModel default_arm_model() {
  constexpr double pi = std::numbers::pi;
  ArmModel model;
  model.name = "r17-like-approximate";
  model.dh_rows = {{
      {pi / 2, 0.0, 0.5, 0.0},
      {0.0, 0.45, 0.0, 0.0},
      {pi / 2, 0.0, 0.0, pi / 2},
      {-pi / 2, 0.0, 0.45, 0.0},
      {pi / 2, 0.0, 0.0, 0.0},
      {0.0, 0.0, 0.08, 0.0},
  }};
  model.joint_limits = {{
      {deg_to_rad(-170.0), deg_to_rad(170.0)},
      {deg_to_rad(-60.0), deg_to_rad(190.0)},
      {deg_to_rad(-160.0), deg_to_rad(160.0)},
      {deg_to_rad(-170.0), deg_to_rad(170.0)},
      {deg_to_rad(-150.0), deg_to_rad(150.0)},
      {deg_to_rad(-170.0), deg_to_rad(170.0)},
  }};
  // Antenna phase center 10 cm out along the flange approach axis; the
  // bracket tilts the boresight (tool y) 30 degrees off that axis.
  model.tool_transform = Eigen::Isometry3d::Identity();
  model.tool_transform.linear() = Eigen::AngleAxisd(pi / 3, Eigen::Vector3d::UnitX()).toRotationMatrix();
  model.tool_transform.translation() = Eigen::Vector3d(0.0, 0.0, 0.10);
  model.min_reach = 0.10;
  model.max_reach = model.chain_length();
  // Elbow up, antenna level and facing +y at the default scan-plane center.
  model.home << pi / 2, deg_to_rad(19.876546), deg_to_rad(-119.99748), 0.0, deg_to_rad(130.12093), pi / 2;
  return model;
}

inline Eigen::Isometry3d dh_transform(const DhRow& row, double joint_angle) {
  Eigen::Isometry3d t = Eigen::Isometry3d::Identity();
  t.rotate(Eigen::AngleAxisd(joint_angle + row.joint_angle_offset, Eigen::Vector3d::UnitZ()));
  t.translate(Eigen::Vector3d(row.link_length, 0.0, row.link_offset));
  t.rotate(Eigen::AngleAxisd(row.link_twist, Eigen::Vector3d::UnitX()));
  return t;
}

/// Base-to-joint frames: frames[0] is the base, frames[i] the frame after
/// joint i, frames[6] the flange.
inline std::array<Eigen::Isometry3d, kJointCount + 1> link_frames(const ArmModel& model, const JointVector& q) {
  std::array<Eigen::Isometry3d, kJointCount + 1> frames;
  frames[0] = Eigen::Isometry3d::Identity();
  for (std::size_t i = 0; i < kJointCount; ++i) frames[i + 1] = frames[i] * dh_transform(model.dh_rows[i], q[i]);
  return frames;
}

inline Eigen::Isometry3d forward_transform(const ArmModel& model, const JointVector& q) {
  return link_frames(model, q)[kJointCount] * model.tool_transform;
}

inline Pose forward_kinematics(const ArmModel& model, const JointVector& q) {
  const Eigen::Isometry3d t = forward_transform(model, q);
  Eigen::Quaterniond orientation(t.linear());
  orientation.normalize();
  return {t.translation(), orientation};
}

/// Geometric Jacobian of the tool point: rows 0-2 linear velocity, rows 3-5
/// angular velocity, both in the base frame.
inline Jacobian geometric_jacobian(const ArmModel& model, const JointVector& q) {
  const auto frames = link_frames(model, q);
  const Eigen::Vector3d tip = (frames[kJointCount] * model.tool_transform).translation();
  Jacobian jacobian;
  for (std::size_t i = 0; i < kJointCount; ++i) {
    const Eigen::Vector3d axis = frames[i].linear().col(2);
    const Eigen::Vector3d origin = frames[i].translation();
    jacobian.block<3, 1>(0, static_cast<Eigen::Index>(i)) = axis.cross(tip - origin);
    jacobian.block<3, 1>(3, static_cast<Eigen::Index>(i)) = axis;
  }
  return jacobian;
}

/// Yoshikawa measure sqrt(det(J J^T)).
inline double manipulability(const Jacobian& jacobian) {
  return std::sqrt(std::max(0.0, (jacobian * jacobian.transpose()).determinant()));
}

/// Stacked position / rotation-vector error of `current` relative to `target`.
inline Eigen::Matrix<double, 6, 1> pose_error(const Pose& target, const Pose& current) {
  Eigen::Matrix<double, 6, 1> error;
  error.head<3>() = target.position - current.position;
  error.tail<3>() = rotation_error(target.orientation, current.orientation);
  return error;
}

struct IkOptions {
  double damping = 0.05;
  /// Below this error norm the damping shrinks in proportion to the error,
  /// so the final iterations converge like Gauss-Newton.
  double damping_fade_error = 1e-2;
  int max_iterations = 200;
  double tolerance = 1e-8;  // combined error norm
  double singularity_threshold = 1e-4;
  double max_step = 0.5;  // rad, joint-space step norm per iteration
};

struct IkSolution {
  JointVector joints = JointVector::Zero();
  int iterations = 0;
  double residual = 0.0;
};

/// Damped least-squares IK with per-iteration limit clamping:
/// dq = J^T (J J^T + damping^2 I)^-1 e.
inline IkSolution inverse_kinematics(const ArmModel& model, const Pose& target, const JointVector& seed,
                                     const IkOptions& options = {}) {
  JointVector q = model.clamp(seed);
  Eigen::Matrix<double, 6, 1> error = pose_error(target, forward_kinematics(model, q));
  double residual = error.norm();
  JointVector best = q;
  double best_residual = residual;

  int iteration = 0;
  for (; iteration < options.max_iterations && residual >= options.tolerance; ++iteration) {
    const Jacobian jacobian = geometric_jacobian(model, q);
    const double damping = options.damping * std::min(1.0, residual / options.damping_fade_error);
    const Eigen::Matrix<double, 6, 6> normal =
        jacobian * jacobian.transpose() + damping * damping * Jacobian::Identity();
    JointVector step = jacobian.transpose() * normal.partialPivLu().solve(error);
    const double step_norm = step.norm();
    if (step_norm > options.max_step) step *= options.max_step / step_norm;
    q = model.clamp(q + step);
    error = pose_error(target, forward_kinematics(model, q));
    residual = error.norm();
    if (residual < best_residual) {
      best_residual = residual;
      best = q;
    }
  }
  if (best_residual >= options.tolerance) {
    const double measure = manipulability(geometric_jacobian(model, best));
    const bool singular = measure < options.singularity_threshold;
    std::string message = "pose unreachable: residual " + std::to_string(best_residual) + " after " +
                          std::to_string(iteration) + " iterations";
    if (singular) message += " (singular configuration, manipulability " + std::to_string(measure) + ")";
    throw UnreachablePoseError(message, best_residual, measure, singular);
  }
  return {best, iteration, best_residual};
}

struct JointSample {
  double time = 0.0;
  JointVector joints = JointVector::Zero();
};

struct JointTrajectory {
  std::vector<JointSample> samples;
};

/// Largest joint change allowed between consecutive samples before the
/// solution is treated as a branch flip.
inline constexpr double kBranchFlipThreshold = std::numbers::pi / 2;

/// IK for a target far from the seed: walk the tool along the straight line
/// (and slerp) from FK(seed) to the target, solving each intermediate pose
/// from the previous solution. Falls back to this only when the direct solve
/// fails.
inline IkSolution inverse_kinematics_approach(const ArmModel& model, const Pose& target, const JointVector& seed,
                                              const IkOptions& options = {}, int waypoints = 20) {
  try {
    return inverse_kinematics(model, target, seed, options);
  } catch (const UnreachablePoseError&) {
  }
  const Pose start = forward_kinematics(model, model.clamp(seed));
  JointVector q = model.clamp(seed);
  int total_iterations = 0;
  for (int k = 1; k < waypoints; ++k) {
    const double s = static_cast<double>(k) / waypoints;
    const Pose waypoint{start.position + s * (target.position - start.position),
                        start.orientation.slerp(s, target.orientation)};
    IkSolution step = inverse_kinematics(model, waypoint, q, options);
    q = step.joints;
    total_iterations += step.iterations;
  }
  IkSolution solution = inverse_kinematics(model, target, q, options);
  solution.iterations += total_iterations;
  return solution;
}

/// Sequential IK seeded by the previous solution. The first sample is
/// reached from `seed` through `inverse_kinematics_approach`.
inline JointTrajectory solve_trajectory(const ArmModel& model, const PoseTrajectory& trajectory,
                                        const JointVector& seed, const IkOptions& options = {}) {
  model.validate();
  JointTrajectory result;
  result.samples.reserve(trajectory.samples.size());
  JointVector previous = seed;
  for (std::size_t i = 0; i < trajectory.samples.size(); ++i) {
    const PoseSample& sample = trajectory.samples[i];
    const auto sample_label = [&] {
      char text[160];
      std::snprintf(text, sizeof text, "sample %zu (t=%.3f s, position %.4f %.4f %.4f)", i, sample.time,
                    sample.position.x(), sample.position.y(), sample.position.z());
      return std::string(text);
    };
    IkSolution solution;
    try {
      solution = i == 0 ? inverse_kinematics_approach(model, sample.pose(), previous, options)
                        : inverse_kinematics(model, sample.pose(), previous, options);
    } catch (const UnreachablePoseError& e) {
      throw UnreachablePoseError(sample_label() + ": " + e.what(), e.residual(), e.manipulability(), e.singular());
    }
    if (i > 0) {
      const JointSample& last = result.samples.back();
      const JointVector delta = solution.joints - last.joints;
      const double jump = delta.cwiseAbs().maxCoeff();
      if (jump > kBranchFlipThreshold) {
        throw KinematicsError(sample_label() + ": branch flip, joint jump " + std::to_string(jump) + " rad");
      }
      const double dt = sample.time - last.time;
      if (!(dt > 0.0)) throw KinematicsError(sample_label() + ": time does not increase");
      if (jump / dt > model.joint_rate_limit + 1e-12) {
        throw KinematicsError(sample_label() + ": joint rate " + std::to_string(jump / dt) + " rad/s exceeds " +
                              std::to_string(model.joint_rate_limit));
      }
    }
    result.samples.push_back({sample.time, solution.joints});
    previous = solution.joints;
  }
  return result;
}

struct AlignedBox {
  Eigen::Vector3d min = Eigen::Vector3d::Zero();
  Eigen::Vector3d max = Eigen::Vector3d::Zero();

  bool contains(const Eigen::Vector3d& p) const {
    return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
  }
};

struct WorkspaceViolation {
  std::size_t index = 0;
  std::string reason;  // "keepout" or "reach"
  std::size_t box = 0;  // keep-out box index, when reason == "keepout"
};

/// End-effector point checks only; links are not tested against the boxes.
inline std::vector<WorkspaceViolation> check_workspace(const ArmModel& model, const PoseTrajectory& trajectory,
                                                       const std::vector<AlignedBox>& keepout_boxes) {
  std::vector<WorkspaceViolation> violations;
  for (std::size_t i = 0; i < trajectory.samples.size(); ++i) {
    const Eigen::Vector3d& p = trajectory.samples[i].position;
    const double reach = p.norm();
    if (reach < model.min_reach || reach > model.max_reach) violations.push_back({i, "reach", 0});
    for (std::size_t b = 0; b < keepout_boxes.size(); ++b) {
      if (keepout_boxes[b].contains(p)) violations.push_back({i, "keepout", b});
    }
  }
  return violations;
}

inline void write_joint_csv(std::ostream& out, const JointTrajectory& trajectory) {
  out << "time_s,q1,q2,q3,q4,q5,q6\n";
  char line[256];
  for (const JointSample& s : trajectory.samples) {
    const JointVector& q = s.joints;
    std::snprintf(line, sizeof line, "%.9f,%.9f,%.9f,%.9f,%.9f,%.9f,%.9f\n", s.time, q[0], q[1], q[2], q[3], q[4],
                  q[5]);
    out << line;
  }
}

inline JointTrajectory read_joint_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || detail::strip_cr(line) != "time_s,q1,q2,q3,q4,q5,q6") {
    throw FormatError("joint CSV: missing or unexpected header");
  }
  JointTrajectory trajectory;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    line = detail::strip_cr(line);
    if (line.empty()) continue;
    const auto v = detail::parse_csv_numbers(line, 7, line_no);
    JointSample s;
    s.time = v[0];
    for (std::size_t j = 0; j < kJointCount; ++j) s.joints[static_cast<Eigen::Index>(j)] = v[j + 1];
    trajectory.samples.push_back(s);
  }
  return trajectory;
}

}  // namespace sarplan
