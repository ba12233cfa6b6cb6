#pragma once

// Shared scenarios for unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "sarplan/kinematics.hpp"
#include "sarplan/radar_constraints.hpp"
#include "sarplan/simulator.hpp"
#include "sarplan/trajectory.hpp"

namespace sarplan::testing {

inline RadarSpec desk_radar() {
  return RadarSpec{8e9, 4e9, 12.0, deg_to_rad(20.0), deg_to_rad(20.0), 0.06};
}

/// 0.5 x 0.3 m target at 0.5 m, apertures pinned to 0.8 x 0.5 m.
inline SceneSpec desk_scene() {
  SceneSpec scene;
  scene.target_dx = 0.5;
  scene.target_dy = 0.3;
  scene.standoff_range = 0.5;
  scene.aperture_length_x = 0.8;
  scene.aperture_length_y = 0.5;
  return scene;
}

inline ConstraintReport desk_report() { return build_report(desk_radar(), desk_scene()); }

/// One height slice through the target center.
inline PoseTrajectory single_slice(ScanMode mode = ScanMode::stripmap, PlanOptions options = {}) {
  options.max_slices = 1;
  const ConstraintReport report = desk_report();
  return mode == ScanMode::stripmap ? plan_stripmap(report, desk_radar(), desk_scene(), options)
                                    : plan_spotlight(report, desk_radar(), desk_scene(), options);
}

/// 200 x 200 range/cross-range grid, 5 mm cells, in the slice plane.
inline ImageGrid slice_grid(std::size_t n = 200, double spacing = 0.005) {
  return ImageGrid::centered(desk_scene().center, Eigen::Vector3d::Constant(spacing), {n, n, 1});
}

inline SarImage image_scene(const std::vector<Scatterer>& scatterers, const PoseTrajectory& trajectory,
                            const ImageGrid& grid, Window window = Window::rectangular, unsigned threads = 0) {
  SceneSpec scene = desk_scene();
  scene.scatterers = scatterers;
  const EchoSet echoes = synthesize_echoes(scene, trajectory, desk_radar(), 128);
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  return backproject(echoes, grid, {window, threads});
}

struct RoundTripStats {
  int failures = 0;
  int out_of_limits = 0;
  double max_position_error = 0.0;
  double max_orientation_error = 0.0;
  int max_iterations = 0;
};

/// FK -> IK -> FK over `count` random in-limit configurations, each solved
/// from a seed perturbed by +-0.1 rad per joint.
inline RoundTripStats ik_round_trip(const ArmModel& model, int count, std::uint64_t seed = 42) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution sign(0.5);
  RoundTripStats stats;
  for (int k = 0; k < count; ++k) {
    JointVector q;
    for (std::size_t i = 0; i < kJointCount; ++i) {
      std::uniform_real_distribution<double> d(model.joint_limits[i].min, model.joint_limits[i].max);
      q[static_cast<Eigen::Index>(i)] = d(rng);
    }
    JointVector start = q;
    for (Eigen::Index i = 0; i < 6; ++i) start[i] += sign(rng) ? 0.1 : -0.1;
    const Pose target = forward_kinematics(model, q);
    try {
      const IkSolution solution = inverse_kinematics(model, target, start);
      const Pose reached = forward_kinematics(model, solution.joints);
      stats.max_position_error = std::max(stats.max_position_error, (reached.position - target.position).norm());
      stats.max_orientation_error =
          std::max(stats.max_orientation_error, angular_distance(reached.orientation, target.orientation));
      stats.max_iterations = std::max(stats.max_iterations, solution.iterations);
      if (!model.within_limits(solution.joints)) ++stats.out_of_limits;
    } catch (const KinematicsError&) {
      ++stats.failures;
    }
  }
  return stats;
}

/// Largest relative deviation between analytic Jacobian columns and central
/// differences of FK (step h), over `count` random configurations.
inline double jacobian_fd_error(const ArmModel& model, int count, double h = 1e-6, std::uint64_t seed = 7) {
  std::mt19937_64 rng(seed);
  double worst = 0.0;
  for (int k = 0; k < count; ++k) {
    JointVector q;
    for (std::size_t i = 0; i < kJointCount; ++i) {
      std::uniform_real_distribution<double> d(model.joint_limits[i].min, model.joint_limits[i].max);
      q[static_cast<Eigen::Index>(i)] = d(rng);
    }
    const Jacobian analytic = geometric_jacobian(model, q);
    for (Eigen::Index j = 0; j < 6; ++j) {
      JointVector plus = q, minus = q;
      plus[j] += h;
      minus[j] -= h;
      const Eigen::Isometry3d tp = forward_transform(model, plus);
      const Eigen::Isometry3d tm = forward_transform(model, minus);
      Eigen::Matrix<double, 6, 1> numeric;
      numeric.head<3>() = (tp.translation() - tm.translation()) / (2.0 * h);
      // Angular velocity from the skew part of dR/dq * R^T.
      const Eigen::Matrix3d dr = (tp.linear() - tm.linear()) / (2.0 * h);
      const Eigen::Matrix3d skew = dr * forward_transform(model, q).linear().transpose();
      numeric.tail<3>() = Eigen::Vector3d(skew(2, 1) - skew(1, 2), skew(0, 2) - skew(2, 0), skew(1, 0) - skew(0, 1)) / 2.0;
      const double scale = std::max(analytic.col(j).norm(), 1e-3);
      worst = std::max(worst, (analytic.col(j) - numeric).norm() / scale);
    }
  }
  return worst;
}

}  // namespace sarplan::testing
