#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "sarplan/kinematics.hpp"
#include "support.hpp"

using namespace sarplan;
using sarplan::testing::desk_radar;
using sarplan::testing::desk_report;
using sarplan::testing::desk_scene;

namespace {

constexpr double pi = std::numbers::pi;

/// Two unit links along x, everything else zero.
ArmModel planar_model() {
  ArmModel model;
  model.dh_rows[0].link_length = 1.0;
  model.dh_rows[1].link_length = 1.0;
  model.max_reach = 2.0;
  return model;
}

/// Independent DH composition from the textbook closed-form link matrix.
Eigen::Matrix4d reference_forward(const ArmModel& model, const JointVector& q) {
  Eigen::Matrix4d t = Eigen::Matrix4d::Identity();
  for (std::size_t i = 0; i < kJointCount; ++i) {
    const DhRow& row = model.dh_rows[i];
    const double th = q[static_cast<Eigen::Index>(i)] + row.joint_angle_offset;
    const double ct = std::cos(th), st = std::sin(th), ca = std::cos(row.link_twist), sa = std::sin(row.link_twist);
    Eigen::Matrix4d a;
    a << ct, -st * ca, st * sa, row.link_length * ct,
         st, ct * ca, -ct * sa, row.link_length * st,
         0, sa, ca, row.link_offset,
         0, 0, 0, 1;
    t = t * a;
  }
  return t * model.tool_transform.matrix();
}

JointVector random_joints(const ArmModel& model, std::mt19937_64& rng) {
  JointVector q;
  for (std::size_t i = 0; i < kJointCount; ++i) {
    std::uniform_real_distribution<double> d(model.joint_limits[i].min, model.joint_limits[i].max);
    q[static_cast<Eigen::Index>(i)] = d(rng);
  }
  return q;
}

PoseTrajectory constant_trajectory(const Pose& pose, std::size_t n, double dt) {
  PoseTrajectory t;
  for (std::size_t i = 0; i < n; ++i) t.samples.push_back({static_cast<double>(i) * dt, pose.position, pose.orientation, true});
  return t;
}

}  // namespace

TEST(ForwardKinematics, ColinearChain) {
  const Pose p = forward_kinematics(planar_model(), JointVector::Zero());
  EXPECT_TRUE(p.position.isApprox(Eigen::Vector3d(2, 0, 0), 1e-15));
  EXPECT_TRUE(p.orientation.isApprox(Eigen::Quaterniond::Identity(), 1e-15));
}

TEST(ForwardKinematics, FirstJointQuarterTurn) {
  JointVector q = JointVector::Zero();
  q[0] = pi / 2;
  EXPECT_LT((forward_kinematics(planar_model(), q).position - Eigen::Vector3d(0, 2, 0)).norm(), 1e-15);
}

TEST(ForwardKinematics, MatchesIndependentComposition) {
  const ArmModel model = default_arm_model();
  std::mt19937_64 rng(1);
  for (int k = 0; k < 500; ++k) {
    const JointVector q = random_joints(model, rng);
    const Eigen::Matrix4d expected = reference_forward(model, q);
    EXPECT_LT((forward_transform(model, q).matrix() - expected).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(ForwardKinematics, Deterministic) {
  const ArmModel model = default_arm_model();
  JointVector q;
  q << 0.1, 0.2, -0.3, 0.4, 0.5, -0.6;
  EXPECT_EQ(forward_transform(model, q).matrix(), forward_transform(model, q).matrix());
}

TEST(ForwardKinematics, DefaultHomeFacesScene) {
  const ArmModel model = default_arm_model();
  const Pose home = forward_kinematics(model, model.home);
  const SceneSpec scene = desk_scene();
  EXPECT_LT((home.position - Eigen::Vector3d(scene.center.x(), scene.center.y() - scene.standoff_range,
                                             scene.center.z()))
                .norm(),
            1e-5);
  EXPECT_LT(angular_distance(home.orientation, Eigen::Quaterniond::Identity()), 1e-5);
  EXPECT_TRUE(model.within_limits(model.home));
}

TEST(Jacobian, MatchesCentralDifferences) {
  EXPECT_LT(sarplan::testing::jacobian_fd_error(default_arm_model(), 200), 1e-5);
}

TEST(Jacobian, PlanarChainClosedForm) {
  JointVector q = JointVector::Zero();
  q[0] = 0.3;
  q[1] = 0.4;
  const Jacobian j = geometric_jacobian(planar_model(), q);
  // d/dq1 of (cos q1 + cos(q1+q2), sin q1 + sin(q1+q2)).
  EXPECT_NEAR(j(0, 0), -std::sin(0.3) - std::sin(0.7), 1e-15);
  EXPECT_NEAR(j(1, 0), std::cos(0.3) + std::cos(0.7), 1e-15);
  EXPECT_NEAR(j(0, 1), -std::sin(0.7), 1e-15);
  EXPECT_NEAR(j(5, 0), 1.0, 1e-15);
}

TEST(InverseKinematics, FixedPointNeedsNoIterations) {
  const ArmModel model = default_arm_model();
  std::mt19937_64 rng(2);
  for (int k = 0; k < 20; ++k) {
    const JointVector q = random_joints(model, rng);
    const IkSolution s = inverse_kinematics(model, forward_kinematics(model, q), q);
    EXPECT_EQ(s.iterations, 0);
    EXPECT_LT((s.joints - q).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(InverseKinematics, RoundTripOverRandomPoses) {
  const auto stats = sarplan::testing::ik_round_trip(default_arm_model(), 1000);
  EXPECT_EQ(stats.failures, 0);
  EXPECT_EQ(stats.out_of_limits, 0);
  EXPECT_LT(stats.max_position_error, 1e-6);
  EXPECT_LT(stats.max_orientation_error, 1e-6);
  EXPECT_LE(stats.max_iterations, 200);
}

TEST(InverseKinematics, BeyondReachIsUnreachable) {
  const ArmModel model = default_arm_model();
  Pose target;
  target.position = Eigen::Vector3d(2.0 * model.max_reach, 0.0, 0.5);
  try {
    inverse_kinematics(model, target, model.home);
    FAIL() << "expected UnreachablePoseError";
  } catch (const UnreachablePoseError& e) {
    EXPECT_GT(e.residual(), 1.0);
    EXPECT_GE(e.manipulability(), 0.0);
  }
}

TEST(InverseKinematics, SingularityIsReported) {
  // Fully stretched planar chain: cannot move further along x, rank deficient.
  ArmModel model = planar_model();
  Pose target;
  target.position = Eigen::Vector3d(2.5, 0.0, 0.0);
  try {
    inverse_kinematics(model, target, JointVector::Zero());
    FAIL() << "expected UnreachablePoseError";
  } catch (const UnreachablePoseError& e) {
    EXPECT_TRUE(e.singular());
    EXPECT_NE(std::string(e.what()).find("singular"), std::string::npos);
  }
}

TEST(InverseKinematics, ResultAlwaysWithinLimits) {
  const ArmModel model = default_arm_model();
  std::mt19937_64 rng(4);
  for (int k = 0; k < 200; ++k) {
    const Pose target = forward_kinematics(model, random_joints(model, rng));
    try {
      EXPECT_TRUE(model.within_limits(inverse_kinematics(model, target, random_joints(model, rng)).joints));
    } catch (const UnreachablePoseError&) {
      // Far seeds may stall; only returned solutions are constrained.
    }
  }
}

TEST(SolveTrajectory, ConstantPoseGivesConstantJoints) {
  const ArmModel model = default_arm_model();
  const Pose pose = forward_kinematics(model, model.home);
  const JointTrajectory j = solve_trajectory(model, constant_trajectory(pose, 30, 1.0 / 12.0), model.home);
  ASSERT_EQ(j.samples.size(), 30u);
  for (const JointSample& s : j.samples) EXPECT_LT((s.joints - j.samples[0].joints).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(SolveTrajectory, DeskStripmapIsSmoothAndExact) {
  const ArmModel model = default_arm_model();
  const PoseTrajectory plan = plan_stripmap(desk_report(), desk_radar(), desk_scene());
  const JointTrajectory joints = solve_trajectory(model, plan, model.home);
  ASSERT_EQ(joints.samples.size(), plan.samples.size());
  double max_step = 0.0, max_error = 0.0;
  for (std::size_t i = 0; i < joints.samples.size(); ++i) {
    EXPECT_TRUE(model.within_limits(joints.samples[i].joints));
    const Pose reached = forward_kinematics(model, joints.samples[i].joints);
    max_error = std::max(max_error, (reached.position - plan.samples[i].position).norm());
    if (i > 0) max_step = std::max(max_step, (joints.samples[i].joints - joints.samples[i - 1].joints).cwiseAbs().maxCoeff());
  }
  EXPECT_LT(max_step, 0.05);
  EXPECT_LT(max_error, 1e-6);
}

TEST(SolveTrajectory, DeskSpotlightSolves) {
  const ArmModel model = default_arm_model();
  const PoseTrajectory plan = plan_spotlight(desk_report(), desk_radar(), desk_scene());
  const JointTrajectory joints = solve_trajectory(model, plan, model.home);
  double max_orientation_error = 0.0;
  for (std::size_t i = 0; i < joints.samples.size(); i += 7) {
    max_orientation_error = std::max(
        max_orientation_error,
        angular_distance(forward_kinematics(model, joints.samples[i].joints).orientation, plan.samples[i].orientation));
  }
  EXPECT_LT(max_orientation_error, 1e-6);
}

TEST(SolveTrajectory, UnreachableSampleIsNamed) {
  const ArmModel model = default_arm_model();
  Pose far;
  far.position = Eigen::Vector3d(0.0, 10.0, 0.3);
  try {
    solve_trajectory(model, constant_trajectory(far, 3, 0.1), model.home);
    FAIL() << "expected UnreachablePoseError";
  } catch (const UnreachablePoseError& e) {
    EXPECT_NE(std::string(e.what()).find("sample 0"), std::string::npos) << e.what();
  }
}

TEST(SolveTrajectory, RateLimitAndTimeOrder) {
  const ArmModel model = default_arm_model();
  const Pose a = forward_kinematics(model, model.home);
  JointVector moved = model.home;
  moved[0] += 0.2;
  const Pose b = forward_kinematics(model, moved);
  PoseTrajectory fast;
  fast.samples = {{0.0, a.position, a.orientation, true}, {0.01, b.position, b.orientation, true}};
  EXPECT_THROW(solve_trajectory(model, fast, model.home), KinematicsError);
  PoseTrajectory backwards;
  backwards.samples = {{1.0, a.position, a.orientation, true}, {1.0, a.position, a.orientation, true}};
  EXPECT_THROW(solve_trajectory(model, backwards, model.home), KinematicsError);
}

TEST(ArmModel, ValidationRejectsBadModels) {
  ArmModel model = default_arm_model();
  model.joint_limits[2] = {0.5, 0.5};
  EXPECT_THROW(model.validate(), KinematicsError);
  model = default_arm_model();
  model.tool_transform.matrix()(0, 0) = 2.0;
  EXPECT_THROW(model.validate(), KinematicsError);
  EXPECT_NO_THROW(default_arm_model().validate());
}

TEST(Workspace, ClearPlanHasNoViolations) {
  const PoseTrajectory plan = plan_stripmap(desk_report(), desk_radar(), desk_scene());
  EXPECT_TRUE(check_workspace(default_arm_model(), plan, {}).empty());
}

TEST(Workspace, BoxAroundScanPlaneFlagsEverything) {
  const PoseTrajectory plan = sarplan::testing::single_slice();
  const AlignedBox box{Eigen::Vector3d(-5, -5, -5), Eigen::Vector3d(5, 5, 5)};
  const auto violations = check_workspace(default_arm_model(), plan, {box});
  ASSERT_EQ(violations.size(), plan.samples.size());
  for (const auto& v : violations) EXPECT_EQ(v.reason, "keepout");
}

TEST(Workspace, BoxClippingHalfTheFirstSlice) {
  const PoseTrajectory plan = sarplan::testing::single_slice();
  const AlignedBox box{Eigen::Vector3d(-1, -1, -1), Eigen::Vector3d(0.0, 1, 1)};
  std::vector<std::size_t> expected;
  for (std::size_t i = 0; i < plan.samples.size(); ++i) {
    const Eigen::Vector3d& p = plan.samples[i].position;
    if (p.x() >= -1 && p.x() <= 0.0 && p.y() >= -1 && p.y() <= 1 && p.z() >= -1 && p.z() <= 1) expected.push_back(i);
  }
  std::vector<std::size_t> flagged;
  for (const auto& v : check_workspace(default_arm_model(), plan, {box})) flagged.push_back(v.index);
  EXPECT_EQ(flagged, expected);
  EXPECT_GT(flagged.size(), plan.samples.size() / 3);
  EXPECT_LT(flagged.size(), 2 * plan.samples.size() / 3);
}

TEST(Workspace, OutsideReachAnnulus) {
  PoseTrajectory t;
  t.samples = {{0.0, Eigen::Vector3d(0, 0, 0.05), Eigen::Quaterniond::Identity(), false},
               {0.1, Eigen::Vector3d(0, 5, 0), Eigen::Quaterniond::Identity(), false}};
  const auto v = check_workspace(default_arm_model(), t, {});
  ASSERT_EQ(v.size(), 2u);
  EXPECT_EQ(v[0].reason, "reach");
  EXPECT_EQ(v[1].index, 1u);
}

TEST(JointCsv, RoundTrip) {
  JointTrajectory j;
  j.samples = {{0.0, JointVector::Constant(0.1)}, {0.5, JointVector::Constant(-0.25)}};
  std::stringstream csv;
  write_joint_csv(csv, j);
  EXPECT_EQ(csv.str().substr(0, csv.str().find('\n')), "time_s,q1,q2,q3,q4,q5,q6");
  const JointTrajectory back = read_joint_csv(csv);
  ASSERT_EQ(back.samples.size(), 2u);
  EXPECT_EQ(back.samples[1].joints, j.samples[1].joints);
  std::stringstream bad("time_s,q1\n0,1\n");
  EXPECT_THROW(read_joint_csv(bad), FormatError);
}
