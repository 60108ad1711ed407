#include "fabsim/planner/stomp.hpp"

#include <gtest/gtest.h>

#include "fabsim/planner/obstacles.hpp"

using namespace fabsim;
using namespace fabsim::planner;
using geom::Pose2;
using geom::Vec3;
using kin::Vec6;

namespace {

const kin::RobotModel kModel = kin::default_model();
const Pose2 kBase{};

PathProblem arc_problem() {
  PathProblem p;
  p.start << -0.9, 0.35, 0.45, 0.0, 0.9, 0.0;
  p.goal << 0.9, 0.35, 0.45, 0.0, 0.9, 0.0;
  p.waypoints = 24;
  return p;
}

// Small sphere centred on the end-effector's midpoint position of the
// straight-line joint interpolation, so that interpolation must collide.
ObstacleScene midpoint_sphere_scene(const PathProblem& p) {
  const Vec6 mid = 0.5 * (p.start + p.goal);
  ObstacleScene scene;
  Sphere s;
  s.center = kin::ee_pose_at(kModel, kBase, mid).t;
  s.radius = 0.18;
  scene.spheres.push_back(s);
  scene.clearance = 0.01;
  return scene;
}

}  // namespace

TEST(SignedClearance, EmptySceneGivesLargeCap) {
  ObstacleScene scene;
  EXPECT_DOUBLE_EQ(signed_clearance(scene, kModel, kBase, Vec6::Zero()),
                   ObstacleScene::kEmptyDistance);
}

TEST(SignedClearance, PointOnSurfaceIsZero) {
  // Put a sphere surface exactly at the flange position; clearance 0.
  const Vec6 q = Vec6::Zero();
  const Vec3 flange = kin::ee_pose_at(kModel, kBase, q).t;
  ObstacleScene scene;
  scene.spheres.push_back({flange + Vec3(0.0, 0.3, 0.0), 0.3});
  EXPECT_NEAR(signed_clearance(scene, kModel, kBase, q), 0.0, 1e-9);
}

TEST(SignedClearance, MatchesBruteForceOracle) {
  Rng rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    ObstacleScene scene;
    const int ns = 1 + static_cast<int>(rng.uniform(0, 3));
    for (int i = 0; i < ns; ++i) {
      scene.spheres.push_back({Vec3(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(0, 2)),
                               rng.uniform(0.1, 0.5)});
    }
    const Vec3 lo(rng.uniform(-2, 0), rng.uniform(-2, 0), rng.uniform(0, 1));
    scene.boxes.push_back({lo, lo + Vec3(rng.uniform(0.2, 1), rng.uniform(0.2, 1),
                                         rng.uniform(0.2, 1))});
    scene.clearance = rng.uniform(0.0, 0.1);

    Vec6 q;
    for (int i = 0; i < 6; ++i) {
      q[i] = rng.uniform(kModel.limits[i].lower + 0.1, kModel.limits[i].upper - 0.1);
    }

    // Brute force over the same sample points and every obstacle.
    double expect = std::numeric_limits<double>::infinity();
    for (const auto& p : kin::link_points(kModel, kBase, q, 10)) {
      for (const auto& s : scene.spheres) expect = std::min(expect, sphere_distance(s, p));
      for (const auto& b : scene.boxes) expect = std::min(expect, aabb_distance(b, p));
    }
    expect -= scene.clearance;
    EXPECT_NEAR(signed_clearance(scene, kModel, kBase, q), expect, 1e-9);
  }
}

TEST(PlanStomp, EmptySceneReturnsSmoothnessOptimum) {
  const PathProblem p = arc_problem();
  const ObstacleScene empty;
  const StompResult r = plan_stomp(p, empty, kModel, kBase, 7);
  ASSERT_TRUE(r.success);

  // Independent banded-system oracle: minimize sum of squared inner
  // accelerations with clamped endpoints, per joint.
  const int M = p.waypoints, F = M - 2;
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(F, F);
  for (int i = 0; i < F; ++i) {
    A(i, i) = -2.0;
    if (i > 0) A(i, i - 1) = 1.0;
    if (i + 1 < F) A(i, i + 1) = 1.0;
  }
  const Eigen::MatrixXd R = A.transpose() * A;
  for (int j = 0; j < 6; ++j) {
    Eigen::VectorXd b = Eigen::VectorXd::Zero(F);
    // boundary contributions of the clamped endpoints to A' A theta = -A' b
    Eigen::VectorXd bc = Eigen::VectorXd::Zero(F);
    bc[0] = p.start[j];
    bc[F - 1] = p.goal[j];
    const Eigen::VectorXd expect = R.ldlt().solve(A.transpose() * -bc);
    // A theta + bc is the acceleration vector: row 0 contains q0 (start).
    for (int i = 0; i < F; ++i) {
      EXPECT_NEAR(r.path(i + 1, j), expect[i], 1e-6);
    }
  }
}

TEST(PlanStomp, StartEqualsGoalIsZeroCost) {
  PathProblem p = arc_problem();
  p.goal = p.start;
  const ObstacleScene empty;
  const StompResult r = plan_stomp(p, empty, kModel, kBase, 3);
  ASSERT_TRUE(r.success);
  EXPECT_NEAR(r.cost, 0.0, 1e-12);
  for (int i = 0; i < r.path.rows(); ++i) {
    EXPECT_LE((Vec6(r.path.row(i)) - p.start).norm(), 1e-12);
  }
}

TEST(PlanStomp, AvoidsMidpointSphereThatDefeatsStraightLine) {
  const PathProblem p = arc_problem();
  const ObstacleScene scene = midpoint_sphere_scene(p);

  // The straight-line interpolation collides (checked with the same
  // collision checker the planner uses).
  Eigen::MatrixXd straight(p.waypoints, 6);
  for (int i = 0; i < p.waypoints; ++i) {
    const double f = static_cast<double>(i) / (p.waypoints - 1);
    straight.row(i) = ((1.0 - f) * p.start + f * p.goal).transpose();
  }
  EXPECT_GT(max_penetration_on_path(straight, scene, kModel, kBase), 0.0);

  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const StompResult r = plan_stomp(p, scene, kModel, kBase, seed);
    ASSERT_TRUE(r.success) << "seed " << seed;
    EXPECT_DOUBLE_EQ(max_penetration_on_path(r.path, scene, kModel, kBase), 0.0)
        << "seed " << seed;
    EXPECT_LE((Vec6(r.path.row(0)) - p.start).norm(), 1e-12);
    EXPECT_LE((Vec6(r.path.row(p.waypoints - 1)) - p.goal).norm(), 1e-12);
  }
}

TEST(PlanStomp, CostHistoryNonIncreasingFixedSeed) {
  const PathProblem p = arc_problem();
  const ObstacleScene scene = midpoint_sphere_scene(p);
  StompOptions opt;
  opt.max_iterations = 120;
  const StompResult r = plan_stomp(p, scene, kModel, kBase, 42, opt);
  ASSERT_GE(r.cost_history.size(), 2u);
  for (std::size_t i = 1; i < r.cost_history.size(); ++i) {
    EXPECT_LE(r.cost_history[i], r.cost_history[i - 1] + 1e-15);
  }
}

TEST(PlanStomp, DeterministicForFixedSeed) {
  const PathProblem p = arc_problem();
  const ObstacleScene scene = midpoint_sphere_scene(p);
  const StompResult a = plan_stomp(p, scene, kModel, kBase, 5);
  const StompResult b = plan_stomp(p, scene, kModel, kBase, 5);
  ASSERT_EQ(a.path.rows(), b.path.rows());
  for (int i = 0; i < a.path.rows(); ++i) {
    for (int j = 0; j < 6; ++j) {
      EXPECT_EQ(a.path(i, j), b.path(i, j));  // bitwise
    }
  }
}

// Tool pitch is q2 + q3 + q5 measured from the horizontal home, so the
// axis points straight down when the sum equals pi/2.
constexpr double kQ5Vertical = 1.5707963267948966 - 0.6 - 0.4;

TEST(PlanStomp, ConstraintProjectionIsIdempotent) {
  // Tool-axis-vertical manifold: project a feasible path and expect no
  // change beyond 1e-9.
  PathProblem p;
  p.start << 0.3, 0.6, 0.4, 0.0, kQ5Vertical, 0.0;
  p.goal = p.start;
  const auto con = std::make_shared<ToolAxisVertical>(kModel, kBase);
  ASSERT_LE(con->eval(p.start).cwiseAbs().maxCoeff(), 1e-6)
      << "test setup: start must satisfy the constraint";
  Vec6 q = p.start;
  const Vec6 projected = planner::detail::project_waypoint(*con, q, 5, 1e-3, kModel);
  EXPECT_LE((projected - q).norm(), 1e-9);
}

TEST(PlanStomp, TaskConstraintHoldsAlongPath) {
  // Keep the tool axis vertical while translating the arm sideways.
  PathProblem p;
  p.start << -0.5, 0.6, 0.4, 0.0, kQ5Vertical, 0.0;
  p.goal << 0.5, 0.6, 0.4, 0.0, kQ5Vertical, 0.0;
  p.waypoints = 16;
  p.task_constraint = std::make_shared<ToolAxisVertical>(kModel, kBase);
  const ObstacleScene empty;
  const StompResult r = plan_stomp(p, empty, kModel, kBase, 11);
  ASSERT_TRUE(r.success);
  for (int i = 0; i < r.path.rows(); ++i) {
    EXPECT_LE(p.task_constraint->eval(r.path.row(i)).cwiseAbs().maxCoeff(), 1e-3);
  }
}

TEST(PlanStomp, StartInCollisionIsConfigurationError) {
  PathProblem p = arc_problem();
  ObstacleScene scene;
  scene.spheres.push_back({kin::ee_pose_at(kModel, kBase, p.start).t, 0.2});
  EXPECT_THROW(plan_stomp(p, scene, kModel, kBase, 1), ConfigurationError);
}
