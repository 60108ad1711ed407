#include "fabsim/trajopt/slq.hpp"

#include <gtest/gtest.h>

#include "fabsim/trajopt/benchmarks.hpp"
#include "fabsim/trajopt/whole_body.hpp"

using namespace fabsim;
using namespace fabsim::ocp;

namespace {

// Independent oracle: textbook discrete-time time-varying LQR backward
// recursion. Returns gains (u = -K x convention) and cost-to-go Hessians.
struct RiccatiOracle {
  std::vector<MatX> K;
  std::vector<MatX> S;
};

RiccatiOracle riccati_lqr(const MatX& A, const MatX& B, const MatX& Q, const MatX& R,
                          const MatX& Qf, int N) {
  RiccatiOracle out;
  out.K.resize(N);
  out.S.resize(N + 1);
  out.S[N] = Qf;
  for (int t = N - 1; t >= 0; --t) {
    const MatX BtS = B.transpose() * out.S[t + 1];
    const MatX G = R + BtS * B;
    out.K[t] = G.ldlt().solve(BtS * A);
    const MatX AK = A - B * out.K[t];
    out.S[t] = Q + out.K[t].transpose() * R * out.K[t] + AK.transpose() * out.S[t + 1] * AK;
    out.S[t] = 0.5 * (out.S[t] + out.S[t].transpose());
  }
  return out;
}

kin::RobotState fig5_start() {
  kin::RobotState s;
  s.q << 0.0, 0.5, 0.6, 0.0, 1.0, 0.0;
  return s;
}

}  // namespace

TEST(SolveSlq, LqMatchesRiccatiOracle) {
  const int N = 50;
  const double dt = 0.02;
  OCProblem pr = make_double_integrator(N, dt);

  auto [pol, rep] = solve_slq(pr, {});
  EXPECT_TRUE(rep.converged);
  // One accepted step reaches the LQ optimum; the next detects convergence.
  ASSERT_GE(rep.cost_history.size(), 2u);
  EXPECT_NEAR(rep.cost_history[1], rep.final_cost, 1e-9 * (1.0 + rep.final_cost));
  EXPECT_LE(rep.iterations, 2);

  MatX A(2, 2), B(2, 1);
  A << 1.0, dt, 0.0, 1.0;
  B << 0.5 * dt * dt, dt;
  MatX Q = MatX::Zero(2, 2);
  Q(0, 0) = 1.0;
  Q(1, 1) = 0.1;
  const MatX R = MatX::Constant(1, 1, 0.1);
  const RiccatiOracle oracle = riccati_lqr(A, B, Q, R, 10.0 * MatX::Identity(2, 2), N);

  ASSERT_EQ(pol.feedback_gains.size(), static_cast<std::size_t>(N));
  double worst_gain = 0.0, worst_value = 0.0;
  for (int t = 0; t < N; ++t) {
    worst_gain = std::max(worst_gain, (pol.feedback_gains[t] + oracle.K[t]).cwiseAbs().maxCoeff());
    worst_value = std::max(worst_value, (rep.value_hessians[t] - oracle.S[t]).cwiseAbs().maxCoeff());
  }
  EXPECT_LE(worst_gain, 1e-8);
  EXPECT_LE(worst_value, 1e-8);

  // Optimal cost = 0.5 x0' S0 x0 for the LQ problem.
  const double j_star = 0.5 * pr.x0.dot(oracle.S[0] * pr.x0);
  EXPECT_NEAR(rep.final_cost, j_star, 1e-8 * (1.0 + j_star));
}

TEST(SolveSlq, ZeroControlWeightIsConfigurationError) {
  OCProblem pr = make_double_integrator(20, 0.02, 1.0, 0.1, /*r=*/0.0);
  EXPECT_THROW(solve_slq(pr, {}), ConfigurationError);
}

TEST(SolveSlq, ConstraintDimensionBeyondControlsIsConfigurationError) {
  OCProblem pr = make_double_integrator(10, 0.02);
  struct FatConstraint : StageConstraint {
    int dim() const override { return 2; }  // > control dim (1)
    VecX eval(const VecX& x, const VecX&, int) const override { return x; }
  };
  pr.eq_constraints.push_back(std::make_shared<FatConstraint>());
  EXPECT_THROW(solve_slq(pr, {}), ConfigurationError);
}

TEST(SolveSlq, DivergingInitialRolloutNamesStep) {
  struct Exploding : DiscreteDynamics {
    int state_dim() const override { return 1; }
    int control_dim() const override { return 1; }
    VecX step(const VecX& x, const VecX&) const override {
      VecX y(1);
      y[0] = x[0] > 5.0 ? std::numeric_limits<double>::infinity() : 2.0 * x[0] + 1.0;
      return y;
    }
  };
  OCProblem pr;
  pr.horizon_steps = 10;
  pr.dt = 0.01;
  pr.dynamics = std::make_shared<Exploding>();
  pr.running_cost = std::make_shared<QuadraticStageCost>(MatX::Identity(1, 1),
                                                         MatX::Identity(1, 1), VecX::Zero(1),
                                                         VecX::Zero(1));
  pr.final_cost = std::make_shared<QuadraticFinalCost>(MatX::Identity(1, 1), VecX::Zero(1));
  pr.x0 = VecX::Ones(1);
  try {
    solve_slq(pr, {});
    FAIL() << "expected SolverDivergedError";
  } catch (const SolverDivergedError& e) {
    EXPECT_GE(e.step_index, 2);
    EXPECT_LE(e.step_index, 9);
  }
}

TEST(SolveSlq, EeHoldWholeBody) {
  const kin::RobotModel model = kin::default_model();
  const kin::RobotState start = fig5_start();
  const geom::Pose2 goal(1.0, 0.0, geom::kPi / 2);
  // 4-second maneuver solved in one shot.
  OCProblem pr = make_ee_hold_problem(model, start, goal, 400, 0.01);
  const geom::Vec3 p_star = kin::forward_kinematics(model, start).t;

  auto [pol, rep] = solve_slq(pr, {});
  EXPECT_TRUE(rep.converged);
  EXPECT_LT(rep.final_max_violation, 1e-4);

  // Cost history must be non-increasing over accepted steps.
  for (std::size_t i = 1; i < rep.cost_history.size(); ++i) {
    EXPECT_LE(rep.cost_history[i], rep.cost_history[i - 1] + 1e-12);
  }

  // End-effector deviation along the nominal rollout stays within 5 mm.
  double worst_dev = 0.0;
  for (const auto& x : pol.x_nom) {
    const kin::RobotState s = unpack_state(x);
    worst_dev = std::max(worst_dev,
                         (kin::ee_pose_at(model, s.base, s.q).t - p_star).norm());
  }
  EXPECT_LE(worst_dev, 5e-3);

  // The base actually performs the 1 m / 90 deg repositioning (the one-shot
  // solve trades a few cm of terminal error against effort; the receding
  // MPC closes the remainder).
  const VecX xf = pol.x_nom.back();
  EXPECT_NEAR(xf[0], goal.x, 0.05);
  EXPECT_NEAR(xf[1], goal.y, 0.05);
  EXPECT_NEAR(geom::wrap_angle(xf[2] - goal.theta), 0.0, 0.05);

  // Non-holonomy: the continuous flow has exactly zero lateral base speed.
  const WholeBodyDynamics dyn(model, 0.01);
  for (int t = 0; t < pr.horizon_steps; ++t) {
    const VecX dx = dyn.flow(pol.x_nom[t], pol.u_nom[t]);
    const double lateral = -std::sin(pol.x_nom[t][2]) * dx[0] + std::cos(pol.x_nom[t][2]) * dx[1];
    EXPECT_LE(std::abs(lateral), 1e-9);
  }

  // Projected-constraint condition: D K + C = 0 on constrained rows.
  const auto& con = *pr.eq_constraints.front();
  double worst_dkc = 0.0;
  for (int t = 0; t < pr.horizon_steps; ++t) {
    const ConstraintLin l = con.linearize(pol.x_nom[t], pol.u_nom[t], t);
    worst_dkc = std::max(
        worst_dkc, (l.D * pol.feedback_gains[t] + l.C).cwiseAbs().maxCoeff());
  }
  EXPECT_LE(worst_dkc, 1e-6);
}

TEST(Policy, NominalReproductionInvariant) {
  OCProblem pr = make_double_integrator(50, 0.02);
  auto [pol, rep] = solve_slq(pr, {});
  const Trajectory traj = rollout(pr, pol, pol.x_nom.front(), VecX());
  for (int t = 0; t <= pr.horizon_steps; ++t) {
    EXPECT_LE((traj.states[t] - pol.x_nom[t]).norm(), 1e-12);
  }
}

TEST(Rollout, FeedbackBeatsOpenLoopUnderPerturbation) {
  OCProblem pr = make_double_integrator(50, 0.02);
  auto [pol, rep] = solve_slq(pr, {});

  VecX x0 = pr.x0;
  x0[0] += 0.2;  // initial-state perturbation

  const Trajectory closed = rollout(pr, pol, x0, VecX());
  Policy open = pol;
  for (auto& K : open.feedback_gains) K.setZero();
  const Trajectory open_traj = rollout(pr, open, x0, VecX());

  EXPECT_LT(closed.states.back().norm(), open_traj.states.back().norm());
}

TEST(Rollout, SeededDisturbanceIsDeterministic)
{
  OCProblem pr = make_double_integrator(50, 0.02);
  auto [pol, rep] = solve_slq(pr, {});
  const VecX sigma = VecX::Constant(2, 0.01);
  Rng rng_a(99), rng_b(99);
  const Trajectory a = rollout(pr, pol, pr.x0, sigma, &rng_a);
  const Trajectory b = rollout(pr, pol, pr.x0, sigma, &rng_b);
  for (int t = 0; t <= pr.horizon_steps; ++t) {
    EXPECT_EQ(a.states[t], b.states[t]);  // bitwise
  }
}

TEST(SolveSlq, StateOnlyConstraintViaAugmentedLagrangian) {
  // Double integrator with a state-only waypoint: x(25) = (0.5, *).
  OCProblem pr = make_double_integrator(50, 0.02);
  struct Waypoint : StateConstraint {
    int dim() const override { return 1; }
    bool active_at(int t) const override { return t == 25; }
    VecX eval(const VecX& x, int) const override {
      VecX g(1);
      g[0] = x[0] - 0.5;
      return g;
    }
  };
  pr.state_constraints.push_back(std::make_shared<Waypoint>());
  auto [pol, rep] = solve_slq(pr, {});
  EXPECT_TRUE(rep.converged);
  EXPECT_NEAR(pol.x_nom[25][0], 0.5, 1e-4);
  EXPECT_GE(rep.al_outer_iterations, 1);
}
