#pragma once

#include <cmath>
#include <memory>

#include "fabsim/kinematics.hpp"
#include "fabsim/trajopt/problem.hpp"

namespace fabsim::ocp {

// Whole-body state x = [base x, base y, base yaw, q1..q6] and control
// u = [forward speed v, yaw rate w, qdot1..qdot6]. The base is a unicycle:
// lateral velocity is identically zero, so every policy in this control
// space respects the non-holonomic track constraint by construction.
inline constexpr int kWbStateDim = 9;
inline constexpr int kWbControlDim = 8;

inline VecX pack_state(const kin::RobotState& s) {
  VecX x(kWbStateDim);
  x << s.base.x, s.base.y, s.base.theta, s.q;
  return x;
}

inline kin::RobotState unpack_state(const VecX& x) {
  kin::RobotState s;
  s.base = geom::Pose2(x[0], x[1], x[2]);
  s.q = x.segment<6>(3);
  return s;
}

class WholeBodyDynamics final : public Rk4Dynamics {
 public:
  WholeBodyDynamics(kin::RobotModel model, double dt)
      : Rk4Dynamics(dt), model_(std::move(model)) {}

  int state_dim() const override { return kWbStateDim; }
  int control_dim() const override { return kWbControlDim; }

  VecX flow(const VecX& x, const VecX& u) const override {
    VecX dx(kWbStateDim);
    const double th = x[2];
    dx[0] = u[0] * std::cos(th);
    dx[1] = u[0] * std::sin(th);
    dx[2] = u[1];
    dx.segment<6>(3) = u.segment<6>(2);
    return dx;
  }

  const kin::RobotModel& model() const { return model_; }

 private:
  kin::RobotModel model_;
};

// End-effector position hold as a velocity-level equality with Baumgarte
// stabilization:  c(x,u) = J_p(x) G(x) u + gain * (p_ee(x) - p*) = 0.
// c depends on the controls, so the projected backward pass can enforce it
// and the resulting gains stay compliant with it.
class EePositionHold final : public StageConstraint {
 public:
  EePositionHold(kin::RobotModel model, geom::Vec3 p_star, double gain = 10.0)
      : model_(std::move(model)), p_star_(std::move(p_star)), gain_(gain) {}

  int dim() const override { return 3; }

  VecX eval(const VecX& x, const VecX& u, int) const override {
    Eigen::Matrix<double, 3, 8> D;
    geom::Vec3 p_ee;
    control_map(x, D, p_ee);
    return D * u + gain_ * (p_ee - p_star_);
  }

  ConstraintLin linearize(const VecX& x, const VecX& u, int t) const override {
    ConstraintLin l;
    Eigen::Matrix<double, 3, 8> D;
    geom::Vec3 p_ee;
    control_map(x, D, p_ee);
    l.D = D;
    l.e = D * u + gain_ * (p_ee - p_star_);
    // State Jacobian by one-sided differences; D is exact, so only the
    // x-dependence of the velocity map and the Baumgarte term remain.
    l.C.resize(3, kWbStateDim);
    const double h = 1e-6;
    VecX xp = x;
    for (int i = 0; i < kWbStateDim; ++i) {
      xp[i] += h;
      l.C.col(i) = (eval(xp, u, t) - l.e) / h;
      xp[i] = x[i];
    }
    return l;
  }

  const geom::Vec3& target() const { return p_star_; }

 private:
  // D = J_p G : world EE velocity per unit control.
  void control_map(const VecX& x, Eigen::Matrix<double, 3, 8>& D, geom::Vec3& p_ee) const {
    const geom::Pose2 base(x[0], x[1], x[2]);
    const kin::Vec6 q = x.segment<6>(3);
    const auto J = kin::jacobian_at(model_, base, q);
    p_ee = kin::ee_pose_at(model_, base, q).t;
    const auto Jp = J.topRows<3>();
    D.col(0) = Jp.col(0) * std::cos(x[2]) + Jp.col(1) * std::sin(x[2]);
    D.col(1) = Jp.col(2);
    D.rightCols<6>() = Jp.rightCols<6>();
  }

  kin::RobotModel model_;
  geom::Vec3 p_star_;
  double gain_;
};

// Quadratic tracking cost plus a soft joint-limit box penalty.
class WholeBodyStageCost final : public StageCost {
 public:
  WholeBodyStageCost(MatX Q, MatX R, VecX x_ref, kin::RobotModel model, double w_limit = 100.0,
                     double limit_margin = 0.05)
      : Q_(std::move(Q)), R_(std::move(R)), x_ref_(std::move(x_ref)), model_(std::move(model)),
        w_limit_(w_limit), margin_(limit_margin) {}

  double eval(const VecX& x, const VecX& u, int) const override {
    const VecX dx = x - x_ref_;
    double c = 0.5 * dx.dot(Q_ * dx) + 0.5 * u.dot(R_ * u);
    for (int i = 0; i < 6; ++i) c += 0.5 * w_limit_ * hinge(x[3 + i], i) * hinge(x[3 + i], i);
    return c;
  }

  StageQuad quadratize(const VecX& x, const VecX& u, int t) const override {
    StageQuad s;
    s.c = eval(x, u, t);
    const VecX dx = x - x_ref_;
    s.qx = Q_ * dx;
    s.ru = R_ * u;
    s.Qxx = Q_;
    s.Ruu = R_;
    for (int i = 0; i < 6; ++i) {
      const double hv = hinge(x[3 + i], i);
      if (hv == 0.0) continue;
      const double sign = x[3 + i] > 0.5 * (model_.limits[i].lower + model_.limits[i].upper)
                              ? 1.0
                              : -1.0;
      s.qx[3 + i] += w_limit_ * hv * sign;
      s.Qxx(3 + i, 3 + i) += w_limit_;
    }
    return s;
  }

 private:
  double hinge(double q, int i) const {
    const double lo = model_.limits[i].lower + margin_;
    const double hi = model_.limits[i].upper - margin_;
    if (q < lo) return lo - q;
    if (q > hi) return q - hi;
    return 0.0;
  }

  MatX Q_, R_;
  VecX x_ref_;
  kin::RobotModel model_;
  double w_limit_;
  double margin_;
};

struct EeHoldWeights {
  double r_v = 1.0;          // forward speed effort
  double r_w = 1.0;          // yaw rate effort
  double r_qdot = 0.2;       // joint speed effort
  double qf_base_xy = 5000.0;
  double qf_base_yaw = 2500.0;
  double qf_arm = 0.5;
  double q_base_xy = 2.0;    // running pull toward the goal
  double q_base_yaw = 1.0;
  // Position-error feedback in the velocity-level hold constraint. Larger
  // values cut the intra-step drift of the held point (the plant holds each
  // control for dt) at the price of a stiffer solve.
  double baumgarte_gain = 40.0;
};

// Fig-5-style task: move the base to `goal` while the end effector stays at
// its initial position. Returns the problem and the held point.
inline OCProblem make_ee_hold_problem(const kin::RobotModel& model, const kin::RobotState& start,
                                      const geom::Pose2& goal, int horizon, double dt,
                                      const EeHoldWeights& w = {}) {
  OCProblem pr;
  pr.horizon_steps = horizon;
  pr.dt = dt;
  pr.dynamics = std::make_shared<WholeBodyDynamics>(model, dt);

  VecX x_goal = pack_state(start);
  x_goal[0] = goal.x;
  x_goal[1] = goal.y;
  x_goal[2] = goal.theta;

  MatX Q = MatX::Zero(kWbStateDim, kWbStateDim);
  Q(0, 0) = Q(1, 1) = w.q_base_xy;
  Q(2, 2) = w.q_base_yaw;
  MatX R = MatX::Zero(kWbControlDim, kWbControlDim);
  R(0, 0) = w.r_v;
  R(1, 1) = w.r_w;
  for (int i = 0; i < 6; ++i) R(2 + i, 2 + i) = w.r_qdot;
  pr.running_cost = std::make_shared<WholeBodyStageCost>(Q, R, x_goal, model);

  MatX Qf = MatX::Zero(kWbStateDim, kWbStateDim);
  Qf(0, 0) = Qf(1, 1) = w.qf_base_xy;
  Qf(2, 2) = w.qf_base_yaw;
  for (int i = 0; i < 6; ++i) Qf(3 + i, 3 + i) = w.qf_arm;
  pr.final_cost = std::make_shared<QuadraticFinalCost>(Qf, x_goal);

  const geom::Vec3 p_star = kin::forward_kinematics(model, start).t;
  pr.eq_constraints.push_back(std::make_shared<EePositionHold>(model, p_star, w.baumgarte_gain));
  pr.x0 = pack_state(start);
  return pr;
}

// Drive-to-pose task without the end-effector constraint (station moves).
inline OCProblem make_drive_problem(const kin::RobotModel& model, const kin::RobotState& start,
                                    const geom::Pose2& goal, int horizon, double dt,
                                    double qf = 400.0, double q_run = 2.0) {
  OCProblem pr;
  pr.horizon_steps = horizon;
  pr.dt = dt;
  pr.dynamics = std::make_shared<WholeBodyDynamics>(model, dt);

  VecX x_goal = pack_state(start);
  x_goal[0] = goal.x;
  x_goal[1] = goal.y;
  x_goal[2] = goal.theta;

  MatX Q = MatX::Zero(kWbStateDim, kWbStateDim);
  Q(0, 0) = Q(1, 1) = q_run;
  Q(2, 2) = 0.5 * q_run;
  for (int i = 0; i < 6; ++i) Q(3 + i, 3 + i) = 0.5;  // keep the arm posture while driving
  MatX R = MatX::Zero(kWbControlDim, kWbControlDim);
  R(0, 0) = 1.0;
  R(1, 1) = 1.0;
  for (int i = 0; i < 6; ++i) R(2 + i, 2 + i) = 0.5;
  pr.running_cost = std::make_shared<WholeBodyStageCost>(Q, R, x_goal, model);

  MatX Qf = MatX::Zero(kWbStateDim, kWbStateDim);
  Qf(0, 0) = Qf(1, 1) = qf;
  Qf(2, 2) = 0.5 * qf;
  for (int i = 0; i < 6; ++i) Qf(3 + i, 3 + i) = 1.0;
  pr.final_cost = std::make_shared<QuadraticFinalCost>(Qf, x_goal);
  pr.x0 = pack_state(start);
  return pr;
}

}  // namespace fabsim::ocp
