#pragma once

#include <memory>
#include <vector>

#include <Eigen/Dense>

#include "fabsim/errors.hpp"

namespace fabsim::ocp {

using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

// Discrete-time transition x_{t+1} = f(x_t, u_t).
class DiscreteDynamics {
 public:
  virtual ~DiscreteDynamics() = default;
  virtual int state_dim() const = 0;
  virtual int control_dim() const = 0;
  virtual VecX step(const VecX& x, const VecX& u) const = 0;

  // A = df/dx, B = df/du. Default: central finite differences on step().
  virtual void linearize(const VecX& x, const VecX& u, MatX& A, MatX& B) const {
    const int n = state_dim(), p = control_dim();
    A.resize(n, n);
    B.resize(n, p);
    const double h = 1e-6;
    VecX xp = x, xm = x, up = u, um = u;
    for (int i = 0; i < n; ++i) {
      xp[i] += h;
      xm[i] -= h;
      A.col(i) = (step(xp, u) - step(xm, u)) / (2 * h);
      xp[i] = x[i];
      xm[i] = x[i];
    }
    for (int i = 0; i < p; ++i) {
      up[i] += h;
      um[i] -= h;
      B.col(i) = (step(x, up) - step(x, um)) / (2 * h);
      up[i] = u[i];
      um[i] = u[i];
    }
  }
};

class LinearDynamics final : public DiscreteDynamics {
 public:
  LinearDynamics(MatX A, MatX B) : A_(std::move(A)), B_(std::move(B)) {}
  int state_dim() const override { return static_cast<int>(A_.rows()); }
  int control_dim() const override { return static_cast<int>(B_.cols()); }
  VecX step(const VecX& x, const VecX& u) const override { return A_ * x + B_ * u; }
  void linearize(const VecX&, const VecX&, MatX& A, MatX& B) const override {
    A = A_;
    B = B_;
  }

 private:
  MatX A_, B_;
};

// Explicit RK4 discretization of a continuous flow x_dot = f(x, u) with
// zero-order-held controls.
class Rk4Dynamics : public DiscreteDynamics {
 public:
  explicit Rk4Dynamics(double dt) : dt_(dt) {}
  virtual VecX flow(const VecX& x, const VecX& u) const = 0;

  VecX step(const VecX& x, const VecX& u) const override {
    const VecX k1 = flow(x, u);
    const VecX k2 = flow(x + 0.5 * dt_ * k1, u);
    const VecX k3 = flow(x + 0.5 * dt_ * k2, u);
    const VecX k4 = flow(x + dt_ * k3, u);
    return x + (dt_ / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }

  double dt() const { return dt_; }

 private:
  double dt_;
};

struct StageQuad {
  double c = 0.0;
  VecX qx, ru;
  MatX Qxx, Ruu;
};

class StageCost {
 public:
  virtual ~StageCost() = default;
  virtual double eval(const VecX& x, const VecX& u, int t) const = 0;
  virtual StageQuad quadratize(const VecX& x, const VecX& u, int t) const = 0;
};

class FinalCost {
 public:
  virtual ~FinalCost() = default;
  virtual double eval(const VecX& x) const = 0;
  virtual void quadratize(const VecX& x, double& c, VecX& qx, MatX& Qxx) const = 0;
};

class QuadraticStageCost final : public StageCost {
 public:
  QuadraticStageCost(MatX Q, MatX R, VecX x_ref, VecX u_ref)
      : Q_(std::move(Q)), R_(std::move(R)), x_ref_(std::move(x_ref)), u_ref_(std::move(u_ref)) {}

  double eval(const VecX& x, const VecX& u, int) const override {
    const VecX dx = x - x_ref_, du = u - u_ref_;
    return 0.5 * dx.dot(Q_ * dx) + 0.5 * du.dot(R_ * du);
  }

  StageQuad quadratize(const VecX& x, const VecX& u, int t) const override {
    StageQuad q;
    const VecX dx = x - x_ref_, du = u - u_ref_;
    q.c = eval(x, u, t);
    q.qx = Q_ * dx;
    q.ru = R_ * du;
    q.Qxx = Q_;
    q.Ruu = R_;
    return q;
  }

  const MatX& R() const { return R_; }

 private:
  MatX Q_, R_;
  VecX x_ref_, u_ref_;
};

class QuadraticFinalCost final : public FinalCost {
 public:
  QuadraticFinalCost(MatX Qf, VecX x_ref) : Qf_(std::move(Qf)), x_ref_(std::move(x_ref)) {}
  double eval(const VecX& x) const override {
    const VecX dx = x - x_ref_;
    return 0.5 * dx.dot(Qf_ * dx);
  }
  void quadratize(const VecX& x, double& c, VecX& qx, MatX& Qxx) const override {
    const VecX dx = x - x_ref_;
    c = 0.5 * dx.dot(Qf_ * dx);
    qx = Qf_ * dx;
    Qxx = Qf_;
  }

 private:
  MatX Qf_;
  VecX x_ref_;
};

struct ConstraintLin {
  MatX C;  // d c / d x  (m x n)
  MatX D;  // d c / d u  (m x p)
  VecX e;  // c(x, u)
};

// State-input equality constraint c(x, u) = 0, enforced by control-space
// projection in the backward pass. Must satisfy dim() <= control_dim.
class StageConstraint {
 public:
  virtual ~StageConstraint() = default;
  virtual int dim() const = 0;
  virtual VecX eval(const VecX& x, const VecX& u, int t) const = 0;
  virtual bool active_at(int) const { return true; }

  virtual ConstraintLin linearize(const VecX& x, const VecX& u, int t) const {
    ConstraintLin l;
    const int m = dim(), n = static_cast<int>(x.size()), p = static_cast<int>(u.size());
    l.C.resize(m, n);
    l.D.resize(m, p);
    l.e = eval(x, u, t);
    const double h = 1e-6;
    VecX xp = x, up = u;
    for (int i = 0; i < n; ++i) {
      xp[i] += h;
      l.C.col(i) = (eval(xp, u, t) - l.e) / h;
      xp[i] = x[i];
    }
    for (int i = 0; i < p; ++i) {
      up[i] += h;
      l.D.col(i) = (eval(x, up, t) - l.e) / h;
      up[i] = u[i];
    }
    return l;
  }
};

// State-only equality constraint g(x) = 0, handled by an augmented
// Lagrangian outer loop around the projected SLQ iterations.
class StateConstraint {
 public:
  virtual ~StateConstraint() = default;
  virtual int dim() const = 0;
  virtual VecX eval(const VecX& x, int t) const = 0;
  virtual bool active_at(int) const { return true; }

  virtual MatX jacobian(const VecX& x, int t) const {
    const int m = dim(), n = static_cast<int>(x.size());
    MatX G(m, n);
    const VecX g0 = eval(x, t);
    const double h = 1e-6;
    VecX xp = x;
    for (int i = 0; i < n; ++i) {
      xp[i] += h;
      G.col(i) = (eval(xp, t) - g0) / h;
      xp[i] = x[i];
    }
    return G;
  }
};

struct OCProblem {
  int horizon_steps = 0;  // N
  double dt = 0.0;
  std::shared_ptr<const DiscreteDynamics> dynamics;
  std::shared_ptr<const StageCost> running_cost;
  std::shared_ptr<const FinalCost> final_cost;
  std::vector<std::shared_ptr<const StageConstraint>> eq_constraints;
  std::vector<std::shared_ptr<const StateConstraint>> state_constraints;
  VecX x0;

  void validate() const {
    if (!dynamics || !running_cost || !final_cost) {
      throw ConfigurationError("OCProblem: dynamics and costs must be set");
    }
    if (horizon_steps < 1) throw ConfigurationError("OCProblem: horizon must be >= 1");
    if (dt <= 0.0) throw ConfigurationError("OCProblem: dt must be > 0");
    if (x0.size() != dynamics->state_dim()) {
      throw ConfigurationError("OCProblem: x0 dimension mismatch");
    }
    const int p = dynamics->control_dim();
    for (const auto& c : eq_constraints) {
      if (c->dim() > p) {
        throw ConfigurationError(
            "OCProblem: equality constraint dimension exceeds control dimension");
      }
    }
    // The projected backward pass needs an invertible control Hessian; a
    // zero control-cost weight is a configuration error, not something the
    // regularization floor should paper over.
    const StageQuad q0 =
        running_cost->quadratize(x0, VecX::Zero(p), 0);
    Eigen::SelfAdjointEigenSolver<MatX> es(q0.Ruu);
    if (es.eigenvalues().minCoeff() < 1e-9) {
      throw ConfigurationError("OCProblem: control cost Hessian must be positive definite");
    }
  }
};

// Time-varying affine policy u_t = u_nom_t + K_t (x - x_nom_t) [+ alpha k_t].
struct Policy {
  std::vector<VecX> x_nom;  // N + 1
  std::vector<VecX> u_nom;  // N
  std::vector<MatX> feedback_gains;
  std::vector<VecX> feedforward;

  int horizon() const { return static_cast<int>(u_nom.size()); }

  VecX control(int t, const VecX& x) const {
    return u_nom[t] + feedback_gains[t] * (x - x_nom[t]);
  }
};

struct SolveReport {
  int iterations = 0;
  bool converged = false;
  std::vector<double> cost_history;                // accepted merit per iteration
  std::vector<double> max_constraint_violation_history;
  std::vector<double> wall_ms_per_iteration;
  double final_cost = 0.0;
  double final_max_violation = 0.0;
  double final_regularization = 0.0;
  int al_outer_iterations = 0;
  // Value-function quadratics from the final backward pass (diagnostics;
  // used by the Riccati equivalence checks).
  std::vector<MatX> value_hessians;
  std::vector<VecX> value_gradients;
};

struct Trajectory {
  std::vector<VecX> states;
  std::vector<VecX> controls;
};

}  // namespace fabsim::ocp
