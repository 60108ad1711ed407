#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "fabsim/common/random.hpp"
#include "fabsim/trajopt/problem.hpp"

namespace fabsim::ocp {

struct SlqSettings {
  int max_iterations = 120;
  double cost_rel_tol = 1e-6;       // convergence: relative cost decrease
  double constraint_tol = 1e-4;     // convergence: max equality violation
  double reg_floor = 1e-6;          // Levenberg term floor once engaged
  double reg_growth = 10.0;         // growth on a failed step
  double reg_max = 1e8;
  int line_search_steps = 7;        // alpha = 1, 1/2, ..., 1/64
  // Quadratic-penalty weight on equality violations in the line-search
  // merit. Feasibility itself comes from the projected feedforward; the
  // merit term only has to reject steps that trade gross violation for
  // cost, without blocking full steps near the constraint manifold.
  double constraint_merit_weight = 1e3;
  int al_max_outer = 6;             // augmented-Lagrangian outer iterations
  double al_rho0 = 1e2;
  double al_rho_growth = 10.0;
  bool refresh_gains_at_end = true; // extra backward pass at the converged nominal
};

namespace detail {

struct AlState {
  // One multiplier vector per (state constraint, step).
  std::vector<std::vector<VecX>> lambda;
  double rho = 0.0;
  double eq_penalty = 0.0;  // L1 merit weight for projected eq constraints
};

inline double merit_stage(const OCProblem& pr, const AlState& al, const VecX& x, const VecX& u,
                          int t) {
  double c = pr.running_cost->eval(x, u, t);
  for (const auto& ec : pr.eq_constraints) {
    if (!ec->active_at(t)) continue;
    c += 0.5 * al.eq_penalty * ec->eval(x, u, t).squaredNorm();
  }
  for (std::size_t i = 0; i < pr.state_constraints.size(); ++i) {
    const auto& sc = *pr.state_constraints[i];
    if (!sc.active_at(t)) continue;
    const VecX g = sc.eval(x, t);
    c += al.lambda[i][t].dot(g) + 0.5 * al.rho * g.squaredNorm();
  }
  return c;
}

struct RolloutEval {
  Trajectory traj;
  double merit = 0.0;
  bool finite = true;
  int bad_step = -1;
};

// Open-loop or policy-guided rollout with merit accumulation.
inline RolloutEval rollout_with_merit(const OCProblem& pr, const AlState& al,
                                      const std::vector<VecX>& u_nom,
                                      const std::vector<VecX>* x_ref,
                                      const std::vector<MatX>* K,
                                      const std::vector<VecX>* k_ff, double alpha) {
  const int N = pr.horizon_steps;
  RolloutEval out;
  out.traj.states.resize(N + 1);
  out.traj.controls.resize(N);
  out.traj.states[0] = pr.x0;
  for (int t = 0; t < N; ++t) {
    VecX u = u_nom[t];
    if (K) u += (*K)[t] * (out.traj.states[t] - (*x_ref)[t]);
    if (k_ff) u += alpha * (*k_ff)[t];
    out.traj.controls[t] = u;
    out.merit += merit_stage(pr, al, out.traj.states[t], u, t);
    out.traj.states[t + 1] = pr.dynamics->step(out.traj.states[t], u);
    if (!out.traj.states[t + 1].allFinite()) {
      out.finite = false;
      out.bad_step = t;
      return out;
    }
  }
  out.merit += pr.final_cost->eval(out.traj.states[N]);
  return out;
}

inline double max_violation_eq(const OCProblem& pr, const Trajectory& traj) {
  double v = 0.0;
  for (int t = 0; t < pr.horizon_steps; ++t) {
    for (const auto& c : pr.eq_constraints) {
      if (!c->active_at(t)) continue;
      v = std::max(v, c->eval(traj.states[t], traj.controls[t], t).cwiseAbs().maxCoeff());
    }
  }
  return v;
}

inline double max_violation_state(const OCProblem& pr, const Trajectory& traj) {
  double v = 0.0;
  for (int t = 0; t < pr.horizon_steps; ++t) {
    for (const auto& g : pr.state_constraints) {
      if (!g->active_at(t)) continue;
      v = std::max(v, g->eval(traj.states[t], t).cwiseAbs().maxCoeff());
    }
  }
  return v;
}

inline double max_violation(const OCProblem& pr, const Trajectory& traj) {
  return std::max(max_violation_eq(pr, traj), max_violation_state(pr, traj));
}

struct BackwardResult {
  bool ok = false;  // false: needs more regularization
  std::vector<MatX> K;
  std::vector<VecX> k;
  std::vector<MatX> S;  // value Hessians, N+1
  std::vector<VecX> s;  // value gradients, N+1
};

struct StepData {
  MatX A, B;
  StageQuad cost;
  bool has_constraint = false;
  ConstraintLin con;
};

// Backward Riccati sweep with control-space projection of the stacked
// equality constraints: minimizing the local quadratic model subject to
// C dx + D du + e = 0 gives
//   du = -(I - E D) Quu^-1 (Qu + Qux dx) - E (e + C dx),
//   E  = Quu^-1 D^T (D Quu^-1 D^T)^-1,
// so D K + C = 0 along constrained rows (feedback cancels constraint drift).
inline BackwardResult backward_pass(const OCProblem& pr, const std::vector<StepData>& sd,
                                    const VecX& qx_f, const MatX& Qxx_f, double mu) {
  const int N = pr.horizon_steps;
  const int n = pr.dynamics->state_dim();
  const int p = pr.dynamics->control_dim();
  BackwardResult r;
  r.K.assign(N, MatX::Zero(p, n));
  r.k.assign(N, VecX::Zero(p));
  r.S.assign(N + 1, MatX());
  r.s.assign(N + 1, VecX());
  r.S[N] = Qxx_f;
  r.s[N] = qx_f;

  for (int t = N - 1; t >= 0; --t) {
    const auto& d = sd[t];
    const VecX Qx = d.cost.qx + d.A.transpose() * r.s[t + 1];
    const VecX Qu = d.cost.ru + d.B.transpose() * r.s[t + 1];
    const MatX SB = r.S[t + 1] * d.B;
    const MatX Qxx = d.cost.Qxx + d.A.transpose() * r.S[t + 1] * d.A;
    const MatX Quu = d.cost.Ruu + d.B.transpose() * SB;
    const MatX Qux = SB.transpose() * d.A;

    MatX Quu_reg = Quu;
    Quu_reg.diagonal().array() += mu;
    Eigen::LLT<MatX> llt(Quu_reg);
    if (llt.info() != Eigen::Success) return r;  // r.ok stays false

    MatX K_t;
    VecX k_t;
    if (d.has_constraint) {
      const MatX WDt = llt.solve(d.con.D.transpose());          // Quu^-1 D^T
      const MatX DWDt = d.con.D * WDt;                          // m x m
      Eigen::LLT<MatX> lltc(DWDt);
      if (lltc.info() != Eigen::Success) return r;
      const MatX E = lltc.solve(WDt.transpose()).transpose();   // Quu^-1 D^T (D Quu^-1 D^T)^-1
      const MatX P = MatX::Identity(p, p) - E * d.con.D;        // null-space projector (oblique)
      k_t = -P * llt.solve(Qu) - E * d.con.e;
      K_t = -P * llt.solve(Qux) - E * d.con.C;
    } else {
      k_t = -llt.solve(Qu);
      K_t = -llt.solve(Qux);
    }

    // Value recursion with the unregularized Hessian.
    MatX S_t = Qxx + K_t.transpose() * Quu * K_t + K_t.transpose() * Qux +
               Qux.transpose() * K_t;
    r.s[t] = Qx + K_t.transpose() * (Quu * k_t + Qu) + Qux.transpose() * k_t;
    r.S[t] = 0.5 * (S_t + S_t.transpose());
    r.K[t] = std::move(K_t);
    r.k[t] = std::move(k_t);
  }
  r.ok = true;
  return r;
}

inline void linearize_all(const OCProblem& pr, const AlState& al, const Trajectory& traj,
                          std::vector<StepData>& sd, VecX& qx_f, MatX& Qxx_f) {
  const int N = pr.horizon_steps;
  sd.resize(N);
  for (int t = 0; t < N; ++t) {
    auto& d = sd[t];
    pr.dynamics->linearize(traj.states[t], traj.controls[t], d.A, d.B);
    d.cost = pr.running_cost->quadratize(traj.states[t], traj.controls[t], t);

    // Augmented-Lagrangian contribution of state-only constraints
    // (Gauss-Newton quadratic model).
    for (std::size_t i = 0; i < pr.state_constraints.size(); ++i) {
      const auto& sc = *pr.state_constraints[i];
      if (!sc.active_at(t)) continue;
      const VecX g = sc.eval(traj.states[t], t);
      const MatX G = sc.jacobian(traj.states[t], t);
      d.cost.c += al.lambda[i][t].dot(g) + 0.5 * al.rho * g.squaredNorm();
      d.cost.qx += G.transpose() * (al.lambda[i][t] + al.rho * g);
      d.cost.Qxx += al.rho * G.transpose() * G;
    }

    // Stack all active state-input constraints of this step.
    int m = 0;
    for (const auto& c : pr.eq_constraints) {
      if (c->active_at(t)) m += c->dim();
    }
    d.has_constraint = m > 0;
    if (d.has_constraint) {
      const int n = pr.dynamics->state_dim(), p = pr.dynamics->control_dim();
      d.con.C.resize(m, n);
      d.con.D.resize(m, p);
      d.con.e.resize(m);
      int row = 0;
      for (const auto& c : pr.eq_constraints) {
        if (!c->active_at(t)) continue;
        const ConstraintLin l = c->linearize(traj.states[t], traj.controls[t], t);
        d.con.C.middleRows(row, c->dim()) = l.C;
        d.con.D.middleRows(row, c->dim()) = l.D;
        d.con.e.segment(row, c->dim()) = l.e;
        row += c->dim();
      }
    }
  }
  double cf = 0.0;
  pr.final_cost->quadratize(traj.states[N], cf, qx_f, Qxx_f);
}

}  // namespace detail

// Constrained SLQ: iterative linearization, projected Riccati backward pass,
// backtracking line search on the feedforward, with an augmented-Lagrangian
// outer loop for state-only constraints. Feedforward and feedback come out
// of the same sweep.
inline std::pair<Policy, SolveReport> solve_slq(const OCProblem& problem,
                                                std::vector<VecX> init_controls,
                                                const SlqSettings& settings = {}) {
  using Clock = std::chrono::steady_clock;
  problem.validate();
  const int N = problem.horizon_steps;
  const int p = problem.dynamics->control_dim();
  if (init_controls.empty()) init_controls.assign(N, VecX::Zero(p));
  if (static_cast<int>(init_controls.size()) != N) {
    throw ConfigurationError("solve_slq: init control sequence length mismatch");
  }

  detail::AlState al;
  al.lambda.resize(problem.state_constraints.size());
  for (std::size_t i = 0; i < problem.state_constraints.size(); ++i) {
    al.lambda[i].assign(N, VecX::Zero(problem.state_constraints[i]->dim()));
  }
  const bool has_al = !problem.state_constraints.empty();
  al.rho = has_al ? settings.al_rho0 : 0.0;
  al.eq_penalty = problem.eq_constraints.empty() ? 0.0 : settings.constraint_merit_weight;

  Policy pol;
  pol.u_nom = std::move(init_controls);
  detail::RolloutEval cur =
      detail::rollout_with_merit(problem, al, pol.u_nom, nullptr, nullptr, nullptr, 0.0);
  if (!cur.finite) {
    throw SolverDivergedError(cur.bad_step, "initial rollout is non-finite");
  }

  SolveReport rep;
  rep.cost_history.push_back(cur.merit);
  rep.max_constraint_violation_history.push_back(detail::max_violation(problem, cur.traj));

  double mu = 0.0;
  std::vector<detail::StepData> sd;
  VecX qx_f;
  MatX Qxx_f;
  detail::BackwardResult bw;

  const int outer_total = has_al ? settings.al_max_outer : 1;
  bool all_converged = false;

  for (int outer = 0; outer < outer_total && !all_converged; ++outer) {
    rep.al_outer_iterations = outer + 1;
    if (outer > 0) {
      // Refresh merit under the updated multipliers.
      cur = detail::rollout_with_merit(problem, al, pol.u_nom, nullptr, nullptr, nullptr, 0.0);
    }
    bool inner_converged = false;
    while (!inner_converged && rep.iterations < settings.max_iterations) {
      const auto t_start = Clock::now();
      ++rep.iterations;

      detail::linearize_all(problem, al, cur.traj, sd, qx_f, Qxx_f);
      bw = detail::backward_pass(problem, sd, qx_f, Qxx_f, mu);
      while (!bw.ok) {
        mu = std::max(settings.reg_floor, mu * settings.reg_growth);
        if (mu > settings.reg_max) {
          throw ConfigurationError("solve_slq: regularization exceeded limit (indefinite problem)");
        }
        bw = detail::backward_pass(problem, sd, qx_f, Qxx_f, mu);
      }

      // Backtracking line search on the feedforward scaling.
      bool accepted = false;
      detail::RolloutEval cand;
      double alpha = 1.0;
      for (int ls = 0; ls < settings.line_search_steps; ++ls, alpha *= 0.5) {
        cand = detail::rollout_with_merit(problem, al, pol.u_nom, &cur.traj.states, &bw.K, &bw.k,
                                          alpha);
        if (cand.finite && cand.merit < cur.merit) {
          accepted = true;
          break;
        }
      }

      const double ms =
          std::chrono::duration<double, std::milli>(Clock::now() - t_start).count();
      rep.wall_ms_per_iteration.push_back(ms);

      if (accepted) {
        const double rel = (cur.merit - cand.merit) / (std::abs(cur.merit) + 1.0);
        cur = cand;
        pol.u_nom = cur.traj.controls;
        rep.cost_history.push_back(cur.merit);
        rep.max_constraint_violation_history.push_back(detail::max_violation(problem, cur.traj));
        mu = (mu <= settings.reg_floor) ? 0.0 : mu * 0.5;
        // State-only violations cannot drop below the AL equilibrium inside
        // a stage; only the projected equalities gate inner convergence.
        if (rel < settings.cost_rel_tol &&
            detail::max_violation_eq(problem, cur.traj) < settings.constraint_tol) {
          inner_converged = true;
        }
      } else {
        mu = std::max(settings.reg_floor, mu * settings.reg_growth);
        if (mu > settings.reg_max) break;  // return best-so-far, non-converged
      }
    }

    // Multiplier update; outer loop repeats while state-only constraints
    // remain violated.
    if (has_al) {
      double gmax = 0.0;
      for (std::size_t i = 0; i < problem.state_constraints.size(); ++i) {
        const auto& sc = *problem.state_constraints[i];
        for (int t = 0; t < N; ++t) {
          if (!sc.active_at(t)) continue;
          const VecX g = sc.eval(cur.traj.states[t], t);
          al.lambda[i][t] += al.rho * g;
          gmax = std::max(gmax, g.cwiseAbs().maxCoeff());
        }
      }
      all_converged = inner_converged && gmax < settings.constraint_tol;
      if (!all_converged && outer + 1 < outer_total) al.rho *= settings.al_rho_growth;
    } else {
      all_converged = inner_converged;
    }
  }

  pol.x_nom = cur.traj.states;
  pol.u_nom = cur.traj.controls;

  // Final backward pass so the exported gains/value function correspond to
  // the converged nominal trajectory.
  if (settings.refresh_gains_at_end || bw.K.empty()) {
    detail::linearize_all(problem, al, cur.traj, sd, qx_f, Qxx_f);
    detail::BackwardResult fresh = detail::backward_pass(problem, sd, qx_f, Qxx_f, mu);
    if (fresh.ok) bw = std::move(fresh);
  }
  pol.feedback_gains = bw.K;
  pol.feedforward = bw.k;
  rep.value_hessians = bw.S;
  rep.value_gradients = bw.s;

  rep.converged = all_converged;
  rep.final_cost = cur.merit;
  rep.final_max_violation = detail::max_violation(problem, cur.traj);
  rep.final_regularization = mu;
  return {std::move(pol), std::move(rep)};
}

// Closed-loop rollout of a policy with optional per-step additive state
// disturbance; deterministic for a given rng.
inline Trajectory rollout(const OCProblem& problem, const Policy& policy, const VecX& x0,
                          const VecX& disturbance_sigma, Rng* rng = nullptr) {
  const int N = problem.horizon_steps;
  if (policy.horizon() != N) throw ConfigurationError("rollout: policy/problem horizon mismatch");
  Trajectory traj;
  traj.states.resize(N + 1);
  traj.controls.resize(N);
  traj.states[0] = x0;
  for (int t = 0; t < N; ++t) {
    traj.controls[t] = policy.control(t, traj.states[t]);
    VecX x_next = problem.dynamics->step(traj.states[t], traj.controls[t]);
    if (disturbance_sigma.size() > 0 && rng != nullptr) {
      for (int i = 0; i < x_next.size(); ++i) x_next[i] += rng->gaussian(disturbance_sigma[i]);
    }
    if (!x_next.allFinite()) throw SolverDivergedError(t, "rollout state non-finite");
    traj.states[t + 1] = x_next;
  }
  return traj;
}

}  // namespace fabsim::ocp
