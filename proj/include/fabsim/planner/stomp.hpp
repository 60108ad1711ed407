#pragma once

#include <algorithm>
#include <memory>
#include <vector>

#include <Eigen/Dense>

#include "fabsim/common/csv.hpp"
#include "fabsim/common/random.hpp"
#include "fabsim/planner/obstacles.hpp"

namespace fabsim::planner {

using kin::Vec6;
using MatX = Eigen::MatrixXd;
using VecX = Eigen::VectorXd;

// Task equality constraint on a single configuration, c(q) = 0.
class PathConstraint {
 public:
  virtual ~PathConstraint() = default;
  virtual int dim() const = 0;
  virtual VecX eval(const Vec6& q) const = 0;

  virtual MatX jacobian(const Vec6& q) const {
    MatX J(dim(), 6);
    const VecX c0 = eval(q);
    const double h = 1e-7;
    Vec6 qp = q;
    for (int i = 0; i < 6; ++i) {
      qp[i] += h;
      J.col(i) = (eval(qp) - c0) / h;
      qp[i] = q[i];
    }
    return J;
  }
};

// Tool axis vertical (pointing down): the x/y components of the flange
// z-axis in world must vanish.
class ToolAxisVertical final : public PathConstraint {
 public:
  ToolAxisVertical(kin::RobotModel model, geom::Pose2 base)
      : model_(std::move(model)), base_(base) {}
  int dim() const override { return 2; }
  VecX eval(const Vec6& q) const override {
    const geom::Vec3 axis = kin::ee_pose_at(model_, base_, q).rotation().col(2);
    VecX c(2);
    c << axis.x(), axis.y();
    return c;
  }

 private:
  kin::RobotModel model_;
  geom::Pose2 base_;
};

struct PathProblem {
  Vec6 start = Vec6::Zero();
  Vec6 goal = Vec6::Zero();
  int waypoints = 24;  // M, endpoints included
  double smoothness_weight = 1.0;
  double obstacle_weight = 100.0;
  std::shared_ptr<const PathConstraint> task_constraint;  // optional
};

struct StompOptions {
  int rollouts = 16;              // K noisy rollouts per iteration
  int max_iterations = 200;
  double noise_scale = 0.12;      // rad, scales the R^-1-shaped noise
  double temperature = 10.0;      // softmin sharpness of the update weights
  int projection_steps = 5;       // Newton steps of the per-waypoint projection
  double constraint_tol = 1e-3;
  double obstacle_pad = 0.02;     // hinge activation margin above clearance, m
  double dense_step = 0.01;       // rad, collision-check interpolation
};

struct StompResult {
  bool success = false;
  MatX path;  // M x 6
  double cost = 0.0;
  double max_penetration = 0.0;  // metres, over the dense interpolation
  int iterations = 0;
  std::vector<double> cost_history;  // accepted total cost, non-increasing
};

namespace detail {

// Projects a configuration onto the task manifold with damped, step-clamped
// Newton iterations, staying inside the joint limits.
inline Vec6 project_waypoint(const PathConstraint& con, Vec6 q, int steps, double tol,
                             const kin::RobotModel& model, double step_clamp = 0.2) {
  for (int it = 0; it < steps; ++it) {
    const VecX c = con.eval(q);
    if (c.cwiseAbs().maxCoeff() < 0.1 * tol) break;
    const MatX J = con.jacobian(q);
    MatX JJt = J * J.transpose();
    JJt.diagonal().array() += 1e-6;
    Vec6 dq = -J.transpose() * JJt.ldlt().solve(c);
    const double m = dq.cwiseAbs().maxCoeff();
    if (m > step_clamp) dq *= step_clamp / m;
    q += dq;
    for (int k = 0; k < 6; ++k) {
      q[k] = std::clamp(q[k], model.limits[k].lower, model.limits[k].upper);
    }
  }
  return q;
}

}  // namespace detail

// Dense joint-space interpolation collision check; returns the worst
// clearance violation (0 when collision-free).
inline double max_penetration_on_path(const MatX& path, const ObstacleScene& scene,
                                      const kin::RobotModel& model, const geom::Pose2& base,
                                      double dense_step = 0.01) {
  double worst = 0.0;
  for (int s = 0; s + 1 < path.rows(); ++s) {
    const Vec6 a = path.row(s), b = path.row(s + 1);
    const double span = (b - a).cwiseAbs().maxCoeff();
    const int substeps = std::max(1, static_cast<int>(std::ceil(span / dense_step)));
    for (int k = 0; k <= substeps; ++k) {
      const Vec6 q = a + (b - a) * (static_cast<double>(k) / substeps);
      worst = std::max(worst, -std::min(0.0, signed_clearance(scene, model, base, q)));
    }
  }
  return worst;
}

// Constrained stochastic trajectory optimizer (STOMP-style): noisy rollouts
// with R^-1-shaped exploration, per-waypoint probability-weighted
// recombination, per-iteration projection onto the task manifold, and
// monotone acceptance so the recorded cost never increases. Deterministic
// for a fixed seed.
inline StompResult plan_stomp(const PathProblem& problem, const ObstacleScene& scene,
                              const kin::RobotModel& model, const geom::Pose2& base,
                              std::uint64_t seed, const StompOptions& opt = {}) {
  const int M = problem.waypoints;
  if (M < 3) throw ConfigurationError("plan_stomp: waypoints must be >= 3");
  kin::check_joint_limits(model, problem.start);
  kin::check_joint_limits(model, problem.goal);
  if (signed_clearance(scene, model, base, problem.start) < 0.0 ||
      signed_clearance(scene, model, base, problem.goal) < 0.0) {
    throw ConfigurationError("plan_stomp: start or goal configuration is in collision");
  }

  const int F = M - 2;  // free inner waypoints

  // Finite-difference acceleration quadratic over the inner waypoints:
  // accel_i = q_{i-1} - 2 q_i + q_{i+1}, endpoints clamped.
  MatX A = MatX::Zero(F, F);
  for (int i = 0; i < F; ++i) {
    A(i, i) = -2.0;
    if (i > 0) A(i, i - 1) = 1.0;
    if (i + 1 < F) A(i, i + 1) = 1.0;
  }
  const MatX R = A.transpose() * A;
  const Eigen::LLT<MatX> Rchol(R + 1e-12 * MatX::Identity(F, F));
  const MatX Rinv = Rchol.solve(MatX::Identity(F, F));
  const Eigen::LLT<MatX> noise_chol(Rinv + 1e-12 * MatX::Identity(F, F));
  const MatX L = noise_chol.matrixL();
  // Update-smoothing matrix, columns scaled as in the standard formulation.
  MatX Msm = Rinv;
  for (int c = 0; c < F; ++c) {
    Msm.col(c) *= (1.0 / F) / Msm.col(c).cwiseAbs().maxCoeff();
  }

  // Boundary terms of the acceleration at the first/last inner waypoints.
  auto smoothness_cost = [&](const MatX& path) {
    double s = 0.0;
    for (int i = 1; i + 1 < M; ++i) {
      const Vec6 acc = Vec6(path.row(i - 1)) - 2.0 * Vec6(path.row(i)) + Vec6(path.row(i + 1));
      s += acc.squaredNorm();
    }
    return 0.5 * problem.smoothness_weight * s;
  };

  auto waypoint_cost = [&](const Vec6& q) {
    double c = 0.0;
    const double sc = signed_clearance(scene, model, base, q);
    if (sc < opt.obstacle_pad) c += problem.obstacle_weight * (opt.obstacle_pad - sc);
    if (problem.task_constraint) {
      c += 100.0 * problem.task_constraint->eval(q).cwiseAbs().sum();
    }
    return c;
  };

  auto total_cost = [&](const MatX& path) {
    double c = smoothness_cost(path);
    for (int i = 0; i < M; ++i) c += waypoint_cost(path.row(i));
    return c;
  };

  auto clamp_and_project = [&](MatX& path) {
    for (int i = 1; i + 1 < M; ++i) {
      Vec6 q = path.row(i);
      for (int k = 0; k < 6; ++k) {
        q[k] = std::clamp(q[k], model.limits[k].lower, model.limits[k].upper);
      }
      if (problem.task_constraint) {
        q = detail::project_waypoint(*problem.task_constraint, q, opt.projection_steps,
                                     opt.constraint_tol, model);
      }
      path.row(i) = q.transpose();
    }
  };

  // Initialize at the smoothness optimum (straight-line interpolation for
  // clamped endpoints), projected onto the task manifold.
  MatX path(M, 6);
  for (int i = 0; i < M; ++i) {
    const double f = static_cast<double>(i) / (M - 1);
    path.row(i) = ((1.0 - f) * problem.start + f * problem.goal).transpose();
  }
  clamp_and_project(path);

  Rng rng(seed);
  StompResult res;
  res.path = path;
  res.cost = total_cost(path);
  res.cost_history.push_back(res.cost);

  auto satisfied = [&](const MatX& p, double& pen) {
    pen = max_penetration_on_path(p, scene, model, base, opt.dense_step);
    if (pen > 0.0) return false;
    if (problem.task_constraint) {
      for (int i = 0; i < M; ++i) {
        if (problem.task_constraint->eval(p.row(i)).cwiseAbs().maxCoeff() >
            opt.constraint_tol) {
          return false;
        }
      }
    }
    return true;
  };

  double pen = 0.0;
  if (satisfied(res.path, pen)) {
    res.success = true;
    res.max_penetration = 0.0;
    return res;
  }

  const int K = opt.rollouts;
  std::vector<MatX> eps(K, MatX(F, 6));
  std::vector<MatX> rollouts(K);
  MatX q_cost(K, M);

  for (int iter = 0; iter < opt.max_iterations; ++iter) {
    res.iterations = iter + 1;

    for (int k = 0; k < K; ++k) {
      for (int j = 0; j < 6; ++j) {
        VecX z(F);
        for (int i = 0; i < F; ++i) z[i] = rng.gaussian();
        eps[k].col(j) = opt.noise_scale * (L * z);
      }
      rollouts[k] = res.path;
      rollouts[k].middleRows(1, F) += eps[k];
      clamp_and_project(rollouts[k]);
      eps[k] = rollouts[k].middleRows(1, F) - res.path.middleRows(1, F);
      for (int i = 0; i < M; ++i) q_cost(k, i) = waypoint_cost(rollouts[k].row(i));
    }

    // Per-waypoint softmin recombination.
    MatX delta = MatX::Zero(F, 6);
    for (int i = 1; i + 1 < M; ++i) {
      const double cmin = q_cost.col(i).minCoeff();
      const double cmax = q_cost.col(i).maxCoeff();
      const double span = std::max(cmax - cmin, 1e-12);
      double wsum = 0.0;
      for (int k = 0; k < K; ++k) {
        const double w = std::exp(-opt.temperature * (q_cost(k, i) - cmin) / span);
        wsum += w;
        delta.row(i - 1) += w * eps[k].row(i - 1);
      }
      delta.row(i - 1) /= wsum;
    }

    MatX cand = res.path;
    cand.middleRows(1, F) += Msm * delta;
    clamp_and_project(cand);

    const double cand_cost = total_cost(cand);
    if (cand_cost < res.cost) {
      res.path = cand;
      res.cost = cand_cost;
    }
    res.cost_history.push_back(res.cost);

    if (satisfied(res.path, pen)) {
      res.success = true;
      res.max_penetration = 0.0;
      return res;
    }
  }

  res.max_penetration = max_penetration_on_path(res.path, scene, model, base, opt.dense_step);
  res.success = false;
  return res;
}

inline void export_path_csv(const std::string& path_file, const MatX& path) {
  CsvWriter csv(path_file);
  csv.header({"waypoint", "q1", "q2", "q3", "q4", "q5", "q6"});
  for (int i = 0; i < path.rows(); ++i) {
    csv.row(i, path(i, 0), path(i, 1), path(i, 2), path(i, 3), path(i, 4), path(i, 5));
  }
}

inline PathProblem path_problem_from_json(const Json& j) {
  PathProblem p;
  const auto& s = require_field(j, "start", "path problem");
  const auto& g = require_field(j, "goal", "path problem");
  for (int i = 0; i < 6; ++i) {
    p.start[i] = s.at(i).get<double>();
    p.goal[i] = g.at(i).get<double>();
  }
  p.waypoints = j.value("waypoints", p.waypoints);
  p.smoothness_weight = j.value("smoothness_weight", p.smoothness_weight);
  p.obstacle_weight = j.value("obstacle_weight", p.obstacle_weight);
  return p;
}

}  // namespace fabsim::planner
