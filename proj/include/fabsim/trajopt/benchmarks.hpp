#pragma once

#include <memory>
#include <string>

#include "fabsim/common/csv.hpp"
#include "fabsim/common/json_io.hpp"
#include "fabsim/trajopt/slq.hpp"
#include "fabsim/trajopt/whole_body.hpp"

namespace fabsim::ocp {

// Double integrator (position, velocity; acceleration input), exactly
// discretized. The canonical LQ benchmark for the Riccati checks.
inline OCProblem make_double_integrator(int horizon, double dt, double q_pos = 1.0,
                                        double q_vel = 0.1, double r = 0.1, double qf = 10.0,
                                        double x0_pos = 1.0, double x0_vel = 0.0) {
  MatX A(2, 2), B(2, 1);
  A << 1.0, dt, 0.0, 1.0;
  B << 0.5 * dt * dt, dt;
  OCProblem pr;
  pr.horizon_steps = horizon;
  pr.dt = dt;
  pr.dynamics = std::make_shared<LinearDynamics>(A, B);
  MatX Q = MatX::Zero(2, 2);
  Q(0, 0) = q_pos;
  Q(1, 1) = q_vel;
  MatX R = MatX::Constant(1, 1, r);
  pr.running_cost = std::make_shared<QuadraticStageCost>(Q, R, VecX::Zero(2), VecX::Zero(1));
  pr.final_cost = std::make_shared<QuadraticFinalCost>(qf * MatX::Identity(2, 2), VecX::Zero(2));
  pr.x0 = VecX(2);
  pr.x0 << x0_pos, x0_vel;
  return pr;
}

inline SlqSettings slq_settings_from_json(const Json& j) {
  SlqSettings s;
  s.max_iterations = j.value("max_iterations", s.max_iterations);
  s.cost_rel_tol = j.value("cost_rel_tol", s.cost_rel_tol);
  s.constraint_tol = j.value("constraint_tol", s.constraint_tol);
  s.reg_floor = j.value("reg_floor", s.reg_floor);
  s.reg_growth = j.value("reg_growth", s.reg_growth);
  s.line_search_steps = j.value("line_search_steps", s.line_search_steps);
  return s;
}

// Benchmark problem schema:
//   {"type": "double_integrator", "horizon": 50, "dt": 0.01, ...}
//   {"type": "ee_hold", "horizon": 100, "dt": 0.01,
//    "goal": {"xy":[1,0],"theta":1.5707963}, "start_q": [...], ...}
inline OCProblem problem_from_json(const Json& j, const kin::RobotModel& model) {
  const std::string type = require_field(j, "type", "benchmark problem").get<std::string>();
  const int horizon = j.value("horizon", 100);
  const double dt = j.value("dt", 0.01);
  if (type == "double_integrator") {
    return make_double_integrator(horizon, dt, j.value("q_pos", 1.0), j.value("q_vel", 0.1),
                                  j.value("r", 0.1), j.value("qf", 10.0));
  }
  if (type == "ee_hold" || type == "drive") {
    kin::RobotState start;
    if (j.contains("start_base")) start.base = geom::pose2_from_json(j.at("start_base"));
    if (j.contains("start_q")) {
      const auto& q = j.at("start_q");
      for (int i = 0; i < 6; ++i) start.q[i] = q.at(i).get<double>();
    } else {
      start.q << 0.0, 0.5, 0.6, 0.0, 1.0, 0.0;
    }
    const geom::Pose2 goal =
        j.contains("goal") ? geom::pose2_from_json(j.at("goal")) : geom::Pose2(1.0, 0.0, 1.5708);
    if (type == "ee_hold") {
      EeHoldWeights w;
      w.baumgarte_gain = j.value("baumgarte_gain", w.baumgarte_gain);
      return make_ee_hold_problem(model, start, goal, horizon, dt, w);
    }
    return make_drive_problem(model, start, goal, horizon, dt);
  }
  throw ConfigurationError("unknown benchmark problem type: " + type);
}

inline void write_report_csv(const std::string& path, const SolveReport& rep) {
  CsvWriter csv(path);
  csv.header({"iteration", "cost", "max_violation", "ms"});
  for (std::size_t i = 0; i < rep.wall_ms_per_iteration.size(); ++i) {
    const std::size_t hist = std::min(i + 1, rep.cost_history.size() - 1);
    csv.row(i + 1, rep.cost_history[hist],
            rep.max_constraint_violation_history[std::min(hist,
                rep.max_constraint_violation_history.size() - 1)],
            rep.wall_ms_per_iteration[i]);
  }
}

}  // namespace fabsim::ocp
