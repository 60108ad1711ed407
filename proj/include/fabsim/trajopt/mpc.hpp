#pragma once

#include <chrono>
#include <utility>
#include <vector>

#include "fabsim/trajopt/slq.hpp"

namespace fabsim::ocp {

struct MpcSettings {
  int iterations_per_step = 2;   // bounded SLQ iterations per MPC update
  int cold_start_iterations = 120;
  // Receding keeps the horizon length fixed (regulation against a constant
  // target); ShrinkToFinalTime holds the terminal instant fixed, so the
  // closed loop reproduces the one-shot solution on a mismatch-free plant.
  enum class Horizon { Receding, ShrinkToFinalTime };
  Horizon horizon_mode = Horizon::Receding;
};

// Receding-horizon driver around solve_slq. Warm-starts each step by
// shifting the previous solution one interval and repeating the last
// control; on solver failure it falls back to the previous policy's
// feedback and flags the step as degraded.
class MpcController {
 public:
  struct StepInfo {
    double solve_ms = 0.0;
    int iterations = 0;
    bool degraded = false;
    bool converged = false;
  };

  MpcController(OCProblem problem, SlqSettings slq = {}, MpcSettings mpc = {})
      : problem_(std::move(problem)), slq_(slq), mpc_(mpc) {
    problem_.validate();
    slq_.refresh_gains_at_end = true;  // fallback path uses the gains
  }

  // Computes the control to apply at the measured state. `t_now` only
  // drives the warm-start shift; calls are expected every problem.dt.
  VecX step(const VecX& x_measured, double t_now) {
    const auto t0 = std::chrono::steady_clock::now();
    StepInfo info;

    SlqSettings s = slq_;
    std::vector<VecX> init;
    if (!have_policy_) {
      s.max_iterations = mpc_.cold_start_iterations;
      init.assign(problem_.horizon_steps, VecX::Zero(problem_.dynamics->control_dim()));
      policy_time_ = t_now;
    } else {
      s.max_iterations = mpc_.iterations_per_step;
      const int shift = std::max(
          0, static_cast<int>(std::llround((t_now - policy_time_) / problem_.dt)));
      const bool pad = mpc_.horizon_mode == MpcSettings::Horizon::Receding;
      if (!pad) {
        problem_.horizon_steps = std::max(1, problem_.horizon_steps - shift);
      }
      init = shifted_controls(shift, pad);
      shift_policy(shift, pad);
      policy_time_ = t_now;
    }

    problem_.x0 = x_measured;
    VecX u;
    try {
      auto [pol, rep] = solve_slq(problem_, init, s);
      policy_ = std::move(pol);
      have_policy_ = true;
      info.iterations = rep.iterations;
      info.converged = rep.converged;
      u = policy_.u_nom.front();
    } catch (const Error&) {
      if (!have_policy_) throw;  // nothing to fall back to
      info.degraded = true;
      ++degraded_steps_;
      u = policy_.control(0, x_measured);
    }

    info.solve_ms = std::chrono::duration<double, std::milli>(
                        std::chrono::steady_clock::now() - t0)
                        .count();
    history_.push_back(info);
    return u;
  }

  const Policy& policy() const { return policy_; }
  const std::vector<StepInfo>& history() const { return history_; }
  int degraded_steps() const { return degraded_steps_; }

  double median_solve_ms() const {
    if (history_.empty()) return 0.0;
    std::vector<double> ms;
    ms.reserve(history_.size());
    for (const auto& h : history_) ms.push_back(h.solve_ms);
    std::nth_element(ms.begin(), ms.begin() + ms.size() / 2, ms.end());
    return ms[ms.size() / 2];
  }

 private:
  std::vector<VecX> shifted_controls(int shift, bool pad) const {
    std::vector<VecX> u = policy_.u_nom;
    if (shift > 0 && !u.empty()) {
      shift = std::min<int>(shift, static_cast<int>(u.size()) - 1);
      u.erase(u.begin(), u.begin() + shift);
    }
    if (pad) {
      while (static_cast<int>(u.size()) < problem_.horizon_steps) u.push_back(u.back());
    } else {
      u.resize(problem_.horizon_steps, u.back());
    }
    return u;
  }

  void shift_policy(int shift, bool pad) {
    if (shift <= 0 || policy_.u_nom.empty()) return;
    shift = std::min<int>(shift, policy_.horizon() - 1);
    auto drop = [shift](auto& v) { v.erase(v.begin(), v.begin() + shift); };
    drop(policy_.u_nom);
    drop(policy_.x_nom);
    drop(policy_.feedback_gains);
    drop(policy_.feedforward);
    while (pad && policy_.horizon() < problem_.horizon_steps) {
      policy_.u_nom.push_back(policy_.u_nom.back());
      policy_.x_nom.push_back(policy_.x_nom.back());
      policy_.feedback_gains.push_back(policy_.feedback_gains.back());
      policy_.feedforward.push_back(policy_.feedforward.back());
    }
  }

  OCProblem problem_;
  SlqSettings slq_;
  MpcSettings mpc_;
  Policy policy_;
  bool have_policy_ = false;
  double policy_time_ = 0.0;
  int degraded_steps_ = 0;
  std::vector<StepInfo> history_;
};

}  // namespace fabsim::ocp
