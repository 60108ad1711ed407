#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fabsim/common/json_io.hpp"
#include "fabsim/errors.hpp"
#include "fabsim/geometry.hpp"

namespace fabsim::kin {

using geom::Pose2;
using geom::Pose3;
using geom::Vec3;
using geom::Vec6;

inline constexpr int kNumJoints = 6;

// Standard (distal) Denavit-Hartenberg parameters of one revolute joint:
// T(q) = RotZ(theta0 + q) * TransZ(d) * TransX(a) * RotX(alpha).
struct DhParam {
  double a = 0.0;
  double alpha = 0.0;
  double d = 0.0;
  double theta0 = 0.0;
};

struct JointLimits {
  double lower = 0.0;
  double upper = 0.0;
  bool locked() const { return upper - lower < 1e-12; }
};

// Kinematic description of the tracked-base + 6R arm. The arm table is an
// artifact approximation of an industrial-arm-class geometry; only the
// 2.55 m reach is treated as a hard constant.
struct RobotModel {
  std::string model_version = "1.0";
  std::array<DhParam, kNumJoints> dh{};
  std::array<JointLimits, kNumJoints> limits{};
  double reach_m = 2.55;
  Pose3 base_to_arm_mount;
  double max_base_speed_mps = 1.39;  // 5 km/h
  double arm_rate_hz = 250.0;
  double max_joint_speed_radps = 2.5;
  double payload_kg = 40.0;  // metadata only; no force model
};

struct RobotState {
  Pose2 base;
  Vec6 q = Vec6::Zero();
  Eigen::Vector2d base_velocity = Eigen::Vector2d::Zero();  // forward m/s, yaw rad/s
  Vec6 q_dot = Vec6::Zero();
};

inline void check_joint_limits(const RobotModel& model, const Vec6& q, double tol = 1e-9) {
  for (int i = 0; i < kNumJoints; ++i) {
    if (q[i] < model.limits[i].lower - tol || q[i] > model.limits[i].upper + tol) {
      throw JointLimitError(i, q[i], model.limits[i].lower, model.limits[i].upper);
    }
  }
}

inline Pose3 dh_transform(const DhParam& p, double q) {
  const double ct = std::cos(p.theta0 + q), st = std::sin(p.theta0 + q);
  const double ca = std::cos(p.alpha), sa = std::sin(p.alpha);
  Eigen::Matrix3d r;
  r << ct, -st * ca, st * sa,  //
      st, ct * ca, -ct * sa,   //
      0.0, sa, ca;
  return Pose3(Vec3(p.a * ct, p.a * st, p.d), geom::Quat(r));
}

// Frames along the chain: element 0 is the arm mount in world, element i
// (1..6) is joint i's distal frame; element 6 is the flange (end effector).
inline std::array<Pose3, kNumJoints + 1> chain_frames(const RobotModel& model,
                                                      const Pose2& base, const Vec6& q) {
  std::array<Pose3, kNumJoints + 1> frames;
  frames[0] = Pose3::from_pose2(base).compose(model.base_to_arm_mount);
  for (int i = 0; i < kNumJoints; ++i) {
    frames[i + 1] = frames[i].compose(dh_transform(model.dh[i], q[i]));
  }
  return frames;
}

inline Pose3 arm_mount_in_world(const RobotModel& model, const Pose2& base) {
  return Pose3::from_pose2(base).compose(model.base_to_arm_mount);
}

// Unchecked end-effector pose; solver internals use this on iterates that
// may transiently leave the joint limits.
inline Pose3 ee_pose_at(const RobotModel& model, const Pose2& base, const Vec6& q) {
  return chain_frames(model, base, q)[kNumJoints];
}

// End-effector pose in the world frame.
inline Pose3 forward_kinematics(const RobotModel& model, const RobotState& state) {
  check_joint_limits(model, state.q);
  return ee_pose_at(model, state.base, state.q);
}

// Unchecked 6x9 world-frame end-effector Jacobian. Columns: base x, base y,
// base yaw, joints 1..6. Rows: linear then angular velocity. Zero-range
// (locked) joints contribute a zero column.
inline Eigen::Matrix<double, 6, 9> jacobian_at(const RobotModel& model, const Pose2& base,
                                               const Vec6& q) {
  const auto frames = chain_frames(model, base, q);
  const Vec3 p_ee = frames[kNumJoints].t;

  Eigen::Matrix<double, 6, 9> J = Eigen::Matrix<double, 6, 9>::Zero();
  J(0, 0) = 1.0;
  J(1, 1) = 1.0;
  // Base yaw spins the whole chain about the base origin's vertical axis.
  const Vec3 base_origin(base.x, base.y, 0.0);
  const Vec3 ez = Vec3::UnitZ();
  J.block<3, 1>(0, 2) = ez.cross(p_ee - base_origin);
  J.block<3, 1>(3, 2) = ez;

  for (int i = 0; i < kNumJoints; ++i) {
    if (model.limits[i].locked()) continue;
    // Revolute axis of joint i+1 is the z-axis of frame i.
    const Vec3 zi = frames[i].rotation().col(2);
    const Vec3 pi = frames[i].t;
    J.block<3, 1>(0, 3 + i) = zi.cross(p_ee - pi);
    J.block<3, 1>(3, 3 + i) = zi;
  }
  return J;
}

inline Eigen::Matrix<double, 6, 9> jacobian(const RobotModel& model, const RobotState& state) {
  check_joint_limits(model, state.q);
  return jacobian_at(model, state.base, state.q);
}

// Arm-only 6x6 Jacobian at a fixed base (the joint columns of jacobian()).
inline Eigen::Matrix<double, 6, 6> arm_jacobian(const RobotModel& model, const Pose2& base,
                                                const Vec6& q) {
  RobotState s;
  s.base = base;
  s.q = q;
  return jacobian(model, s).rightCols<6>();
}

struct IkOptions {
  int max_iterations = 200;
  double damping = 1e-3;
  double step_clamp = 0.2;       // rad per joint per iteration
  double pos_tolerance = 1e-9;   // convergence target, m
  double rot_tolerance = 1e-9;   // convergence target, rad
  double accept_pos = 1e-6;      // success threshold, m
  double accept_rot = 1e-6;      // success threshold, rad
  bool allow_restarts = true;    // deterministic heuristic re-seeds on failure
};

struct IkResult {
  bool success = false;
  Vec6 q = Vec6::Zero();
  double pos_residual = 0.0;
  double rot_residual = 0.0;
  int iterations = 0;
};

namespace detail {

inline Vec6 clamp_to_limits(const RobotModel& model, Vec6 q) {
  for (int i = 0; i < kNumJoints; ++i) {
    q[i] = std::clamp(q[i], model.limits[i].lower, model.limits[i].upper);
  }
  return q;
}

inline IkResult ik_from_seed(const RobotModel& model, const Pose2& base, const Pose3& target,
                             Vec6 q, const IkOptions& opt) {
  IkResult best;
  best.q = q;
  best.pos_residual = std::numeric_limits<double>::infinity();
  best.rot_residual = std::numeric_limits<double>::infinity();

  const double lambda2 = opt.damping * opt.damping;
  for (int it = 0; it < opt.max_iterations; ++it) {
    const auto frames = chain_frames(model, base, q);
    const Pose3& ee = frames[kNumJoints];
    Vec6 err = geom::pose_error(target, ee);
    const double pe = err.head<3>().norm();
    const double re = err.tail<3>().norm();
    if (pe < best.pos_residual) {
      best.pos_residual = pe;
      best.rot_residual = re;
      best.q = q;
      best.iterations = it;
    }
    if (pe < opt.pos_tolerance && re < opt.rot_tolerance) break;

    Eigen::Matrix<double, 6, 6> J = Eigen::Matrix<double, 6, 6>::Zero();
    const Vec3 p_ee = ee.t;
    for (int i = 0; i < kNumJoints; ++i) {
      if (model.limits[i].locked()) continue;
      const Vec3 zi = frames[i].rotation().col(2);
      J.block<3, 1>(0, i) = zi.cross(p_ee - frames[i].t);
      J.block<3, 1>(3, i) = zi;
    }
    // Damped least squares: dq = J^T (J J^T + lambda^2 I)^-1 err.
    Eigen::Matrix<double, 6, 6> JJt = J * J.transpose();
    JJt.diagonal().array() += lambda2;
    Vec6 dq = J.transpose() * JJt.ldlt().solve(err);
    const double m = dq.cwiseAbs().maxCoeff();
    if (m > opt.step_clamp) dq *= opt.step_clamp / m;
    q = clamp_to_limits(model, q + dq);
  }
  best.success = best.pos_residual <= opt.accept_pos && best.rot_residual <= opt.accept_rot;
  return best;
}

}  // namespace detail

// Damped-least-squares IK for the arm at a fixed base pose. Returns the
// best configuration found; success=false means Unreachable within the
// iteration budget (residuals are still reported).
inline IkResult inverse_kinematics(const RobotModel& model, const Pose2& base, const Pose3& target,
                                   const Vec6& seed, const IkOptions& opt = {}) {
  check_joint_limits(model, seed);

  IkResult r = detail::ik_from_seed(model, base, target, seed, opt);
  if (r.success || !opt.allow_restarts) return r;

  // Deterministic re-seeds. The wrist is spherical, so (q4+pi, -q5, q6+pi)
  // reaches the same tool pose on the other orientation branch; also try a
  // few elbow postures with joint 1 pointed at the target azimuth.
  std::vector<Vec6> seeds;
  {
    Vec6 flip = seed;
    flip[3] = geom::wrap_angle(flip[3] + geom::kPi);
    flip[4] = -flip[4];
    flip[5] = geom::wrap_angle(flip[5] + geom::kPi);
    seeds.push_back(flip);
  }
  const Pose3 mount = arm_mount_in_world(model, base);
  const Vec3 local = mount.inverse().apply(target.t);
  const double azimuth = std::atan2(local.y(), local.x());
  const double elbows[] = {0.5, 1.0, 1.6, -0.5};
  for (double elbow : elbows) {
    for (double wrist : {0.8, -0.8}) {
      Vec6 s = Vec6::Zero();
      s[0] = azimuth;
      s[1] = 0.6;
      s[2] = elbow;
      s[4] = wrist;
      seeds.push_back(s);
    }
  }
  IkResult best = r;
  for (const Vec6& s0 : seeds) {
    IkResult cand = detail::ik_from_seed(model, base, target, detail::clamp_to_limits(model, s0), opt);
    if (cand.success) return cand;
    if (cand.pos_residual < best.pos_residual) best = cand;
  }
  return best;
}

// --- model JSON schema -----------------------------------------------------
//
// { "model_version": "...",
//   "dh":     [ {"a":..,"alpha":..,"d":..,"theta0":..} x6 ],
//   "limits": [ {"lower":..,"upper":..} x6 ],
//   "reach_m": 2.55,
//   "base":   { "to_arm_mount": {"xyz":[..],"quat_wxyz":[..]},
//               "max_speed_mps": 1.39, "arm_rate_hz": 250,
//               "max_joint_speed_radps": 2.5 } }

inline RobotModel model_from_json(const Json& j) {
  RobotModel m;
  m.model_version = require_field(j, "model_version", "robot model").get<std::string>();
  const auto& dh = require_field(j, "dh", "robot model");
  const auto& lim = require_field(j, "limits", "robot model");
  if (dh.size() != kNumJoints || lim.size() != kNumJoints) {
    throw ConfigurationError("robot model: dh and limits must have 6 entries");
  }
  for (int i = 0; i < kNumJoints; ++i) {
    m.dh[i] = {dh[i].at("a").get<double>(), dh[i].at("alpha").get<double>(),
               dh[i].at("d").get<double>(), dh[i].at("theta0").get<double>()};
    m.limits[i] = {lim[i].at("lower").get<double>(), lim[i].at("upper").get<double>()};
    if (m.limits[i].lower > m.limits[i].upper) {
      throw ConfigurationError("robot model: joint " + std::to_string(i + 1) +
                               " lower limit exceeds upper");
    }
  }
  m.reach_m = require_field(j, "reach_m", "robot model").get<double>();
  const auto& base = require_field(j, "base", "robot model");
  m.base_to_arm_mount = geom::pose3_from_json(base.at("to_arm_mount"));
  m.max_base_speed_mps = base.value("max_speed_mps", m.max_base_speed_mps);
  m.arm_rate_hz = base.value("arm_rate_hz", m.arm_rate_hz);
  m.max_joint_speed_radps = base.value("max_joint_speed_radps", m.max_joint_speed_radps);
  m.payload_kg = j.value("payload_kg", m.payload_kg);
  return m;
}

inline RobotModel load_model(const std::string& path) {
  return model_from_json(load_json_file(path));
}

// Built-in copy of configs/robot_default.json so library users and tests do
// not depend on a file path.
inline RobotModel default_model() {
  RobotModel m;
  m.model_version = "1.0";
  m.dh = {DhParam{0.15, -geom::kPi / 2, 0.42, 0.0}, DhParam{1.15, 0.0, 0.0, -geom::kPi / 2},
          DhParam{0.0, -geom::kPi / 2, 0.0, 0.0},   DhParam{0.0, geom::kPi / 2, 1.05, 0.0},
          DhParam{0.0, -geom::kPi / 2, 0.0, 0.0},   DhParam{0.0, 0.0, 0.18, 0.0}};
  m.limits = {JointLimits{-2.96, 2.96}, JointLimits{-1.57, 2.62}, JointLimits{-3.14, 1.31},
              JointLimits{-3.10, 3.10}, JointLimits{-2.10, 2.10}, JointLimits{-3.10, 3.10}};
  m.reach_m = 2.55;
  m.base_to_arm_mount = Pose3(Vec3(0.25, 0.0, 0.55), geom::Quat::Identity());
  return m;
}

// Link sample points for collision queries: `samples_per_link` points on
// each segment between consecutive chain frames (mount->J1->...->flange).
inline std::vector<Vec3> link_points(const RobotModel& model, const Pose2& base, const Vec6& q,
                                     int samples_per_link = 10) {
  const auto frames = chain_frames(model, base, q);
  std::vector<Vec3> pts;
  pts.reserve(static_cast<std::size_t>(kNumJoints) * samples_per_link + 1);
  for (int i = 0; i < kNumJoints; ++i) {
    const Vec3 a = frames[i].t, b = frames[i + 1].t;
    for (int s = 1; s <= samples_per_link; ++s) {
      const double f = static_cast<double>(s) / samples_per_link;
      pts.push_back(a + f * (b - a));
    }
  }
  return pts;
}

}  // namespace fabsim::kin
