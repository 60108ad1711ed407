#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <cmath>

namespace fabsim::geom {

inline constexpr double kPi = 3.14159265358979323846;

using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat3 = Eigen::Matrix3d;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Quat = Eigen::Quaterniond;

// Wraps an angle to (-pi, pi]; a tie at -pi maps to +pi.
inline double wrap_angle(double a) {
  double w = std::remainder(a, 2.0 * kPi);
  if (w <= -kPi) w += 2.0 * kPi;
  return w;
}

// Planar rigid transform (the tracked base lives on the ground plane).
struct Pose2 {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;

  Pose2() = default;
  Pose2(double x_, double y_, double theta_) : x(x_), y(y_), theta(wrap_angle(theta_)) {}

  static Pose2 identity() { return {}; }

  Pose2 compose(const Pose2& o) const {
    const double c = std::cos(theta), s = std::sin(theta);
    return {x + c * o.x - s * o.y, y + s * o.x + c * o.y, theta + o.theta};
  }

  Pose2 inverse() const {
    const double c = std::cos(theta), s = std::sin(theta);
    return {-(c * x + s * y), -(-s * x + c * y), -theta};
  }

  Eigen::Vector2d apply(const Eigen::Vector2d& p) const {
    const double c = std::cos(theta), s = std::sin(theta);
    return {x + c * p.x() - s * p.y(), y + s * p.x() + c * p.y()};
  }
};

// Spatial rigid transform stored as translation + unit quaternion.
struct Pose3 {
  Vec3 t = Vec3::Zero();
  Quat q = Quat::Identity();

  Pose3() = default;
  Pose3(const Vec3& t_, const Quat& q_) : t(t_), q(q_.normalized()) {}

  static Pose3 identity() { return {}; }

  static Pose3 from_xyz_rpy(double x, double y, double z, double roll, double pitch, double yaw) {
    Quat q = Eigen::AngleAxisd(yaw, Vec3::UnitZ()) * Eigen::AngleAxisd(pitch, Vec3::UnitY()) *
             Eigen::AngleAxisd(roll, Vec3::UnitX());
    return {Vec3(x, y, z), q};
  }

  // Embeds a planar base pose in 3D (z = 0, yaw about +z).
  static Pose3 from_pose2(const Pose2& p, double z = 0.0) {
    return {Vec3(p.x, p.y, z), Quat(Eigen::AngleAxisd(p.theta, Vec3::UnitZ()))};
  }

  Mat3 rotation() const { return q.toRotationMatrix(); }

  Pose3 compose(const Pose3& o) const { return {t + q * o.t, q * o.q}; }
  Pose3 operator*(const Pose3& o) const { return compose(o); }

  Pose3 inverse() const {
    const Quat qi = q.conjugate();
    return {qi * (-t), qi};
  }

  Vec3 apply(const Vec3& p) const { return t + q * p; }
};

// Rotation-vector (axis * angle) of a quaternion; inverse of exp_rotvec.
inline Vec3 log_rotvec(const Quat& q_in) {
  Quat q = q_in.normalized();
  if (q.w() < 0.0) q.coeffs() *= -1.0;  // take the short arc
  const double sin_half = q.vec().norm();
  const double cos_half = q.w();
  if (sin_half < 1e-14) return 2.0 * q.vec();  // small-angle limit
  const double angle = 2.0 * std::atan2(sin_half, cos_half);
  return (angle / sin_half) * q.vec();
}

inline Quat exp_rotvec(const Vec3& w) {
  const double angle = w.norm();
  if (angle < 1e-14) {
    Quat q(1.0, 0.5 * w.x(), 0.5 * w.y(), 0.5 * w.z());
    return q.normalized();
  }
  return Quat(Eigen::AngleAxisd(angle, w / angle));
}

// Chart used by the Gauss-Newton estimators: [translation; rotation vector],
// applied as a left increment  T <- (exp(dw), dt) * T.
inline Pose3 apply_increment(const Pose3& T, const Vec6& delta) {
  const Quat dq = exp_rotvec(delta.tail<3>());
  return {delta.head<3>() + dq * T.t, dq * T.q};
}

// 6-vector error between two poses: [t_a - t_b; rotvec(q_a * q_b^-1)].
inline Vec6 pose_error(const Pose3& a, const Pose3& b) {
  Vec6 e;
  e.head<3>() = a.t - b.t;
  e.tail<3>() = log_rotvec(a.q * b.q.conjugate());
  return e;
}

inline double rotation_angle_between(const Quat& a, const Quat& b) {
  return log_rotvec(a * b.conjugate()).norm();
}

}  // namespace fabsim::geom
