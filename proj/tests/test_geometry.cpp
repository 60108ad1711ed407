#include "fabsim/geometry.hpp"

#include <gtest/gtest.h>

#include "fabsim/common/random.hpp"

using namespace fabsim;
using namespace fabsim::geom;

namespace {

Pose2 random_pose2(Rng& rng) {
  return Pose2(rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-4 * kPi, 4 * kPi));
}

Pose3 random_pose3(Rng& rng) {
  Vec3 axis(rng.gaussian(), rng.gaussian(), rng.gaussian());
  if (axis.norm() < 1e-9) axis = Vec3::UnitX();
  axis.normalize();
  Quat q(Eigen::AngleAxisd(rng.uniform(-kPi, kPi), axis));
  return Pose3(Vec3(rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3)), q);
}

}  // namespace

TEST(WrapAngle, RangeAndTies) {
  EXPECT_DOUBLE_EQ(wrap_angle(0.0), 0.0);
  EXPECT_DOUBLE_EQ(wrap_angle(kPi), kPi);
  EXPECT_DOUBLE_EQ(wrap_angle(-kPi), kPi);  // tie maps to +pi
  EXPECT_NEAR(wrap_angle(3 * kPi), kPi, 1e-15);
  EXPECT_NEAR(wrap_angle(2 * kPi + 0.25), 0.25, 1e-12);
  Rng rng(7);
  for (int i = 0; i < 1000; ++i) {
    const double a = rng.uniform(-50, 50);
    const double w = wrap_angle(a);
    EXPECT_GT(w, -kPi);
    EXPECT_LE(w, kPi);
    EXPECT_NEAR(std::sin(w), std::sin(a), 1e-9);
    EXPECT_NEAR(std::cos(w), std::cos(a), 1e-9);
  }
}

TEST(Pose2, GroupAxioms) {
  Rng rng(13);
  for (int i = 0; i < 500; ++i) {
    const Pose2 a = random_pose2(rng), b = random_pose2(rng), c = random_pose2(rng);

    // Associativity.
    const Pose2 ab_c = a.compose(b).compose(c);
    const Pose2 a_bc = a.compose(b.compose(c));
    EXPECT_NEAR(ab_c.x, a_bc.x, 1e-12);
    EXPECT_NEAR(ab_c.y, a_bc.y, 1e-12);
    EXPECT_NEAR(wrap_angle(ab_c.theta - a_bc.theta), 0.0, 1e-12);

    // compose(p, inverse(p)) = identity.
    const Pose2 e = a.compose(a.inverse());
    EXPECT_NEAR(e.x, 0.0, 1e-12);
    EXPECT_NEAR(e.y, 0.0, 1e-12);
    EXPECT_NEAR(wrap_angle(e.theta), 0.0, 1e-12);
  }
}

TEST(Pose2, ThetaNormalizedOnConstruction) {
  const Pose2 p(0, 0, 5 * kPi + 0.5);
  EXPECT_GT(p.theta, -kPi);
  EXPECT_LE(p.theta, kPi);
  EXPECT_NEAR(p.theta, wrap_angle(5 * kPi + 0.5), 1e-15);
}

TEST(Pose3, GroupAxiomsAndNorm) {
  Rng rng(17);
  for (int i = 0; i < 500; ++i) {
    const Pose3 a = random_pose3(rng), b = random_pose3(rng), c = random_pose3(rng);

    EXPECT_NEAR(a.q.norm(), 1.0, 1e-9);
    EXPECT_LT((a.rotation() * a.rotation().transpose() - Mat3::Identity()).norm(), 1e-9);

    const Pose3 ab_c = (a * b) * c;
    const Pose3 a_bc = a * (b * c);
    EXPECT_LT((ab_c.t - a_bc.t).norm(), 1e-12);
    EXPECT_LT(rotation_angle_between(ab_c.q, a_bc.q), 1e-12);

    const Pose3 e = a * a.inverse();
    EXPECT_LT(e.t.norm(), 1e-12);
    EXPECT_LT(rotation_angle_between(e.q, Quat::Identity()), 1e-12);
  }
}

TEST(Pose3, ApplyMatchesMatrixForm) {
  Rng rng(23);
  for (int i = 0; i < 200; ++i) {
    const Pose3 a = random_pose3(rng);
    const Vec3 p(rng.gaussian(), rng.gaussian(), rng.gaussian());
    const Vec3 via_matrix = a.rotation() * p + a.t;
    EXPECT_LT((a.apply(p) - via_matrix).norm(), 1e-12);
  }
}

TEST(RotVec, LogExpRoundTrip) {
  Rng rng(29);
  for (int i = 0; i < 500; ++i) {
    Vec3 w(rng.gaussian(), rng.gaussian(), rng.gaussian());
    if (w.norm() > 3.0) w *= 3.0 / w.norm();  // keep below pi
    const Quat q = exp_rotvec(w);
    EXPECT_LT((log_rotvec(q) - w).norm(), 1e-9);
  }
  // Small-angle branch.
  const Vec3 tiny(1e-10, -2e-10, 3e-11);
  EXPECT_LT((log_rotvec(exp_rotvec(tiny)) - tiny).norm(), 1e-15);
}

TEST(Increment, AppliesOnLeft) {
  Rng rng(31);
  for (int i = 0; i < 200; ++i) {
    const Pose3 T = random_pose3(rng);
    Vec6 d;
    for (int k = 0; k < 6; ++k) d[k] = 0.1 * rng.gaussian();
    const Pose3 Td = apply_increment(T, d);
    const Pose3 expected = Pose3(d.head<3>(), exp_rotvec(d.tail<3>())) * T;
    EXPECT_LT((Td.t - expected.t).norm(), 1e-12);
    EXPECT_LT(rotation_angle_between(Td.q, expected.q), 1e-12);
  }
}
