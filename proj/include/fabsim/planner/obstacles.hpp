#pragma once

#include <vector>

#include "fabsim/common/json_io.hpp"
#include "fabsim/kinematics.hpp"

namespace fabsim::planner {

using geom::Vec3;

struct Sphere {
  Vec3 center = Vec3::Zero();
  double radius = 0.0;
};

struct Aabb {
  Vec3 lo = Vec3::Zero();
  Vec3 hi = Vec3::Zero();
};

inline double sphere_distance(const Sphere& s, const Vec3& p) {
  return (p - s.center).norm() - s.radius;
}

// Signed distance to an axis-aligned box: positive outside, negative inside.
inline double aabb_distance(const Aabb& b, const Vec3& p) {
  Vec3 excess;
  bool outside = false;
  double inner = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 3; ++i) {
    excess[i] = std::max({b.lo[i] - p[i], 0.0, p[i] - b.hi[i]});
    if (excess[i] > 0.0) outside = true;
    inner = std::min(inner, std::min(p[i] - b.lo[i], b.hi[i] - p[i]));
  }
  return outside ? excess.norm() : -inner;
}

struct ObstacleScene {
  std::vector<Sphere> spheres;
  std::vector<Aabb> boxes;
  double clearance = 0.0;  // required margin around every obstacle, metres

  static constexpr double kEmptyDistance = 1e6;

  bool empty() const { return spheres.empty() && boxes.empty(); }

  double distance(const Vec3& p) const {
    double d = kEmptyDistance;
    for (const auto& s : spheres) d = std::min(d, sphere_distance(s, p));
    for (const auto& b : boxes) d = std::min(d, aabb_distance(b, p));
    return d;
  }

  Json to_json() const {
    Json js = Json::array(), jb = Json::array();
    for (const auto& s : spheres) {
      js.push_back({{"center", {s.center.x(), s.center.y(), s.center.z()}},
                    {"radius", s.radius}});
    }
    for (const auto& b : boxes) {
      jb.push_back({{"lo", {b.lo.x(), b.lo.y(), b.lo.z()}}, {"hi", {b.hi.x(), b.hi.y(), b.hi.z()}}});
    }
    return Json{{"clearance", clearance}, {"spheres", js}, {"boxes", jb}};
  }

  static ObstacleScene from_json(const Json& j) {
    ObstacleScene sc;
    sc.clearance = j.value("clearance", 0.0);
    if (sc.clearance < 0.0) throw ConfigurationError("obstacle scene: clearance must be >= 0");
    for (const auto& e : j.value("spheres", Json::array())) {
      Sphere s;
      const auto& c = e.at("center");
      s.center = Vec3(c.at(0).get<double>(), c.at(1).get<double>(), c.at(2).get<double>());
      s.radius = e.at("radius").get<double>();
      sc.spheres.push_back(s);
    }
    for (const auto& e : j.value("boxes", Json::array())) {
      Aabb b;
      const auto& lo = e.at("lo");
      const auto& hi = e.at("hi");
      b.lo = Vec3(lo.at(0).get<double>(), lo.at(1).get<double>(), lo.at(2).get<double>());
      b.hi = Vec3(hi.at(0).get<double>(), hi.at(1).get<double>(), hi.at(2).get<double>());
      sc.boxes.push_back(b);
    }
    return sc;
  }
};

// Minimum, over sampled arm-link points, of distance-to-nearest-obstacle
// minus the required clearance. Negative means violation; an empty scene
// reports the large finite cap.
inline double signed_clearance(const ObstacleScene& scene, const kin::RobotModel& model,
                               const geom::Pose2& base, const kin::Vec6& q,
                               int samples_per_link = 10) {
  if (scene.empty()) return ObstacleScene::kEmptyDistance;
  double worst = ObstacleScene::kEmptyDistance;
  for (const auto& p : kin::link_points(model, base, q, samples_per_link)) {
    worst = std::min(worst, scene.distance(p) - scene.clearance);
  }
  return worst;
}

}  // namespace fabsim::planner
