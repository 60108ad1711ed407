#pragma once

#include <map>
#include <vector>

#include <Eigen/Dense>

#include "fabsim/common/json_io.hpp"
#include "fabsim/errors.hpp"
#include "fabsim/geometry.hpp"

namespace fabsim::loc {

using geom::Mat6;
using geom::Pose3;
using geom::Vec3;
using geom::Vec6;

struct PoseEstimate {
  Pose3 pose;
  Mat6 covariance = Mat6::Zero();
  double residual = 0.0;  // RMS translation residual, metres
  int num_used = 0;
  int num_skipped = 0;  // observations of tags absent from the map
};

// Calibrated map of fiducial markers: tag id -> pose in world.
struct TagMap {
  std::map<int, Pose3> tags;
  double side_m = 0.16;
  bool calibrated = false;

  Json to_json() const {
    Json arr = Json::array();
    for (const auto& [id, pose] : tags) {
      Json e = geom::to_json(pose);
      e["id"] = id;
      arr.push_back(e);
    }
    return Json{{"side_m", side_m}, {"tags", arr}};
  }

  static TagMap from_json(const Json& j) {
    TagMap m;
    m.side_m = j.value("side_m", 0.16);
    for (const auto& e : require_field(j, "tags", "tag map")) {
      m.tags[e.at("id").get<int>()] = geom::pose3_from_json(e);
    }
    m.calibrated = true;
    return m;
  }
};

// One fiducial sighting: pose of the tag in the camera frame plus the
// detector noise model (this stands in for the real image pipeline).
struct TagObservation {
  int tag_id = 0;
  Pose3 camera_to_tag;
  double sigma_translation = 0.0;  // metres
  double sigma_rotation = 0.0;     // radians
};

// Robot pose in world from tag sightings: Gauss-Newton on a 6-parameter
// increment, minimizing weighted squared pose residuals over all mapped
// observations. camera_in_robot is the extrinsic (camera pose in the robot
// frame).
inline PoseEstimate localize_from_tags(const TagMap& map,
                                       const std::vector<TagObservation>& observations,
                                       const Pose3& camera_in_robot) {
  std::vector<const TagObservation*> used;
  int skipped = 0;
  for (const auto& o : observations) {
    if (map.tags.count(o.tag_id)) {
      used.push_back(&o);
    } else {
      ++skipped;
    }
  }
  if (used.empty()) throw NoFixError("no observation matches a mapped tag");

  constexpr double kSigmaFloor = 1e-6;

  // Closed-form initialization from the first observation.
  const Pose3& t_w_tag0 = map.tags.at(used.front()->tag_id);
  Pose3 t_w_r = t_w_tag0 * used.front()->camera_to_tag.inverse() * camera_in_robot.inverse();

  const int m = static_cast<int>(used.size());
  Eigen::VectorXd r(6 * m), w(6 * m);
  Eigen::MatrixXd J(6 * m, 6);

  auto stack_residuals = [&](const Pose3& pose, Eigen::VectorXd& out) {
    for (int i = 0; i < m; ++i) {
      const Pose3 pred = (pose * camera_in_robot).inverse() * map.tags.at(used[i]->tag_id);
      out.segment<6>(6 * i) = geom::pose_error(pred, used[i]->camera_to_tag);
    }
  };

  for (int i = 0; i < m; ++i) {
    const double wt = 1.0 / std::max(used[i]->sigma_translation, kSigmaFloor);
    const double wr = 1.0 / std::max(used[i]->sigma_rotation, kSigmaFloor);
    w.segment<3>(6 * i).setConstant(wt);
    w.segment<3>(6 * i + 3).setConstant(wr);
  }

  const double h = 1e-7;
  Eigen::VectorXd rp(6 * m), rm(6 * m);
  for (int it = 0; it < 50; ++it) {
    stack_residuals(t_w_r, r);
    for (int k = 0; k < 6; ++k) {
      Vec6 d = Vec6::Zero();
      d[k] = h;
      stack_residuals(geom::apply_increment(t_w_r, d), rp);
      d[k] = -h;
      stack_residuals(geom::apply_increment(t_w_r, d), rm);
      J.col(k) = (rp - rm) / (2 * h);
    }
    const Eigen::MatrixXd Jw = w.asDiagonal() * J;
    const Eigen::VectorXd rw = w.cwiseProduct(r);
    const Vec6 delta = -(Jw.transpose() * Jw).ldlt().solve(Jw.transpose() * rw);
    t_w_r = geom::apply_increment(t_w_r, delta);
    if (delta.norm() < 1e-10) break;
  }

  PoseEstimate est;
  est.pose = t_w_r;
  est.num_used = m;
  est.num_skipped = skipped;

  stack_residuals(t_w_r, r);
  double ss = 0.0;
  for (int i = 0; i < m; ++i) ss += r.segment<3>(6 * i).squaredNorm();
  est.residual = std::sqrt(ss / m);

  // Gauss-Newton covariance (J' Sigma^-1 J)^-1 at the solution.
  for (int k = 0; k < 6; ++k) {
    Vec6 d = Vec6::Zero();
    d[k] = h;
    stack_residuals(geom::apply_increment(t_w_r, d), rp);
    d[k] = -h;
    stack_residuals(geom::apply_increment(t_w_r, d), rm);
    J.col(k) = (rp - rm) / (2 * h);
  }
  const Eigen::MatrixXd Jw2 = w.cwiseProduct(w).asDiagonal() * J;
  const Mat6 info = J.transpose() * Jw2;
  est.covariance = info.ldlt().solve(Mat6::Identity());
  return est;
}

}  // namespace fabsim::loc
