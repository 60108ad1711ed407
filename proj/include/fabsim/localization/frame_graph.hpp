#pragma once

#include <map>
#include <string>
#include <vector>

#include "fabsim/errors.hpp"
#include "fabsim/geometry.hpp"

namespace fabsim::loc {

using geom::Mat6;
using geom::Pose3;

// Tree of named coordinate frames rooted at "world" (the frame taxonomy of
// the wall/mesh processes: world, tag_i, robot, base_camera_j, end_effector,
// ee_camera). Each edge stores the child's pose in its parent plus a 6x6
// covariance of that estimate.
class FrameGraph {
 public:
  static constexpr const char* kWorld = "world";

  void add_frame(const std::string& name, const std::string& parent, const Pose3& pose,
                 const Mat6& covariance = Mat6::Zero()) {
    if (name == kWorld) throw ConfigurationError("frame graph: cannot redefine world");
    if (edges_.count(name)) throw ConfigurationError("frame graph: duplicate frame " + name);
    if (parent != kWorld && !edges_.count(parent)) {
      throw ConfigurationError("frame graph: unknown parent " + parent);
    }
    edges_[name] = Edge{parent, pose, covariance};
  }

  bool has_frame(const std::string& name) const {
    return name == kWorld || edges_.count(name) > 0;
  }

  // Updates an existing edge (e.g. a fresh robot pose estimate).
  void set_edge(const std::string& name, const Pose3& pose,
                const Mat6& covariance = Mat6::Zero()) {
    auto it = edges_.find(name);
    if (it == edges_.end()) throw ConfigurationError("frame graph: unknown frame " + name);
    it->second.pose = pose;
    it->second.covariance = covariance;
  }

  Pose3 pose_in_world(const std::string& name) const {
    if (name == kWorld) return Pose3::identity();
    Pose3 acc = Pose3::identity();
    std::string cur = name;
    int hops = 0;
    while (cur != kWorld) {
      auto it = edges_.find(cur);
      if (it == edges_.end()) throw ConfigurationError("frame graph: unknown frame " + cur);
      acc = it->second.pose * acc;
      cur = it->second.parent;
      if (++hops > static_cast<int>(edges_.size())) {
        throw ConfigurationError("frame graph: cycle detected at " + cur);
      }
    }
    return acc;
  }

  // Pose of `target` expressed in `reference`.
  Pose3 resolve(const std::string& reference, const std::string& target) const {
    return pose_in_world(reference).inverse() * pose_in_world(target);
  }

  const Mat6& edge_covariance(const std::string& name) const {
    auto it = edges_.find(name);
    if (it == edges_.end()) throw ConfigurationError("frame graph: unknown frame " + name);
    return it->second.covariance;
  }

  std::vector<std::string> frames() const {
    std::vector<std::string> out{kWorld};
    for (const auto& [k, v] : edges_) out.push_back(k);
    return out;
  }

 private:
  struct Edge {
    std::string parent;
    Pose3 pose;
    Mat6 covariance;
  };
  std::map<std::string, Edge> edges_;
};

}  // namespace fabsim::loc
