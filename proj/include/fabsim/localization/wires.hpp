#pragma once

#include <span>
#include <vector>

#include "fabsim/common/random.hpp"
#include "fabsim/geometry.hpp"

namespace fabsim::loc {

using geom::Pose3;
using geom::Vec3;

// A welded wire segment of the mesh, endpoints in the world frame.
struct WireSegment {
  Vec3 a = Vec3::Zero();
  Vec3 b = Vec3::Zero();
  int layer = 0;
  int wire_id = 0;
};

// Pinhole-style visibility volume of the end-effector camera (+z optical
// axis).
struct CameraFrustum {
  double fov_x = 1.2;  // radians, full angle
  double fov_y = 1.0;
  double min_range = 0.05;
  double max_range = 4.0;

  bool contains(const Vec3& p_cam) const {
    if (p_cam.z() < min_range || p_cam.z() > max_range) return false;
    if (std::abs(p_cam.x()) > p_cam.z() * std::tan(0.5 * fov_x)) return false;
    if (std::abs(p_cam.y()) > p_cam.z() * std::tan(0.5 * fov_y)) return false;
    return true;
  }
};

struct WireObservation {
  int wire_id = 0;
  Vec3 a_cam = Vec3::Zero();
  Vec3 b_cam = Vec3::Zero();
};

// Synthetic stand-in for the stereo line detector: endpoints of the given
// layer's wires that fall inside the frustum, expressed in the camera frame
// with additive Gaussian noise. Deterministic for a given rng state; an
// empty result (nothing in view) is not an error.
inline std::vector<WireObservation> observe_wires(std::span<const WireSegment> wires,
                                                  int layer_index, const Pose3& t_world_camera,
                                                  const CameraFrustum& frustum, double sigma,
                                                  Rng& rng) {
  const Pose3 cam_inv = t_world_camera.inverse();
  std::vector<WireObservation> out;
  for (const auto& w : wires) {
    if (w.layer != layer_index) continue;
    const Vec3 a = cam_inv.apply(w.a);
    const Vec3 b = cam_inv.apply(w.b);
    if (!frustum.contains(a) || !frustum.contains(b)) continue;
    WireObservation obs;
    obs.wire_id = w.wire_id;
    obs.a_cam = a;
    obs.b_cam = b;
    for (int i = 0; i < 3; ++i) {
      obs.a_cam[i] += rng.gaussian(sigma);
      obs.b_cam[i] += rng.gaussian(sigma);
    }
    out.push_back(obs);
  }
  return out;
}

}  // namespace fabsim::loc
