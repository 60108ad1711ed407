#pragma once

#include <map>
#include <vector>

#include "fabsim/common/csv.hpp"
#include "fabsim/common/random.hpp"
#include "fabsim/localization/frame_graph.hpp"
#include "fabsim/localization/wires.hpp"
#include "fabsim/mesh/design.hpp"

namespace fabsim::mesh {

// Ground-truth pull process (hidden from the planner): every fresh layer is
// dragged along wherever the previous layer actually ended up, plus a fresh
// pull of `gain_m` along the wire's lateral direction and noise. Open loop
// this accumulates layer over layer.
struct DeflectionModel {
  double gain_m = 0.002;
  double noise_sigma = 0.0;
  double max_pull = 0.06;  // bound on the total carried deviation
};

// As-built state of the mesh being fabricated. Layer 0 is the hand-built
// base layer, placed exactly at design.
struct MeshBuildState {
  MeshDesign design;
  std::vector<std::vector<WireSegment>> as_built;

  explicit MeshBuildState(MeshDesign d) : design(std::move(d)) {
    as_built.push_back(design.layers.front());
  }

  int next_layer() const { return static_cast<int>(as_built.size()); }
  bool complete() const { return next_layer() >= static_cast<int>(design.layers.size()); }

  std::vector<WireSegment> all_wires() const {
    std::vector<WireSegment> out;
    for (const auto& layer : as_built) out.insert(out.end(), layer.begin(), layer.end());
    return out;
  }
};

struct WeldOptions {
  double weldable_offset = 0.08;  // max planned distance from the previous layer
};

// Welds the planned segments of the next layer; returns the as-built
// segments after the deflection process acted on them.
inline std::vector<WireSegment> weld_layer(MeshBuildState& state,
                                           const std::vector<WireSegment>& planned,
                                           const DeflectionModel& deflection, Rng& rng,
                                           const WeldOptions& opt = {}) {
  const int L = state.next_layer();
  if (state.complete()) throw ConfigurationError("weld_layer: design already complete");
  if (static_cast<int>(planned.size()) != state.design.wire_count(L)) {
    throw ConfigurationError("weld_layer: planned segment count mismatch");
  }

  const auto& prev_built = state.as_built[L - 1];
  const auto& prev_design = state.design.layers[L - 1];

  std::vector<WireSegment> built;
  built.reserve(planned.size());
  for (std::size_t w = 0; w < planned.size(); ++w) {
    // Weld reach: the new wire must sit close enough to the one below.
    const double da = (planned[w].a - prev_built[w].a).norm();
    const double db = (planned[w].b - prev_built[w].b).norm();
    if (std::max(da, db) > opt.weldable_offset) {
      throw WeldReachError("weld_layer: wire " + std::to_string(planned[w].wire_id) +
                           " planned " + std::to_string(std::max(da, db)) +
                           " m from the previous layer (weldable " +
                           std::to_string(opt.weldable_offset) + " m)");
    }

    const geom::Vec3 n = state.design.normals[L][w];
    auto carried = [&](const geom::Vec3& built_prev, const geom::Vec3& design_prev) {
      geom::Vec3 dev = built_prev - design_prev;
      dev += deflection.gain_m * n;
      for (int i = 0; i < 3; ++i) dev[i] += rng.gaussian(deflection.noise_sigma);
      if (dev.norm() > deflection.max_pull) dev *= deflection.max_pull / dev.norm();
      return dev;
    };

    WireSegment out = planned[w];
    out.layer = L;
    out.a = planned[w].a + carried(prev_built[w].a, prev_design[w].a);
    out.b = planned[w].b + carried(prev_built[w].b, prev_design[w].b);
    built.push_back(out);
  }
  state.as_built.push_back(built);
  return built;
}

struct WireError {
  int wire_id = 0;
  double lateral_a = 0.0;  // metres, signed along the wire's lateral normal
  double lateral_b = 0.0;
};

struct ContourError {
  int layer = 0;
  std::vector<WireError> wires;
  std::vector<double> samples;  // all laterals
  double max_abs = 0.0;
  double rms = 0.0;
};

// Transforms camera-frame wire observations into the CAD frame through the
// frame graph and reports the lateral deviation from the design layer.
inline ContourError measure_contour(const std::vector<loc::WireObservation>& observations,
                                    const loc::FrameGraph& graph, const MeshDesign& design,
                                    int layer) {
  if (observations.empty()) {
    throw MeasurementUnavailableError("measure_contour: no wire observations");
  }
  const geom::Pose3 cad_from_cam = graph.resolve("cad", "ee_camera");

  std::map<int, std::size_t> index_of;
  for (std::size_t w = 0; w < design.layers[layer].size(); ++w) {
    index_of[design.layers[layer][w].wire_id] = w;
  }

  ContourError err;
  err.layer = layer;
  double ss = 0.0;
  for (const auto& obs : observations) {
    auto it = index_of.find(obs.wire_id);
    if (it == index_of.end()) continue;
    const std::size_t w = it->second;
    const auto& dsg = design.layers[layer][w];
    const geom::Vec3 n = design.normals[layer][w];
    WireError we;
    we.wire_id = obs.wire_id;
    we.lateral_a = (cad_from_cam.apply(obs.a_cam) - dsg.a).dot(n);
    we.lateral_b = (cad_from_cam.apply(obs.b_cam) - dsg.b).dot(n);
    err.wires.push_back(we);
    for (double v : {we.lateral_a, we.lateral_b}) {
      err.samples.push_back(v);
      err.max_abs = std::max(err.max_abs, std::abs(v));
      ss += v * v;
    }
  }
  if (err.samples.empty()) {
    throw MeasurementUnavailableError("measure_contour: observations match no design wire");
  }
  err.rms = std::sqrt(ss / static_cast<double>(err.samples.size()));
  return err;
}

struct CompensationOptions {
  double gain = 1.0;        // kappa
  double clamp_m = 0.04;    // bound on the applied pre-offset
};

// Pre-offsets the next layer's planned endpoints opposite the measured
// error of the layer below. kappa = 0 reproduces the open-loop plan.
inline std::vector<WireSegment> compensate_next_layer(const MeshDesign& design,
                                                      const ContourError& contour,
                                                      const CompensationOptions& opt = {}) {
  const int next = contour.layer + 1;
  if (next >= static_cast<int>(design.layers.size())) {
    throw ConfigurationError("compensate_next_layer: no layer above " +
                             std::to_string(contour.layer));
  }
  std::map<int, const WireError*> by_id;
  for (const auto& w : contour.wires) by_id[w.wire_id] = &w;

  // Wires are index-aligned between consecutive layers (same sampling).
  std::vector<WireSegment> planned = design.layers[next];
  for (std::size_t w = 0; w < planned.size(); ++w) {
    const int below_id = design.layers[contour.layer][w].wire_id;
    auto it = by_id.find(below_id);
    if (it == by_id.end()) continue;  // unobserved wire: leave at design
    const geom::Vec3 n = design.normals[next][w];
    auto offset = [&](double lateral) {
      return -std::clamp(opt.gain * lateral, -opt.clamp_m, opt.clamp_m);
    };
    planned[w].a += offset(it->second->lateral_a) * n;
    planned[w].b += offset(it->second->lateral_b) * n;
  }
  return planned;
}

inline void write_contour_csv(const std::string& path, const std::vector<ContourError>& series) {
  CsvWriter csv(path);
  csv.header({"layer", "max_mm", "rms_mm"});
  for (const auto& e : series) csv.row(e.layer, 1e3 * e.max_abs, 1e3 * e.rms);
}

}  // namespace fabsim::mesh
