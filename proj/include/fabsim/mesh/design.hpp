#pragma once

#include <cmath>
#include <vector>

#include "fabsim/common/json_io.hpp"
#include "fabsim/errors.hpp"
#include "fabsim/localization/wires.hpp"

namespace fabsim::mesh {

using geom::Vec3;
using loc::WireSegment;

// Horizontal contour wires of a doubly curved mesh wall, layer by layer.
// Wires are straight segments sampled along the surface; `normals` holds
// the lateral (out-of-surface) direction per wire, used both by the
// synthetic deflection and by the contour-error measurement.
struct MeshDesign {
  std::vector<std::vector<WireSegment>> layers;
  std::vector<std::vector<Vec3>> normals;  // parallel to layers
  double layer_pitch = 0.02;  // metres between layers
  bool first_layer_hand_built = true;

  int wire_count(int layer) const { return static_cast<int>(layers[layer].size()); }
};

struct MeshDesignParams {
  double length = 1.2;          // metres along the wall
  double base_height = 0.4;     // z of the hand-built first layer
  int layer_count = 21;         // including the hand-built base layer
  double layer_pitch = 0.02;
  double segment_length = 0.15; // wire sampling along the curve
  double amplitude0 = 0.06;     // curvature at the base layer
  double amplitude_per_m = 0.1; // amplitude change with height (double curvature)
  double wavelength = 1.2;
  int leaves = 2;
  double leaf_offset = 0.08;

  Json to_json() const {
    return Json{{"length", length},       {"base_height", base_height},
                {"layer_count", layer_count}, {"layer_pitch", layer_pitch},
                {"segment_length", segment_length}, {"amplitude0", amplitude0},
                {"amplitude_per_m", amplitude_per_m}, {"wavelength", wavelength},
                {"leaves", leaves},       {"leaf_offset", leaf_offset}};
  }
  static MeshDesignParams from_json(const Json& j) {
    MeshDesignParams p;
    p.length = j.value("length", p.length);
    p.base_height = j.value("base_height", p.base_height);
    p.layer_count = j.value("layer_count", p.layer_count);
    p.layer_pitch = j.value("layer_pitch", p.layer_pitch);
    p.segment_length = j.value("segment_length", p.segment_length);
    p.amplitude0 = j.value("amplitude0", p.amplitude0);
    p.amplitude_per_m = j.value("amplitude_per_m", p.amplitude_per_m);
    p.wavelength = j.value("wavelength", p.wavelength);
    p.leaves = j.value("leaves", p.leaves);
    p.leaf_offset = j.value("leaf_offset", p.leaf_offset);
    return p;
  }
};

// y(x, z) = A(z) sin(2 pi x / wavelength): amplitude grows with height, so
// the patch is curved in both directions.
inline MeshDesign make_mesh_design(const MeshDesignParams& p) {
  if (p.layer_count < 2 || p.length <= 0 || p.segment_length <= 0) {
    throw ConfigurationError("make_mesh_design: bad parameters");
  }
  MeshDesign d;
  d.layer_pitch = p.layer_pitch;
  const int segments = std::max(1, static_cast<int>(std::round(p.length / p.segment_length)));
  int wire_id = 0;
  for (int L = 0; L < p.layer_count; ++L) {
    const double z = p.base_height + L * p.layer_pitch;
    const double amp = p.amplitude0 + p.amplitude_per_m * (z - p.base_height);
    std::vector<WireSegment> wires;
    std::vector<Vec3> normals;
    for (int leaf = 0; leaf < p.leaves; ++leaf) {
      const double off = (p.leaves == 1) ? 0.0 : (leaf == 0 ? -0.5 : 0.5) * p.leaf_offset;
      for (int s = 0; s < segments; ++s) {
        const double x0 = p.length * s / segments;
        const double x1 = p.length * (s + 1) / segments;
        auto surf = [&](double x) {
          return Vec3(x, off + amp * std::sin(2.0 * geom::kPi * x / p.wavelength), z);
        };
        WireSegment w;
        w.a = surf(x0);
        w.b = surf(x1);
        w.layer = L;
        w.wire_id = wire_id++;
        wires.push_back(w);
        // Lateral direction: horizontal normal of the centreline tangent.
        const Vec3 tangent = (w.b - w.a).normalized();
        normals.push_back(Vec3(-tangent.y(), tangent.x(), 0.0).normalized());
      }
    }
    d.layers.push_back(std::move(wires));
    d.normals.push_back(std::move(normals));
  }
  return d;
}

}  // namespace fabsim::mesh
