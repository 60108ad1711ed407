#include "fabsim/mesh/feedback.hpp"

#include <gtest/gtest.h>

#include "fabsim/mesh/design.hpp"

using namespace fabsim;
using namespace fabsim::mesh;
using geom::Pose3;
using geom::Vec3;

namespace {

MeshDesign small_design(int layers = 21) {
  MeshDesignParams p;
  p.layer_count = layers;
  return make_mesh_design(p);
}

// Exact frame graph for the measurement chain: the camera hovers in front
// of the wall looking along +y (optical +z toward the mesh).
loc::FrameGraph exact_graph(const Pose3& t_world_cam) {
  loc::FrameGraph g;
  g.add_frame("cad", loc::FrameGraph::kWorld, Pose3::identity());
  g.add_frame("robot", loc::FrameGraph::kWorld, Pose3::identity());
  g.add_frame("end_effector", "robot", Pose3::identity());
  g.add_frame("ee_camera", "end_effector", t_world_cam);
  return g;
}

Pose3 camera_for(const MeshDesign& d) {
  // Centered on the patch, 2 m back, +z optical axis looking along +y.
  const double z = d.layers.front().front().a.z() + 0.2;
  return Pose3::from_xyz_rpy(0.6, -2.0, z, -geom::kPi / 2, 0.0, 0.0);
}

std::vector<loc::WireObservation> observe_layer(const MeshBuildState& state, int layer,
                                                const Pose3& cam, double sigma, Rng& rng) {
  loc::CameraFrustum frustum;
  frustum.fov_x = 1.6;
  frustum.fov_y = 1.4;
  const auto wires = state.all_wires();
  return loc::observe_wires(wires, layer, cam, frustum, sigma, rng);
}

}  // namespace

TEST(MeshDesign, LayersAreWeldable) {
  const MeshDesign d = small_design();
  ASSERT_EQ(d.layers.size(), 21u);
  for (std::size_t L = 1; L < d.layers.size(); ++L) {
    ASSERT_EQ(d.layers[L].size(), d.layers[L - 1].size());
    for (std::size_t w = 0; w < d.layers[L].size(); ++w) {
      EXPECT_LE((d.layers[L][w].a - d.layers[L - 1][w].a).norm(), 0.05);
    }
  }
}

TEST(WeldLayer, ZeroGainBuildsExactlyAsPlanned) {
  MeshBuildState state(small_design(3));
  DeflectionModel defl;
  defl.gain_m = 0.0;
  Rng rng(1);
  const auto built = weld_layer(state, state.design.layers[1], defl, rng);
  for (std::size_t w = 0; w < built.size(); ++w) {
    EXPECT_LE((built[w].a - state.design.layers[1][w].a).norm(), 1e-12);
    EXPECT_LE((built[w].b - state.design.layers[1][w].b).norm(), 1e-12);
  }
}

TEST(WeldLayer, UniformPullOfGainMagnitude) {
  MeshBuildState state(small_design(3));
  DeflectionModel defl;
  defl.gain_m = 0.003;
  Rng rng(1);
  const auto built = weld_layer(state, state.design.layers[1], defl, rng);
  for (std::size_t w = 0; w < built.size(); ++w) {
    const Vec3 n = state.design.normals[1][w];
    EXPECT_NEAR((built[w].a - state.design.layers[1][w].a).dot(n), defl.gain_m, 1e-12);
    EXPECT_NEAR((built[w].a - state.design.layers[1][w].a).norm(), defl.gain_m, 1e-12);
  }
}

TEST(WeldLayer, SeededNoiseIsDeterministic) {
  DeflectionModel defl;
  defl.gain_m = 0.002;
  defl.noise_sigma = 0.0005;
  auto run = [&] {
    MeshBuildState state(small_design(5));
    Rng rng(42);
    std::vector<WireSegment> last;
    for (int L = 1; L < 5; ++L) last = weld_layer(state, state.design.layers[L], defl, rng);
    return last;
  };
  const auto a = run(), b = run();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t w = 0; w < a.size(); ++w) {
    EXPECT_EQ(a[w].a, b[w].a);  // bitwise
    EXPECT_EQ(a[w].b, b[w].b);
  }
}

TEST(WeldLayer, PlannedTooFarFromPreviousLayerIsWeldReachError) {
  MeshBuildState state(small_design(3));
  DeflectionModel defl;
  Rng rng(1);
  auto planned = state.design.layers[1];
  planned[0].a += Vec3(0.0, 0.2, 0.0);
  EXPECT_THROW(weld_layer(state, planned, defl, rng), WeldReachError);
}

TEST(MeasureContour, ZeroDeflectionZeroNoiseIsExact) {
  MeshBuildState state(small_design(3));
  DeflectionModel defl;
  defl.gain_m = 0.0;
  Rng rng(1);
  weld_layer(state, state.design.layers[1], defl, rng);
  const Pose3 cam = camera_for(state.design);
  const auto obs = observe_layer(state, 1, cam, 0.0, rng);
  ASSERT_FALSE(obs.empty());
  const ContourError err = measure_contour(obs, exact_graph(cam), state.design, 1);
  EXPECT_LE(err.max_abs, 1e-9);
}

TEST(MeasureContour, RecoversInjectedFourMillimetreDeflection) {
  MeshBuildState state(small_design(3));
  DeflectionModel defl;
  defl.gain_m = 0.004;
  Rng rng(1);
  weld_layer(state, state.design.layers[1], defl, rng);
  const Pose3 cam = camera_for(state.design);
  const auto obs = observe_layer(state, 1, cam, 0.0, rng);
  const ContourError err = measure_contour(obs, exact_graph(cam), state.design, 1);
  EXPECT_NEAR(err.max_abs, 0.004, 1e-9);
  EXPECT_NEAR(err.rms, 0.004, 1e-9);
}

TEST(MeasureContour, NoisyMeasurementWithinThreeSigma) {
  MeshBuildState state(small_design(3));
  DeflectionModel defl;
  defl.gain_m = 0.004;
  Rng rng(7);
  weld_layer(state, state.design.layers[1], defl, rng);
  const Pose3 cam = camera_for(state.design);
  const double sigma = 0.5e-3;
  int within = 0, total = 0;
  Rng noise_rng(99);
  for (int k = 0; k < 1000; ++k) {
    const auto obs = observe_layer(state, 1, cam, sigma, noise_rng);
    const ContourError err = measure_contour(obs, exact_graph(cam), state.design, 1);
    for (double v : err.samples) {
      ++total;
      // Truth is +4 mm on every lateral; measured lateral noise mixes the
      // endpoint noise through the normal projection (unit norm).
      if (std::abs(v - 0.004) <= 3.0 * sigma) ++within;
    }
  }
  EXPECT_GE(static_cast<double>(within) / total, 0.99);
}

TEST(MeasureContour, EmptyObservationsError) {
  const MeshDesign d = small_design(3);
  const Pose3 cam = camera_for(d);
  EXPECT_THROW(measure_contour({}, exact_graph(cam), d, 1), MeasurementUnavailableError);
}

TEST(Compensate, ZeroErrorLeavesPlanUnchanged) {
  const MeshDesign d = small_design(3);
  ContourError err;
  err.layer = 1;
  for (const auto& w : d.layers[1]) err.wires.push_back({w.wire_id, 0.0, 0.0});
  const auto planned = compensate_next_layer(d, err);
  for (std::size_t w = 0; w < planned.size(); ++w) {
    EXPECT_EQ(planned[w].a, d.layers[2][w].a);
    EXPECT_EQ(planned[w].b, d.layers[2][w].b);
  }
}

TEST(Compensate, ConstantDriftPreOffsetsOpposite) {
  const MeshDesign d = small_design(3);
  ContourError err;
  err.layer = 1;
  for (const auto& w : d.layers[1]) err.wires.push_back({w.wire_id, 0.005, 0.005});
  const auto planned = compensate_next_layer(d, err);
  for (std::size_t w = 0; w < planned.size(); ++w) {
    const Vec3 n = d.normals[2][w];
    EXPECT_NEAR((planned[w].a - d.layers[2][w].a).dot(n), -0.005, 1e-12);
  }
}

// Closed-loop vs open-loop build over 20 welded layers with a persistent
// 2 mm/layer pull: the compensated run must end at most half the
// uncompensated contour error; kappa = 0 must reproduce the open loop
// exactly for the same seed.
TEST(Compensate, ClosedLoopHalvesOpenLoopErrorOverTwentyLayers) {
  const int layers = 21;  // base + 20 welded
  DeflectionModel defl;
  defl.gain_m = 0.002;
  defl.noise_sigma = 0.1e-3;

  auto run = [&](double kappa, std::uint64_t seed) {
    MeshBuildState state(small_design(layers));
    Rng weld_rng(seed);
    Rng obs_rng(seed + 1000);
    const Pose3 cam = camera_for(state.design);
    const loc::FrameGraph graph = exact_graph(cam);
    std::vector<double> max_per_layer;
    ContourError last_err;
    bool have_err = false;
    for (int L = 1; L < layers; ++L) {
      std::vector<WireSegment> planned = state.design.layers[L];
      if (have_err && kappa != 0.0) {
        CompensationOptions copt;
        copt.gain = kappa;
        planned = compensate_next_layer(state.design, last_err, copt);
      }
      weld_layer(state, planned, defl, weld_rng);
      const auto obs = observe_layer(state, L, cam, 0.0, obs_rng);
      last_err = measure_contour(obs, graph, state.design, L);
      have_err = true;
      max_per_layer.push_back(last_err.max_abs);
    }
    return max_per_layer;
  };

  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto open = run(0.0, seed);
    const auto closed = run(1.0, seed);
    EXPECT_LE(closed.back(), 0.5 * open.back()) << "seed " << seed;
    // Open loop accumulates roughly linearly; closed loop stays bounded.
    EXPECT_GE(open.back(), 10 * defl.gain_m * 0.8) << "seed " << seed;
    EXPECT_LE(closed.back(), 3.0 * defl.gain_m) << "seed " << seed;
  }

  // kappa = 0 path equals the open loop bit for bit (same seed).
  const auto a = run(0.0, 5), b = run(0.0, 5);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i], b[i]);
}
