#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "test_scenes.hpp"
#include "uwsfm/error.hpp"
#include "uwsfm/evaluation.hpp"
#include "uwsfm/optimizer.hpp"
#include "uwsfm/residuals.hpp"

namespace uwsfm {
namespace {

using testing::make_scene;
using testing::make_test_problem;
using testing::small_config;
using testing::TestScene;

double relative_rmse(const Problem& p, const ParameterState& st, const SceneTruth& truth) {
  return align_similarity(world_points(p, st), truth.points).rmse / scene_scale(truth.points);
}

ParameterState jitter(ParameterState st, std::uint64_t seed, double sigma) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, sigma);
  const auto v = [&] { return Vec3(g(rng), g(rng), g(rng)); };
  for (std::size_t i = 1; i < st.poses.size(); ++i) {
    st.poses[i].rotation += v();
    st.poses[i].translation += v();
    st.interfaces[i] = InterfacePlane{UnitVec3(st.interfaces[i].normal.vec() + v()),
                                      st.interfaces[i].depth * (1.0 + g(rng))};
  }
  for (double& d : st.point_depths) d *= 1.0 + g(rng);
  for (Vec3& P : st.points) P += v();
  for (auto& row : st.local_normals) {
    for (UnitVec3& n : row) n = UnitVec3(n.vec() + 0.1 * v());
  }
  return st;
}

class PerScenario : public ::testing::TestWithParam<ScenarioKind> {};

TEST_P(PerScenario, TruthIsAlreadyOptimal) {
  const auto s = make_scene(small_config(GetParam(), 5, 25), 1);
  for (auto mode : {ConstraintMode::HardWithRef, ConstraintMode::HardNoRef}) {
    const Problem p = make_test_problem(s, mode);
    const SolveResult r = solve(p, truth_state(s.scene, s.rendered, mode));
    EXPECT_LE(r.report.iterations, 2);
    const double fx = s.scene.intrinsics.fx;
    EXPECT_LE(r.report.final_energy, 1e-16 * fx * fx * static_cast<double>(p.tracks.size()));
  }
}

TEST_P(PerScenario, NoiselessInitializationConvergesToTruth) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto s = make_scene(small_config(GetParam(), 6, 30), seed);
    const Problem p = make_test_problem(s, ConstraintMode::HardWithRef);
    const Reconstruction rec = reconstruct(p);
    EXPECT_LE(relative_rmse(p, rec.result.state, s.scene), 1e-6) << "seed " << seed;
  }
}

TEST_P(PerScenario, GaugeAndTiesArePreserved) {
  const auto s = make_scene(small_config(GetParam(), 5, 25), 2);
  const Problem p = make_test_problem(s, ConstraintMode::HardWithRef);
  const ParameterState init = initialize(p);
  const SolveResult r = solve(p, init);
  const auto g = static_cast<std::size_t>(p.gauge.image);
  EXPECT_EQ(r.state.poses[g], Pose::identity());
  EXPECT_EQ(r.state.interfaces[g].depth, p.gauge.depth);
  if (GetParam() == ScenarioKind::FixedCamera) {
    for (const Pose& pose : r.state.poses) EXPECT_EQ(pose, Pose::identity());
  }
  if (GetParam() == ScenarioKind::StaticInterface) {
    const InterfacePlane w0 = camera_plane_to_world(r.state.interfaces[g], r.state.poses[g]);
    for (std::size_t i = 0; i < r.state.poses.size(); ++i) {
      const InterfacePlane w = camera_plane_to_world(r.state.interfaces[i], r.state.poses[i]);
      EXPECT_LE((w.normal.vec() - w0.normal.vec()).norm(), 1e-12);
      EXPECT_LE(std::abs(w.depth - w0.depth), 1e-12);
    }
  }
  for (const InterfacePlane& plane : r.state.interfaces) EXPECT_NEAR(plane.normal.vec().norm(), 1.0, 1e-12);
}

INSTANTIATE_TEST_SUITE_P(Scenarios, PerScenario,
                         ::testing::Values(ScenarioKind::MovingInterface, ScenarioKind::StaticInterface,
                                           ScenarioKind::FixedCamera));

TEST(Solve, EnergyTraceIsMonotone) {
  for (auto mode : {ConstraintMode::HardWithRef, ConstraintMode::HardNoRef}) {
    const auto s = make_scene(small_config(ScenarioKind::MovingInterface, 5, 25), 3);
    const Problem p = make_test_problem(s, mode);
    const SolveResult r = solve(p, initialize(p));
    ASSERT_GE(r.report.energy_trace.size(), 2u);
    for (std::size_t k = 1; k < r.report.energy_trace.size(); ++k) {
      EXPECT_LE(r.report.energy_trace[k], r.report.energy_trace[k - 1]);
    }
    EXPECT_LE(r.report.final_energy, r.report.initial_energy);
    EXPECT_EQ(r.report.energy_trace.size(), r.report.step_norms.size() + 1);
  }
}

TEST(Solve, DepthPerturbationIsUndone) {
  const auto s = make_scene(small_config(ScenarioKind::MovingInterface, 4, 20), 4);
  const Problem p = make_test_problem(s, ConstraintMode::HardWithRef);
  ParameterState st = truth_state(s.scene, s.rendered, p.mode);
  for (double& d : st.point_depths) d *= 1.01;
  const double e0 = total_energy(p.context(), st, p.mode);
  EXPECT_GT(e0, 1e-6);
  const SolveResult r = solve(p, st);
  EXPECT_LT(r.report.final_energy, 1e-12 * e0);
}

TEST(Solve, NoisyScenesImproveOnTheInitializer) {
  // Default moving-interface scenes with 0.5 px noise.
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto cfg = small_config(ScenarioKind::MovingInterface, 10, 30);
    auto s = make_scene(cfg, seed);
    s.rendered.tracks = perturb(s.rendered.tracks, 0.5, seed + 1);
    const Problem p = make_test_problem(s, ConstraintMode::HardWithRef);
    const Reconstruction rec = reconstruct(p);
    EXPECT_LT(relative_rmse(p, rec.result.state, s.scene), relative_rmse(p, rec.initial.state, s.scene))
        << "seed " << seed;
  }
}

TEST(Solve, SoftModeStartsFromHardWarmStart) {
  const auto s = make_scene(small_config(ScenarioKind::MovingInterface, 4, 30, 1), 5);
  Problem p = make_test_problem(s, ConstraintMode::Soft);
  p.neighborhood_radius_px = radius_for_neighborhood_size(p.tracks, 3);
  p.lambda = 1e-3;
  SolveOptions opt;
  opt.max_iterations = 50;
  const Reconstruction rec = reconstruct(p, {}, opt);
  ASSERT_TRUE(rec.warm_start.has_value());
  EXPECT_EQ(rec.result.state.local_normals.size(), 4u);
  for (const auto& row : rec.result.state.local_normals) {
    for (const UnitVec3& n : row) EXPECT_NEAR(n.vec().norm(), 1.0, 1e-12);
  }
  EXPECT_LE(rec.result.report.final_energy, rec.result.report.initial_energy);
  EXPECT_EQ(rec.result.state.interfaces[0].depth, 1.0);
}

TEST(Solve, HoldInterfacesKeepsThemFixed) {
  const auto s = make_scene(small_config(ScenarioKind::MovingInterface, 4, 20), 6);
  const Problem p = make_test_problem(s, ConstraintMode::HardWithRef);
  const ParameterState init = initialize(p);
  SolveOptions opt;
  opt.hold_interfaces = true;
  const SolveResult r = solve(p, init, opt);
  for (std::size_t i = 0; i < init.interfaces.size(); ++i) {
    EXPECT_LE((r.state.interfaces[i].normal.vec() - init.interfaces[i].normal.vec()).norm(), 1e-15);
    EXPECT_EQ(r.state.interfaces[i].depth, init.interfaces[i].depth);
  }
}

TEST(Solve, HuberLossLowersTheEnergy) {
  auto s = make_scene(small_config(ScenarioKind::MovingInterface, 5, 25), 7);
  s.rendered.tracks = perturb(s.rendered.tracks, 1.0, 3);
  const Problem p = make_test_problem(s, ConstraintMode::HardWithRef);
  SolveOptions opt;
  opt.loss = RobustLoss::Huber;
  const SolveResult r = solve(p, initialize(p), opt);
  EXPECT_LT(r.report.final_energy, r.report.initial_energy);
}

TEST(SolveOptions, RejectsInvalidValues) {
  SolveOptions o;
  EXPECT_NO_THROW(o.validate());
  o.max_iterations = 0;
  EXPECT_THROW(o.validate(), Error);
  o = SolveOptions{};
  o.function_tolerance = 0.0;
  EXPECT_THROW(o.validate(), Error);
  o = SolveOptions{};
  o.gradient_tolerance = -1.0;
  try {
    o.validate();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ConfigError);
  }
}

class Gradients : public ::testing::TestWithParam<ConstraintMode> {};

TEST_P(Gradients, MatchFiniteDifferencesAtRandomStates) {
  const ConstraintMode mode = GetParam();
  for (auto scenario : {ScenarioKind::MovingInterface, ScenarioKind::StaticInterface, ScenarioKind::FixedCamera}) {
    const auto s = make_scene(small_config(scenario, 4, 10, mode == ConstraintMode::Soft ? 1 : 0), 8);
    Problem p = make_test_problem(s, mode);
    p.neighborhood_radius_px = 1000.0;
    for (std::uint64_t k = 0; k < 5; ++k) {
      const ParameterState st = jitter(truth_state(s.scene, s.rendered, mode), k, 0.02);
      const GradientCheckResult g = check_gradients(p, st);
      EXPECT_GT(g.residual_blocks, 0);
      EXPECT_LE(g.max_relative_error, 1e-4) << to_string(scenario) << " " << g.worst_block;
    }
  }
}

TEST_P(Gradients, ZeroResidualStateUsesTheAbsoluteFallback) {
  const auto s = make_scene(small_config(ScenarioKind::MovingInterface, 4, 10, 1), 9);
  Problem p = make_test_problem(s, GetParam());
  p.neighborhood_radius_px = 1000.0;
  const GradientCheckResult g = check_gradients(p, truth_state(s.scene, s.rendered, GetParam()));
  EXPECT_TRUE(std::isfinite(g.max_relative_error));
  EXPECT_LE(g.max_relative_error, 1e-4);
}

INSTANTIATE_TEST_SUITE_P(Modes, Gradients,
                         ::testing::Values(ConstraintMode::HardWithRef, ConstraintMode::HardNoRef,
                                           ConstraintMode::Soft));

}  // namespace
}  // namespace uwsfm
