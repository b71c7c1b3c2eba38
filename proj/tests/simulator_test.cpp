#include <cmath>

#include <Eigen/Geometry>
#include <gtest/gtest.h>

#include "test_scenes.hpp"
#include "uwsfm/error.hpp"
#include "uwsfm/simulator.hpp"

namespace uwsfm {
namespace {

using testing::make_scene;
using testing::small_config;

constexpr double kDeg = M_PI / 180.0;

SceneTruth single_camera(double mu) {
  SceneTruth s;
  s.scenario = ScenarioKind::FixedCamera;
  s.intrinsics = CameraIntrinsics{800.0, 800.0, 320.0, 240.0};
  s.mu = RefractiveIndex(mu);
  s.poses = {Pose::identity()};
  s.interfaces = {InterfacePlane::canonical(Vec3(0, 0, 1), 1.0)};
  s.waves = {WaveField{}};
  return s;
}

WaveField wave(double amplitude) {
  return WaveField{{Wave{amplitude, 2.0 * M_PI / 0.5, 2.0 * M_PI / 0.7, 0.3}}};
}

TEST(GenerateScene, FixedCameraHasIdentityPosesAndMovingInterfaces) {
  const SceneTruth s = generate_scene(small_config(ScenarioKind::FixedCamera), 1);
  for (const Pose& p : s.poses) EXPECT_EQ(p, Pose::identity());
  EXPECT_FALSE(s.interfaces[1] == s.interfaces[2]);
}

TEST(GenerateScene, StaticInterfaceSharesOneWorldPlane) {
  const SceneTruth s = generate_scene(small_config(ScenarioKind::StaticInterface, 5, 20), 2);
  const InterfacePlane w0 = camera_plane_to_world(s.interfaces[0], s.poses[0]);
  for (int i = 1; i < s.image_count(); ++i) {
    const InterfacePlane w = camera_plane_to_world(s.interfaces[static_cast<std::size_t>(i)],
                                                   s.poses[static_cast<std::size_t>(i)]);
    EXPECT_LE((w.normal.vec() - w0.normal.vec()).norm(), 1e-12);
    EXPECT_NEAR(w.depth, w0.depth, 1e-12);
    EXPECT_FALSE(s.poses[static_cast<std::size_t>(i)] == Pose::identity());
  }
}

TEST(GenerateScene, IsDeterministicPerSeed) {
  for (auto scenario : {ScenarioKind::MovingInterface, ScenarioKind::StaticInterface, ScenarioKind::FixedCamera}) {
    const auto cfg = small_config(scenario, 4, 20, 2);
    const SceneTruth a = generate_scene(cfg, 17);
    const SceneTruth b = generate_scene(cfg, 17);
    EXPECT_EQ(a.points, b.points);
    EXPECT_EQ(a.poses, b.poses);
    EXPECT_EQ(a.interfaces, b.interfaces);
    ASSERT_EQ(a.waves.size(), b.waves.size());
    EXPECT_EQ(render_observations(a).tracks, render_observations(b).tracks);
    EXPECT_NE(generate_scene(cfg, 18).points, a.points);
  }
}

TEST(GenerateScene, PointsLieOnTheMediumSideAndAreObservedEverywhere) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto s = make_scene(small_config(ScenarioKind::MovingInterface, 6, 25), seed);
    for (int i = 0; i < s.scene.image_count(); ++i) {
      const auto& plane = s.scene.interfaces[static_cast<std::size_t>(i)];
      for (const Vec3& P : s.scene.points) {
        const Vec3 X = s.scene.poses[static_cast<std::size_t>(i)].to_camera(P);
        EXPECT_GT(plane.normal.dot(X) - plane.depth, 0.0);
      }
      EXPECT_LE(std::acos(plane.normal.vec().z()), 20.0 * kDeg + 1e-12);
    }
    EXPECT_NO_THROW(s.rendered.tracks.validate());
  }
}

TEST(GenerateScene, InfeasibleConfigsAreRejected) {
  auto cfg = small_config(ScenarioKind::MovingInterface, 1, 20);
  try {
    generate_scene(cfg, 0);
    FAIL() << "expected InfeasibleConfig";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InfeasibleConfig);
  }
  cfg = small_config(ScenarioKind::MovingInterface, 2, 5);
  EXPECT_THROW(generate_scene(cfg, 0), Error);
  cfg = small_config(ScenarioKind::MovingInterface);
  cfg.wave_count = 4;
  EXPECT_THROW(generate_scene(cfg, 0), Error);
}

TEST(Render, AxialPointHitsThePrincipalPoint) {
  const SceneTruth s = single_camera(1.333);
  const auto obs = render_point(s, 0, Vec3(0, 0, 3));
  ASSERT_TRUE(obs.has_value());
  EXPECT_NEAR(obs->pixel.x(), 320.0, 1e-12);
  EXPECT_NEAR(obs->pixel.y(), 240.0, 1e-12);
}

TEST(Render, UnitIndexIsAPinhole) {
  const SceneTruth s = single_camera(1.0);
  for (const Vec3& P : {Vec3(0.1, -0.2, 2.0), Vec3(-0.3, 0.2, 1.5), Vec3(0.05, 0.05, 4.0)}) {
    const auto obs = render_point(s, 0, P);
    ASSERT_TRUE(obs.has_value());
    EXPECT_NEAR(obs->pixel.x(), 800.0 * P.x() / P.z() + 320.0, 1e-9);
    EXPECT_NEAR(obs->pixel.y(), 800.0 * P.y() / P.z() + 240.0, 1e-9);
  }
}

TEST(Render, ZeroAmplitudeWavesMatchFlatRendering) {
  SceneTruth flat = single_camera(1.333);
  SceneTruth wavy = flat;
  wavy.waves = {wave(0.0)};
  for (const Vec3& P : {Vec3(0.1, -0.2, 2.0), Vec3(-0.3, 0.2, 1.5)}) {
    const auto a = render_point(flat, 0, P);
    const auto b = render_point(wavy, 0, P);
    ASSERT_TRUE(a && b);
    EXPECT_LE((a->pixel - b->pixel).norm(), 1e-10);
  }
}

TEST(Render, PointsOutsideTheImageAreOmitted) {
  const SceneTruth s = single_camera(1.333);
  EXPECT_FALSE(render_point(s, 0, Vec3(5.0, 0.0, 2.0)).has_value());
  EXPECT_FALSE(render_point(s, 0, Vec3(0.0, 0.0, 0.5)).has_value());
}

class RenderRoundTrip : public ::testing::TestWithParam<int> {};

TEST_P(RenderRoundTrip, BackProjectionRecoversTheTruePoint) {
  const int waves = GetParam();
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const SceneTruth s = generate_scene(small_config(ScenarioKind::MovingInterface, 4, 20, waves), seed);
    for (int i = 0; i < s.image_count(); ++i) {
      const auto& plane = s.interfaces[static_cast<std::size_t>(i)];
      for (const Vec3& Pw : s.points) {
        const auto obs = render_point(s, i, Pw);
        if (!obs) continue;
        const Vec3 P = s.poses[static_cast<std::size_t>(i)].to_camera(Pw);
        const double depth_after = (P - obs->surface_point).norm();
        const Vec3 back = back_project(obs->pixel, depth_after, plane, obs->local_normal, s.mu, s.intrinsics);
        EXPECT_LE((back - P).norm(), 1e-8);
        // Snell at the surface point with the reported local normal.
        const UnitVec3 in(obs->surface_point);
        const UnitVec3 out(P - obs->surface_point);
        const Vec3& n = obs->local_normal.vec();
        EXPECT_LE((in.vec().cross(n) - s.mu.value() * out.vec().cross(n)).norm(), 1e-10);
        if (waves > 0) {
          const UnitVec3 analytic = s.waves[static_cast<std::size_t>(i)].normal_at(plane, obs->surface_point);
          EXPECT_LE((analytic.vec() - obs->local_normal.vec()).norm(), 1e-10);
          EXPECT_LE(std::acos(std::min(1.0, n.dot(plane.normal.vec()))), 5.0 * kDeg + 1e-9);
        }
      }
    }
  }
}

INSTANTIATE_TEST_SUITE_P(WaveCounts, RenderRoundTrip, ::testing::Values(0, 1, 3));

TEST(Render, DropFractionKeepsTrackInvariants) {
  auto cfg = small_config(ScenarioKind::MovingInterface, 6, 30);
  cfg.drop_fraction = 0.3;
  const auto s = make_scene(cfg, 4);
  EXPECT_LT(s.rendered.tracks.size(), 6u * 30u);
  EXPECT_NO_THROW(s.rendered.tracks.validate());
  for (int j = 0; j < 30; ++j) EXPECT_TRUE(s.rendered.tracks.observed(0, j));
}

TEST(Perturb, ZeroSigmaIsBitIdentical) {
  const auto s = make_scene(small_config(ScenarioKind::MovingInterface), 0);
  EXPECT_EQ(perturb(s.rendered.tracks, 0.0, 3), s.rendered.tracks);
  EXPECT_THROW(perturb(s.rendered.tracks, -1.0, 3), Error);
}

TEST(Perturb, EmpiricalStdMatchesSigma) {
  std::vector<Observation> obs;
  for (int j = 0; j < 5000; ++j) obs.push_back(Observation{0, j, Vec2(100.0, 100.0)});
  const TrackSet tracks(1, 5000, obs);
  const TrackSet noisy = perturb(tracks, 0.5, 11);
  double sum = 0.0;
  double sum2 = 0.0;
  for (const Observation& o : noisy.observations()) {
    for (double d : {o.pixel.x() - 100.0, o.pixel.y() - 100.0}) {
      sum += d;
      sum2 += d * d;
    }
  }
  const double n = 10000.0;
  const double sd = std::sqrt(sum2 / n - (sum / n) * (sum / n));
  EXPECT_NEAR(sd, 0.5, 0.025);
}

TEST(Perturb, SeedsChangeValuesNotStructure) {
  const auto s = make_scene(small_config(ScenarioKind::MovingInterface), 0);
  const TrackSet a = perturb(s.rendered.tracks, 0.5, 1);
  const TrackSet b = perturb(s.rendered.tracks, 0.5, 2);
  ASSERT_EQ(a.size(), b.size());
  EXPECT_NE(a.observations()[0].pixel, b.observations()[0].pixel);
  for (std::size_t k = 0; k < a.size(); ++k) {
    EXPECT_EQ(a.observations()[k].image, b.observations()[k].image);
    EXPECT_EQ(a.observations()[k].point, b.observations()[k].point);
  }
  EXPECT_EQ(perturb(s.rendered.tracks, 0.5, 1), a);
}

TEST(MovingInterfaces, KeepPointsAndPosesAndRedrawPlanes) {
  const auto cfg = small_config(ScenarioKind::StaticInterface, 5, 20);
  const SceneTruth st = generate_scene(cfg, 3);
  const SceneTruth mv = with_moving_interfaces(st, cfg, 99);
  EXPECT_EQ(mv.scenario, ScenarioKind::MovingInterface);
  EXPECT_EQ(mv.points, st.points);
  EXPECT_EQ(mv.poses, st.poses);
  EXPECT_EQ(mv.interfaces[0], st.interfaces[0]);
  for (int i = 1; i < 5; ++i) EXPECT_FALSE(mv.interfaces[static_cast<std::size_t>(i)] == st.interfaces[static_cast<std::size_t>(i)]);
  const RenderedTracks r = render_observations(mv);
  EXPECT_EQ(r.tracks.size(), 5u * 20u);
}

TEST(TruthState, MatchesModeLayout) {
  const auto s = make_scene(small_config(ScenarioKind::MovingInterface, 4, 20, 1), 0);
  for (auto mode : {ConstraintMode::HardWithRef, ConstraintMode::HardNoRef, ConstraintMode::Soft}) {
    const ParameterState st = truth_state(s.scene, s.rendered, mode);
    const TrackSet tracks = mode == ConstraintMode::HardNoRef ? s.rendered.tracks.with_reference(std::nullopt)
                                                               : s.rendered.tracks;
    EXPECT_NO_THROW(st.validate(tracks, mode));
    EXPECT_EQ(st.poses[0], Pose::identity());
    EXPECT_EQ(st.interfaces[0].depth, 1.0);
  }
}

}  // namespace
}  // namespace uwsfm
