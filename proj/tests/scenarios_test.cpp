#include <string>

#include <gtest/gtest.h>

#include "test_scenes.hpp"
#include "uwsfm/error.hpp"
#include "uwsfm/scenarios.hpp"

namespace uwsfm {
namespace {

using testing::make_scene;
using testing::make_test_problem;
using testing::small_config;

constexpr auto kMoving = ScenarioKind::MovingInterface;
constexpr auto kStatic = ScenarioKind::StaticInterface;
constexpr auto kFixed = ScenarioKind::FixedCamera;
constexpr auto kHard = ConstraintMode::HardWithRef;

TEST(Counting, TwoImageExamples) {
  EXPECT_EQ(count_unknowns(kMoving, kHard, 2, 12), 24);
  EXPECT_EQ(count_constraints(kHard, 2, 12), 24);
  EXPECT_EQ(count_unknowns(kFixed, kHard, 2, 9), 18);
  EXPECT_EQ(count_constraints(kHard, 2, 9), 18);
  EXPECT_EQ(count_unknowns(kStatic, kHard, 2, 9), 18);
}

TEST(Counting, SoftAndNoRefBookkeeping) {
  EXPECT_EQ(count_unknowns(kMoving, ConstraintMode::Soft, 1, 0), 3);
  EXPECT_EQ(count_unknowns(kMoving, ConstraintMode::Soft, 3, 10), 9 * 3 + 10 + 2 * 10 * 3 - 6);
  EXPECT_EQ(count_unknowns(kMoving, ConstraintMode::HardNoRef, 3, 10), 9 * 3 + 10 - 6 + 20);
  EXPECT_EQ(count_constraints(ConstraintMode::HardNoRef, 3, 10), 60);
}

TEST(MinPoints, PublishedThresholds) {
  EXPECT_EQ(min_points_for_images(kStatic, 2), 15);
  EXPECT_EQ(min_points_for_images(kFixed, 9), 2);
  EXPECT_EQ(min_points_for_images(kMoving, 3), 7);
  const int moving[] = {12, 7, 6, 6, 6, 6, 6, 5, 5, 5};
  const int fixed[] = {9, 4, 3, 3, 3, 3, 3, 2, 2, 2};
  const int stat[] = {15, 7, 6, 5, 5, 5, 4, 4, 4, 4};
  for (int I = 2; I <= 11; ++I) {
    EXPECT_EQ(min_points_for_images(kMoving, I), moving[I - 2]) << I;
    EXPECT_EQ(min_points_for_images(kFixed, I), fixed[I - 2]) << I;
    EXPECT_EQ(min_points_for_images(kStatic, I), stat[I - 2]) << I;
  }
  EXPECT_EQ(min_points_for_images(kMoving, 40), 5);
  EXPECT_FALSE(is_solvable(kMoving, 1, 100));
  EXPECT_TRUE(is_solvable(kMoving, 2, 12));
  EXPECT_FALSE(is_solvable(kMoving, 2, 11));
}

TEST(MinPoints, ThresholdsGiveEnoughConstraints) {
  for (auto scenario : {kMoving, kStatic, kFixed}) {
    for (int I = 2; I <= 40; ++I) {
      const int m = min_points_for_images(scenario, I);
      for (int J = m; J < m + 5; ++J) {
        EXPECT_GE(count_constraints(kHard, I, J), count_unknowns(scenario, kHard, I, J))
            << to_string(scenario) << " I=" << I << " J=" << J;
      }
    }
  }
}

TEST(MinPoints, MovingAndFixedThresholdsAreTight) {
  // The static table is not tight under its own count (see the two-image case).
  for (auto scenario : {kMoving, kFixed}) {
    for (int I = 2; I <= 40; ++I) {
      const int m = min_points_for_images(scenario, I);
      EXPECT_LT(count_constraints(kHard, I, m - 1), count_unknowns(scenario, kHard, I, m - 1))
          << to_string(scenario) << " I=" << I;
    }
  }
}

TEST(Ties, StaticInterfaceAliasesOnePlane) {
  const auto s = make_scene(small_config(kStatic), 0);
  const ParameterState st = truth_state(s.scene, s.rendered, kHard);
  TiedParameters tied = apply_scenario_ties(st, kStatic, kHard, 0);
  EXPECT_EQ(tied.interface_block_count(), 1u);
  EXPECT_EQ(tied.interface_normal(0), tied.interface_normal(3));
  *tied.interface_depth(0) *= 1.5;
  for (int i = 0; i < tied.image_count(); ++i) {
    EXPECT_NEAR(tied.world_interface(i).depth, 1.5 * s.scene.interfaces[0].depth, 1e-12);
  }
  for (int i = 0; i < tied.image_count(); ++i) {
    const InterfacePlane cam = tied.camera_interface(i);
    const InterfacePlane expected = camera_plane_to_world(s.scene.interfaces[static_cast<std::size_t>(i)],
                                                          s.scene.poses[static_cast<std::size_t>(i)]);
    EXPECT_NEAR(camera_plane_to_world(cam, tied.pose_of(i)).normal.vec().dot(expected.normal.vec()), 1.0, 1e-12);
  }
}

TEST(Ties, FixedCameraHasOneIdentityPose) {
  const auto s = make_scene(small_config(kFixed), 0);
  const ParameterState st = truth_state(s.scene, s.rendered, kHard);
  const TiedParameters tied = apply_scenario_ties(st, kFixed, kHard, 0);
  EXPECT_TRUE(tied.poses_fixed());
  EXPECT_EQ(tied.pose_block_count(), 1u);
  for (int i = 0; i < tied.image_count(); ++i) EXPECT_EQ(tied.pose_of(i), Pose::identity());
  EXPECT_EQ(tied.interface_block_count(), static_cast<std::size_t>(tied.image_count()));
}

TEST(Ties, MovingInterfaceIsPassthrough) {
  const auto s = make_scene(small_config(kMoving, 4, 20, 1), 2);
  const ParameterState st = truth_state(s.scene, s.rendered, ConstraintMode::Soft);
  const TiedParameters tied = apply_scenario_ties(st, kMoving, ConstraintMode::Soft, 0);
  EXPECT_EQ(tied.pose_block_count(), 4u);
  EXPECT_EQ(tied.interface_block_count(), 4u);
  ParameterState back;
  back.mu = st.mu;
  tied.write_back(back);
  for (std::size_t i = 0; i < st.poses.size(); ++i) {
    EXPECT_EQ(back.poses[i], st.poses[i]);
    EXPECT_EQ(back.interfaces[i], st.interfaces[i]);
    for (std::size_t j = 0; j < st.local_normals[i].size(); ++j) {
      EXPECT_LE((back.local_normals[i][j].vec() - st.local_normals[i][j].vec()).norm(), 1e-15);
    }
  }
  EXPECT_EQ(back.point_depths, st.point_depths);
}

TEST(Problem, MakeSetsGaugeAndReference) {
  const auto s = make_scene(small_config(kMoving), 0);
  const Problem ref = make_test_problem(s, kHard);
  EXPECT_EQ(ref.gauge.image, *s.rendered.tracks.reference());
  EXPECT_EQ(ref.gauge.depth, 1.0);
  const Problem noref = make_test_problem(s, ConstraintMode::HardNoRef);
  EXPECT_FALSE(noref.tracks.reference().has_value());
  EXPECT_NO_THROW(ref.validate());
  EXPECT_NO_THROW(noref.validate());
}

ErrorCode validate_code(const Problem& p) {
  try {
    p.validate();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "validate did not throw";
  return ErrorCode::InvalidArgument;
}

TEST(Problem, SoftWithoutReferenceIsAConfigError) {
  const auto s = make_scene(small_config(kMoving), 0);
  Problem p = make_test_problem(s, ConstraintMode::Soft);
  p.tracks = p.tracks.with_reference(std::nullopt);
  EXPECT_EQ(validate_code(p), ErrorCode::ConfigError);
}

TEST(Problem, NonPositiveGaugeDepthIsAConfigError) {
  const auto s = make_scene(small_config(kMoving), 0);
  Problem p = make_test_problem(s, kHard);
  p.gauge.depth = 0.0;
  EXPECT_EQ(validate_code(p), ErrorCode::ConfigError);
}

TEST(Problem, UnderdeterminedQuotesTheMinimum) {
  const auto s = make_scene(small_config(kMoving, 3, 7), 0);
  std::vector<Observation> kept;
  for (const Observation& o : s.rendered.tracks.observations()) {
    if (o.point < 6) kept.push_back(o);
  }
  Problem p = Problem::make(TrackSet(3, 6, kept, s.rendered.tracks.reference()), s.scene.intrinsics, kMoving,
                            kHard, s.scene.mu);
  try {
    p.validate();
    FAIL() << "expected Unsolvable";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Unsolvable);
    EXPECT_NE(std::string(e.what()).find("at least 7 points"), std::string::npos) << e.what();
  }
  p.allow_underdetermined = true;
  EXPECT_NO_THROW(p.validate());
}

TEST(Problem, SoftNeedsThreeNeighbors) {
  const auto s = make_scene(small_config(kMoving, 4, 20), 0);
  Problem p = make_test_problem(s, ConstraintMode::Soft);
  p.neighborhood_radius_px = 1e-3;
  EXPECT_EQ(validate_code(p), ErrorCode::Unsolvable);
  p.neighborhood_radius_px = radius_for_neighborhood_size(p.tracks, 3);
  EXPECT_NO_THROW(p.validate());
}

TEST(Modes, StringRoundTrip) {
  for (auto k : {kMoving, kStatic, kFixed}) EXPECT_EQ(parse_scenario(to_string(k)), k);
  for (auto m : {kHard, ConstraintMode::HardNoRef, ConstraintMode::Soft}) EXPECT_EQ(parse_mode(to_string(m)), m);
  EXPECT_EQ(parse_scenario("static-interface"), kStatic);
  EXPECT_EQ(parse_mode("hard-noref"), ConstraintMode::HardNoRef);
  EXPECT_THROW(parse_scenario("static"), Error);
  EXPECT_THROW(parse_mode("hard"), Error);
}

}  // namespace
}  // namespace uwsfm
