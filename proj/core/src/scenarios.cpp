#include "uwsfm/scenarios.hpp"

#include <algorithm>
#include <limits>
#include <string>

namespace uwsfm {

namespace {
constexpr const char* kModule = "scenarios";
}

Problem Problem::make(TrackSet tracks, const CameraIntrinsics& intrinsics, ScenarioKind scenario,
                      ConstraintMode mode, RefractiveIndex mu) {
  Problem p{.tracks = std::move(tracks), .intrinsics = intrinsics, .scenario = scenario,
            .mode = mode, .mu = mu, .gauge = {}};
  p.gauge.image = p.tracks.reference().value_or(0);
  if (mode == ConstraintMode::HardNoRef) p.tracks = p.tracks.with_reference(std::nullopt);
  return p;
}

void Problem::validate() const {
  intrinsics.validate();
  if (uses_reference(mode) && !tracks.reference()) {
    throw Error(ErrorCode::ConfigError, kModule,
                std::string(to_string(mode)) + " requires a reference image");
  }
  if (!uses_reference(mode) && tracks.reference()) {
    throw Error(ErrorCode::ConfigError, kModule, "hard-noref does not use a reference image");
  }
  if (tracks.reference() && *tracks.reference() != gauge.image) {
    throw Error(ErrorCode::ConfigError, kModule, "the gauge image must be the reference image");
  }
  if (gauge.image < 0 || gauge.image >= tracks.image_count()) {
    throw Error(ErrorCode::ConfigError, kModule, "gauge image out of range");
  }
  if (!(gauge.depth > 0.0)) {
    throw Error(ErrorCode::ConfigError, kModule, "gauge depth must be positive");
  }
  if (mode == ConstraintMode::Soft && !(lambda >= 0.0)) {
    throw Error(ErrorCode::ConfigError, kModule, "lambda must be non-negative");
  }
  if (tracks.image_count() < 2) {
    throw Error(ErrorCode::Unsolvable, kModule, "at least two images are required");
  }
  tracks.validate();
  if (allow_underdetermined) return;
  const int I = tracks.image_count();
  const int J = tracks.point_count();
  const int needed = min_points_for_images(scenario, I);
  if (J < needed) {
    throw Error(ErrorCode::Unsolvable, kModule,
                std::string(to_string(scenario)) + " with " + std::to_string(I) +
                    " images requires at least " + std::to_string(needed) + " points, got " +
                    std::to_string(J));
  }
  if (mode == ConstraintMode::Soft) {
    const std::size_t smallest = smallest_neighborhood(build_neighborhoods(tracks, neighborhood_radius_px));
    if (smallest < 3) {
      throw Error(ErrorCode::Unsolvable, kModule,
                  "soft mode requires at least 3 observations in every neighborhood, smallest has " +
                      std::to_string(smallest));
    }
  }
}

long count_unknowns(ScenarioKind scenario, ConstraintMode mode, long I, long J) {
  long hard = 0;
  switch (scenario) {
    case ScenarioKind::MovingInterface: hard = 9 * I + J - 6; break;
    case ScenarioKind::StaticInterface: hard = 3 + 6 * (I - 1) + J; break;
    case ScenarioKind::FixedCamera: hard = 3 + 3 * I + J; break;
  }
  switch (mode) {
    case ConstraintMode::HardWithRef: return hard;
    case ConstraintMode::HardNoRef: return hard + 2 * J;
    case ConstraintMode::Soft: return hard + 2 * J * I;
  }
  return hard;
}

long count_constraints(ConstraintMode mode, long I, long J) {
  return mode == ConstraintMode::HardNoRef ? 2 * J * I : 2 * J * (I - 1);
}

int min_points_for_images(ScenarioKind scenario, int I) {
  if (I < 2) return std::numeric_limits<int>::max();
  switch (scenario) {
    case ScenarioKind::MovingInterface:
      if (I == 2) return 12;
      if (I == 3) return 7;
      if (I <= 8) return 6;
      return 5;
    case ScenarioKind::StaticInterface:
      if (I == 2) return 15;
      if (I == 3) return 7;
      if (I == 4) return 6;
      if (I <= 7) return 5;
      return 4;
    case ScenarioKind::FixedCamera:
      if (I == 2) return 9;
      if (I == 3) return 4;
      if (I <= 8) return 3;
      return 2;
  }
  return std::numeric_limits<int>::max();
}

bool is_solvable(ScenarioKind scenario, int images, int points) {
  return images >= 2 && points >= min_points_for_images(scenario, images);
}

std::size_t smallest_neighborhood(const Neighborhoods& neighborhoods) {
  std::size_t smallest = std::numeric_limits<std::size_t>::max();
  for (const auto& g : neighborhoods) smallest = std::min(smallest, g.size());
  return neighborhoods.empty() ? 0 : smallest;
}

TiedParameters::TiedParameters(const ParameterState& state, ScenarioKind scenario,
                               ConstraintMode mode, int gauge_image)
    : scenario_(scenario),
      mode_(mode),
      image_count_(state.image_count()),
      point_count_(mode == ConstraintMode::HardNoRef ? static_cast<int>(state.points.size())
                                                     : static_cast<int>(state.point_depths.size())),
      gauge_image_(gauge_image) {
  if (gauge_image < 0 || gauge_image >= image_count_) {
    throw Error(ErrorCode::InvalidArgument, kModule, "gauge image out of range");
  }
  const auto pack_pose = [](const Pose& p) {
    return std::array<double, 6>{p.rotation.x(),    p.rotation.y(),    p.rotation.z(),
                                 p.translation.x(), p.translation.y(), p.translation.z()};
  };
  const auto pack3 = [](const Vec3& v) { return std::array<double, 3>{v.x(), v.y(), v.z()}; };

  if (poses_fixed()) {
    poses_.push_back(pack_pose(Pose::identity()));
  } else {
    for (const Pose& p : state.poses) poses_.push_back(pack_pose(p));
  }
  if (interface_in_world()) {
    const auto g = static_cast<std::size_t>(gauge_image);
    const InterfacePlane world = camera_plane_to_world(state.interfaces[g], state.poses[g]);
    normals_.push_back(pack3(world.normal.vec()));
    depths_.push_back(world.depth);
  } else {
    for (const InterfacePlane& plane : state.interfaces) {
      normals_.push_back(pack3(plane.normal.vec()));
      depths_.push_back(plane.depth);
    }
  }
  point_depths_ = state.point_depths;
  for (const Vec3& P : state.points) points_.push_back(pack3(P));
  if (mode == ConstraintMode::Soft) {
    local_normals_.reserve(static_cast<std::size_t>(image_count_) * point_count_);
    for (const auto& row : state.local_normals) {
      for (const UnitVec3& n : row) local_normals_.push_back(pack3(n.vec()));
    }
  }
}

std::size_t TiedParameters::pose_slot(int image) const {
  return poses_fixed() ? 0 : static_cast<std::size_t>(image);
}

std::size_t TiedParameters::interface_slot(int image) const {
  return interface_in_world() ? 0 : static_cast<std::size_t>(image);
}

Pose TiedParameters::pose_of(int image) const {
  const double* p = pose(image);
  return Pose{Vec3(p[0], p[1], p[2]), Vec3(p[3], p[4], p[5])};
}

InterfacePlane TiedParameters::camera_interface(int image) const {
  const double* n = interface_normal(image);
  const InterfacePlane stored{UnitVec3(Vec3(n[0], n[1], n[2])), interface_depth(image)};
  if (!interface_in_world()) return InterfacePlane::canonical(stored.normal.vec(), stored.depth);
  return world_plane_to_camera(stored, pose_of(image));
}

InterfacePlane TiedParameters::world_interface(int image) const {
  const double* n = interface_normal(image);
  const InterfacePlane stored{UnitVec3(Vec3(n[0], n[1], n[2])), interface_depth(image)};
  if (interface_in_world()) return stored;
  return camera_plane_to_world(stored, pose_of(image));
}

void TiedParameters::write_back(ParameterState& state) const {
  const auto I = static_cast<std::size_t>(image_count_);
  state.poses.resize(I);
  state.interfaces.resize(I);
  for (int i = 0; i < image_count_; ++i) {
    state.poses[static_cast<std::size_t>(i)] = pose_of(i);
    state.interfaces[static_cast<std::size_t>(i)] = camera_interface(i);
  }
  state.point_depths = point_depths_;
  state.points.clear();
  for (const auto& P : points_) state.points.emplace_back(P[0], P[1], P[2]);
  if (mode_ == ConstraintMode::Soft) {
    state.local_normals.assign(I, std::vector<UnitVec3>(static_cast<std::size_t>(point_count_)));
    for (int i = 0; i < image_count_; ++i) {
      for (int j = 0; j < point_count_; ++j) {
        const auto& n = local_normals_[static_cast<std::size_t>(i) * point_count_ + j];
        state.local_normals[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
            UnitVec3(Vec3(n[0], n[1], n[2]));
      }
    }
  }
}

TiedParameters apply_scenario_ties(const ParameterState& state, ScenarioKind scenario,
                                   ConstraintMode mode, int gauge_image) {
  return TiedParameters(state, scenario, mode, gauge_image);
}

}  // namespace uwsfm
