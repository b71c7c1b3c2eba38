#pragma once

#include <vector>

#include "uwsfm/geometry.hpp"
#include "uwsfm/modes.hpp"
#include "uwsfm/tracks.hpp"

namespace uwsfm {

/// World-to-camera rigid transform, X_cam = R(rotation) X_world + translation.
/// The rotation is an axis-angle vector in radians with magnitude <= pi.
struct Pose {
  Vec3 rotation = Vec3::Zero();
  Vec3 translation = Vec3::Zero();

  static Pose identity() { return Pose{}; }
  static Pose from_matrix(const Mat3& R, const Vec3& t);

  Mat3 rotation_matrix() const;
  Vec3 to_camera(const Vec3& world) const;
  Vec3 to_world(const Vec3& camera) const;
  /// Camera center in world coordinates.
  Vec3 center() const;
  Pose inverse() const;

  friend bool operator==(const Pose&, const Pose&) = default;
};

/// Axis-angle vector of `R` with magnitude in [0, pi].
Vec3 rotation_log(const Mat3& R);
Mat3 rotation_exp(const Vec3& axis_angle);

/// Camera-frame interface of an image whose pose is `pose`, given the plane
/// in world coordinates.
InterfacePlane world_plane_to_camera(const InterfacePlane& world, const Pose& pose);
InterfacePlane camera_plane_to_world(const InterfacePlane& camera, const Pose& pose);

/// All unknowns of a reconstruction. Interfaces are stored per image in that
/// image's camera frame. Exactly one of `point_depths` (formulations with a
/// reference image) and `points` (world-frame 3D points) is populated.
struct ParameterState {
  std::vector<Pose> poses;
  std::vector<InterfacePlane> interfaces;
  std::vector<double> point_depths;
  std::vector<Vec3> points;
  /// local_normals[i][j], only populated in soft mode.
  std::vector<std::vector<UnitVec3>> local_normals;
  RefractiveIndex mu{1.0};

  int image_count() const { return static_cast<int>(poses.size()); }

  /// Checks sizes against `tracks`, that the populated point block matches
  /// `mode`, and positivity of every depth.
  void validate(const TrackSet& tracks, ConstraintMode mode) const;

  /// Local normal used for observation (i, j): the stored one in soft mode,
  /// otherwise the interface normal of image i.
  const UnitVec3& normal_for(int image, int point) const;
};

}  // namespace uwsfm
