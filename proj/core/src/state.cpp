#include "uwsfm/state.hpp"

#include <cmath>
#include <string>

#include <Eigen/Geometry>

namespace uwsfm {

namespace {
constexpr const char* kModule = "residuals";
}

Mat3 rotation_exp(const Vec3& axis_angle) {
  const double angle = axis_angle.norm();
  if (angle < 1e-300) return Mat3::Identity();
  return Eigen::AngleAxisd(angle, axis_angle / angle).toRotationMatrix();
}

Vec3 rotation_log(const Mat3& R) {
  Eigen::AngleAxisd aa(R);
  double angle = aa.angle();
  Vec3 axis = aa.axis();
  if (angle > M_PI) {
    angle = 2.0 * M_PI - angle;
    axis = -axis;
  }
  return axis * angle;
}

Pose Pose::from_matrix(const Mat3& R, const Vec3& t) { return Pose{rotation_log(R), t}; }

Mat3 Pose::rotation_matrix() const { return rotation_exp(rotation); }

Vec3 Pose::to_camera(const Vec3& world) const { return rotation_matrix() * world + translation; }

Vec3 Pose::to_world(const Vec3& camera) const {
  return rotation_matrix().transpose() * (camera - translation);
}

Vec3 Pose::center() const { return -(rotation_matrix().transpose() * translation); }

Pose Pose::inverse() const {
  const Mat3 Rt = rotation_matrix().transpose();
  return Pose{rotation_log(Rt), -(Rt * translation)};
}

InterfacePlane world_plane_to_camera(const InterfacePlane& world, const Pose& pose) {
  const Vec3 n = pose.rotation_matrix() * world.normal.vec();
  return InterfacePlane::canonical(n, world.depth + n.dot(pose.translation));
}

InterfacePlane camera_plane_to_world(const InterfacePlane& camera, const Pose& pose) {
  const Mat3 R = pose.rotation_matrix();
  const Vec3 n = R.transpose() * camera.normal.vec();
  return InterfacePlane{UnitVec3(n), camera.depth - camera.normal.dot(pose.translation)};
}

void ParameterState::validate(const TrackSet& tracks, ConstraintMode mode) const {
  const auto I = static_cast<std::size_t>(tracks.image_count());
  const auto J = static_cast<std::size_t>(tracks.point_count());
  if (poses.size() != I || interfaces.size() != I) {
    throw Error(ErrorCode::InvalidArgument, kModule, "pose/interface count does not match the track set");
  }
  if (mode == ConstraintMode::HardNoRef) {
    if (points.size() != J || !point_depths.empty()) {
      throw Error(ErrorCode::InvalidArgument, kModule, "hard-noref requires 3D points and no point depths");
    }
  } else {
    if (point_depths.size() != J || !points.empty()) {
      throw Error(ErrorCode::InvalidArgument, kModule, "reference formulations require point depths and no 3D points");
    }
    for (std::size_t j = 0; j < J; ++j) {
      if (!(point_depths[j] > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, kModule, "point depth " + std::to_string(j) + " is not positive");
      }
    }
  }
  if (mode == ConstraintMode::Soft) {
    if (local_normals.size() != I) {
      throw Error(ErrorCode::InvalidArgument, kModule, "soft mode requires local normals for every image");
    }
    for (const auto& row : local_normals) {
      if (row.size() != J) {
        throw Error(ErrorCode::InvalidArgument, kModule, "local normal table has the wrong width");
      }
    }
  }
  for (std::size_t i = 0; i < I; ++i) {
    if (!(interfaces[i].depth > 0.0)) {
      throw Error(ErrorCode::InvalidArgument, kModule, "interface depth " + std::to_string(i) + " is not positive");
    }
  }
}

const UnitVec3& ParameterState::normal_for(int image, int point) const {
  if (!local_normals.empty()) {
    return local_normals[static_cast<std::size_t>(image)][static_cast<std::size_t>(point)];
  }
  return interfaces[static_cast<std::size_t>(image)].normal;
}

}  // namespace uwsfm
