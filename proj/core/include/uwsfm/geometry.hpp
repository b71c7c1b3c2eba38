#pragma once

#include <Eigen/Core>

#include "uwsfm/error.hpp"

namespace uwsfm {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Ideal pinhole intrinsics in pixels. Lens distortion is not modeled.
struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;

  /// Throws InvalidArgument unless fx > 0 and fy > 0.
  void validate() const;

  friend bool operator==(const CameraIntrinsics&, const CameraIntrinsics&) = default;
};

/// A 3-vector with Euclidean norm 1. Construction normalizes the input; an
/// input that is unit-norm to rounding is kept as is.
class UnitVec3 {
 public:
  UnitVec3() : v_(0.0, 0.0, 1.0) {}
  UnitVec3(double x, double y, double z) : UnitVec3(Vec3(x, y, z)) {}
  explicit UnitVec3(const Vec3& v);

  const Vec3& vec() const { return v_; }
  operator const Vec3&() const { return v_; }
  double x() const { return v_.x(); }
  double y() const { return v_.y(); }
  double z() const { return v_.z(); }
  double dot(const Vec3& other) const { return v_.dot(other); }
  UnitVec3 operator-() const { return UnitVec3::trusted(-v_); }

  friend bool operator==(const UnitVec3& a, const UnitVec3& b) { return a.v_ == b.v_; }

  /// Wraps a vector that is already unit-norm to machine precision.
  static UnitVec3 trusted(const Vec3& v) {
    UnitVec3 u;
    u.v_ = v;
    return u;
  }

 private:
  Vec3 v_;
};

/// Relative refractive index of the medium below the interface.
class RefractiveIndex {
 public:
  explicit RefractiveIndex(double mu);
  double value() const { return mu_; }
  friend bool operator==(RefractiveIndex, RefractiveIndex) = default;

 private:
  double mu_;
};

/// Planar interface {X : normal.X = depth} in a camera frame. The normal is
/// stored pointing away from the camera into the medium (normal.z > 0) and
/// depth is the perpendicular distance from the camera center, depth > 0.
struct InterfacePlane {
  UnitVec3 normal;
  double depth = 1.0;

  /// Builds a canonical plane: an input normal with normal.z < 0 is flipped
  /// together with the depth sign, then depth > 0 is required.
  static InterfacePlane canonical(const Vec3& normal, double depth);

  friend bool operator==(const InterfacePlane&, const InterfacePlane&) = default;
};

struct Ray {
  Vec3 origin = Vec3::Zero();
  UnitVec3 direction;

  Vec3 at(double t) const { return origin + t * direction.vec(); }
};

/// Snell refraction of `incident` at a surface whose `surface_normal` faces
/// the incoming ray (incident.normal < 0). A normal given with the opposite
/// orientation is flipped first.
///
/// Throws GrazingIncidence when |incident.normal| < 1e-6 and
/// TotalInternalReflection when no transmitted ray exists.
UnitVec3 refract_direction(const UnitVec3& incident, const UnitVec3& surface_normal,
                           RefractiveIndex mu);

UnitVec3 pixel_to_ray(const Vec2& pixel, const CameraIntrinsics& k);

/// Pinhole projection of a camera-frame direction or point with z > 0.
Vec2 ray_to_pixel(const Vec3& direction, const CameraIntrinsics& k);

/// Intersection of the pixel's line of sight with the plane.
/// Throws RayParallelToPlane (|dir.normal| <= 1e-9) or PlaneBehindCamera.
Vec3 intersect_plane(const Vec2& pixel, const CameraIntrinsics& k, const InterfacePlane& plane);

/// Point reached after travelling `depth_after` along the refracted ray of
/// `pixel`. The ray leaves the interface where the line of sight meets
/// `plane` and is bent by `local_normal` (same orientation as plane normals).
Vec3 back_project(const Vec2& pixel, double depth_after, const InterfacePlane& plane,
                  const UnitVec3& local_normal, RefractiveIndex mu, const CameraIntrinsics& k);

/// Refracted ray of `pixel`; back_project(pixel, t, ...) == ray.at(t).
Ray back_project_ray(const Vec2& pixel, const InterfacePlane& plane, const UnitVec3& local_normal,
                     RefractiveIndex mu, const CameraIntrinsics& k);

/// Point on a flat interface where the light path from the camera center to
/// the medium-side point `point` refracts.
/// Throws NoValidRefractionPoint if `point` is not on the medium side or the
/// refraction point is not in front of the camera.
Vec3 flat_refraction_point(const Vec3& point, const InterfacePlane& plane, RefractiveIndex mu);

/// Pixel at which `point` (camera frame, medium side) is observed through a
/// flat interface.
Vec2 forward_project_flat(const Vec3& point, const InterfacePlane& plane, RefractiveIndex mu,
                          const CameraIntrinsics& k);

}  // namespace uwsfm
