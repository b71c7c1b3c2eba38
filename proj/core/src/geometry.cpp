#include "uwsfm/geometry.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "uwsfm/refraction_kernels.hpp"

namespace uwsfm {

namespace {

constexpr const char* kModule = "refraction_geometry";

[[noreturn]] void raise(kernels::Status status) {
  switch (status) {
    case kernels::Status::Grazing:
      throw Error(ErrorCode::GrazingIncidence, kModule, "ray meets the interface at grazing incidence");
    case kernels::Status::TotalInternalReflection:
      throw Error(ErrorCode::TotalInternalReflection, kModule, "no transmitted ray exists");
    case kernels::Status::Parallel:
      throw Error(ErrorCode::RayParallelToPlane, kModule, "line of sight is parallel to the interface");
    case kernels::Status::PlaneBehind:
      throw Error(ErrorCode::PlaneBehindCamera, kModule, "interface lies behind the camera along this ray");
    case kernels::Status::NoRefractionPoint:
      throw Error(ErrorCode::NoValidRefractionPoint, kModule,
                  "point is not on the medium side of the interface or its refraction point is not visible");
    case kernels::Status::Ok:
      break;
  }
  throw Error(ErrorCode::InvalidArgument, kModule, "unexpected status");
}

void check(kernels::Status status) {
  if (status != kernels::Status::Ok) raise(status);
}

}  // namespace

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0) || !std::isfinite(cx) || !std::isfinite(cy)) {
    throw Error(ErrorCode::InvalidArgument, kModule, "intrinsics require fx > 0, fy > 0 and finite principal point");
  }
}

UnitVec3::UnitVec3(const Vec3& v) {
  const double norm = v.norm();
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    throw Error(ErrorCode::InvalidArgument, kModule, "cannot normalize a zero or non-finite vector");
  }
  // Vectors that are already unit-norm to rounding keep their bits, so
  // normalization is idempotent and text round trips are exact.
  v_ = std::abs(norm - 1.0) <= 4.0 * std::numeric_limits<double>::epsilon() ? v : Vec3(v / norm);
}

RefractiveIndex::RefractiveIndex(double mu) : mu_(mu) {
  if (!(mu > 0.0) || !std::isfinite(mu)) {
    throw Error(ErrorCode::InvalidArgument, kModule, "refractive index must be positive");
  }
}

InterfacePlane InterfacePlane::canonical(const Vec3& normal, double depth) {
  UnitVec3 n(normal);
  if (n.z() < 0.0) {
    n = -n;
    depth = -depth;
  }
  if (!(n.z() > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, kModule, "interface normal is perpendicular to the optical axis");
  }
  if (!(depth > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, kModule, "interface must lie in front of the camera (depth > 0)");
  }
  return InterfacePlane{n, depth};
}

UnitVec3 refract_direction(const UnitVec3& incident, const UnitVec3& surface_normal,
                           RefractiveIndex mu) {
  // The kernel takes the normal pointing along the direction of travel.
  Vec3 into = -surface_normal.vec();
  if (incident.dot(into) < 0.0) into = -into;
  Vec3 out;
  check(kernels::refract_into_medium<double>(incident.vec(), into, mu.value(), &out));
  return UnitVec3::trusted(out);
}

UnitVec3 pixel_to_ray(const Vec2& pixel, const CameraIntrinsics& k) {
  return UnitVec3::trusted(kernels::pixel_to_ray<double>(pixel, k.fx, k.fy, k.cx, k.cy));
}

Vec2 ray_to_pixel(const Vec3& direction, const CameraIntrinsics& k) {
  if (!(direction.z() > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, kModule, "direction does not point in front of the camera");
  }
  return kernels::point_to_pixel<double>(direction, k.fx, k.fy, k.cx, k.cy);
}

Vec3 intersect_plane(const Vec2& pixel, const CameraIntrinsics& k, const InterfacePlane& plane) {
  Vec3 out;
  check(kernels::intersect_plane<double>(pixel_to_ray(pixel, k).vec(), plane.normal.vec(),
                                         plane.depth, &out));
  return out;
}

Vec3 back_project(const Vec2& pixel, double depth_after, const InterfacePlane& plane,
                  const UnitVec3& local_normal, RefractiveIndex mu, const CameraIntrinsics& k) {
  Vec3 out;
  check(kernels::back_project<double>(pixel, depth_after, plane.normal.vec(), plane.depth,
                                      local_normal.vec(), mu.value(), k.fx, k.fy, k.cx, k.cy,
                                      &out));
  return out;
}

Ray back_project_ray(const Vec2& pixel, const InterfacePlane& plane, const UnitVec3& local_normal,
                     RefractiveIndex mu, const CameraIntrinsics& k) {
  Vec3 origin;
  Vec3 direction;
  check(kernels::back_project_ray<double>(pixel, plane.normal.vec(), plane.depth,
                                          local_normal.vec(), mu.value(), k.fx, k.fy, k.cx, k.cy,
                                          &origin, &direction));
  return Ray{origin, UnitVec3::trusted(direction)};
}

Vec3 flat_refraction_point(const Vec3& point, const InterfacePlane& plane, RefractiveIndex mu) {
  Vec3 out;
  check(kernels::flat_refraction_point<double>(point, plane.normal.vec(), plane.depth, mu.value(),
                                               &out));
  return out;
}

Vec2 forward_project_flat(const Vec3& point, const InterfacePlane& plane, RefractiveIndex mu,
                          const CameraIntrinsics& k) {
  Vec2 out;
  check(kernels::forward_project_flat<double>(point, plane.normal.vec(), plane.depth, mu.value(),
                                              k.fx, k.fy, k.cx, k.cy, &out));
  return out;
}

}  // namespace uwsfm
