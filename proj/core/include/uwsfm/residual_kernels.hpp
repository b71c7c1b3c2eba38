#pragma once

// Scalar-generic residual kernels over raw parameter arrays, shared by the
// double-precision residual API and the autodiff cost functions.
//
// Parameter layouts:
//   pose[6]   = axis-angle rotation (3), translation (3); world-to-camera
//   normal[3] = unit interface or local normal, oriented into the medium
//   depth     = scalar

#include <cmath>

#include <ceres/rotation.h>

#include "uwsfm/refraction_kernels.hpp"

namespace uwsfm::kernels {

struct Intrinsics {
  double fx, fy, cx, cy;
};

template <typename T>
V3<T> load3(const T* p) {
  return V3<T>(p[0], p[1], p[2]);
}

template <typename T>
V3<T> world_to_camera(const T* pose, const V3<T>& X) {
  T in[3] = {X.x(), X.y(), X.z()};
  T out[3];
  ceres::AngleAxisRotatePoint(pose, in, out);
  return V3<T>(out[0] + pose[3], out[1] + pose[4], out[2] + pose[5]);
}

template <typename T>
V3<T> rotate_inverse(const T* pose, const V3<T>& v) {
  const T inv[3] = {-pose[0], -pose[1], -pose[2]};
  T in[3] = {v.x(), v.y(), v.z()};
  T out[3];
  ceres::AngleAxisRotatePoint(inv, in, out);
  return V3<T>(out[0], out[1], out[2]);
}

template <typename T>
V3<T> camera_to_world(const T* pose, const V3<T>& X) {
  return rotate_inverse(pose, V3<T>(X.x() - pose[3], X.y() - pose[4], X.z() - pose[5]));
}

// Camera-frame plane of an image with pose `pose` from the world-frame plane.
template <typename T>
void world_plane_to_camera(const T* pose, const V3<T>& n_world, const T& d_world, V3<T>* n_cam,
                           T* d_cam) {
  T in[3] = {n_world.x(), n_world.y(), n_world.z()};
  T out[3];
  ceres::AngleAxisRotatePoint(pose, in, out);
  *n_cam = V3<T>(out[0], out[1], out[2]);
  *d_cam = d_world + n_cam->x() * pose[3] + n_cam->y() * pose[4] + n_cam->z() * pose[5];
}

// Reference-image point estimate for depth `d_j` beyond the interface.
template <typename T>
Status reference_point(const Vec2& pixel_r, const V3<T>& n_r, const T& d_r, const V3<T>& local_r,
                       const T& d_j, const T& mu, const Intrinsics& k, V3<T>* out) {
  const V2<T> p(T(pixel_r.x()), T(pixel_r.y()));
  return back_project<T>(p, d_j, n_r, d_r, local_r, mu, k.fx, k.fy, k.cx, k.cy, out);
}

// FP(R_i X + T_i, n_i, d_i, mu) - p_ij for a world point X.
template <typename T>
Status reprojection(const T* pose_i, const V3<T>& n_i, const T& d_i, const V3<T>& X_world,
                    const Vec2& pixel_i, const T& mu, const Intrinsics& k, T* residual) {
  const V3<T> X = world_to_camera(pose_i, X_world);
  V2<T> projected;
  if (Status s = forward_project_flat<T>(X, n_i, d_i, mu, k.fx, k.fy, k.cx, k.cy, &projected);
      s != Status::Ok) {
    return s;
  }
  residual[0] = projected.x() - pixel_i.x();
  residual[1] = projected.y() - pixel_i.y();
  return Status::Ok;
}

// Reprojection extended to points on the camera side of the interface, for
// the optimizer. Such a point is projected without refraction (the limit of
// FP at the plane) and residual[2] = fx * (d_i - n_i.X) / d_i penalizes the
// violation; residual[2] is zero for every valid configuration.
template <typename T>
Status reprojection_extended(const T* pose_i, const V3<T>& n_i, const T& d_i, const V3<T>& X_world,
                             const Vec2& pixel_i, const T& mu, const Intrinsics& k, T* residual) {
  const V3<T> X = world_to_camera(pose_i, X_world);
  const T h = n_i.dot(X) - d_i;
  V2<T> projected;
  if (scalar_part(h) > 0.0) {
    if (Status s = forward_project_flat<T>(X, n_i, d_i, mu, k.fx, k.fy, k.cx, k.cy, &projected);
        s != Status::Ok) {
      return s;
    }
    residual[2] = T(0.0);
  } else {
    if (scalar_part(X.z()) <= 0.0 || scalar_part(d_i) <= 0.0) return Status::NoRefractionPoint;
    projected = point_to_pixel<T>(X, k.fx, k.fy, k.cx, k.cy);
    residual[2] = -k.fx * h / d_i;
  }
  residual[0] = projected.x() - pixel_i.x();
  residual[1] = projected.y() - pixel_i.y();
  return Status::Ok;
}

// Ray-point offset D_ij = P_j - (o_w + t r_w) for the refracted ray of
// pixel_i transformed to the world frame. t puts the ray point at the world
// z of P_j; rays nearly perpendicular to the world z axis use the closest
// point instead.
template <typename T>
Status ray_point(const T* pose_i, const V3<T>& n_i, const T& d_i, const V3<T>& local_i,
                 const Vec2& pixel_i, const V3<T>& P_j, const T& mu, const Intrinsics& k,
                 T* residual) {
  using std::abs;
  const V2<T> p(T(pixel_i.x()), T(pixel_i.y()));
  V3<T> origin;
  V3<T> direction;
  if (Status s = back_project_ray<T>(p, n_i, d_i, local_i, mu, k.fx, k.fy, k.cx, k.cy, &origin,
                                     &direction);
      s != Status::Ok) {
    return s;
  }
  const V3<T> o_w = camera_to_world(pose_i, origin);
  const V3<T> r_w = rotate_inverse(pose_i, direction);
  T t;
  if (abs(scalar_part(r_w.z())) < 1e-6) {
    t = (P_j - o_w).dot(r_w) / r_w.squaredNorm();
  } else {
    t = (P_j.z() - o_w.z()) / r_w.z();
  }
  const V3<T> D = P_j - (o_w + t * r_w);
  residual[0] = D.x();
  residual[1] = D.y();
  residual[2] = D.z();
  return Status::Ok;
}

}  // namespace uwsfm::kernels
