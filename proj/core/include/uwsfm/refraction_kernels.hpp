#pragma once

// Scalar-generic refraction kernels. Every function here works for `double`
// and for `ceres::Jet`, so the same code path backs the public geometry API
// and the autodiff residuals used by the optimizer.
//
// Conventions (camera frame, camera center at the origin, looking down +z):
//   - an interface plane is {X : n.X = d} with n pointing away from the
//     camera into the medium and d > 0;
//   - local normals follow the same orientation as the plane normal.

#include <cmath>

#include <Eigen/Core>
#include <ceres/jet.h>

namespace uwsfm::kernels {

template <typename T>
using V2 = Eigen::Matrix<T, 2, 1>;
template <typename T>
using V3 = Eigen::Matrix<T, 3, 1>;

enum class Status {
  Ok,
  Grazing,
  TotalInternalReflection,
  Parallel,
  PlaneBehind,
  NoRefractionPoint,
};

// |cos| of the incidence angle below which a configuration is rejected.
inline constexpr double kGrazingCosine = 1e-6;
inline constexpr double kParallelCosine = 1e-9;

inline double scalar_part(double x) { return x; }
template <typename T, int N>
double scalar_part(const ceres::Jet<T, N>& x) {
  return scalar_part(x.a);
}

template <typename T>
V3<T> pixel_to_ray(const V2<T>& pixel, double fx, double fy, double cx, double cy) {
  V3<T> dir((pixel.x() - cx) / fx, (pixel.y() - cy) / fy, T(1.0));
  return dir / dir.norm();
}

// Projects a camera-frame point (z > 0) to pixel coordinates.
template <typename T>
V2<T> point_to_pixel(const V3<T>& X, double fx, double fy, double cx, double cy) {
  return V2<T>(fx * X.x() / X.z() + cx, fy * X.y() / X.z() + cy);
}

// Refracts the unit direction `v` entering the medium through a surface whose
// normal `n` points into the medium. `mu` is the index of the medium relative
// to the camera side.
template <typename T>
Status refract_into_medium(const V3<T>& v, const V3<T>& n, const T& mu, V3<T>* out) {
  using std::sqrt;
  const T c = v.dot(n);
  if (scalar_part(c) < kGrazingCosine) return Status::Grazing;
  const T r = T(1.0) / mu;
  const T k = T(1.0) - r * r * (T(1.0) - c * c);
  if (scalar_part(k) < 0.0) return Status::TotalInternalReflection;
  *out = r * v + (sqrt(k) - r * c) * n;
  return Status::Ok;
}

template <typename T>
Status intersect_plane(const V3<T>& dir, const V3<T>& n, const T& depth, V3<T>* out) {
  using std::abs;
  const T s = dir.dot(n);
  if (abs(scalar_part(s)) < kParallelCosine) return Status::Parallel;
  const T lambda = depth / s;
  if (scalar_part(lambda) <= 0.0) return Status::PlaneBehind;
  *out = lambda * dir;
  return Status::Ok;
}

// Point at `depth_after` along the refracted ray of `pixel`: the interface
// intersection with plane (n, d) plus the direction refracted by `local_n`.
template <typename T>
Status back_project(const V2<T>& pixel, const T& depth_after, const V3<T>& n, const T& d,
                    const V3<T>& local_n, const T& mu, double fx, double fy, double cx,
                    double cy, V3<T>* out) {
  const V3<T> dir = pixel_to_ray<T>(pixel, fx, fy, cx, cy);
  V3<T> origin;
  if (Status s = intersect_plane<T>(dir, n, d, &origin); s != Status::Ok) return s;
  V3<T> refracted;
  if (Status s = refract_into_medium<T>(dir, local_n, mu, &refracted); s != Status::Ok) return s;
  *out = origin + depth_after * refracted;
  return Status::Ok;
}

template <typename T>
Status back_project_ray(const V2<T>& pixel, const V3<T>& n, const T& d, const V3<T>& local_n,
                        const T& mu, double fx, double fy, double cx, double cy,
                        V3<T>* origin, V3<T>* direction) {
  const V3<T> dir = pixel_to_ray<T>(pixel, fx, fy, cx, cy);
  if (Status s = intersect_plane<T>(dir, n, d, origin); s != Status::Ok) return s;
  return refract_into_medium<T>(dir, local_n, mu, direction);
}

// Refraction-point condition in the plane of refraction. The refraction point
// is X(s) = d n + s P_perp with s in [0, 1], where P_perp is the component of
// P parallel to the plane, rho2 = |P_perp|^2 and h = n.P - d. The condition
// g(s) = sin(air angle)/|P_perp| - mu sin(medium angle)/|P_perp| is strictly
// increasing with g(0) < 0 < g(1), and stays smooth as rho2 -> 0.
template <typename T>
T refraction_condition(const T& s, const T& rho2, const T& d, const T& h, const T& mu) {
  using std::sqrt;
  const T one_minus = T(1.0) - s;
  return s / sqrt(s * s * rho2 + d * d) - mu * one_minus / sqrt(one_minus * one_minus * rho2 + h * h);
}

template <typename T>
T refraction_condition_derivative(const T& s, const T& rho2, const T& d, const T& h, const T& mu) {
  using std::sqrt;
  const T one_minus = T(1.0) - s;
  const T a = s * s * rho2 + d * d;
  const T b = one_minus * one_minus * rho2 + h * h;
  return d * d / (a * sqrt(a)) + mu * h * h / (b * sqrt(b));
}

// Safeguarded Newton with bisection fallback on the bracket [0, 1].
inline double solve_refraction_parameter(double rho2, double d, double h, double mu) {
  double lo = 0.0;
  double hi = 1.0;
  // Paraxial solution; exact when the point lies on the plane's normal axis.
  double s = mu * d / (h + mu * d);
  for (int iter = 0; iter < 100; ++iter) {
    const double g = refraction_condition(s, rho2, d, h, mu);
    if (g == 0.0) break;
    if (g < 0.0) {
      lo = s;
    } else {
      hi = s;
    }
    const double dg = refraction_condition_derivative(s, rho2, d, h, mu);
    double next = s - g / dg;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - s) <= 1e-17 + 4e-16 * std::abs(s)) {
      s = next;
      break;
    }
    s = next;
  }
  return s;
}

// Refraction point on plane (n, d) for the medium-side point P, seen from the
// camera center. The root is found in double precision; one Newton step in T
// then carries first derivatives through the implicit function theorem.
template <typename T>
Status flat_refraction_point(const V3<T>& P, const V3<T>& n, const T& d, const T& mu,
                             V3<T>* out) {
  const T along = n.dot(P);
  const T h = along - d;
  if (scalar_part(h) <= 0.0 || scalar_part(d) <= 0.0) return Status::NoRefractionPoint;
  const V3<T> perp = P - along * n;
  const T rho2 = perp.squaredNorm();
  const double s0 = solve_refraction_parameter(scalar_part(rho2), scalar_part(d),
                                               scalar_part(h), scalar_part(mu));
  const T s_seed(s0);
  const T s = s_seed - refraction_condition<T>(s_seed, rho2, d, h, mu) /
                           refraction_condition_derivative<T>(s_seed, rho2, d, h, mu);
  *out = d * n + s * perp;
  if (scalar_part(out->z()) <= 0.0) return Status::NoRefractionPoint;
  return Status::Ok;
}

template <typename T>
Status forward_project_flat(const V3<T>& P, const V3<T>& n, const T& d, const T& mu, double fx,
                            double fy, double cx, double cy, V2<T>* pixel) {
  V3<T> X;
  if (Status s = flat_refraction_point<T>(P, n, d, mu, &X); s != Status::Ok) return s;
  *pixel = point_to_pixel<T>(X, fx, fy, cx, cy);
  return Status::Ok;
}

}  // namespace uwsfm::kernels
