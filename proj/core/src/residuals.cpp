#include "uwsfm/residuals.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>

#include "uwsfm/residual_kernels.hpp"

namespace uwsfm {

namespace {

constexpr const char* kModule = "residuals";

kernels::Intrinsics to_kernel(const CameraIntrinsics& k) { return {k.fx, k.fy, k.cx, k.cy}; }

void check(kernels::Status status, const Observation& obs) {
  if (status == kernels::Status::Ok) return;
  const std::string where =
      " at observation (" + std::to_string(obs.image) + ", " + std::to_string(obs.point) + ")";
  switch (status) {
    case kernels::Status::Grazing:
      throw Error(ErrorCode::GrazingIncidence, kModule, "grazing incidence" + where);
    case kernels::Status::TotalInternalReflection:
      throw Error(ErrorCode::TotalInternalReflection, kModule, "total internal reflection" + where);
    case kernels::Status::Parallel:
      throw Error(ErrorCode::RayParallelToPlane, kModule, "ray parallel to interface" + where);
    case kernels::Status::PlaneBehind:
      throw Error(ErrorCode::PlaneBehindCamera, kModule, "interface behind camera" + where);
    case kernels::Status::NoRefractionPoint:
      throw Error(ErrorCode::NoValidRefractionPoint, kModule, "no valid refraction point" + where);
    case kernels::Status::Ok: break;
  }
}

std::array<double, 6> pack_pose(const Pose& p) {
  return {p.rotation.x(), p.rotation.y(), p.rotation.z(),
          p.translation.x(), p.translation.y(), p.translation.z()};
}

int require_reference(const ResidualContext& ctx) {
  if (!ctx.tracks.reference()) {
    throw Error(ErrorCode::InvalidArgument, kModule, "formulation requires a reference image");
  }
  return *ctx.tracks.reference();
}

}  // namespace

Neighborhoods build_neighborhoods(const TrackSet& tracks, double radius_px) {
  const auto& obs = tracks.observations();
  Neighborhoods groups(obs.size());
  std::vector<std::vector<std::size_t>> by_image(static_cast<std::size_t>(tracks.image_count()));
  for (std::size_t k = 0; k < obs.size(); ++k) by_image[static_cast<std::size_t>(obs[k].image)].push_back(k);
  const double r2 = radius_px * radius_px;
  for (std::size_t k = 0; k < obs.size(); ++k) {
    for (std::size_t m : by_image[static_cast<std::size_t>(obs[k].image)]) {
      if ((obs[m].pixel - obs[k].pixel).squaredNorm() <= r2) groups[k].push_back(m);
    }
  }
  return groups;
}

double radius_for_neighborhood_size(const TrackSet& tracks, std::size_t members) {
  const auto& obs = tracks.observations();
  double radius = 0.0;
  if (members <= 1) return radius;
  std::vector<double> d2;
  for (std::size_t k = 0; k < obs.size(); ++k) {
    d2.clear();
    for (std::size_t m = 0; m < obs.size(); ++m) {
      if (obs[m].image == obs[k].image) d2.push_back((obs[m].pixel - obs[k].pixel).squaredNorm());
    }
    if (d2.size() < members) {
      throw Error(ErrorCode::InvalidArgument, kModule,
                  "image " + std::to_string(obs[k].image) + " has fewer than " + std::to_string(members) +
                      " observations");
    }
    // d2 includes the observation itself at distance 0.
    std::nth_element(d2.begin(), d2.begin() + static_cast<std::ptrdiff_t>(members - 1), d2.end());
    radius = std::max(radius, std::sqrt(d2[members - 1]));
  }
  // Slack so the squared comparison in build_neighborhoods keeps the boundary member.
  return radius * (1.0 + 1e-9);
}

Vec3 reference_point(const ResidualContext& ctx, const ParameterState& state, int point) {
  const int r = require_reference(ctx);
  const Observation& obs = ctx.tracks.at(r, point);
  const InterfacePlane& plane = state.interfaces[static_cast<std::size_t>(r)];
  Vec3 out;
  check(kernels::reference_point<double>(obs.pixel, plane.normal.vec(), plane.depth,
                                         state.normal_for(r, point).vec(),
                                         state.point_depths[static_cast<std::size_t>(point)],
                                         state.mu.value(), to_kernel(ctx.intrinsics), &out),
        obs);
  // The reference camera frame is the world frame only up to its pose, which
  // is the identity whenever the gauge is fixed.
  return state.poses[static_cast<std::size_t>(r)].to_world(out);
}

Vec2 reproj_residual_ref(const ResidualContext& ctx, const ParameterState& state,
                         const Observation& obs) {
  const int r = require_reference(ctx);
  if (obs.image == r) {
    throw Error(ErrorCode::InvalidArgument, kModule, "reference observations define the points and have no residual");
  }
  const Vec3 P = reference_point(ctx, state, obs.point);
  const auto i = static_cast<std::size_t>(obs.image);
  const InterfacePlane& plane = state.interfaces[i];
  const auto pose = pack_pose(state.poses[i]);
  Vec2 e;
  check(kernels::reprojection<double>(pose.data(), plane.normal.vec(), plane.depth, P, obs.pixel,
                                      state.mu.value(), to_kernel(ctx.intrinsics), e.data()),
        obs);
  return e;
}

Vec2 reproj_residual_noref(const ResidualContext& ctx, const ParameterState& state,
                           const Observation& obs) {
  const auto i = static_cast<std::size_t>(obs.image);
  const InterfacePlane& plane = state.interfaces[i];
  const auto pose = pack_pose(state.poses[i]);
  Vec2 e;
  check(kernels::reprojection<double>(pose.data(), plane.normal.vec(), plane.depth,
                                      state.points[static_cast<std::size_t>(obs.point)], obs.pixel,
                                      state.mu.value(), to_kernel(ctx.intrinsics), e.data()),
        obs);
  return e;
}

Vec3 ray_point_residual(const ResidualContext& ctx, const ParameterState& state,
                        const Observation& obs) {
  const Vec3 P = reference_point(ctx, state, obs.point);
  const auto i = static_cast<std::size_t>(obs.image);
  const InterfacePlane& plane = state.interfaces[i];
  const auto pose = pack_pose(state.poses[i]);
  Vec3 D;
  check(kernels::ray_point<double>(pose.data(), plane.normal.vec(), plane.depth,
                                   state.normal_for(obs.image, obs.point).vec(), obs.pixel, P,
                                   state.mu.value(), to_kernel(ctx.intrinsics), D.data()),
        obs);
  return D;
}

double soft_regularizer(const std::vector<std::vector<Vec3>>& groups) {
  std::vector<double> terms;
  for (const auto& group : groups) {
    if (group.empty()) continue;
    Vec3 mean = Vec3::Zero();
    for (const Vec3& n : group) mean += n;
    mean /= static_cast<double>(group.size());
    for (const Vec3& n : group) terms.push_back((n - mean).squaredNorm());
  }
  return pairwise_sum(terms);
}

double soft_regularizer(const std::vector<std::vector<UnitVec3>>& local_normals,
                        const TrackSet& tracks, const Neighborhoods& neighborhoods) {
  const auto& obs = tracks.observations();
  std::vector<std::vector<Vec3>> groups;
  groups.reserve(neighborhoods.size());
  for (const auto& members : neighborhoods) {
    auto& group = groups.emplace_back();
    for (std::size_t m : members) {
      group.push_back(local_normals[static_cast<std::size_t>(obs[m].image)]
                                   [static_cast<std::size_t>(obs[m].point)]
                                       .vec());
    }
  }
  return soft_regularizer(groups);
}

double pairwise_sum(std::span<const double> terms) {
  if (terms.size() <= 8) {
    double s = 0.0;
    for (double t : terms) s += t;
    return s;
  }
  const std::size_t half = terms.size() / 2;
  return pairwise_sum(terms.first(half)) + pairwise_sum(terms.subspan(half));
}

EnergyTerms energy_terms(const ResidualContext& ctx, const ParameterState& state,
                         ConstraintMode mode, double lambda, const Neighborhoods* neighborhoods) {
  EnergyTerms out;
  std::vector<double> terms;
  terms.reserve(ctx.tracks.size());
  const std::optional<int> r = ctx.tracks.reference();
  if (uses_reference(mode)) require_reference(ctx);
  try {
    for (const Observation& obs : ctx.tracks.observations()) {
      switch (mode) {
        case ConstraintMode::HardWithRef:
          if (obs.image == *r) continue;
          terms.push_back(reproj_residual_ref(ctx, state, obs).squaredNorm());
          out.residual_count += 2;
          break;
        case ConstraintMode::HardNoRef:
          terms.push_back(reproj_residual_noref(ctx, state, obs).squaredNorm());
          out.residual_count += 2;
          break;
        case ConstraintMode::Soft: {
          if (obs.image == *r) continue;
          const double scale = state.interfaces[static_cast<std::size_t>(*r)].depth;
          terms.push_back((ray_point_residual(ctx, state, obs) / scale).squaredNorm());
          out.residual_count += 3;
          break;
        }
      }
    }
  } catch (const Error&) {
    const double inf = std::numeric_limits<double>::infinity();
    return EnergyTerms{inf, 0.0, inf, out.residual_count};
  }
  out.data = pairwise_sum(terms);
  if (mode == ConstraintMode::Soft && neighborhoods != nullptr) {
    out.regularizer = soft_regularizer(state.local_normals, ctx.tracks, *neighborhoods);
  }
  out.total = out.data + lambda * out.regularizer;
  return out;
}

double total_energy(const ResidualContext& ctx, const ParameterState& state, ConstraintMode mode,
                    double lambda, const Neighborhoods* neighborhoods) {
  return energy_terms(ctx, state, mode, lambda, neighborhoods).total;
}

}  // namespace uwsfm
