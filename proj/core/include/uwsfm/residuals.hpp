#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "uwsfm/geometry.hpp"
#include "uwsfm/modes.hpp"
#include "uwsfm/state.hpp"
#include "uwsfm/tracks.hpp"

namespace uwsfm {

/// Fixed inputs shared by every residual: the observations, the intrinsics and
/// which image (if any) is the reference.
struct ResidualContext {
  const TrackSet& tracks;
  CameraIntrinsics intrinsics;
};

/// Neighborhood of each observation: indices into tracks.observations() of
/// the observations in the same image within `radius_px` pixels, itself
/// included. One group per observation, in observation order.
using Neighborhoods = std::vector<std::vector<std::size_t>>;

Neighborhoods build_neighborhoods(const TrackSet& tracks, double radius_px);

/// Smallest radius at which every neighborhood has at least `members`
/// observations. Throws InvalidArgument when an image has fewer.
double radius_for_neighborhood_size(const TrackSet& tracks, std::size_t members);

/// Reference-image estimate of point j: back-projection of p_rj to depth d_j.
Vec3 reference_point(const ResidualContext& ctx, const ParameterState& state, int point);

/// FP(R_i P_j + T_i, n_i, d_i, mu) - p_ij with P_j from the reference image.
/// Throws InvalidArgument for observations on the reference image.
Vec2 reproj_residual_ref(const ResidualContext& ctx, const ParameterState& state,
                         const Observation& obs);

/// FP(R_i P_j + T_i, n_i, d_i, mu) - p_ij with P_j = state.points[j].
Vec2 reproj_residual_noref(const ResidualContext& ctx, const ParameterState& state,
                           const Observation& obs);

/// Offset between the reference point estimate and the refracted ray of
/// observation (i, j) carried into the world frame.
Vec3 ray_point_residual(const ResidualContext& ctx, const ParameterState& state,
                        const Observation& obs);

/// Sum over groups of the squared deviation of each member from the group
/// mean. Empty groups contribute nothing.
double soft_regularizer(const std::vector<std::vector<UnitVec3>>& local_normals,
                        const TrackSet& tracks, const Neighborhoods& neighborhoods);

/// Same sum over an explicit list of normal groups.
double soft_regularizer(const std::vector<std::vector<Vec3>>& groups);

struct EnergyTerms {
  double data = 0.0;
  double regularizer = 0.0;
  double total = 0.0;
  std::size_t residual_count = 0;
};

/// E_hard, E_noref or E_soft = data + lambda * regularizer. In soft mode the
/// ray-point offsets are divided by the reference interface depth. Returns
/// +inf when a residual cannot be evaluated at `state`.
EnergyTerms energy_terms(const ResidualContext& ctx, const ParameterState& state,
                         ConstraintMode mode, double lambda = 0.0,
                         const Neighborhoods* neighborhoods = nullptr);

double total_energy(const ResidualContext& ctx, const ParameterState& state, ConstraintMode mode,
                    double lambda = 0.0, const Neighborhoods* neighborhoods = nullptr);

/// Pairwise (cascade) summation; the result depends only on the order of
/// `terms`, so totals are reproducible.
double pairwise_sum(std::span<const double> terms);

}  // namespace uwsfm
