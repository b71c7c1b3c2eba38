#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "uwsfm/geometry.hpp"
#include "uwsfm/scenarios.hpp"
#include "uwsfm/state.hpp"
#include "uwsfm/tracks.hpp"

namespace uwsfm {

struct InitializerOptions {
  /// Known approximate point depth beyond the interface. When set, every d_j
  /// is set to it and pair estimation is skipped for the depths.
  std::optional<double> approximate_depth;
  std::uint64_t ransac_seed = 0;
  double ransac_threshold_px = 1.0;
  int ransac_iterations = 500;
  double outlier_mad_factor = 3.0;
  /// Lower and upper bound of the mean cloud depth searched when fixing the
  /// cloud scale against the gauge interface depth.
  double scale_search_min = 1.05;
  double scale_search_max = 20.0;
};

/// Two-view estimate between virtual (refraction-ignoring) viewpoints.
/// Points are expressed in the frame of image `a` with |t| = 1.
struct PairEstimate {
  int a = 0;
  int b = 0;
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::UnitX();
  std::vector<int> point_ids;
  std::vector<Vec3> points;
  /// RANSAC inlier flag per entry of point_ids.
  std::vector<bool> inliers;
};

/// Throws InsufficientCorrespondences (< 5 common points) or DegeneratePair.
PairEstimate estimate_pair(const TrackSet& tracks, int a, int b, const CameraIntrinsics& k,
                           const InitializerOptions& options = {});

struct MergedCloud {
  /// Index-matched to the point ids; only entries with valid[j] are meaningful.
  std::vector<Vec3> points;
  std::vector<bool> valid;
  /// Cloud contributions kept and rejected as outliers, per point.
  std::vector<int> contributions;
  std::vector<int> rejected;

  double mean_depth() const;
};

/// Scales every estimate to mean depth 1, drops per-point outlier
/// contributions and averages the rest. All estimates must share image `a`.
/// Throws EmptyCloud when no point survives.
MergedCloud normalize_and_merge(const std::vector<PairEstimate>& estimates, int point_count,
                                double mad_factor = 3.0);

/// Pinhole PnP per image on the merged cloud. Images that cannot be posed are
/// returned as nullopt. The `anchor` image is set to the identity and all
/// other poses are expressed relative to it.
std::vector<std::optional<Pose>> recover_poses_pnp(const MergedCloud& cloud, const TrackSet& tracks,
                                                   const CameraIntrinsics& k, int anchor);

struct Initialization {
  ParameterState state;
  /// Refraction-ignoring reconstruction in the world frame at the chosen
  /// scale (empty with the known-depth shortcut).
  MergedCloud cloud;
  std::vector<std::string> warnings;
};

Initialization initialize_detailed(const Problem& problem, const InitializerOptions& options = {});

ParameterState initialize(const Problem& problem, const InitializerOptions& options = {});

}  // namespace uwsfm
