#pragma once

#include <optional>
#include <string>
#include <vector>

#include "uwsfm/geometry.hpp"
#include "uwsfm/modes.hpp"
#include "uwsfm/scenarios.hpp"
#include "uwsfm/simulator.hpp"
#include "uwsfm/state.hpp"
#include "uwsfm/tracks.hpp"

namespace uwsfm {

/// Similarity X_truth ~ scale * rotation * X_est + translation.
struct AlignmentResult {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
  double scale = 1.0;
  /// Per-point distance after alignment.
  std::vector<double> residuals;
  double rmse = 0.0;

  Vec3 apply(const Vec3& X) const { return scale * (rotation * X) + translation; }
};

/// Least-squares similarity (Umeyama). Needs at least three index-matched,
/// non-collinear pairs; throws DegenerateConfiguration otherwise.
AlignmentResult align_similarity(const std::vector<Vec3>& estimated, const std::vector<Vec3>& truth);

/// RMSE of `estimated` under a given transform.
double alignment_rmse(const AlignmentResult& transform, const std::vector<Vec3>& estimated,
                      const std::vector<Vec3>& truth);

/// RMS distance of the points from their centroid.
double scene_scale(const std::vector<Vec3>& points);

/// A reconstruction: the optimized state plus derived world-frame points.
struct Solution {
  ScenarioKind scenario = ScenarioKind::MovingInterface;
  ConstraintMode mode = ConstraintMode::HardWithRef;
  std::optional<int> reference;
  ParameterState state;
  std::vector<Vec3> points;
  /// Points of the initial state, when known.
  std::vector<Vec3> initial_points;
};

/// World-frame points of `state`: back-projected reference observations, or
/// the 3D point block for hard-noref.
std::vector<Vec3> world_points(const Problem& problem, const ParameterState& state);

struct InterfaceError {
  int image = 0;
  /// Angle between the aligned estimated and true world-frame normals.
  double normal_angle_rad = 0.0;
  /// |scale * d_est - d_true| / d_true for the camera-frame depth.
  double depth_relative_error = 0.0;
};

struct EvaluationReport {
  int image_count = 0;
  int point_count = 0;
  double scene_scale = 0.0;
  std::optional<double> initial_rmse;
  double final_rmse = 0.0;
  double relative_rmse = 0.0;
  double alignment_scale = 1.0;
  double max_normal_error_rad = 0.0;
  double max_depth_relative_error = 0.0;
  std::vector<InterfaceError> interfaces;
  /// RMS of forward-projected solution points against the tracks, per image.
  std::vector<double> reprojection_rms;
};

EvaluationReport evaluate_run(const TrackSet& tracks, const CameraIntrinsics& intrinsics,
                              const Solution& solution, const SceneTruth& truth);

/// key=value lines with stable names and full-precision numbers.
std::string format_report(const EvaluationReport& report);

}  // namespace uwsfm
