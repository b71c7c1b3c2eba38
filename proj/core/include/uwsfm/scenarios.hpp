#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "uwsfm/geometry.hpp"
#include "uwsfm/modes.hpp"
#include "uwsfm/residuals.hpp"
#include "uwsfm/state.hpp"
#include "uwsfm/tracks.hpp"

namespace uwsfm {

/// Similarity gauge: the gauge image's pose is the identity and its interface
/// depth is `depth`.
struct Gauge {
  int image = 0;
  double depth = 1.0;
};

struct Problem {
  TrackSet tracks;
  CameraIntrinsics intrinsics;
  ScenarioKind scenario = ScenarioKind::MovingInterface;
  ConstraintMode mode = ConstraintMode::HardWithRef;
  RefractiveIndex mu{1.333};
  /// Regularizer weight in soft mode.
  double lambda = 1.0;
  /// Pixel radius that defines the soft-mode neighborhoods.
  double neighborhood_radius_px = 40.0;
  Gauge gauge;
  bool allow_underdetermined = false;

  /// Builds a problem whose gauge image is the track set's reference (or
  /// image 0 for hard-noref, in which case the reference is cleared).
  static Problem make(TrackSet tracks, const CameraIntrinsics& intrinsics, ScenarioKind scenario,
                      ConstraintMode mode, RefractiveIndex mu);

  ResidualContext context() const { return ResidualContext{tracks, intrinsics}; }

  /// Checks mode/reference compatibility, the track invariants, the gauge
  /// and (unless overridden) solvability. Throws ConfigError or Unsolvable.
  void validate() const;
};

/// Unknown count for the scenario and mode. Hard formulations follow the
/// reference-image bookkeeping (9I + J - 6, 3 + 6(I-1) + J, 3 + 3I + J);
/// hard-noref adds 2J for full 3D points and soft adds 2IJ local normals.
long count_unknowns(ScenarioKind scenario, ConstraintMode mode, long images, long points);

/// Scalar constraints from the data term: 2J(I-1), or 2JI without reference.
long count_constraints(ConstraintMode mode, long images, long points);

/// Smallest point count for which a hard-constraint configuration with the
/// given number of images is determinable. Table-driven.
int min_points_for_images(ScenarioKind scenario, int images);

bool is_solvable(ScenarioKind scenario, int images, int points);

/// Smallest neighborhood size over all observations.
std::size_t smallest_neighborhood(const Neighborhoods& neighborhoods);

/// Parameter blocks as the optimizer sees them after applying scenario ties.
/// Tied entities alias a single block: under StaticInterface every image reads
/// the one world-frame plane, under FixedCamera every image reads the one
/// identity pose.
class TiedParameters {
 public:
  TiedParameters(const ParameterState& state, ScenarioKind scenario, ConstraintMode mode,
                 int gauge_image);

  ScenarioKind scenario() const { return scenario_; }
  ConstraintMode mode() const { return mode_; }
  int image_count() const { return image_count_; }
  int point_count() const { return point_count_; }
  int gauge_image() const { return gauge_image_; }

  /// True when interface blocks hold the world-frame plane (StaticInterface).
  bool interface_in_world() const { return scenario_ == ScenarioKind::StaticInterface; }
  bool poses_fixed() const { return scenario_ == ScenarioKind::FixedCamera; }

  std::size_t pose_slot(int image) const;
  std::size_t interface_slot(int image) const;
  std::size_t pose_block_count() const { return poses_.size(); }
  std::size_t interface_block_count() const { return normals_.size(); }

  double* pose(int image) { return poses_[pose_slot(image)].data(); }
  double* interface_normal(int image) { return normals_[interface_slot(image)].data(); }
  double* interface_depth(int image) { return &depths_[interface_slot(image)]; }
  double* point_depth(int point) { return &point_depths_[static_cast<std::size_t>(point)]; }
  double* point(int point) { return points_[static_cast<std::size_t>(point)].data(); }
  double* local_normal(int image, int point) {
    return local_normals_[static_cast<std::size_t>(image) * point_count_ + point].data();
  }

  const double* pose(int image) const { return poses_[pose_slot(image)].data(); }
  const double* interface_normal(int image) const { return normals_[interface_slot(image)].data(); }
  double interface_depth(int image) const { return depths_[interface_slot(image)]; }

  /// Camera-frame interface of `image` implied by the current blocks.
  InterfacePlane camera_interface(int image) const;
  /// World-frame interface of `image` implied by the current blocks.
  InterfacePlane world_interface(int image) const;
  Pose pose_of(int image) const;

  /// Writes the blocks back as a ParameterState (camera-frame interfaces).
  void write_back(ParameterState& state) const;

 private:
  ScenarioKind scenario_;
  ConstraintMode mode_;
  int image_count_;
  int point_count_;
  int gauge_image_;
  std::vector<std::array<double, 6>> poses_;
  std::vector<std::array<double, 3>> normals_;
  std::vector<double> depths_;
  std::vector<double> point_depths_;
  std::vector<std::array<double, 3>> points_;
  std::vector<std::array<double, 3>> local_normals_;
};

TiedParameters apply_scenario_ties(const ParameterState& state, ScenarioKind scenario,
                                   ConstraintMode mode, int gauge_image);

}  // namespace uwsfm
