#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "uwsfm/geometry.hpp"
#include "uwsfm/modes.hpp"
#include "uwsfm/state.hpp"
#include "uwsfm/tracks.hpp"

namespace uwsfm {

struct SimulationConfig {
  ScenarioKind scenario = ScenarioKind::MovingInterface;
  int image_count = 10;
  int point_count = 30;
  double mu = 1.333;
  CameraIntrinsics intrinsics{800.0, 800.0, 320.0, 240.0};
  int width = 640;
  int height = 480;
  /// Observations closer than this to the image border are dropped.
  double border_px = 10.0;
  int reference_index = 0;

  /// Interface depth of the reference image (the gauge value).
  double interface_depth = 1.0;
  /// Range of point depths below the interface, along the refracted ray.
  double depth_below_min = 0.5;
  double depth_below_max = 2.0;
  /// Maximum interface tilt from the optical axis, degrees.
  double max_tilt_deg = 20.0;
  /// Relative spread of per-image interface depths when the interface moves.
  double interface_depth_jitter = 0.2;

  /// Camera centers are drawn in a disk of this radius around the reference.
  double camera_baseline = 0.3;
  double camera_height_jitter = 0.05;
  double camera_max_roll_deg = 5.0;

  /// Sinusoidal surface waves (0 to 3 components) and their slope bound.
  int wave_count = 0;
  double wave_max_tilt_deg = 5.0;
  double wavelength_min = 0.3;
  double wavelength_max = 0.8;

  /// Fraction of non-reference observations randomly dropped.
  double drop_fraction = 0.0;

  /// Throws InfeasibleConfig if the values cannot describe a valid scene.
  void validate() const;
};

/// One sinusoid of a surface height field over interface-plane coordinates.
struct Wave {
  double amplitude = 0.0;
  double kx = 0.0;
  double ky = 0.0;
  double phase = 0.0;
};

/// Small-amplitude wave model: refraction happens on the mean plane, with
/// the local normal given by the slope of the height field at that location.
struct WaveField {
  std::vector<Wave> waves;

  bool flat() const { return waves.empty(); }
  /// Height-field gradient at plane coordinates (a, b).
  Vec2 gradient(double a, double b) const;
  /// Local normal of `plane` at the in-plane point `X` (camera frame).
  UnitVec3 normal_at(const InterfacePlane& plane, const Vec3& X) const;
};

/// Orthonormal in-plane axes used for wave coordinates.
std::pair<Vec3, Vec3> plane_axes(const UnitVec3& normal);

struct SceneTruth {
  ScenarioKind scenario = ScenarioKind::MovingInterface;
  CameraIntrinsics intrinsics;
  int width = 640;
  int height = 480;
  double border_px = 10.0;
  RefractiveIndex mu{1.333};
  int reference_index = 0;
  /// World frame = reference camera frame.
  std::vector<Vec3> points;
  std::vector<Pose> poses;
  /// Camera-frame interface per image.
  std::vector<InterfacePlane> interfaces;
  /// Per-image wave field; empty or all flat for planar interfaces.
  std::vector<WaveField> waves;
  double drop_fraction = 0.0;
  std::uint64_t seed = 0;

  int image_count() const { return static_cast<int>(poses.size()); }
  int point_count() const { return static_cast<int>(points.size()); }
};

struct RenderedObservation {
  Vec2 pixel;
  UnitVec3 local_normal;
  /// Refraction point on the interface plane, camera frame.
  Vec3 surface_point;
};

/// Renders one point into one image. Returns nullopt when no valid refraction
/// point exists or the pixel falls outside the image border.
std::optional<RenderedObservation> render_point(const SceneTruth& scene, int image, const Vec3& world_point);

struct RenderedTracks {
  TrackSet tracks;
  /// True local normals, [image][point]; entries for unobserved pairs are the
  /// plane normal.
  std::vector<std::vector<UnitVec3>> local_normals;
};

SceneTruth generate_scene(const SimulationConfig& config, std::uint64_t seed);

/// Moving-interface copy of `scene`: same points, poses and waves, with a
/// fresh random interface for every non-reference image. Draws are retried
/// until every point stays visible.
SceneTruth with_moving_interfaces(const SceneTruth& scene, const SimulationConfig& config, std::uint64_t seed);

RenderedTracks render_observations(const SceneTruth& scene);

/// Adds i.i.d. Gaussian noise of `sigma_px` to every pixel coordinate.
TrackSet perturb(const TrackSet& tracks, double sigma_px, std::uint64_t seed);

/// Ground-truth parameter state for `mode` (the reference must be set for the
/// reference formulations).
ParameterState truth_state(const SceneTruth& scene, const RenderedTracks& rendered, ConstraintMode mode);

}  // namespace uwsfm
