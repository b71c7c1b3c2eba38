#include "uwsfm/simulator.hpp"

#include <cmath>
#include <random>
#include <string>

#include <Eigen/Dense>

#include "uwsfm/refraction_kernels.hpp"
#include "uwsfm/scenarios.hpp"

namespace uwsfm {

namespace {

constexpr const char* kModule = "simulator";
constexpr double kDeg = M_PI / 180.0;

[[noreturn]] void infeasible(const std::string& why) {
  throw Error(ErrorCode::InfeasibleConfig, kModule, why);
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

InterfacePlane random_plane(std::mt19937_64& rng, double max_tilt_rad, double depth) {
  const double tilt = uniform(rng, 0.0, max_tilt_rad);
  const double azimuth = uniform(rng, 0.0, 2.0 * M_PI);
  const Vec3 n(std::sin(tilt) * std::cos(azimuth), std::sin(tilt) * std::sin(azimuth), std::cos(tilt));
  return InterfacePlane::canonical(n, depth);
}

Pose look_at_pose(const Vec3& center, const Vec3& target, double roll) {
  const Vec3 z = (target - center).normalized();
  Vec3 x = Vec3::UnitX() - Vec3::UnitX().dot(z) * z;
  x.normalize();
  const Vec3 y = z.cross(x);
  const Vec3 xr = std::cos(roll) * x + std::sin(roll) * y;
  const Vec3 yr = -std::sin(roll) * x + std::cos(roll) * y;
  Mat3 R;
  R.row(0) = xr.transpose();
  R.row(1) = yr.transpose();
  R.row(2) = z.transpose();
  return Pose::from_matrix(R, -(R * center));
}

WaveField random_waves(std::mt19937_64& rng, const SimulationConfig& config) {
  WaveField field;
  if (config.wave_count <= 0) return field;
  const double slope_budget = std::tan(config.wave_max_tilt_deg * kDeg) / config.wave_count;
  for (int w = 0; w < config.wave_count; ++w) {
    const double wavelength = uniform(rng, config.wavelength_min, config.wavelength_max);
    const double direction = uniform(rng, 0.0, 2.0 * M_PI);
    const double k = 2.0 * M_PI / wavelength;
    field.waves.push_back(Wave{slope_budget / k, k * std::cos(direction), k * std::sin(direction),
                               uniform(rng, 0.0, 2.0 * M_PI)});
  }
  return field;
}

std::optional<Vec3> refracted(const Vec3& incident, const UnitVec3& normal, double mu) {
  Vec3 out;
  if (kernels::refract_into_medium<double>(incident, normal.vec(), mu, &out) != kernels::Status::Ok) {
    return std::nullopt;
  }
  return out;
}

// Refraction point on a plane whose normals vary with position: the in-plane
// point X such that the refracted line of sight through X hits `P`.
std::optional<Vec3> wavy_refraction_point(const Vec3& P, const InterfacePlane& plane,
                                          const WaveField& field, double mu, const Vec3& start) {
  const auto [e1, e2] = plane_axes(plane.normal);
  const Vec3 foot = plane.depth * plane.normal.vec();
  const auto point_at = [&](const Vec2& ab) { return Vec3(foot + ab.x() * e1 + ab.y() * e2); };
  const auto condition = [&](const Vec2& ab) -> std::optional<Vec2> {
    const Vec3 X = point_at(ab);
    const auto t = refracted(X.normalized(), field.normal_at(plane, X), mu);
    if (!t) return std::nullopt;
    const Vec3 w = P - X;
    const Vec3 r = w - w.dot(*t) * *t;
    return Vec2(e1.dot(r), e2.dot(r));
  };

  Vec2 ab(e1.dot(start - foot), e2.dot(start - foot));
  const double scale = (P - start).norm();
  for (int iter = 0; iter < 60; ++iter) {
    const auto f = condition(ab);
    if (!f) return std::nullopt;
    if (f->norm() <= 1e-15 * scale) break;
    Eigen::Matrix2d J;
    const double h = 1e-7 * (1.0 + ab.norm());
    for (int c = 0; c < 2; ++c) {
      Vec2 step = Vec2::Zero();
      step[c] = h;
      const auto fp = condition(ab + step);
      const auto fm = condition(ab - step);
      if (!fp || !fm) return std::nullopt;
      J.col(c) = (*fp - *fm) / (2.0 * h);
    }
    const Vec2 delta = J.fullPivLu().solve(-*f);
    if (!delta.allFinite()) return std::nullopt;
    ab += delta;
    if (delta.norm() <= 1e-17 * (1.0 + ab.norm())) break;
  }
  const auto f = condition(ab);
  if (!f || f->norm() > 1e-12 * scale) return std::nullopt;
  return point_at(ab);
}

}  // namespace

void SimulationConfig::validate() const {
  if (image_count < 2) infeasible("at least two images are required");
  if (point_count < 1) infeasible("at least one point is required");
  if (point_count < min_points_for_images(scenario, image_count)) {
    infeasible(std::string(to_string(scenario)) + " with " + std::to_string(image_count) +
               " images needs at least " + std::to_string(min_points_for_images(scenario, image_count)) +
               " points");
  }
  if (!(mu > 0.0)) infeasible("refractive index must be positive");
  if (!(intrinsics.fx > 0.0) || !(intrinsics.fy > 0.0)) infeasible("focal lengths must be positive");
  if (width <= 2 * border_px || height <= 2 * border_px) infeasible("image is smaller than its border");
  if (reference_index < 0 || reference_index >= image_count) infeasible("reference index out of range");
  if (!(interface_depth > 0.0)) infeasible("interface depth must be positive");
  if (!(depth_below_min > 0.0) || !(depth_below_max >= depth_below_min)) {
    infeasible("point depth range must be positive and ordered");
  }
  if (!(max_tilt_deg >= 0.0) || max_tilt_deg >= 60.0) infeasible("interface tilt must be in [0, 60) degrees");
  if (!(interface_depth_jitter >= 0.0) || interface_depth_jitter >= 0.9) {
    infeasible("interface depth jitter must be in [0, 0.9)");
  }
  if (!(camera_baseline >= 0.0)) infeasible("camera baseline must be non-negative");
  if (wave_count < 0 || wave_count > 3) infeasible("wave count must be between 0 and 3");
  if (wave_count > 0 && (!(wave_max_tilt_deg > 0.0) || !(wavelength_min > 0.0) ||
                         !(wavelength_max >= wavelength_min))) {
    infeasible("wave parameters must be positive");
  }
  if (!(drop_fraction >= 0.0) || drop_fraction >= 1.0) infeasible("drop fraction must be in [0, 1)");
}

Vec2 WaveField::gradient(double a, double b) const {
  Vec2 g = Vec2::Zero();
  for (const Wave& w : waves) {
    const double c = w.amplitude * std::cos(w.kx * a + w.ky * b + w.phase);
    g += c * Vec2(w.kx, w.ky);
  }
  return g;
}

std::pair<Vec3, Vec3> plane_axes(const UnitVec3& normal) {
  const Vec3& n = normal.vec();
  Vec3 e1 = Vec3::UnitX() - Vec3::UnitX().dot(n) * n;
  e1.normalize();
  return {e1, n.cross(e1)};
}

UnitVec3 WaveField::normal_at(const InterfacePlane& plane, const Vec3& X) const {
  if (flat()) return plane.normal;
  const auto [e1, e2] = plane_axes(plane.normal);
  const Vec2 g = gradient(e1.dot(X), e2.dot(X));
  return UnitVec3(plane.normal.vec() - g.x() * e1 - g.y() * e2);
}

std::optional<RenderedObservation> render_point(const SceneTruth& scene, int image,
                                                const Vec3& world_point) {
  const auto i = static_cast<std::size_t>(image);
  const InterfacePlane& plane = scene.interfaces[i];
  const Vec3 P = scene.poses[i].to_camera(world_point);
  Vec3 X;
  if (kernels::flat_refraction_point<double>(P, plane.normal.vec(), plane.depth, scene.mu.value(), &X) !=
      kernels::Status::Ok) {
    return std::nullopt;
  }
  UnitVec3 local = plane.normal;
  const WaveField* field = i < scene.waves.size() ? &scene.waves[i] : nullptr;
  if (field != nullptr && !field->flat()) {
    const auto wavy = wavy_refraction_point(P, plane, *field, scene.mu.value(), X);
    if (!wavy) return std::nullopt;
    X = *wavy;
    local = field->normal_at(plane, X);
  }
  if (!(X.z() > 0.0)) return std::nullopt;
  const Vec2 pixel = kernels::point_to_pixel<double>(X, scene.intrinsics.fx, scene.intrinsics.fy,
                                                      scene.intrinsics.cx, scene.intrinsics.cy);
  const double b = scene.border_px;
  if (pixel.x() < b || pixel.x() > scene.width - b || pixel.y() < b || pixel.y() > scene.height - b) {
    return std::nullopt;
  }
  return RenderedObservation{pixel, local, X};
}

SceneTruth generate_scene(const SimulationConfig& config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);
  const int I = config.image_count;
  const int r = config.reference_index;
  const double max_tilt = config.max_tilt_deg * kDeg;

  SceneTruth scene;
  scene.scenario = config.scenario;
  scene.intrinsics = config.intrinsics;
  scene.width = config.width;
  scene.height = config.height;
  scene.border_px = config.border_px;
  scene.mu = RefractiveIndex(config.mu);
  scene.reference_index = r;
  scene.drop_fraction = config.drop_fraction;
  scene.seed = seed;
  scene.poses.assign(static_cast<std::size_t>(I), Pose::identity());
  scene.interfaces.assign(static_cast<std::size_t>(I), InterfacePlane{});

  const InterfacePlane reference_plane = random_plane(rng, max_tilt, config.interface_depth);
  scene.interfaces[static_cast<std::size_t>(r)] = reference_plane;
  const Vec3 target(0.0, 0.0,
                    config.interface_depth + 0.5 * (config.depth_below_min + config.depth_below_max));

  for (int i = 0; i < I; ++i) {
    if (i == r) continue;
    auto& pose = scene.poses[static_cast<std::size_t>(i)];
    auto& plane = scene.interfaces[static_cast<std::size_t>(i)];
    if (config.scenario != ScenarioKind::FixedCamera) {
      bool placed = false;
      for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
        const double radius = config.camera_baseline * std::sqrt(uniform(rng, 0.25, 1.0));
        const double angle = uniform(rng, 0.0, 2.0 * M_PI);
        const Vec3 center(radius * std::cos(angle), radius * std::sin(angle),
                          uniform(rng, -config.camera_height_jitter, config.camera_height_jitter));
        const double roll = uniform(rng, -config.camera_max_roll_deg, config.camera_max_roll_deg) * kDeg;
        pose = look_at_pose(center, target, roll);
        if (config.scenario == ScenarioKind::StaticInterface) {
          const double d = reference_plane.depth - reference_plane.normal.dot(center);
          const Vec3 n = pose.rotation_matrix() * reference_plane.normal.vec();
          if (d < 0.3 * reference_plane.depth || n.z() < std::cos(50.0 * kDeg)) continue;
          plane = world_plane_to_camera(reference_plane, pose);
        }
        placed = true;
      }
      if (!placed) infeasible("could not place a camera above the static interface");
    }
    if (config.scenario != ScenarioKind::StaticInterface) {
      const double jitter = config.interface_depth_jitter;
      plane = random_plane(rng, max_tilt,
                           config.interface_depth * uniform(rng, 1.0 - jitter, 1.0 + jitter));
    }
  }
  for (int i = 0; i < I; ++i) scene.waves.push_back(random_waves(rng, config));

  const CameraIntrinsics& k = config.intrinsics;
  const double lo_x = 0.1 * config.width, hi_x = 0.9 * config.width;
  const double lo_y = 0.1 * config.height, hi_y = 0.9 * config.height;
  const auto& ref_wave = scene.waves[static_cast<std::size_t>(r)];
  const long max_attempts = 500L * config.point_count;
  long attempts = 0;
  while (static_cast<int>(scene.points.size()) < config.point_count) {
    if (++attempts > max_attempts) infeasible("could not place enough points visible in every image");
    const Vec2 pixel(uniform(rng, lo_x, hi_x), uniform(rng, lo_y, hi_y));
    const double depth_below = uniform(rng, config.depth_below_min, config.depth_below_max);
    Vec3 origin;
    const Vec3 dir = kernels::pixel_to_ray<double>(pixel, k.fx, k.fy, k.cx, k.cy);
    if (kernels::intersect_plane<double>(dir, reference_plane.normal.vec(), reference_plane.depth,
                                         &origin) != kernels::Status::Ok) {
      continue;
    }
    const auto t = refracted(dir, ref_wave.normal_at(reference_plane, origin), config.mu);
    if (!t) continue;
    const Vec3 P = origin + depth_below * *t;
    bool visible = true;
    for (int i = 0; i < I && visible; ++i) {
      const auto& plane = scene.interfaces[static_cast<std::size_t>(i)];
      const Vec3 Pc = scene.poses[static_cast<std::size_t>(i)].to_camera(P);
      if (plane.normal.dot(Pc) - plane.depth < 0.1 * config.depth_below_min) visible = false;
      if (visible && !render_point(scene, i, P)) visible = false;
    }
    if (visible) scene.points.push_back(P);
  }
  return scene;
}

SceneTruth with_moving_interfaces(const SceneTruth& scene, const SimulationConfig& config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);
  SceneTruth out = scene;
  out.scenario = ScenarioKind::MovingInterface;
  const double max_tilt = config.max_tilt_deg * kDeg;
  const double jitter = config.interface_depth_jitter;
  for (int i = 0; i < out.image_count(); ++i) {
    if (i == out.reference_index) continue;
    auto& plane = out.interfaces[static_cast<std::size_t>(i)];
    bool placed = false;
    for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
      plane = random_plane(rng, max_tilt, config.interface_depth * uniform(rng, 1.0 - jitter, 1.0 + jitter));
      placed = true;
      for (const Vec3& P : out.points) {
        const Vec3 Pc = out.poses[static_cast<std::size_t>(i)].to_camera(P);
        if (plane.normal.dot(Pc) - plane.depth < 0.1 * config.depth_below_min || !render_point(out, i, P)) {
          placed = false;
          break;
        }
      }
    }
    if (!placed) infeasible("could not draw an interface that keeps every point visible");
  }
  return out;
}

RenderedTracks render_observations(const SceneTruth& scene) {
  const int I = scene.image_count();
  const int J = scene.point_count();
  RenderedTracks out;
  out.local_normals.resize(static_cast<std::size_t>(I));
  std::vector<Observation> observations;
  std::mt19937_64 rng(scene.seed ^ 0x9e3779b97f4a7c15ULL);
  std::bernoulli_distribution drop(scene.drop_fraction);
  std::vector<int> views(static_cast<std::size_t>(J), 0);
  std::vector<std::optional<RenderedObservation>> rendered(static_cast<std::size_t>(I) * J);
  for (int i = 0; i < I; ++i) {
    out.local_normals[static_cast<std::size_t>(i)].assign(static_cast<std::size_t>(J),
                                                          scene.interfaces[static_cast<std::size_t>(i)].normal);
    for (int j = 0; j < J; ++j) {
      auto obs = render_point(scene, i, scene.points[static_cast<std::size_t>(j)]);
      if (obs) {
        views[static_cast<std::size_t>(j)] += 1;
        out.local_normals[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = obs->local_normal;
      }
      rendered[static_cast<std::size_t>(i) * J + j] = std::move(obs);
    }
  }
  for (int i = 0; i < I; ++i) {
    for (int j = 0; j < J; ++j) {
      const auto& obs = rendered[static_cast<std::size_t>(i) * J + j];
      if (!obs) continue;
      if (scene.drop_fraction > 0.0 && i != scene.reference_index && views[static_cast<std::size_t>(j)] > 2 &&
          drop(rng)) {
        views[static_cast<std::size_t>(j)] -= 1;
        continue;
      }
      observations.push_back(Observation{i, j, obs->pixel});
    }
  }
  out.tracks = TrackSet(I, J, std::move(observations), scene.reference_index);
  return out;
}

TrackSet perturb(const TrackSet& tracks, double sigma_px, std::uint64_t seed) {
  if (sigma_px < 0.0) throw Error(ErrorCode::InvalidArgument, kModule, "noise sigma must be non-negative");
  if (sigma_px == 0.0) return tracks;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, sigma_px);
  std::vector<Observation> observations = tracks.observations();
  for (Observation& obs : observations) {
    const double dx = noise(rng);
    const double dy = noise(rng);
    obs.pixel += Vec2(dx, dy);
  }
  return TrackSet(tracks.image_count(), tracks.point_count(), std::move(observations), tracks.reference());
}

ParameterState truth_state(const SceneTruth& scene, const RenderedTracks& rendered, ConstraintMode mode) {
  ParameterState state;
  state.poses = scene.poses;
  state.interfaces = scene.interfaces;
  state.mu = scene.mu;
  if (mode == ConstraintMode::HardNoRef) {
    state.points = scene.points;
    return state;
  }
  const int r = rendered.tracks.reference().value_or(scene.reference_index);
  const auto ri = static_cast<std::size_t>(r);
  for (int j = 0; j < scene.point_count(); ++j) {
    const Observation& obs = rendered.tracks.at(r, j);
    const Ray ray = back_project_ray(obs.pixel, scene.interfaces[ri],
                                     rendered.local_normals[ri][static_cast<std::size_t>(j)], scene.mu,
                                     scene.intrinsics);
    const Vec3 P = scene.poses[ri].to_camera(scene.points[static_cast<std::size_t>(j)]);
    state.point_depths.push_back((P - ray.origin).dot(ray.direction.vec()));
  }
  if (mode == ConstraintMode::Soft) state.local_normals = rendered.local_normals;
  return state;
}

}  // namespace uwsfm
