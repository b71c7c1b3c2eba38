#include "uwsfm/initializer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include <opencv2/calib3d.hpp>
#include <opencv2/core.hpp>
#include <opencv2/core/eigen.hpp>

#include <Eigen/SVD>

#include "uwsfm/residual_kernels.hpp"
#include "uwsfm/residuals.hpp"

namespace uwsfm {

namespace {

constexpr const char* kModule = "initializer";
// Smallest initial depth beyond the interface.
constexpr double kMinPointDepth = 1e-3;

cv::Mat camera_matrix(const CameraIntrinsics& k) {
  return (cv::Mat_<double>(3, 3) << k.fx, 0.0, k.cx, 0.0, k.fy, k.cy, 0.0, 0.0, 1.0);
}

double median(std::vector<double> v) {
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

int ransac_state(std::uint64_t seed, int a, int b) {
  std::uint64_t h = seed * 0x9E3779B97F4A7C15ull + static_cast<std::uint64_t>(a) * 1000003ull +
                    static_cast<std::uint64_t>(b);
  h ^= h >> 31;
  return static_cast<int>(h & 0x7fffffff);
}

// Depth d_j of a point: distance beyond the interface z = 1 along the
// unrefracted line of sight of `pixel`, after projecting `P` onto it.
double depth_beyond_interface(const Vec2& pixel, const Vec3& P, const CameraIntrinsics& k,
                              const InterfacePlane& plane) {
  const UnitVec3 ray = pixel_to_ray(pixel, k);
  const double along = P.dot(ray.vec());
  const double to_plane = plane.depth / ray.dot(plane.normal.vec());
  return std::max(along - to_plane, kMinPointDepth);
}

Vec3 dlt_triangulate(const std::vector<Pose>& poses, const std::vector<Vec2>& pixels,
                     const CameraIntrinsics& k) {
  Eigen::MatrixXd A(2 * poses.size(), 4);
  for (std::size_t v = 0; v < poses.size(); ++v) {
    Eigen::Matrix<double, 3, 4> P;
    P.leftCols<3>() = poses[v].rotation_matrix();
    P.col(3) = poses[v].translation;
    const double x = (pixels[v].x() - k.cx) / k.fx;
    const double y = (pixels[v].y() - k.cy) / k.fy;
    A.row(static_cast<Eigen::Index>(2 * v)) = x * P.row(2) - P.row(0);
    A.row(static_cast<Eigen::Index>(2 * v + 1)) = y * P.row(2) - P.row(1);
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV);
  const Eigen::Vector4d h = svd.matrixV().col(3);
  return h.head<3>() / h(3);
}

// Shared initial values for everything but points and poses.
ParameterState base_state(const Problem& problem) {
  const int I = problem.tracks.image_count();
  const int J = problem.tracks.point_count();
  ParameterState s;
  s.mu = problem.mu;
  s.poses.assign(static_cast<std::size_t>(I), Pose::identity());
  s.interfaces.assign(static_cast<std::size_t>(I),
                      InterfacePlane::canonical(Vec3::UnitZ(), problem.gauge.depth));
  if (problem.mode == ConstraintMode::HardNoRef) {
    s.points.assign(static_cast<std::size_t>(J), Vec3::Zero());
  } else {
    s.point_depths.assign(static_cast<std::size_t>(J), 1.0);
  }
  if (problem.mode == ConstraintMode::Soft) {
    s.local_normals.assign(static_cast<std::size_t>(I),
                           std::vector<UnitVec3>(static_cast<std::size_t>(J), UnitVec3()));
  }
  return s;
}

// Reprojection energy through the refractive model, with points defined by
// the anchor image's observations and per-point depths. Points not observed
// by the anchor are ignored.
double anchor_energy(const Problem& problem, const ParameterState& s, int anchor,
                     const std::vector<double>& depths) {
  const kernels::Intrinsics k{problem.intrinsics.fx, problem.intrinsics.fy, problem.intrinsics.cx,
                              problem.intrinsics.cy};
  const TrackSet& tracks = problem.tracks;
  const InterfacePlane& pa = s.interfaces[static_cast<std::size_t>(anchor)];
  const double mu = problem.mu.value();
  std::vector<Vec3> P(static_cast<std::size_t>(tracks.point_count()));
  std::vector<bool> have(P.size(), false);
  for (int j = 0; j < tracks.point_count(); ++j) {
    const auto idx = tracks.find(anchor, j);
    if (!idx) continue;
    Vec3 X;
    if (kernels::reference_point<double>(tracks.observations()[*idx].pixel, pa.normal.vec(),
                                         pa.depth, pa.normal.vec(),
                                         depths[static_cast<std::size_t>(j)], mu, k,
                                         &X) != kernels::Status::Ok) {
      return std::numeric_limits<double>::infinity();
    }
    P[static_cast<std::size_t>(j)] = s.poses[static_cast<std::size_t>(anchor)].to_world(X);
    have[static_cast<std::size_t>(j)] = true;
  }
  std::vector<double> terms;
  for (const Observation& obs : tracks.observations()) {
    if (obs.image == anchor || !have[static_cast<std::size_t>(obs.point)]) continue;
    const auto i = static_cast<std::size_t>(obs.image);
    const Pose& pose = s.poses[i];
    const double p6[6] = {pose.rotation.x(),    pose.rotation.y(),    pose.rotation.z(),
                          pose.translation.x(), pose.translation.y(), pose.translation.z()};
    double e[2];
    if (kernels::reprojection<double>(p6, s.interfaces[i].normal.vec(), s.interfaces[i].depth,
                                      P[static_cast<std::size_t>(obs.point)], obs.pixel, mu, k,
                                      e) != kernels::Status::Ok) {
      return std::numeric_limits<double>::infinity();
    }
    terms.push_back(e[0] * e[0] + e[1] * e[1]);
  }
  return pairwise_sum(terms);
}

// Minimizes f over [lo, hi] on a log-spaced grid refined by golden-section
// search around the best grid node. Returns the argmin.
template <typename F>
double search_log_scale(F f, double lo, double hi, int grid = 40) {
  const double llo = std::log(lo);
  const double lhi = std::log(hi);
  const double step = (lhi - llo) / (grid - 1);
  int best = -1;
  double best_value = std::numeric_limits<double>::infinity();
  for (int g = 0; g < grid; ++g) {
    const double v = f(std::exp(llo + step * g));
    if (v < best_value) {
      best_value = v;
      best = g;
    }
  }
  if (best < 0) return std::exp(0.5 * (llo + lhi));
  double a = llo + step * std::max(best - 1, 0);
  double b = llo + step * std::min(best + 1, grid - 1);
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = b - phi * (b - a);
  double x2 = a + phi * (b - a);
  double f1 = f(std::exp(x1));
  double f2 = f(std::exp(x2));
  for (int it = 0; it < 60 && b - a > 1e-10; ++it) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - phi * (b - a);
      f1 = f(std::exp(x1));
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + phi * (b - a);
      f2 = f(std::exp(x2));
    }
  }
  const double x = f1 <= f2 ? x1 : x2;
  return std::min(f1, f2) <= best_value ? std::exp(x) : std::exp(llo + step * best);
}

}  // namespace

PairEstimate estimate_pair(const TrackSet& tracks, int a, int b, const CameraIntrinsics& k,
                           const InitializerOptions& options) {
  if (a == b || a < 0 || b < 0 || a >= tracks.image_count() || b >= tracks.image_count()) {
    throw Error(ErrorCode::InvalidArgument, kModule, "invalid image pair");
  }
  PairEstimate est;
  est.a = a;
  est.b = b;
  std::vector<cv::Point2d> pa;
  std::vector<cv::Point2d> pb;
  std::vector<int> ids;
  for (int j = 0; j < tracks.point_count(); ++j) {
    const auto ia = tracks.find(a, j);
    const auto ib = tracks.find(b, j);
    if (!ia || !ib) continue;
    const Vec2& xa = tracks.observations()[*ia].pixel;
    const Vec2& xb = tracks.observations()[*ib].pixel;
    pa.emplace_back(xa.x(), xa.y());
    pb.emplace_back(xb.x(), xb.y());
    ids.push_back(j);
  }
  const std::string pair = "(" + std::to_string(a) + ", " + std::to_string(b) + ")";
  if (ids.size() < 5) {
    throw Error(ErrorCode::InsufficientCorrespondences, kModule,
                "pair " + pair + " has " + std::to_string(ids.size()) + " common points, need 5");
  }
  const cv::Mat K = camera_matrix(k);
  cv::UsacParams params;
  params.confidence = 0.999;
  params.isParallel = false;
  params.maxIterations = options.ransac_iterations;
  params.threshold = options.ransac_threshold_px;
  params.randomGeneratorState = ransac_state(options.ransac_seed, a, b);
  cv::Mat mask;
  cv::Mat E;
  try {
    E = cv::findEssentialMat(pa, pb, K, K, cv::noArray(), cv::noArray(), mask, params);
  } catch (const cv::Exception& e) {
    throw Error(ErrorCode::DegeneratePair, kModule, "essential matrix failed for pair " + pair + ": " + e.what());
  }
  if (E.rows != 3 || E.cols != 3) {
    throw Error(ErrorCode::DegeneratePair, kModule, "no essential matrix for pair " + pair);
  }
  cv::Mat R;
  cv::Mat t;
  cv::Mat pose_mask = mask.clone();
  const int good = cv::recoverPose(E, pa, pb, K, R, t, pose_mask);
  if (good < 5) {
    throw Error(ErrorCode::DegeneratePair, kModule,
                "pair " + pair + " has only " + std::to_string(good) + " cheirality-consistent inliers");
  }
  cv::cv2eigen(R, est.rotation);
  Eigen::Vector3d tv;
  cv::cv2eigen(t, tv);
  est.translation = tv.normalized();

  cv::Mat Pa = cv::Mat::zeros(3, 4, CV_64F);
  K.copyTo(Pa(cv::Rect(0, 0, 3, 3)));
  cv::Mat Rt;
  cv::hconcat(R, t, Rt);
  const cv::Mat Pb = K * Rt;
  cv::Mat Xh;
  cv::triangulatePoints(Pa, Pb, pa, pb, Xh);
  Xh.convertTo(Xh, CV_64F);

  std::vector<double> parallax;
  const Vec3 cb = -(est.rotation.transpose() * est.translation);
  for (std::size_t m = 0; m < ids.size(); ++m) {
    const double w = Xh.at<double>(3, static_cast<int>(m));
    if (std::abs(w) < 1e-12) continue;
    const Vec3 X(Xh.at<double>(0, static_cast<int>(m)) / w, Xh.at<double>(1, static_cast<int>(m)) / w,
                 Xh.at<double>(2, static_cast<int>(m)) / w);
    const Vec3 Xb = est.rotation * X + est.translation;
    if (!(X.z() > 0.0) || !(Xb.z() > 0.0) || !X.allFinite()) continue;
    est.point_ids.push_back(ids[m]);
    est.points.push_back(X);
    est.inliers.push_back(pose_mask.at<unsigned char>(static_cast<int>(m)) != 0);
    const Vec3 u = X.normalized();
    const Vec3 v = (X - cb).normalized();
    parallax.push_back(std::acos(std::clamp(u.dot(v), -1.0, 1.0)));
  }
  if (est.points.size() < 5) {
    throw Error(ErrorCode::DegeneratePair, kModule, "pair " + pair + " triangulates fewer than 5 points");
  }
  if (median(parallax) < 1e-3) {
    throw Error(ErrorCode::DegeneratePair, kModule, "pair " + pair + " has no parallax (pure rotation)");
  }
  return est;
}

double MergedCloud::mean_depth() const {
  double sum = 0.0;
  int n = 0;
  for (std::size_t j = 0; j < points.size(); ++j) {
    if (!valid[j]) continue;
    sum += points[j].z();
    ++n;
  }
  return n > 0 ? sum / n : 0.0;
}

MergedCloud normalize_and_merge(const std::vector<PairEstimate>& estimates, int point_count,
                                double mad_factor) {
  if (estimates.empty()) throw Error(ErrorCode::EmptyCloud, kModule, "no pair estimates to merge");
  const int a = estimates.front().a;
  const auto J = static_cast<std::size_t>(point_count);
  std::vector<std::vector<Vec3>> per_point(J);
  for (const PairEstimate& est : estimates) {
    if (est.a != a) {
      throw Error(ErrorCode::InvalidArgument, kModule, "estimates must share their first image");
    }
    if (est.points.empty()) continue;
    double mean = 0.0;
    for (const Vec3& X : est.points) mean += X.z();
    mean /= static_cast<double>(est.points.size());
    if (!(mean > 0.0)) continue;
    for (std::size_t m = 0; m < est.points.size(); ++m) {
      const auto j = static_cast<std::size_t>(est.point_ids[m]);
      if (j >= J) throw Error(ErrorCode::InvalidArgument, kModule, "point id out of range");
      per_point[j].push_back(est.points[m] / mean);
    }
  }
  MergedCloud cloud;
  cloud.points.assign(J, Vec3::Zero());
  cloud.valid.assign(J, false);
  cloud.contributions.assign(J, 0);
  cloud.rejected.assign(J, 0);
  bool any = false;
  for (std::size_t j = 0; j < J; ++j) {
    const auto& c = per_point[j];
    if (c.empty()) continue;
    std::vector<double> depth;
    for (const Vec3& X : c) depth.push_back(X.z());
    const double med = median(depth);
    std::vector<double> dev;
    for (double z : depth) dev.push_back(std::abs(z - med));
    const double mad = median(dev);
    const double floor = 1e-12 * (std::abs(med) + 1.0);
    Vec3 sum = Vec3::Zero();
    int kept = 0;
    for (std::size_t m = 0; m < c.size(); ++m) {
      if (dev[m] > mad_factor * mad && dev[m] > floor) {
        ++cloud.rejected[j];
        continue;
      }
      sum += c[m];
      ++kept;
    }
    if (kept == 0) continue;
    cloud.points[j] = sum / kept;
    cloud.valid[j] = true;
    cloud.contributions[j] = kept;
    any = true;
  }
  if (!any) throw Error(ErrorCode::EmptyCloud, kModule, "no point survived merging");
  return cloud;
}

std::vector<std::optional<Pose>> recover_poses_pnp(const MergedCloud& cloud, const TrackSet& tracks,
                                                   const CameraIntrinsics& k, int anchor) {
  const cv::Mat K = camera_matrix(k);
  std::vector<std::optional<Pose>> poses(static_cast<std::size_t>(tracks.image_count()));
  for (int i = 0; i < tracks.image_count(); ++i) {
    std::vector<cv::Point3d> object;
    std::vector<cv::Point2d> image;
    for (std::size_t idx : tracks.observations_in_image(i)) {
      const Observation& obs = tracks.observations()[idx];
      const auto j = static_cast<std::size_t>(obs.point);
      if (j >= cloud.valid.size() || !cloud.valid[j]) continue;
      object.emplace_back(cloud.points[j].x(), cloud.points[j].y(), cloud.points[j].z());
      image.emplace_back(obs.pixel.x(), obs.pixel.y());
    }
    if (object.size() < 4) continue;
    cv::Mat rvec;
    cv::Mat tvec;
    bool ok = false;
    try {
      ok = cv::solvePnP(object, image, K, cv::noArray(), rvec, tvec, false, cv::SOLVEPNP_EPNP);
      if (ok && object.size() >= 6) {
        ok = cv::solvePnP(object, image, K, cv::noArray(), rvec, tvec, true, cv::SOLVEPNP_ITERATIVE);
      }
    } catch (const cv::Exception&) {
      ok = false;
    }
    if (!ok) continue;
    Eigen::Vector3d r;
    Eigen::Vector3d t;
    cv::cv2eigen(rvec, r);
    cv::cv2eigen(tvec, t);
    if (!r.allFinite() || !t.allFinite()) continue;
    poses[static_cast<std::size_t>(i)] = Pose::from_matrix(rotation_exp(r), t);
  }
  if (anchor >= 0 && anchor < tracks.image_count()) {
    const auto a = static_cast<std::size_t>(anchor);
    if (poses[a]) {
      const Pose inv = poses[a]->inverse();
      const Mat3 Ri = inv.rotation_matrix();
      for (auto& p : poses) {
        if (!p) continue;
        const Mat3 R = p->rotation_matrix() * Ri;
        p = Pose::from_matrix(R, p->rotation_matrix() * inv.translation + p->translation);
      }
    }
    poses[a] = Pose::identity();
  }
  return poses;
}

Initialization initialize_detailed(const Problem& problem, const InitializerOptions& options) {
  const TrackSet& tracks = problem.tracks;
  const int I = tracks.image_count();
  const int J = tracks.point_count();
  const int anchor = problem.gauge.image;
  const CameraIntrinsics& K = problem.intrinsics;
  Initialization out;
  out.state = base_state(problem);
  ParameterState& s = out.state;
  const InterfacePlane& plane = s.interfaces[static_cast<std::size_t>(anchor)];

  const auto finish_points = [&](const std::vector<double>& depths) {
    if (problem.mode != ConstraintMode::HardNoRef) {
      s.point_depths = depths;
      return;
    }
    const kernels::Intrinsics kk{K.fx, K.fy, K.cx, K.cy};
    for (int j = 0; j < J; ++j) {
      // First view of the point defines its refracted back-projection.
      int view = anchor;
      if (!tracks.observed(anchor, j)) {
        view = -1;
        for (int i = 0; i < I && view < 0; ++i) {
          if (tracks.observed(i, j)) view = i;
        }
      }
      const auto v = static_cast<std::size_t>(view);
      const InterfacePlane& pv = s.interfaces[v];
      Vec3 X;
      if (view < 0 ||
          kernels::reference_point<double>(tracks.at(view, j).pixel, pv.normal.vec(), pv.depth,
                                           pv.normal.vec(), depths[static_cast<std::size_t>(j)],
                                           problem.mu.value(), kk, &X) != kernels::Status::Ok) {
        throw Error(ErrorCode::NumericalFailure, kModule, "cannot back-project point " + std::to_string(j));
      }
      s.points[static_cast<std::size_t>(j)] = s.poses[v].to_world(X);
    }
  };

  if (options.approximate_depth && !(*options.approximate_depth > 0.0)) {
    throw Error(ErrorCode::ConfigError, kModule, "approximate depth must be positive");
  }
  if (problem.scenario == ScenarioKind::FixedCamera) {
    // All initial views coincide, so neither two-view geometry nor the
    // energy can tell depths apart; points start one gauge depth beyond the
    // interface unless a depth is given.
    const double D = options.approximate_depth.value_or(problem.gauge.depth);
    if (!options.approximate_depth) out.warnings.push_back("fixed-camera: point depths set to the gauge depth");
    finish_points(std::vector<double>(static_cast<std::size_t>(J), D));
    return out;
  }

  // Pair selection against the anchor image so every cloud shares its frame.
  std::vector<std::pair<int, int>> candidates;
  const int needed = std::max(8, J / 2);
  for (int b = 0; b < I; ++b) {
    if (b == anchor) continue;
    int common = 0;
    for (int j = 0; j < J; ++j) common += tracks.observed(anchor, j) && tracks.observed(b, j);
    if (common >= needed) candidates.emplace_back(common, b);
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const auto& x, const auto& y) { return x.first > y.first; });
  if (candidates.size() > static_cast<std::size_t>(3 * I)) candidates.resize(static_cast<std::size_t>(3 * I));
  std::vector<PairEstimate> estimates;
  for (const auto& [common, b] : candidates) {
    try {
      estimates.push_back(estimate_pair(tracks, anchor, b, K, options));
    } catch (const Error& e) {
      out.warnings.emplace_back(e.what());
    }
  }
  if (estimates.empty()) {
    throw Error(ErrorCode::InsufficientCorrespondences, kModule,
                "no usable image pair with the anchor image " + std::to_string(anchor));
  }
  MergedCloud cloud = normalize_and_merge(estimates, J, options.outlier_mad_factor);
  std::vector<std::optional<Pose>> unit_poses = recover_poses_pnp(cloud, tracks, K, anchor);
  for (int i = 0; i < I; ++i) {
    if (unit_poses[static_cast<std::size_t>(i)]) continue;
    out.warnings.push_back(std::string(to_string(ErrorCode::PnPFailure)) + ": image " +
                           std::to_string(i) + " kept at the anchor pose");
    unit_poses[static_cast<std::size_t>(i)] = Pose::identity();
  }

  // Points the anchor does not see, triangulated from the unit-scale poses.
  for (int j = 0; j < J; ++j) {
    if (cloud.valid[static_cast<std::size_t>(j)]) continue;
    std::vector<Pose> views;
    std::vector<Vec2> pixels;
    for (int i = 0; i < I; ++i) {
      if (const auto idx = tracks.find(i, j)) {
        views.push_back(*unit_poses[static_cast<std::size_t>(i)]);
        pixels.push_back(tracks.observations()[*idx].pixel);
      }
    }
    if (views.size() < 2) continue;
    const Vec3 X = dlt_triangulate(views, pixels, K);
    if (X.allFinite()) {
      cloud.points[static_cast<std::size_t>(j)] = X;
      cloud.valid[static_cast<std::size_t>(j)] = true;
    }
  }

  // Scale: choose the mean cloud depth whose implied state best explains the
  // observations through the refractive model with the gauge interface.
  const auto depths_at = [&](double scale) {
    std::vector<double> depths(static_cast<std::size_t>(J), 0.0);
    std::vector<double> known;
    for (int j = 0; j < J; ++j) {
      const auto jj = static_cast<std::size_t>(j);
      if (!cloud.valid[jj]) continue;
      int view = anchor;
      if (!tracks.observed(anchor, j)) {
        for (int i = 0; i < I; ++i) {
          if (tracks.observed(i, j)) {
            view = i;
            break;
          }
        }
      }
      const Pose scaled{unit_poses[static_cast<std::size_t>(view)]->rotation,
                        unit_poses[static_cast<std::size_t>(view)]->translation * scale};
      depths[jj] = depth_beyond_interface(tracks.at(view, j).pixel,
                                          scaled.to_camera(cloud.points[jj] * scale), K, plane);
      known.push_back(depths[jj]);
    }
    const double fill = known.empty() ? problem.gauge.depth : median(known);
    for (int j = 0; j < J; ++j) {
      if (!cloud.valid[static_cast<std::size_t>(j)]) depths[static_cast<std::size_t>(j)] = fill;
    }
    return depths;
  };
  const auto apply_scale = [&](double scale) {
    for (int i = 0; i < I; ++i) {
      const Pose& p = *unit_poses[static_cast<std::size_t>(i)];
      s.poses[static_cast<std::size_t>(i)] = Pose{p.rotation, p.translation * scale};
    }
  };
  const double scale = search_log_scale(
      [&](double m) {
        apply_scale(m);
        return anchor_energy(problem, s, anchor, depths_at(m));
      },
      options.scale_search_min * problem.gauge.depth, options.scale_search_max * problem.gauge.depth);
  apply_scale(scale);
  if (options.approximate_depth) {
    finish_points(std::vector<double>(static_cast<std::size_t>(J), *options.approximate_depth));
  } else {
    finish_points(depths_at(scale));
  }
  s.poses[static_cast<std::size_t>(anchor)] = Pose::identity();
  for (Vec3& X : cloud.points) X *= scale;
  out.cloud = std::move(cloud);
  return out;
}

ParameterState initialize(const Problem& problem, const InitializerOptions& options) {
  return initialize_detailed(problem, options).state;
}

}  // namespace uwsfm
