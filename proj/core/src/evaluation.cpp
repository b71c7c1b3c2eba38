#include "uwsfm/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Geometry>
#include <Eigen/SVD>

#include "uwsfm/io.hpp"
#include "uwsfm/residuals.hpp"

namespace uwsfm {

namespace {
constexpr const char* kModule = "evaluation";
}

AlignmentResult align_similarity(const std::vector<Vec3>& estimated, const std::vector<Vec3>& truth) {
  if (estimated.size() != truth.size()) {
    throw Error(ErrorCode::InvalidArgument, kModule, "point sets differ in size");
  }
  const auto n = static_cast<Eigen::Index>(estimated.size());
  if (n < 3) throw Error(ErrorCode::DegenerateConfiguration, kModule, "at least three points are needed");
  Eigen::Matrix3Xd src(3, n);
  Eigen::Matrix3Xd dst(3, n);
  for (Eigen::Index c = 0; c < n; ++c) {
    src.col(c) = estimated[static_cast<std::size_t>(c)];
    dst.col(c) = truth[static_cast<std::size_t>(c)];
  }
  for (const Eigen::Matrix3Xd* m : {&src, &dst}) {
    const Eigen::Matrix3Xd centered = m->colwise() - m->rowwise().mean();
    const Eigen::Vector3d sv = Eigen::JacobiSVD<Eigen::Matrix3d>(centered * centered.transpose()).singularValues();
    if (!(sv(0) > 0.0) || sv(1) <= 1e-20 * sv(0)) {
      throw Error(ErrorCode::DegenerateConfiguration, kModule, "points are coincident or collinear");
    }
  }
  const Eigen::Matrix4d T = Eigen::umeyama(src, dst, true);
  AlignmentResult out;
  const Mat3 sR = T.topLeftCorner<3, 3>();
  out.scale = std::cbrt(sR.determinant());
  out.rotation = sR / out.scale;
  out.translation = T.topRightCorner<3, 1>();
  out.rmse = alignment_rmse(out, estimated, truth);
  out.residuals.reserve(estimated.size());
  for (std::size_t k = 0; k < estimated.size(); ++k) {
    out.residuals.push_back((out.apply(estimated[k]) - truth[k]).norm());
  }
  return out;
}

double alignment_rmse(const AlignmentResult& transform, const std::vector<Vec3>& estimated,
                      const std::vector<Vec3>& truth) {
  std::vector<double> sq;
  sq.reserve(estimated.size());
  for (std::size_t k = 0; k < estimated.size(); ++k) {
    sq.push_back((transform.apply(estimated[k]) - truth[k]).squaredNorm());
  }
  return sq.empty() ? 0.0 : std::sqrt(pairwise_sum(sq) / static_cast<double>(sq.size()));
}

double scene_scale(const std::vector<Vec3>& points) {
  if (points.empty()) return 0.0;
  Vec3 c = Vec3::Zero();
  for (const Vec3& p : points) c += p;
  c /= static_cast<double>(points.size());
  std::vector<double> sq;
  for (const Vec3& p : points) sq.push_back((p - c).squaredNorm());
  return std::sqrt(pairwise_sum(sq) / static_cast<double>(points.size()));
}

std::vector<Vec3> world_points(const Problem& problem, const ParameterState& state) {
  if (problem.mode == ConstraintMode::HardNoRef) return state.points;
  const ResidualContext ctx = problem.context();
  std::vector<Vec3> out;
  out.reserve(static_cast<std::size_t>(problem.tracks.point_count()));
  for (int j = 0; j < problem.tracks.point_count(); ++j) out.push_back(reference_point(ctx, state, j));
  return out;
}

EvaluationReport evaluate_run(const TrackSet& tracks, const CameraIntrinsics& intrinsics,
                              const Solution& solution, const SceneTruth& truth) {
  if (solution.points.size() != truth.points.size()) {
    throw Error(ErrorCode::InvalidArgument, kModule, "solution and truth differ in point count");
  }
  if (solution.state.poses.size() != truth.poses.size() ||
      solution.state.interfaces.size() != truth.interfaces.size()) {
    throw Error(ErrorCode::InvalidArgument, kModule, "solution and truth differ in image count");
  }
  EvaluationReport r;
  r.image_count = truth.image_count();
  r.point_count = truth.point_count();
  r.scene_scale = scene_scale(truth.points);
  const AlignmentResult align = align_similarity(solution.points, truth.points);
  r.final_rmse = align.rmse;
  r.relative_rmse = r.scene_scale > 0.0 ? r.final_rmse / r.scene_scale : 0.0;
  r.alignment_scale = align.scale;
  if (solution.initial_points.size() == truth.points.size()) {
    r.initial_rmse = align_similarity(solution.initial_points, truth.points).rmse;
  }

  const int rows = solution.scenario == ScenarioKind::StaticInterface ? 1 : r.image_count;
  const int first = solution.scenario == ScenarioKind::StaticInterface ? solution.reference.value_or(0) : 0;
  for (int row = 0; row < rows; ++row) {
    const int i = rows == 1 ? first : row;
    const auto ii = static_cast<std::size_t>(i);
    const InterfacePlane est = camera_plane_to_world(solution.state.interfaces[ii], solution.state.poses[ii]);
    const InterfacePlane tru = camera_plane_to_world(truth.interfaces[ii], truth.poses[ii]);
    const Vec3 n_est = align.rotation * est.normal.vec();
    const double c = std::clamp(n_est.normalized().dot(tru.normal.vec()), -1.0, 1.0);
    const double s = n_est.normalized().cross(tru.normal.vec()).norm();
    InterfaceError e;
    e.image = i;
    e.normal_angle_rad = std::atan2(s, c);
    const double d_true = truth.interfaces[ii].depth;
    e.depth_relative_error = std::abs(align.scale * solution.state.interfaces[ii].depth - d_true) / d_true;
    r.max_normal_error_rad = std::max(r.max_normal_error_rad, e.normal_angle_rad);
    r.max_depth_relative_error = std::max(r.max_depth_relative_error, e.depth_relative_error);
    r.interfaces.push_back(e);
  }

  std::vector<std::vector<double>> sq(static_cast<std::size_t>(r.image_count));
  for (const Observation& obs : tracks.observations()) {
    const auto i = static_cast<std::size_t>(obs.image);
    double e2 = std::numeric_limits<double>::infinity();
    try {
      const Vec3 X = solution.state.poses[i].to_camera(solution.points[static_cast<std::size_t>(obs.point)]);
      e2 = (forward_project_flat(X, solution.state.interfaces[i], solution.state.mu, intrinsics) - obs.pixel)
               .squaredNorm();
    } catch (const Error&) {
    }
    sq[i].push_back(e2);
  }
  for (const auto& v : sq) {
    r.reprojection_rms.push_back(v.empty() ? 0.0 : std::sqrt(pairwise_sum(v) / static_cast<double>(v.size())));
  }
  return r;
}

std::string format_report(const EvaluationReport& r) {
  std::ostringstream os;
  os << "images=" << r.image_count << '\n';
  os << "points=" << r.point_count << '\n';
  os << "scene_scale=" << format_number(r.scene_scale) << '\n';
  if (r.initial_rmse) os << "initial_rmse=" << format_number(*r.initial_rmse) << '\n';
  os << "final_rmse=" << format_number(r.final_rmse) << '\n';
  os << "relative_rmse=" << format_number(r.relative_rmse) << '\n';
  os << "alignment_scale=" << format_number(r.alignment_scale) << '\n';
  os << "max_normal_error_rad=" << format_number(r.max_normal_error_rad) << '\n';
  os << "max_depth_relative_error=" << format_number(r.max_depth_relative_error) << '\n';
  for (const InterfaceError& e : r.interfaces) {
    os << "interface." << e.image << ".normal_error_rad=" << format_number(e.normal_angle_rad) << '\n';
    os << "interface." << e.image << ".depth_relative_error=" << format_number(e.depth_relative_error) << '\n';
  }
  for (std::size_t i = 0; i < r.reprojection_rms.size(); ++i) {
    os << "image." << i << ".reprojection_rms_px=" << format_number(r.reprojection_rms[i]) << '\n';
  }
  return os.str();
}

}  // namespace uwsfm
