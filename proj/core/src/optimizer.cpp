#include "uwsfm/optimizer.hpp"

#include <cmath>
#include <limits>
#include <memory>
#include <string>

#include <ceres/ceres.h>
#include <ceres/rotation.h>

#include "uwsfm/residual_kernels.hpp"
#include "uwsfm/residuals.hpp"

namespace uwsfm {

namespace {

constexpr const char* kModule = "optimizer";

using kernels::load3;
using kernels::Status;
template <typename T>
using V3 = kernels::V3<T>;

// Right-multiplicative axis-angle update R <- R exp(dw), t <- t + dt.
struct PosePlus {
  template <typename T>
  bool operator()(const T* x, const T* delta, T* out) const {
    T q[4];
    T dq[4];
    T r[4];
    ceres::AngleAxisToQuaternion(x, q);
    ceres::AngleAxisToQuaternion(delta, dq);
    ceres::QuaternionProduct(q, dq, r);
    ceres::QuaternionToAngleAxis(r, out);
    out[3] = x[3] + delta[3];
    out[4] = x[4] + delta[4];
    out[5] = x[5] + delta[5];
    return true;
  }
};

Eigen::Matrix<double, 3, 2> tangent_basis(const Vec3& n) {
  int k = 0;
  for (int c = 1; c < 3; ++c) {
    if (std::abs(n[c]) < std::abs(n[k])) k = c;
  }
  Vec3 e = Vec3::Zero();
  e[k] = 1.0;
  const Vec3 b1 = (e - e.dot(n) * n).normalized();
  Eigen::Matrix<double, 3, 2> B;
  B.col(0) = b1;
  B.col(1) = n.cross(b1);
  return B;
}

// Unit vector updated in the tangent plane and retracted by normalization.
class UnitNormalParameterization final : public ceres::LocalParameterization {
 public:
  bool Plus(const double* x, const double* delta, double* out) const override {
    const Vec3 n(x[0], x[1], x[2]);
    const Vec3 v = n + tangent_basis(n) * Eigen::Vector2d(delta[0], delta[1]);
    const double norm = v.norm();
    if (!(norm > 0.0) || !std::isfinite(norm)) return false;
    Eigen::Map<Vec3> result(out);
    result = v / norm;
    return true;
  }
  bool ComputeJacobian(const double* x, double* jacobian) const override {
    const Eigen::Matrix<double, 3, 2> B = tangent_basis(Vec3(x[0], x[1], x[2]));
    Eigen::Map<Eigen::Matrix<double, 3, 2, Eigen::RowMajor>> J(jacobian);
    J = B;
    return true;
  }
  int GlobalSize() const override { return 3; }
  int LocalSize() const override { return 2; }
};

struct ReprojRefCost {
  Vec2 pixel_r;
  Vec2 pixel_i;
  double mu;
  kernels::Intrinsics k;

  template <typename T>
  bool operator()(const T* n_r, const T* d_r, const T* d_j, const T* pose_i, const T* n_i,
                  const T* d_i, T* e) const {
    V3<T> P;
    if (kernels::reference_point<T>(pixel_r, load3(n_r), *d_r, load3(n_r), *d_j, T(mu), k, &P) !=
        Status::Ok) {
      return false;
    }
    return kernels::reprojection_extended<T>(pose_i, load3(n_i), *d_i, P, pixel_i, T(mu), k, e) == Status::Ok;
  }

  // Static interface: one world-frame plane, equal to the reference camera's.
  template <typename T>
  bool operator()(const T* n_w, const T* d_w, const T* d_j, const T* pose_i, T* e) const {
    V3<T> P;
    if (kernels::reference_point<T>(pixel_r, load3(n_w), *d_w, load3(n_w), *d_j, T(mu), k, &P) !=
        Status::Ok) {
      return false;
    }
    V3<T> n_i;
    T d_i;
    kernels::world_plane_to_camera<T>(pose_i, load3(n_w), *d_w, &n_i, &d_i);
    return kernels::reprojection_extended<T>(pose_i, n_i, d_i, P, pixel_i, T(mu), k, e) == Status::Ok;
  }
};

struct ReprojNoRefCost {
  Vec2 pixel_i;
  double mu;
  kernels::Intrinsics k;

  template <typename T>
  bool operator()(const T* pose_i, const T* n_i, const T* d_i, const T* P, T* e) const {
    return kernels::reprojection_extended<T>(pose_i, load3(n_i), *d_i, load3(P), pixel_i, T(mu), k, e) ==
           Status::Ok;
  }
};

struct ReprojNoRefStaticCost {
  Vec2 pixel_i;
  double mu;
  kernels::Intrinsics k;

  template <typename T>
  bool operator()(const T* pose_i, const T* n_w, const T* d_w, const T* P, T* e) const {
    V3<T> n_i;
    T d_i;
    kernels::world_plane_to_camera<T>(pose_i, load3(n_w), *d_w, &n_i, &d_i);
    return kernels::reprojection_extended<T>(pose_i, n_i, d_i, load3(P), pixel_i, T(mu), k, e) == Status::Ok;
  }
};

struct RayPointCost {
  Vec2 pixel_r;
  Vec2 pixel_i;
  double mu;
  double inv_scale;
  kernels::Intrinsics k;

  template <typename T>
  bool finish(const V3<T>& P, const T* pose_i, const V3<T>& n_i, const T& d_i, const T* l_i,
              T* e) const {
    if (kernels::ray_point<T>(pose_i, n_i, d_i, load3(l_i), pixel_i, P, T(mu), k, e) != Status::Ok) {
      return false;
    }
    for (int c = 0; c < 3; ++c) e[c] *= inv_scale;
    return true;
  }

  template <typename T>
  bool operator()(const T* n_r, const T* d_r, const T* l_r, const T* d_j, const T* pose_i,
                  const T* n_i, const T* d_i, const T* l_i, T* e) const {
    V3<T> P;
    if (kernels::reference_point<T>(pixel_r, load3(n_r), *d_r, load3(l_r), *d_j, T(mu), k, &P) !=
        Status::Ok) {
      return false;
    }
    return finish(P, pose_i, load3(n_i), *d_i, l_i, e);
  }

  template <typename T>
  bool operator()(const T* n_w, const T* d_w, const T* l_r, const T* d_j, const T* pose_i,
                  const T* l_i, T* e) const {
    V3<T> P;
    if (kernels::reference_point<T>(pixel_r, load3(n_w), *d_w, load3(l_r), *d_j, T(mu), k, &P) !=
        Status::Ok) {
      return false;
    }
    V3<T> n_i;
    T d_i;
    kernels::world_plane_to_camera<T>(pose_i, load3(n_w), *d_w, &n_i, &d_i);
    return finish(P, pose_i, n_i, d_i, l_i, e);
  }
};

// sqrt(lambda) (n_m - mean) for every member m of one neighborhood. The
// Jacobian is linear: sqrt(lambda) (delta_ml - 1/N) I.
class NeighborhoodCost final : public ceres::CostFunction {
 public:
  NeighborhoodCost(int members, double lambda) : members_(members), weight_(std::sqrt(lambda)) {
    set_num_residuals(3 * members);
    for (int m = 0; m < members; ++m) mutable_parameter_block_sizes()->push_back(3);
  }

  bool Evaluate(double const* const* parameters, double* residuals,
                double** jacobians) const override {
    Vec3 mean = Vec3::Zero();
    for (int m = 0; m < members_; ++m) mean += Vec3(parameters[m][0], parameters[m][1], parameters[m][2]);
    mean /= members_;
    for (int m = 0; m < members_; ++m) {
      for (int c = 0; c < 3; ++c) residuals[3 * m + c] = weight_ * (parameters[m][c] - mean[c]);
    }
    if (jacobians == nullptr) return true;
    const int rows = 3 * members_;
    for (int l = 0; l < members_; ++l) {
      if (jacobians[l] == nullptr) continue;
      double* J = jacobians[l];
      std::fill(J, J + rows * 3, 0.0);
      for (int m = 0; m < members_; ++m) {
        const double v = weight_ * ((m == l ? 1.0 : 0.0) - 1.0 / members_);
        for (int c = 0; c < 3; ++c) J[(3 * m + c) * 3 + c] = v;
      }
    }
    return true;
  }

 private:
  int members_;
  double weight_;
};

struct BlockInfo {
  std::string type;
  int image = -1;
  int point = -1;
  ceres::CostFunction* cost = nullptr;
  std::vector<double*> parameters;
  // Trailing rows that only penalize leaving the valid region.
  int penalty_rows = 0;
};

// Ceres problem over the tied parameter blocks of a Problem.
class Assembly {
 public:
  // Observations flagged in `suspended` (indexed like tracks.observations())
  // get no data block.
  Assembly(const Problem& problem, const ParameterState& state, const SolveOptions& options,
           const std::vector<bool>* suspended = nullptr)
      : problem_(problem),
        blocks_(state, problem.scenario, problem.mode, problem.gauge.image),
        ceres_(std::make_unique<ceres::Problem>()) {
    build(state, options, suspended);
  }

  ceres::Problem& ceres() { return *ceres_; }
  TiedParameters& blocks() { return blocks_; }
  const std::vector<BlockInfo>& residuals() const { return residuals_; }
  const ceres::LocalParameterization* parameterization(double* block) const {
    return ceres_->GetParameterization(block);
  }
  int free_parameter_count() const {
    std::vector<double*> all;
    ceres_->GetParameterBlocks(&all);
    int n = 0;
    for (double* b : all) {
      if (!ceres_->IsParameterBlockConstant(b)) n += ceres_->ParameterBlockLocalSize(b);
    }
    return n;
  }
  struct Energy {
    double total = 0.0;
    double data = 0.0;
    int data_components = 0;
  };

  // Energy at the current block values; throws NumericalFailure naming the
  // first block that cannot be evaluated.
  Energy evaluate() const {
    Energy e;
    std::vector<double> r;
    for (const BlockInfo& info : residuals_) {
      r.assign(static_cast<std::size_t>(info.cost->num_residuals()), 0.0);
      bool ok = info.cost->Evaluate(info.parameters.data(), r.data(), nullptr);
      const std::size_t rows = r.size() - static_cast<std::size_t>(info.penalty_rows);
      double sq = 0.0;
      double penalty = 0.0;
      for (std::size_t c = 0; c < r.size(); ++c) (c < rows ? sq : penalty) += r[c] * r[c];
      if (!ok || !std::isfinite(sq + penalty)) {
        throw Error(ErrorCode::NumericalFailure, kModule,
                    info.type + " residual block (image " + std::to_string(info.image) + ", point " +
                        std::to_string(info.point) + ") cannot be evaluated");
      }
      e.total += sq + penalty;
      if (info.type != "regularizer") {
        e.data += sq;
        e.data_components += static_cast<int>(rows);
      }
    }
    return e;
  }

  // Observations whose point currently lies on the camera side of the
  // interface, as indices into tracks.observations().
  std::vector<std::size_t> crossing_observations() const {
    std::vector<std::size_t> out;
    std::vector<double> r;
    for (const BlockInfo& info : residuals_) {
      if (info.penalty_rows == 0) continue;
      r.assign(static_cast<std::size_t>(info.cost->num_residuals()), 0.0);
      const bool ok = info.cost->Evaluate(info.parameters.data(), r.data(), nullptr);
      bool crossing = !ok;
      for (std::size_t c = r.size() - static_cast<std::size_t>(info.penalty_rows); c < r.size(); ++c) {
        crossing = crossing || r[c] != 0.0;
      }
      if (crossing) out.push_back(*problem_.tracks.find(info.image, info.point));
    }
    return out;
  }

  bool is_free(double* block) const {
    return ceres_->HasParameterBlock(block) && !ceres_->IsParameterBlockConstant(block);
  }

 private:
  void add(BlockInfo info, ceres::LossFunction* loss) {
    ceres_->AddResidualBlock(info.cost, loss, info.parameters);
    residuals_.push_back(std::move(info));
  }

  ceres::LossFunction* data_loss(const SolveOptions& options) const {
    if (options.loss == RobustLoss::Huber) return new ceres::HuberLoss(options.huber_delta);
    return nullptr;
  }

  void build(const ParameterState& state, const SolveOptions& options, const std::vector<bool>* suspended) {
    const TrackSet& tracks = problem_.tracks;
    const kernels::Intrinsics k{problem_.intrinsics.fx, problem_.intrinsics.fy,
                                problem_.intrinsics.cx, problem_.intrinsics.cy};
    const double mu = problem_.mu.value();
    const bool shared = blocks_.interface_in_world();
    const int g = problem_.gauge.image;

    for (std::size_t o = 0; o < tracks.size(); ++o) {
      if (suspended != nullptr && (*suspended)[o]) continue;
      const Observation& obs = tracks.observations()[o];
      const int i = obs.image;
      const int j = obs.point;
      switch (problem_.mode) {
        case ConstraintMode::HardWithRef: {
          const int r = *tracks.reference();
          if (i == r) continue;
          const ReprojRefCost f{tracks.at(r, j).pixel, obs.pixel, mu, k};
          BlockInfo info{"reprojection-ref", i, j, nullptr, {}, 1};
          if (shared) {
            info.cost = new ceres::AutoDiffCostFunction<ReprojRefCost, 3, 3, 1, 1, 6>(new ReprojRefCost(f));
            info.parameters = {blocks_.interface_normal(r), blocks_.interface_depth(r),
                               blocks_.point_depth(j), blocks_.pose(i)};
          } else {
            info.cost = new ceres::AutoDiffCostFunction<ReprojRefCost, 3, 3, 1, 1, 6, 3, 1>(new ReprojRefCost(f));
            info.parameters = {blocks_.interface_normal(r), blocks_.interface_depth(r),
                               blocks_.point_depth(j),      blocks_.pose(i),
                               blocks_.interface_normal(i), blocks_.interface_depth(i)};
          }
          add(std::move(info), data_loss(options));
          break;
        }
        case ConstraintMode::HardNoRef: {
          BlockInfo info{"reprojection-noref", i, j, nullptr, {}, 1};
          if (shared) {
            info.cost = new ceres::AutoDiffCostFunction<ReprojNoRefStaticCost, 3, 6, 3, 1, 3>(
                new ReprojNoRefStaticCost{obs.pixel, mu, k});
          } else {
            info.cost = new ceres::AutoDiffCostFunction<ReprojNoRefCost, 3, 6, 3, 1, 3>(
                new ReprojNoRefCost{obs.pixel, mu, k});
          }
          info.parameters = {blocks_.pose(i), blocks_.interface_normal(i), blocks_.interface_depth(i),
                             blocks_.point(j)};
          add(std::move(info), data_loss(options));
          break;
        }
        case ConstraintMode::Soft: {
          const int r = *tracks.reference();
          if (i == r) continue;
          const RayPointCost f{tracks.at(r, j).pixel, obs.pixel, mu,
                               1.0 / state.interfaces[static_cast<std::size_t>(r)].depth, k};
          BlockInfo info{"ray-point", i, j, nullptr, {}};
          if (shared) {
            info.cost = new ceres::AutoDiffCostFunction<RayPointCost, 3, 3, 1, 3, 1, 6, 3>(new RayPointCost(f));
            info.parameters = {blocks_.interface_normal(r), blocks_.interface_depth(r),
                               blocks_.local_normal(r, j),  blocks_.point_depth(j),
                               blocks_.pose(i),             blocks_.local_normal(i, j)};
          } else {
            info.cost = new ceres::AutoDiffCostFunction<RayPointCost, 3, 3, 1, 3, 1, 6, 3, 1, 3>(
                new RayPointCost(f));
            info.parameters = {blocks_.interface_normal(r), blocks_.interface_depth(r),
                               blocks_.local_normal(r, j),  blocks_.point_depth(j),
                               blocks_.pose(i),             blocks_.interface_normal(i),
                               blocks_.interface_depth(i),  blocks_.local_normal(i, j)};
          }
          add(std::move(info), data_loss(options));
          break;
        }
      }
    }

    if (problem_.mode == ConstraintMode::Soft && problem_.lambda > 0.0) {
      const Neighborhoods groups = build_neighborhoods(tracks, problem_.neighborhood_radius_px);
      const auto& obs = tracks.observations();
      for (std::size_t c = 0; c < groups.size(); ++c) {
        if (groups[c].size() < 2) continue;
        BlockInfo info{"regularizer", obs[c].image, obs[c].point, nullptr, {}};
        info.cost = new NeighborhoodCost(static_cast<int>(groups[c].size()), problem_.lambda);
        for (std::size_t m : groups[c]) {
          info.parameters.push_back(blocks_.local_normal(obs[m].image, obs[m].point));
        }
        add(std::move(info), nullptr);
      }
    }

    // Parameterizations and the gauge.
    for (int i = 0; i < blocks_.image_count(); ++i) {
      if (double* p = blocks_.pose(i); ceres_->HasParameterBlock(p) && ceres_->GetParameterization(p) == nullptr) {
        ceres_->SetParameterization(p, new ceres::AutoDiffLocalParameterization<PosePlus, 6, 6>);
      }
      if (double* n = blocks_.interface_normal(i);
          ceres_->HasParameterBlock(n) && ceres_->GetParameterization(n) == nullptr) {
        ceres_->SetParameterization(n, new UnitNormalParameterization);
      }
    }
    if (problem_.mode == ConstraintMode::Soft) {
      for (const Observation& o : tracks.observations()) {
        double* n = blocks_.local_normal(o.image, o.point);
        if (ceres_->HasParameterBlock(n)) ceres_->SetParameterization(n, new UnitNormalParameterization);
      }
    }
    const auto hold = [this](double* block) {
      if (ceres_->HasParameterBlock(block)) ceres_->SetParameterBlockConstant(block);
    };
    // Depths stay positive; LM projects steps onto these bounds.
    const double floor = 1e-9 * problem_.gauge.depth;
    for (int j = 0; j < blocks_.point_count(); ++j) {
      if (double* d = blocks_.point_depth(j); ceres_->HasParameterBlock(d)) ceres_->SetParameterLowerBound(d, 0, floor);
    }
    for (int i = 0; i < blocks_.image_count(); ++i) {
      if (double* d = blocks_.interface_depth(i); ceres_->HasParameterBlock(d)) {
        ceres_->SetParameterLowerBound(d, 0, floor);
      }
    }
    hold(blocks_.pose(g));
    hold(blocks_.interface_depth(g));
    if (options.hold_interfaces) {
      for (int i = 0; i < blocks_.image_count(); ++i) {
        hold(blocks_.interface_normal(i));
        hold(blocks_.interface_depth(i));
      }
    }
  }

  const Problem& problem_;
  TiedParameters blocks_;
  std::unique_ptr<ceres::Problem> ceres_;
  std::vector<BlockInfo> residuals_;
};

// The gauge image gets the identity pose and the gauge depth.
ParameterState gauged(const Problem& problem, const ParameterState& state) {
  ParameterState s = state;
  s.mu = problem.mu;
  const auto g = static_cast<std::size_t>(problem.gauge.image);
  if (g >= s.poses.size() || g >= s.interfaces.size()) {
    throw Error(ErrorCode::InvalidArgument, kModule, "state has no gauge image");
  }
  s.poses[g] = Pose::identity();
  s.interfaces[g].depth = problem.gauge.depth;
  if (problem.scenario == ScenarioKind::FixedCamera) {
    for (Pose& p : s.poses) p = Pose::identity();
  }
  if (problem.scenario == ScenarioKind::StaticInterface) {
    for (std::size_t i = 0; i < s.interfaces.size(); ++i) {
      s.interfaces[i] = world_plane_to_camera(s.interfaces[g], s.poses[i]);
    }
    s.interfaces[g].depth = problem.gauge.depth;
  }
  return s;
}

void require_finite(const ParameterState& s) {
  const auto fail = [](const std::string& what) {
    throw Error(ErrorCode::NumericalFailure, kModule, "non-finite value in " + what);
  };
  for (std::size_t i = 0; i < s.poses.size(); ++i) {
    if (!s.poses[i].rotation.allFinite() || !s.poses[i].translation.allFinite()) fail("pose " + std::to_string(i));
    if (!s.interfaces[i].normal.vec().allFinite() || !std::isfinite(s.interfaces[i].depth)) {
      fail("interface " + std::to_string(i));
    }
  }
  for (std::size_t j = 0; j < s.point_depths.size(); ++j) {
    if (!std::isfinite(s.point_depths[j])) fail("point depth " + std::to_string(j));
  }
  for (std::size_t j = 0; j < s.points.size(); ++j) {
    if (!s.points[j].allFinite()) fail("point " + std::to_string(j));
  }
}

double rms(const Assembly::Energy& e) {
  return e.data_components > 0 ? std::sqrt(e.data / static_cast<double>(e.data_components)) : 0.0;
}

// Per-component residual RMS below which further steps only chase rounding.
constexpr double kResidualFloor = 1e-12;

class TraceCallback final : public ceres::IterationCallback {
 public:
  TraceCallback(SolveReport* report, double energy_floor) : report_(report), energy_floor_(energy_floor) {}
  ceres::CallbackReturnType operator()(const ceres::IterationSummary& summary) override {
    if (summary.iteration == 0) {
      report_->energy_trace.push_back(2.0 * summary.cost);
    } else if (summary.step_is_successful) {
      report_->energy_trace.push_back(2.0 * summary.cost);
      report_->step_norms.push_back(summary.step_norm);
    }
    if (2.0 * summary.cost <= energy_floor_) {
      floor_reached_ = true;
      return ceres::SOLVER_TERMINATE_SUCCESSFULLY;
    }
    return ceres::SOLVER_CONTINUE;
  }
  bool floor_reached() const { return floor_reached_; }

 private:
  SolveReport* report_;
  double energy_floor_;
  bool floor_reached_ = false;
};

std::string termination_name(ceres::TerminationType t) {
  switch (t) {
    case ceres::CONVERGENCE: return "convergence";
    case ceres::NO_CONVERGENCE: return "no_convergence";
    case ceres::FAILURE: return "failure";
    case ceres::USER_SUCCESS: return "user_success";
    case ceres::USER_FAILURE: return "user_failure";
  }
  return "unknown";
}

// One Levenberg-Marquardt run over the assembly's blocks. Appends to the
// report's trace and iteration count.
void run_lm(const Problem& problem, const SolveOptions& options, Assembly& assembly, SolveReport& report) {
  ceres::Solver::Options so;
  so.minimizer_type = ceres::TRUST_REGION;
  so.trust_region_strategy_type = ceres::LEVENBERG_MARQUARDT;
  so.initial_trust_region_radius = 1.0 / options.initial_damping;
  so.max_num_iterations = options.max_iterations;
  so.function_tolerance = options.function_tolerance;
  so.gradient_tolerance = options.gradient_tolerance;
  so.parameter_tolerance = options.parameter_tolerance;
  so.use_nonmonotonic_steps = false;
  so.num_threads = options.threads;
  so.linear_solver_type =
      problem.mode == ConstraintMode::Soft ? ceres::SPARSE_NORMAL_CHOLESKY : ceres::DENSE_SCHUR;
  so.logging_type = options.verbose ? ceres::PER_MINIMIZER_ITERATION : ceres::SILENT;
  so.minimizer_progress_to_stdout = options.verbose;
  const double components = static_cast<double>(assembly.ceres().NumResiduals());
  TraceCallback trace(&report, kResidualFloor * kResidualFloor * components);
  so.callbacks.push_back(&trace);

  ceres::Solver::Summary summary;
  ceres::Solve(so, &assembly.ceres(), &summary);
  report.termination = trace.floor_reached() ? "residual_floor" : termination_name(summary.termination_type);
  report.converged = summary.termination_type == ceres::CONVERGENCE || trace.floor_reached();
  report.iterations += summary.iterations.empty() ? 0 : static_cast<int>(summary.iterations.size()) - 1;
}

}  // namespace

void SolveOptions::validate() const {
  const auto bad = [](const std::string& what) {
    throw Error(ErrorCode::ConfigError, kModule, what);
  };
  if (max_iterations < 1) bad("max_iterations must be at least 1");
  if (!(function_tolerance > 0.0)) bad("function_tolerance must be positive");
  if (!(gradient_tolerance > 0.0)) bad("gradient_tolerance must be positive");
  if (!(parameter_tolerance > 0.0)) bad("parameter_tolerance must be positive");
  if (!(initial_damping > 0.0)) bad("initial_damping must be positive");
  if (loss == RobustLoss::Huber && !(huber_delta > 0.0)) bad("huber_delta must be positive");
  if (threads < 1) bad("threads must be at least 1");
  if (max_restarts < 0) bad("max_restarts must be non-negative");
}

SolveResult solve(const Problem& problem, const ParameterState& initial, const SolveOptions& options) {
  options.validate();
  problem.validate();
  SolveResult result;
  result.state = gauged(problem, initial);
  result.state.validate(problem.tracks, problem.mode);
  require_finite(result.state);

  SolveReport& report = result.report;
  auto full = std::make_unique<Assembly>(problem, result.state, options);
  report.free_parameters = full->free_parameter_count();
  const Assembly::Energy before = full->evaluate();
  ParameterState start = result.state;
  full->blocks().write_back(start);
  report.initial_energy = before.total;
  report.residual_components = before.data_components;
  report.initial_residual_rms = rms(before);

  run_lm(problem, options, *full, report);
  full->blocks().write_back(result.state);
  Assembly::Energy best = full->evaluate();

  // An observation whose point ends up on the camera side of its interface
  // pins LM at a spurious minimum. Solve once without such observations,
  // then once more with all of them, and keep the result if it is better.
  for (int pass = 0; pass < options.max_restarts; ++pass) {
    const std::vector<std::size_t> crossing = full->crossing_observations();
    if (crossing.empty()) break;
    std::vector<bool> suspended(problem.tracks.size(), false);
    for (std::size_t o : crossing) suspended[o] = true;
    ParameterState candidate = result.state;
    SolveReport scratch;
    try {
      Assembly partial(problem, candidate, options, &suspended);
      run_lm(problem, options, partial, scratch);
      partial.blocks().write_back(candidate);
      auto retry = std::make_unique<Assembly>(problem, candidate, options);
      retry->evaluate();
      SolveReport retry_report;
      run_lm(problem, options, *retry, retry_report);
      const Assembly::Energy energy = retry->evaluate();
      report.iterations += scratch.iterations + retry_report.iterations;
      ++report.restarts;
      if (!(energy.total < best.total)) break;
      retry->blocks().write_back(result.state);
      report.energy_trace = std::move(retry_report.energy_trace);
      report.step_norms = std::move(retry_report.step_norms);
      report.termination = retry_report.termination;
      report.converged = retry_report.converged;
      best = energy;
      full = std::move(retry);
    } catch (const Error&) {
      break;
    }
  }

  // Steps accepted on rounding noise can end marginally above the start.
  if (best.total > before.total) {
    result.state = std::move(start);
    best = before;
    report.energy_trace = {before.total};
    report.step_norms.clear();
  }
  result.state.mu = problem.mu;
  report.final_energy = best.total;
  report.final_residual_rms = rms(best);
  return result;
}

Reconstruction reconstruct(const Problem& problem, const InitializerOptions& init_options,
                           const SolveOptions& options) {
  Reconstruction out;
  if (problem.mode != ConstraintMode::Soft) {
    out.initial = initialize_detailed(problem, init_options);
    out.result = solve(problem, out.initial.state, options);
    return out;
  }
  Problem hard = problem;
  hard.mode = ConstraintMode::HardWithRef;
  out.initial = initialize_detailed(hard, init_options);
  out.warm_start = solve(hard, out.initial.state, options);
  ParameterState start = out.warm_start->state;
  start.local_normals.assign(start.poses.size(), {});
  for (std::size_t i = 0; i < start.poses.size(); ++i) {
    start.local_normals[i].assign(static_cast<std::size_t>(problem.tracks.point_count()),
                                  start.interfaces[i].normal);
  }
  out.result = solve(problem, start, options);
  return out;
}

GradientCheckResult check_gradients(const Problem& problem, const ParameterState& state,
                                    double relative_step) {
  const ParameterState s = gauged(problem, state);
  require_finite(s);
  Assembly assembly(problem, s, SolveOptions{});
  GradientCheckResult out;

  for (const BlockInfo& info : assembly.residuals()) {
    const int m = info.cost->num_residuals();
    const auto& sizes = info.cost->parameter_block_sizes();
    const std::size_t nb = info.parameters.size();
    std::vector<std::vector<double>> values(nb);
    for (std::size_t b = 0; b < nb; ++b) {
      values[b].assign(info.parameters[b], info.parameters[b] + sizes[b]);
    }
    const auto evaluate = [&](std::vector<std::vector<double>>& vals, double* residuals,
                              std::vector<std::vector<double>>* jac) {
      std::vector<const double*> ptrs(nb);
      for (std::size_t b = 0; b < nb; ++b) ptrs[b] = vals[b].data();
      std::vector<double*> jptrs;
      if (jac) {
        jac->resize(nb);
        for (std::size_t b = 0; b < nb; ++b) {
          (*jac)[b].assign(static_cast<std::size_t>(m * sizes[b]), 0.0);
          jptrs.push_back((*jac)[b].data());
        }
      }
      return info.cost->Evaluate(ptrs.data(), residuals, jac ? jptrs.data() : nullptr);
    };

    std::vector<double> r0(static_cast<std::size_t>(m));
    std::vector<std::vector<double>> jac;
    double err = 0.0;
    if (!evaluate(values, r0.data(), &jac)) {
      err = std::numeric_limits<double>::infinity();
    } else {
      double diff2 = 0.0;
      double norm2 = 0.0;
      for (std::size_t b = 0; b < nb && std::isfinite(err); ++b) {
        double* block = info.parameters[b];
        if (!assembly.is_free(block)) continue;
        const int g = sizes[b];
        const ceres::LocalParameterization* lp = assembly.parameterization(block);
        const int l = lp ? lp->LocalSize() : g;
        Eigen::MatrixXd L = Eigen::MatrixXd::Identity(g, l);
        if (lp) {
          Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> Lr(g, l);
          lp->ComputeJacobian(values[b].data(), Lr.data());
          L = Lr;
        }
        const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> Ja(
            jac[b].data(), m, g);
        const Eigen::MatrixXd J = Ja * L;
        double scale = 1.0;
        for (double v : values[b]) scale = std::max(scale, std::abs(v));
        const double h = relative_step * scale;
        Eigen::MatrixXd Jfd(m, l);
        for (int c = 0; c < l && std::isfinite(err); ++c) {
          std::vector<double> delta(static_cast<std::size_t>(l), 0.0);
          std::vector<double> rp(static_cast<std::size_t>(m));
          std::vector<double> rm(static_cast<std::size_t>(m));
          auto vp = values;
          auto vm = values;
          delta[static_cast<std::size_t>(c)] = h;
          bool ok = lp ? lp->Plus(values[b].data(), delta.data(), vp[b].data())
                       : (vp[b][static_cast<std::size_t>(c)] += h, true);
          delta[static_cast<std::size_t>(c)] = -h;
          ok = ok && (lp ? lp->Plus(values[b].data(), delta.data(), vm[b].data())
                         : (vm[b][static_cast<std::size_t>(c)] -= h, true));
          ok = ok && evaluate(vp, rp.data(), nullptr) && evaluate(vm, rm.data(), nullptr);
          if (!ok) {
            err = std::numeric_limits<double>::infinity();
            break;
          }
          for (int row = 0; row < m; ++row) {
            Jfd(row, c) = (rp[static_cast<std::size_t>(row)] - rm[static_cast<std::size_t>(row)]) / (2.0 * h);
          }
        }
        diff2 += (J - Jfd).squaredNorm();
        norm2 += J.squaredNorm();
      }
      if (std::isfinite(err)) {
        const double norm = std::sqrt(norm2);
        err = norm < 1e-8 ? std::sqrt(diff2) : std::sqrt(diff2) / norm;
      }
    }
    ++out.residual_blocks;
    double& type_max = out.max_error_by_type[info.type];
    if (!(err <= type_max)) type_max = err;
    if (!(err <= out.max_relative_error)) {
      out.max_relative_error = err;
      out.worst_block = info.type + " image=" + std::to_string(info.image) + " point=" + std::to_string(info.point);
    }
  }
  return out;
}

}  // namespace uwsfm
