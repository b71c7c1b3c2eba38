#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "uwsfm/initializer.hpp"
#include "uwsfm/scenarios.hpp"
#include "uwsfm/state.hpp"

namespace uwsfm {

enum class RobustLoss { None, Huber };

struct SolveOptions {
  int max_iterations = 200;
  double function_tolerance = 1e-12;
  double gradient_tolerance = 1e-10;
  double parameter_tolerance = 1e-14;
  /// Initial Levenberg-Marquardt damping; the trust region starts at 1/damping.
  double initial_damping = 1e-4;
  RobustLoss loss = RobustLoss::None;
  /// Huber threshold in residual units (pixels for reprojection terms).
  double huber_delta = 2.0;
  int threads = 1;
  bool verbose = false;
  /// Keep every interface normal and depth at its initial value.
  bool hold_interfaces = false;
  /// Extra solves allowed when observations end on the camera side of their
  /// interface (see solve()).
  int max_restarts = 3;

  /// Throws ConfigError on non-positive tolerances or iteration counts.
  void validate() const;
};

struct SolveReport {
  double initial_energy = 0.0;
  double final_energy = 0.0;
  int iterations = 0;
  std::string termination;
  bool converged = false;
  /// Energy after every accepted step of the retained solve, starting with
  /// that solve's initial energy.
  std::vector<double> energy_trace;
  /// Norm of every accepted parameter update, in tangent coordinates.
  std::vector<double> step_norms;
  /// sqrt(data energy / residual components) at the start and end.
  double initial_residual_rms = 0.0;
  double final_residual_rms = 0.0;
  std::size_t residual_components = 0;
  int free_parameters = 0;
  /// Restart passes run (see solve()).
  int restarts = 0;
};

struct SolveResult {
  ParameterState state;
  SolveReport report;
};

/// Joint Levenberg-Marquardt over every free block. The gauge image keeps the
/// identity pose and the gauge interface depth exactly; depths stay positive.
///
/// Inside the solver a point on the camera side of an interface is projected
/// without refraction plus a penalty row, so LM can cross the plane instead of
/// stalling on it. If the result still has such observations, LM is rerun
/// without them and then with everything (up to max_restarts times); a
/// restart is kept only when it lowers the energy.
///
/// Throws NumericalFailure when a residual cannot be evaluated at `initial`,
/// naming the offending observation.
SolveResult solve(const Problem& problem, const ParameterState& initial,
                  const SolveOptions& options = {});

struct Reconstruction {
  /// Initializer output, before any solve.
  Initialization initial;
  /// Hard-ref pre-solve used to start soft mode.
  std::optional<SolveResult> warm_start;
  SolveResult result;
};

/// initialize() followed by solve(). Soft mode first solves the same tracks
/// with the hard-ref formulation and starts from that result with every
/// local normal equal to its plane normal.
Reconstruction reconstruct(const Problem& problem, const InitializerOptions& init_options = {},
                           const SolveOptions& options = {});

struct GradientCheckResult {
  double max_relative_error = 0.0;
  /// "<residual type> image=<i> point=<j>" of the worst block.
  std::string worst_block;
  int residual_blocks = 0;
  /// Largest error per residual type ("reprojection-ref", "reprojection-noref",
  /// "ray-point", "regularizer").
  std::map<std::string, double> max_error_by_type;
};

/// Compares the autodiff Jacobians of every residual block, in the tangent
/// coordinates the solver uses, against central finite differences taken
/// through the same local parameterizations. The error of a block is
/// ||J - J_fd||_F / ||J||_F, or the absolute Frobenius difference when
/// ||J||_F < 1e-8.
GradientCheckResult check_gradients(const Problem& problem, const ParameterState& state,
                                    double relative_step = 1e-6);

}  // namespace uwsfm
