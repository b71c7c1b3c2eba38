#pragma once

#include <cstdint>

#include "uwsfm/config.hpp"
#include "uwsfm/evaluation.hpp"
#include "uwsfm/io.hpp"
#include "uwsfm/optimizer.hpp"
#include "uwsfm/simulator.hpp"

namespace uwsfm {

/// simulate -> solve -> eval, driven by a RunConfig. Shared by the CLI, the
/// acceptance suite and the benchmarks.

struct SimulatedRun {
  SceneTruth scene;
  RenderedTracks rendered;
  /// Rendered tracks with config.noise_px of pixel noise.
  TrackFile tracks;
};

/// Scene from seeds.simulation, noise from seeds.noise.
SimulatedRun simulate_run(const RunConfig& config);

Problem make_problem(const RunConfig& config, const TrackFile& tracks);
InitializerOptions initializer_options(const RunConfig& config);

struct SolvedRun {
  Problem problem;
  Reconstruction reconstruction;
  Solution solution;
};

SolvedRun solve_run(const RunConfig& config, const TrackFile& tracks);

EvaluationReport evaluate_solution(const TrackFile& tracks, const Solution& solution, const SceneTruth& truth);

}  // namespace uwsfm
