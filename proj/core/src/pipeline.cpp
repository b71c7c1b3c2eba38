#include "uwsfm/pipeline.hpp"

#include <utility>

namespace uwsfm {

SimulatedRun simulate_run(const RunConfig& config) {
  SimulationConfig sim = config.simulation;
  sim.scenario = config.scenario;
  SimulatedRun out;
  out.scene = generate_scene(sim, config.seeds.simulation);
  out.rendered = render_observations(out.scene);
  out.tracks.tracks = config.noise_px > 0.0 ? perturb(out.rendered.tracks, config.noise_px, config.seeds.noise)
                                            : out.rendered.tracks;
  out.tracks.intrinsics = out.scene.intrinsics;
  out.tracks.mu = out.scene.mu;
  return out;
}

Problem make_problem(const RunConfig& config, const TrackFile& tracks) {
  Problem p = Problem::make(tracks.tracks, tracks.intrinsics, config.scenario, config.mode, tracks.mu);
  p.lambda = config.lambda;
  p.neighborhood_radius_px = config.neighborhood_radius_px;
  p.gauge.depth = config.gauge_depth;
  p.allow_underdetermined = config.allow_underdetermined;
  return p;
}

InitializerOptions initializer_options(const RunConfig& config) {
  InitializerOptions o;
  o.approximate_depth = config.approximate_depth;
  o.ransac_seed = config.seeds.ransac;
  return o;
}

SolvedRun solve_run(const RunConfig& config, const TrackFile& tracks) {
  SolvedRun out;
  out.problem = make_problem(config, tracks);
  out.problem.validate();
  out.reconstruction = reconstruct(out.problem, initializer_options(config), config.solver);

  // The soft initializer state carries no local normals; read it as hard-ref.
  Problem init_problem = out.problem;
  if (init_problem.mode == ConstraintMode::Soft) init_problem.mode = ConstraintMode::HardWithRef;

  Solution& s = out.solution;
  s.scenario = out.problem.scenario;
  s.mode = out.problem.mode;
  s.reference = out.problem.tracks.reference();
  s.state = out.reconstruction.result.state;
  s.points = world_points(out.problem, s.state);
  s.initial_points = world_points(init_problem, out.reconstruction.initial.state);
  return out;
}

EvaluationReport evaluate_solution(const TrackFile& tracks, const Solution& solution, const SceneTruth& truth) {
  return evaluate_run(tracks.tracks, tracks.intrinsics, solution, truth);
}

}  // namespace uwsfm
