#include <benchmark/benchmark.h>

#include "uwsfm/geometry.hpp"
#include "uwsfm/initializer.hpp"
#include "uwsfm/optimizer.hpp"
#include "uwsfm/pipeline.hpp"
#include "uwsfm/residuals.hpp"

using namespace uwsfm;

namespace {

const CameraIntrinsics kK{800.0, 800.0, 320.0, 240.0};
const InterfacePlane kPlane = InterfacePlane::canonical(Vec3(0.1, -0.2, 1.0), 1.0);
const RefractiveIndex kMu{1.333};

void BM_BackProject(benchmark::State& state) {
  const Vec2 pixel(400.0, 180.0);
  for (auto _ : state) benchmark::DoNotOptimize(back_project(pixel, 1.3, kPlane, kPlane.normal, kMu, kK));
}
BENCHMARK(BM_BackProject);

void BM_ForwardProjectFlat(benchmark::State& state) {
  const Vec3 X = back_project(Vec2(400.0, 180.0), 1.3, kPlane, kPlane.normal, kMu, kK);
  for (auto _ : state) benchmark::DoNotOptimize(forward_project_flat(X, kPlane, kMu, kK));
}
BENCHMARK(BM_ForwardProjectFlat);

RunConfig scene_config(ScenarioKind scenario, int images, int points) {
  RunConfig c;
  c.scenario = scenario;
  c.simulation.image_count = images;
  c.simulation.point_count = points;
  c.seeds.simulation = 3;
  return c;
}

void BM_Energy(benchmark::State& state) {
  const RunConfig c = scene_config(ScenarioKind::MovingInterface, 10, 30);
  const SimulatedRun sim = simulate_run(c);
  const Problem p = make_problem(c, sim.tracks);
  const ParameterState truth = truth_state(sim.scene, sim.rendered, p.mode);
  for (auto _ : state) benchmark::DoNotOptimize(total_energy(p.context(), truth, p.mode));
}
BENCHMARK(BM_Energy);

void BM_Initialize(benchmark::State& state) {
  const RunConfig c = scene_config(ScenarioKind::MovingInterface, 10, 30);
  const SimulatedRun sim = simulate_run(c);
  const Problem p = make_problem(c, sim.tracks);
  for (auto _ : state) benchmark::DoNotOptimize(initialize(p));
}
BENCHMARK(BM_Initialize)->Unit(benchmark::kMillisecond);

void BM_Reconstruct(benchmark::State& state) {
  const auto scenario = static_cast<ScenarioKind>(state.range(0));
  const RunConfig c = scene_config(scenario, 10, 30);
  const SimulatedRun sim = simulate_run(c);
  for (auto _ : state) benchmark::DoNotOptimize(solve_run(c, sim.tracks));
  state.SetLabel(std::string(to_string(scenario)));
}
BENCHMARK(BM_Reconstruct)
    ->Arg(static_cast<int>(ScenarioKind::MovingInterface))
    ->Arg(static_cast<int>(ScenarioKind::StaticInterface))
    ->Arg(static_cast<int>(ScenarioKind::FixedCamera))
    ->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
