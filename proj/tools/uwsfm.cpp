#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "uwsfm/config.hpp"
#include "uwsfm/error.hpp"
#include "uwsfm/io.hpp"
#include "uwsfm/pipeline.hpp"
#include "uwsfm/residuals.hpp"

namespace fs = std::filesystem;
using namespace uwsfm;

namespace {

constexpr const char* kModule = "cli_io";

// Flags that mirror RunConfig fields. Defaults < config file < flags, so an
// option is applied only when it was given on the command line.
struct ConfigFlags {
  std::string config_path;
  std::string scenario;
  std::string mode;
  double lambda = 0.0;
  double radius = 0.0;
  double gauge_depth = 0.0;
  bool allow_underdetermined = false;
  double approximate_depth = 0.0;
  double noise = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t noise_seed = 0;
  std::uint64_t ransac_seed = 0;
  int max_iterations = 0;
  std::string loss;
  double huber_delta = 0.0;
  int images = 0;
  int points = 0;
  int wave_count = 0;
  double wave_tilt = 0.0;
  double wavelength_min = 0.0;
  double wavelength_max = 0.0;
  double drop_fraction = 0.0;
  bool verbose = false;

  std::vector<std::pair<CLI::Option*, std::function<void(RunConfig&)>>> setters;

  template <typename T>
  void add(CLI::App& app, const std::string& name, T& field, const std::string& help,
           std::function<void(RunConfig&)> apply) {
    setters.emplace_back(app.add_option(name, field, help), std::move(apply));
  }

  void attach(CLI::App& app, bool simulation) {
    app.add_option("-c,--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
    add(app, "--scenario", scenario, "moving-interface | static-interface | fixed-camera",
        [this](RunConfig& c) { c.scenario = parse_scenario(scenario); });
    add(app, "--mode", mode, "hard-ref | hard-noref | soft", [this](RunConfig& c) { c.mode = parse_mode(mode); });
    add(app, "--lambda", lambda, "soft-mode regularizer weight", [this](RunConfig& c) { c.lambda = lambda; });
    add(app, "--radius", radius, "soft-mode neighborhood radius in pixels",
        [this](RunConfig& c) { c.neighborhood_radius_px = radius; });
    add(app, "--gauge-depth", gauge_depth, "interface depth of the gauge image",
        [this](RunConfig& c) { c.gauge_depth = gauge_depth; });
    add(app, "--approximate-depth", approximate_depth, "known point depth beyond the interface",
        [this](RunConfig& c) { c.approximate_depth = approximate_depth; });
    add(app, "--ransac-seed", ransac_seed, "essential-matrix RANSAC seed",
        [this](RunConfig& c) { c.seeds.ransac = ransac_seed; });
    add(app, "--max-iterations", max_iterations, "Levenberg-Marquardt iteration limit",
        [this](RunConfig& c) { c.solver.max_iterations = max_iterations; });
    add(app, "--loss", loss, "none | huber", [this](RunConfig& c) {
      if (loss == "none") {
        c.solver.loss = RobustLoss::None;
      } else if (loss == "huber") {
        c.solver.loss = RobustLoss::Huber;
      } else {
        throw Error(ErrorCode::ConfigError, kModule, "--loss must be none or huber");
      }
    });
    add(app, "--huber-delta", huber_delta, "Huber threshold", [this](RunConfig& c) { c.solver.huber_delta = huber_delta; });
    setters.emplace_back(app.add_flag("--allow-underdetermined", allow_underdetermined,
                                      "solve even when the unknowns outnumber the constraints"),
                         [](RunConfig& c) { c.allow_underdetermined = true; });
    setters.emplace_back(app.add_flag("-v,--verbose", verbose, "print solver progress to stderr"),
                         [](RunConfig& c) { c.solver.verbose = true; });
    if (!simulation) return;
    add(app, "--seed", seed, "scene seed", [this](RunConfig& c) { c.seeds.simulation = seed; });
    add(app, "--noise", noise, "pixel noise sigma", [this](RunConfig& c) { c.noise_px = noise; });
    add(app, "--noise-seed", noise_seed, "pixel noise seed", [this](RunConfig& c) { c.seeds.noise = noise_seed; });
    add(app, "--images", images, "image count", [this](RunConfig& c) { c.simulation.image_count = images; });
    add(app, "--points", points, "point count", [this](RunConfig& c) { c.simulation.point_count = points; });
    add(app, "--wave-count", wave_count, "sinusoids per interface (0-3)",
        [this](RunConfig& c) { c.simulation.wave_count = wave_count; });
    add(app, "--wave-tilt", wave_tilt, "maximum wave slope in degrees",
        [this](RunConfig& c) { c.simulation.wave_max_tilt_deg = wave_tilt; });
    add(app, "--wavelength-min", wavelength_min, "shortest wavelength",
        [this](RunConfig& c) { c.simulation.wavelength_min = wavelength_min; });
    add(app, "--wavelength-max", wavelength_max, "longest wavelength",
        [this](RunConfig& c) { c.simulation.wavelength_max = wavelength_max; });
    add(app, "--drop-fraction", drop_fraction, "fraction of observations dropped",
        [this](RunConfig& c) { c.simulation.drop_fraction = drop_fraction; });
  }

  RunConfig resolve() const {
    RunConfig c = config_path.empty() ? RunConfig{} : parse_run_config(read_file(config_path));
    for (const auto& [option, apply] : setters) {
      if (option->count() > 0) apply(c);
    }
    c.simulation.scenario = c.scenario;
    c.validate();
    return c;
  }
};

void write_into(const fs::path& dir, const std::string& name, const std::string& content) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoError, kModule, "cannot create " + dir.string() + ": " + ec.message());
  write_file(dir / name, content);
}

void emit(const std::string& out_path, const std::string& content) {
  if (out_path.empty()) {
    std::cout << content;
  } else {
    write_file(out_path, content);
  }
}

void write_simulation(const fs::path& dir, const RunConfig& config, const SimulatedRun& run) {
  write_into(dir, "tracks.txt", serialize_tracks(run.tracks));
  write_into(dir, "truth.txt", serialize_truth(TruthFile{run.scene, run.rendered.local_normals}, run.tracks.tracks));
  write_into(dir, "config.json", serialize_run_config(config));
}

void write_solve(const fs::path& dir, const SolvedRun& run) {
  write_into(dir, "solution.txt", serialize_solution(run.solution));
  write_into(dir, "solve_report.txt", format_solve_report(run.reconstruction.result.report));
}

int cmd_simulate(const ConfigFlags& flags, const std::string& out_dir) {
  const RunConfig config = flags.resolve();
  write_simulation(out_dir, config, simulate_run(config));
  return 0;
}

int cmd_solve(const ConfigFlags& flags, const std::string& track_path, const std::string& out_dir) {
  const RunConfig config = flags.resolve();
  const TrackFile tracks = parse_tracks(read_file(track_path));
  const SolvedRun run = solve_run(config, tracks);
  for (const std::string& w : run.reconstruction.initial.warnings) std::cerr << "warning: " << w << '\n';
  write_solve(out_dir, run);
  return 0;
}

int cmd_eval(const std::string& track_path, const std::string& solution_path, const std::string& truth_path,
             const std::string& out_path) {
  const TrackFile tracks = parse_tracks(read_file(track_path));
  const Solution solution = parse_solution(read_file(solution_path));
  const TruthFile truth = parse_truth(read_file(truth_path));
  emit(out_path, format_report(evaluate_solution(tracks, solution, truth.scene)));
  return 0;
}

struct Stat {
  std::vector<double> values;
  double mean() const {
    double s = 0.0;
    for (double v : values) s += v;
    return values.empty() ? 0.0 : s / static_cast<double>(values.size());
  }
  double stddev() const {
    if (values.size() < 2) return 0.0;
    const double m = mean();
    double s = 0.0;
    for (double v : values) s += (v - m) * (v - m);
    return std::sqrt(s / static_cast<double>(values.size() - 1));
  }
};

// Monte-Carlo driver: run k uses simulation seed seed+k and noise seed
// noise_seed+k. Per-seed files go to out_dir/seed_<k> when out_dir is set.
int cmd_monte_carlo(const ConfigFlags& flags, int runs, const std::string& out_dir, const std::string& out_path) {
  const RunConfig base = flags.resolve();
  const std::vector<std::string> columns = {"initial_rmse", "final_rmse", "relative_rmse", "max_normal_error_rad",
                                            "max_depth_relative_error", "iterations"};
  std::vector<Stat> stats(columns.size());
  std::ostringstream os;
  os << "seed";
  for (const auto& c : columns) os << ' ' << c;
  os << " status\n";
  int failures = 0;
  for (int k = 0; k < runs; ++k) {
    RunConfig config = base;
    config.seeds.simulation = base.seeds.simulation + static_cast<std::uint64_t>(k);
    config.seeds.noise = base.seeds.noise + static_cast<std::uint64_t>(k);
    os << config.seeds.simulation;
    try {
      const SimulatedRun sim = simulate_run(config);
      const SolvedRun run = solve_run(config, sim.tracks);
      const EvaluationReport report = evaluate_solution(sim.tracks, run.solution, sim.scene);
      if (!out_dir.empty()) {
        const fs::path dir = fs::path(out_dir) / ("seed_" + std::to_string(config.seeds.simulation));
        write_simulation(dir, config, sim);
        write_solve(dir, run);
        write_into(dir, "eval_report.txt", format_report(report));
      }
      const double row[] = {report.initial_rmse.value_or(std::numeric_limits<double>::quiet_NaN()),
                            report.final_rmse,
                            report.relative_rmse,
                            report.max_normal_error_rad,
                            report.max_depth_relative_error,
                            static_cast<double>(run.reconstruction.result.report.iterations)};
      for (std::size_t c = 0; c < columns.size(); ++c) {
        os << ' ' << format_number(row[c]);
        if (std::isfinite(row[c])) stats[c].values.push_back(row[c]);
      }
      os << " ok\n";
    } catch (const Error& e) {
      ++failures;
      for (std::size_t c = 0; c < columns.size(); ++c) os << " nan";
      os << " " << to_string(e.code()) << '\n';
    }
  }
  os << "mean";
  for (const Stat& s : stats) os << ' ' << format_number(s.mean());
  os << " runs=" << runs << '\n';
  os << "std";
  for (const Stat& s : stats) os << ' ' << format_number(s.stddev());
  os << " failures=" << failures << '\n';
  emit(out_path, os.str());
  return 0;
}

// Largest reprojection error of each point over its observations.
std::vector<double> point_residuals(const Solution& solution, const TrackFile& tracks) {
  std::vector<double> worst(solution.points.size(), 0.0);
  for (const Observation& obs : tracks.tracks.observations()) {
    const auto i = static_cast<std::size_t>(obs.image);
    const auto j = static_cast<std::size_t>(obs.point);
    if (i >= solution.state.poses.size() || j >= solution.points.size()) {
      throw Error(ErrorCode::InvalidArgument, kModule, "track file does not match the solution");
    }
    double e = std::numeric_limits<double>::infinity();
    try {
      const Vec3 X = solution.state.poses[i].to_camera(solution.points[j]);
      e = (forward_project_flat(X, solution.state.interfaces[i], solution.state.mu, tracks.intrinsics) - obs.pixel)
              .norm();
    } catch (const Error&) {
    }
    worst[j] = std::max(worst[j], e);
  }
  return worst;
}

int cmd_export_ply(const std::string& solution_path, const std::string& truth_path, const std::string& track_path,
                   double color_max, const std::string& out_path) {
  std::vector<PlyVertex> vertices;
  if (!truth_path.empty()) {
    for (const Vec3& X : parse_truth(read_file(truth_path)).scene.points) vertices.push_back({X, std::nullopt});
  } else {
    const Solution solution = parse_solution(read_file(solution_path));
    std::vector<double> residual;
    if (!track_path.empty()) residual = point_residuals(solution, parse_tracks(read_file(track_path)));
    for (std::size_t j = 0; j < solution.points.size(); ++j) {
      PlyVertex v{solution.points[j], std::nullopt};
      if (!residual.empty()) v.color = residual_color(residual[j], color_max);
      vertices.push_back(v);
    }
  }
  emit(out_path, serialize_ply(vertices));
  return 0;
}

int cmd_check_gradients(const ConfigFlags& flags, const std::string& track_path, const std::string& solution_path,
                        double step, double tolerance) {
  const RunConfig config = flags.resolve();
  const TrackFile tracks = parse_tracks(read_file(track_path));
  const Solution solution = parse_solution(read_file(solution_path));
  RunConfig c = config;
  c.scenario = solution.scenario;
  c.mode = solution.mode;
  Problem problem = make_problem(c, tracks);
  problem.allow_underdetermined = true;
  const GradientCheckResult r = check_gradients(problem, solution.state, step);
  std::cout << "residual_blocks=" << r.residual_blocks << '\n'
            << "max_relative_error=" << format_number(r.max_relative_error) << '\n'
            << "worst_block=" << r.worst_block << '\n'
            << "tolerance=" << format_number(tolerance) << '\n'
            << "pass=" << (r.max_relative_error <= tolerance ? "true" : "false") << '\n';
  return r.max_relative_error <= tolerance ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Refractive structure from motion: simulate, solve, evaluate and export."};
  app.require_subcommand(1);

  auto* simulate = app.add_subcommand("simulate", "render a synthetic scene into tracks.txt and truth.txt");
  ConfigFlags sim_flags;
  sim_flags.attach(*simulate, true);
  std::string sim_out;
  simulate->add_option("-o,--out-dir", sim_out, "output directory")->required();

  auto* solve = app.add_subcommand("solve", "initialize and optimize; writes solution.txt and solve_report.txt");
  ConfigFlags solve_flags;
  solve_flags.attach(*solve, false);
  std::string solve_tracks;
  std::string solve_out;
  solve->add_option("-t,--tracks", solve_tracks, "track file")->required()->check(CLI::ExistingFile);
  solve->add_option("-o,--out-dir", solve_out, "output directory")->required();

  auto* eval = app.add_subcommand("eval", "compare a solution with ground truth, or run a Monte-Carlo study");
  ConfigFlags mc_flags;
  mc_flags.attach(*eval, true);
  std::string eval_tracks;
  std::string eval_solution;
  std::string eval_truth;
  std::string eval_out;
  std::string mc_dir;
  int mc_runs = 0;
  auto* mc = eval->add_option("--monte-carlo", mc_runs, "simulate, solve and evaluate this many seeds")
                 ->check(CLI::PositiveNumber);
  auto* eval_t = eval->add_option("-t,--tracks", eval_tracks, "track file")->check(CLI::ExistingFile);
  auto* eval_s = eval->add_option("-s,--solution", eval_solution, "solution file")->check(CLI::ExistingFile);
  auto* eval_g = eval->add_option("-g,--truth", eval_truth, "ground-truth file")->check(CLI::ExistingFile);
  eval->add_option("--runs-dir", mc_dir, "Monte-Carlo per-seed output directory")->needs(mc);
  eval->add_option("-o,--out", eval_out, "report file (default stdout)");
  for (auto* o : {eval_t, eval_s, eval_g}) o->excludes(mc);

  auto* ply = app.add_subcommand("export-ply", "write solution or ground-truth points as ASCII PLY");
  std::string ply_solution;
  std::string ply_truth;
  std::string ply_tracks;
  std::string ply_out;
  double ply_color_max = 2.0;
  auto* ply_s = ply->add_option("-s,--solution", ply_solution, "solution file")->check(CLI::ExistingFile);
  auto* ply_g = ply->add_option("-g,--truth", ply_truth, "ground-truth file")->check(CLI::ExistingFile);
  ply_s->excludes(ply_g);
  ply->add_option("-t,--tracks", ply_tracks, "color the solution points by reprojection error")
      ->check(CLI::ExistingFile)
      ->needs(ply_s);
  ply->add_option("--color-max", ply_color_max, "error in pixels mapped to full red")->check(CLI::PositiveNumber);
  ply->add_option("-o,--out", ply_out, "PLY file (default stdout)");

  auto* grad = app.add_subcommand("check-gradients", "compare autodiff and finite-difference Jacobians");
  ConfigFlags grad_flags;
  grad_flags.attach(*grad, false);
  std::string grad_tracks;
  std::string grad_solution;
  double grad_step = 1e-6;
  double grad_tol = 1e-4;
  grad->add_option("-t,--tracks", grad_tracks, "track file")->required()->check(CLI::ExistingFile);
  grad->add_option("-s,--solution", grad_solution, "state to linearize at")->required()->check(CLI::ExistingFile);
  grad->add_option("--step", grad_step, "relative finite-difference step")->check(CLI::PositiveNumber);
  grad->add_option("--tolerance", grad_tol, "largest accepted relative error")->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);

  try {
    if (simulate->parsed()) return cmd_simulate(sim_flags, sim_out);
    if (solve->parsed()) return cmd_solve(solve_flags, solve_tracks, solve_out);
    if (eval->parsed()) {
      if (mc->count() > 0) return cmd_monte_carlo(mc_flags, mc_runs, mc_dir, eval_out);
      if (eval_tracks.empty() || eval_solution.empty() || eval_truth.empty()) {
        throw Error(ErrorCode::InvalidArgument, kModule, "eval needs --tracks, --solution and --truth");
      }
      return cmd_eval(eval_tracks, eval_solution, eval_truth, eval_out);
    }
    if (ply->parsed()) {
      if (ply_solution.empty() && ply_truth.empty()) {
        throw Error(ErrorCode::InvalidArgument, kModule, "export-ply needs --solution or --truth");
      }
      return cmd_export_ply(ply_solution, ply_truth, ply_tracks, ply_color_max, ply_out);
    }
    if (grad->parsed()) return cmd_check_gradients(grad_flags, grad_tracks, grad_solution, grad_step, grad_tol);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << to_string(ErrorCode::IoError) << ": " << kModule << ": " << e.what() << '\n';
    return 1;
  }
  return 0;
}
