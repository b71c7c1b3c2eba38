#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "uwsfm/initializer.hpp"
#include "uwsfm/modes.hpp"
#include "uwsfm/optimizer.hpp"
#include "uwsfm/simulator.hpp"

namespace uwsfm {

inline constexpr int kRunConfigVersion = 1;

struct RunSeeds {
  std::uint64_t simulation = 0;
  std::uint64_t noise = 1;
  std::uint64_t ransac = 0;
};

/// Everything a CLI run needs besides its input files. Serialized as JSON;
/// unknown keys are rejected and omitted keys keep these defaults.
struct RunConfig {
  int version = kRunConfigVersion;
  ScenarioKind scenario = ScenarioKind::MovingInterface;
  ConstraintMode mode = ConstraintMode::HardWithRef;
  double lambda = 1.0;
  double neighborhood_radius_px = 40.0;
  double gauge_depth = 1.0;
  bool allow_underdetermined = false;
  std::optional<double> approximate_depth;
  /// Pixel noise added by `simulate`.
  double noise_px = 0.0;
  RunSeeds seeds;
  SolveOptions solver;
  SimulationConfig simulation;

  /// Cross-field checks; throws ConfigError.
  void validate() const;
};

RunConfig parse_run_config(std::string_view json_text);
std::string serialize_run_config(const RunConfig& config);

}  // namespace uwsfm
