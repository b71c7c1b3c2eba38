#include "uwsfm/config.hpp"

#include <set>
#include <string>

#include <json.hpp>

namespace uwsfm {

namespace {

constexpr const char* kModule = "cli_io";
using nlohmann::json;

[[noreturn]] void config_fail(const std::string& why) { throw Error(ErrorCode::ConfigError, kModule, why); }

// Reads keys from one JSON object and rejects any key that was not read.
class Fields {
 public:
  Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j.is_object()) config_fail(path_ + " must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      if constexpr (std::is_same_v<T, double>) {
        if (!it->is_number()) throw std::runtime_error("expected a number");
      } else if constexpr (std::is_same_v<T, bool>) {
        if (!it->is_boolean()) throw std::runtime_error("expected a boolean");
      } else if constexpr (std::is_integral_v<T>) {
        if (!it->is_number_integer()) throw std::runtime_error("expected an integer");
      }
      out = it->get<T>();
    } catch (const std::exception& e) {
      config_fail(path_ + "." + key + ": " + e.what());
    }
  }

  const json* object(const char* key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string path(const char* key) const { return path_ + "." + key; }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.contains(it.key())) config_fail("unknown key " + path_ + "." + it.key());
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_solver(const json& j, SolveOptions& s) {
  Fields f(j, "solver");
  f.get("max_iterations", s.max_iterations);
  f.get("function_tolerance", s.function_tolerance);
  f.get("gradient_tolerance", s.gradient_tolerance);
  f.get("parameter_tolerance", s.parameter_tolerance);
  f.get("initial_damping", s.initial_damping);
  std::string loss = s.loss == RobustLoss::Huber ? "huber" : "none";
  f.get("loss", loss);
  if (loss == "none") {
    s.loss = RobustLoss::None;
  } else if (loss == "huber") {
    s.loss = RobustLoss::Huber;
  } else {
    config_fail("solver.loss must be \"none\" or \"huber\"");
  }
  f.get("huber_delta", s.huber_delta);
  f.get("threads", s.threads);
  f.finish();
}

void read_simulation(const json& j, SimulationConfig& s) {
  Fields f(j, "simulation");
  f.get("image_count", s.image_count);
  f.get("point_count", s.point_count);
  f.get("mu", s.mu);
  if (const json* k = f.object("intrinsics")) {
    Fields kf(*k, "simulation.intrinsics");
    kf.get("fx", s.intrinsics.fx);
    kf.get("fy", s.intrinsics.fy);
    kf.get("cx", s.intrinsics.cx);
    kf.get("cy", s.intrinsics.cy);
    kf.finish();
  }
  f.get("width", s.width);
  f.get("height", s.height);
  f.get("border_px", s.border_px);
  f.get("reference_index", s.reference_index);
  f.get("interface_depth", s.interface_depth);
  f.get("depth_below_min", s.depth_below_min);
  f.get("depth_below_max", s.depth_below_max);
  f.get("max_tilt_deg", s.max_tilt_deg);
  f.get("interface_depth_jitter", s.interface_depth_jitter);
  f.get("camera_baseline", s.camera_baseline);
  f.get("camera_height_jitter", s.camera_height_jitter);
  f.get("camera_max_roll_deg", s.camera_max_roll_deg);
  f.get("wave_count", s.wave_count);
  f.get("wave_max_tilt_deg", s.wave_max_tilt_deg);
  f.get("wavelength_min", s.wavelength_min);
  f.get("wavelength_max", s.wavelength_max);
  f.get("drop_fraction", s.drop_fraction);
  f.finish();
}

}  // namespace

void RunConfig::validate() const {
  if (version != kRunConfigVersion) config_fail("unsupported config version " + std::to_string(version));
  if (!(lambda >= 0.0)) config_fail("lambda must be non-negative");
  if (!(neighborhood_radius_px > 0.0)) config_fail("neighborhood_radius_px must be positive");
  if (!(gauge_depth > 0.0)) config_fail("gauge_depth must be positive");
  if (approximate_depth && !(*approximate_depth > 0.0)) config_fail("approximate_depth must be positive");
  if (!(noise_px >= 0.0)) config_fail("noise_px must be non-negative");
  try {
    solver.validate();
  } catch (const Error& e) {
    config_fail(e.detail());
  }
}

RunConfig parse_run_config(std::string_view text) {
  json j;
  try {
    j = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ParseError, kModule, std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig c;
  Fields f(j, "config");
  f.get("version", c.version);
  if (c.version != kRunConfigVersion) config_fail("unsupported config version " + std::to_string(c.version));
  std::string scenario(to_string(c.scenario));
  std::string mode(to_string(c.mode));
  f.get("scenario", scenario);
  f.get("mode", mode);
  c.scenario = parse_scenario(scenario);
  c.mode = parse_mode(mode);
  f.get("lambda", c.lambda);
  f.get("neighborhood_radius_px", c.neighborhood_radius_px);
  f.get("gauge_depth", c.gauge_depth);
  f.get("allow_underdetermined", c.allow_underdetermined);
  if (const json* d = f.object("approximate_depth"); d && !d->is_null()) {
    if (!d->is_number()) config_fail("config.approximate_depth must be a number or null");
    c.approximate_depth = d->get<double>();
  }
  f.get("noise_px", c.noise_px);
  if (const json* s = f.object("seeds")) {
    Fields sf(*s, "seeds");
    sf.get("simulation", c.seeds.simulation);
    sf.get("noise", c.seeds.noise);
    sf.get("ransac", c.seeds.ransac);
    sf.finish();
  }
  if (const json* s = f.object("solver")) read_solver(*s, c.solver);
  if (const json* s = f.object("simulation")) read_simulation(*s, c.simulation);
  f.finish();
  c.simulation.scenario = c.scenario;
  c.validate();
  return c;
}

std::string serialize_run_config(const RunConfig& c) {
  const SolveOptions& s = c.solver;
  const SimulationConfig& m = c.simulation;
  json j = {
      {"version", c.version},
      {"scenario", std::string(to_string(c.scenario))},
      {"mode", std::string(to_string(c.mode))},
      {"lambda", c.lambda},
      {"neighborhood_radius_px", c.neighborhood_radius_px},
      {"gauge_depth", c.gauge_depth},
      {"allow_underdetermined", c.allow_underdetermined},
      {"approximate_depth", c.approximate_depth ? json(*c.approximate_depth) : json(nullptr)},
      {"noise_px", c.noise_px},
      {"seeds", {{"simulation", c.seeds.simulation}, {"noise", c.seeds.noise}, {"ransac", c.seeds.ransac}}},
      {"solver",
       {{"max_iterations", s.max_iterations},
        {"function_tolerance", s.function_tolerance},
        {"gradient_tolerance", s.gradient_tolerance},
        {"parameter_tolerance", s.parameter_tolerance},
        {"initial_damping", s.initial_damping},
        {"loss", s.loss == RobustLoss::Huber ? "huber" : "none"},
        {"huber_delta", s.huber_delta},
        {"threads", s.threads}}},
      {"simulation",
       {{"image_count", m.image_count},
        {"point_count", m.point_count},
        {"mu", m.mu},
        {"intrinsics", {{"fx", m.intrinsics.fx}, {"fy", m.intrinsics.fy}, {"cx", m.intrinsics.cx}, {"cy", m.intrinsics.cy}}},
        {"width", m.width},
        {"height", m.height},
        {"border_px", m.border_px},
        {"reference_index", m.reference_index},
        {"interface_depth", m.interface_depth},
        {"depth_below_min", m.depth_below_min},
        {"depth_below_max", m.depth_below_max},
        {"max_tilt_deg", m.max_tilt_deg},
        {"interface_depth_jitter", m.interface_depth_jitter},
        {"camera_baseline", m.camera_baseline},
        {"camera_height_jitter", m.camera_height_jitter},
        {"camera_max_roll_deg", m.camera_max_roll_deg},
        {"wave_count", m.wave_count},
        {"wave_max_tilt_deg", m.wave_max_tilt_deg},
        {"wavelength_min", m.wavelength_min},
        {"wavelength_max", m.wavelength_max},
        {"drop_fraction", m.drop_fraction}}},
  };
  return j.dump(2) + "\n";
}

}  // namespace uwsfm
