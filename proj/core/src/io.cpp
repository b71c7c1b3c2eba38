#include "uwsfm/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace uwsfm {

namespace {

constexpr const char* kModule = "cli_io";
constexpr int kFormatVersion = 1;

[[noreturn]] void parse_fail(std::size_t line, const std::string& why) {
  throw Error(ErrorCode::ParseError, kModule, "line " + std::to_string(line) + ": " + why);
}

// Line-oriented tokenizer; blank lines and '#' comments are skipped.
class Reader {
 public:
  explicit Reader(std::string_view text) {
    std::size_t line = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
      const std::size_t end = std::min(text.find('\n', pos), text.size());
      ++line;
      std::string_view l = text.substr(pos, end - pos);
      if (!l.empty() && l.back() == '\r') l.remove_suffix(1);
      std::vector<std::string_view> tokens;
      std::size_t p = 0;
      while (p < l.size()) {
        while (p < l.size() && (l[p] == ' ' || l[p] == '\t')) ++p;
        std::size_t q = p;
        while (q < l.size() && l[q] != ' ' && l[q] != '\t') ++q;
        if (q > p) tokens.push_back(l.substr(p, q - p));
        p = q;
      }
      if (!tokens.empty() && tokens.front().front() != '#') lines_.push_back({line, std::move(tokens)});
      if (end == text.size()) break;
      pos = end + 1;
    }
  }

  bool done() const { return next_ >= lines_.size(); }
  std::size_t line() const { return done() ? (lines_.empty() ? 0 : lines_.back().number) : lines_[next_].number; }
  std::string_view peek_keyword() const { return done() ? std::string_view{} : lines_[next_].tokens.front(); }

  // Returns the arguments of the next line, which must start with `keyword`
  // and carry `count` arguments (any number when count < 0).
  std::vector<std::string_view> expect(std::string_view keyword, int count) {
    if (done()) parse_fail(line(), "expected '" + std::string(keyword) + "', found end of file");
    const Line& l = lines_[next_];
    if (l.tokens.front() != keyword) {
      parse_fail(l.number, "expected '" + std::string(keyword) + "', found '" + std::string(l.tokens.front()) + "'");
    }
    if (count >= 0 && static_cast<int>(l.tokens.size()) - 1 != count) {
      parse_fail(l.number, "'" + std::string(keyword) + "' takes " + std::to_string(count) + " values");
    }
    ++next_;
    return {l.tokens.begin() + 1, l.tokens.end()};
  }

  // Full token list of the next line, which must hold `count` tokens.
  std::vector<std::string_view> record(std::size_t count) {
    if (done()) parse_fail(line(), "unexpected end of file");
    const Line& l = lines_[next_];
    if (l.tokens.size() != count) {
      parse_fail(l.number, "expected " + std::to_string(count) + " values, found " + std::to_string(l.tokens.size()));
    }
    ++next_;
    return l.tokens;
  }

  void header(std::string_view magic) {
    const auto v = expect(magic, 1);
    if (to_int(v[0]) != kFormatVersion) {
      parse_fail(line(), "unsupported " + std::string(magic) + " version " + std::string(v[0]));
    }
  }

  void finish() const {
    if (!done()) parse_fail(lines_[next_].number, "unexpected '" + std::string(lines_[next_].tokens.front()) + "'");
  }

  int to_int(std::string_view t) const {
    int v = 0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size()) parse_fail(line(), "invalid integer '" + std::string(t) + "'");
    return v;
  }

  double to_double(std::string_view t) const {
    try {
      return parse_number(t);
    } catch (const Error&) {
      parse_fail(line(), "invalid number '" + std::string(t) + "'");
    }
  }

 private:
  struct Line {
    std::size_t number;
    std::vector<std::string_view> tokens;
  };
  std::vector<Line> lines_;
  std::size_t next_ = 0;
};

std::string num(double v) { return format_number(v); }

void put_vec(std::ostringstream& os, const Vec3& v) { os << ' ' << num(v.x()) << ' ' << num(v.y()) << ' ' << num(v.z()); }

Vec3 get_vec(const Reader& in, const std::vector<std::string_view>& t, std::size_t from) {
  return Vec3(in.to_double(t[from]), in.to_double(t[from + 1]), in.to_double(t[from + 2]));
}

int checked_index(const Reader& in, std::string_view t, int limit, const char* what) {
  const int v = in.to_int(t);
  if (v < 0 || v >= limit) parse_fail(in.line(), std::string(what) + " index " + std::to_string(v) + " out of range");
  return v;
}

template <typename F>
auto wrap(F f) {
  try {
    return f();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ParseError) throw;
    throw Error(ErrorCode::ParseError, kModule, e.what());
  }
}

void put_intrinsics(std::ostringstream& os, const CameraIntrinsics& k) {
  os << "intrinsics " << num(k.fx) << ' ' << num(k.fy) << ' ' << num(k.cx) << ' ' << num(k.cy) << '\n';
}

CameraIntrinsics get_intrinsics(Reader& in) {
  const auto v = in.expect("intrinsics", 4);
  CameraIntrinsics k{in.to_double(v[0]), in.to_double(v[1]), in.to_double(v[2]), in.to_double(v[3])};
  k.validate();
  return k;
}

std::optional<int> get_reference(Reader& in, int images) {
  const auto v = in.expect("reference", 1);
  if (v[0] == "none") return std::nullopt;
  return checked_index(in, v[0], images, "reference");
}

void put_reference(std::ostringstream& os, const std::optional<int>& r) {
  os << "reference " << (r ? std::to_string(*r) : std::string("none")) << '\n';
}

void put_pose(std::ostringstream& os, int i, const Pose& p) {
  os << "pose " << i;
  put_vec(os, p.rotation);
  put_vec(os, p.translation);
  os << '\n';
}

void put_interface(std::ostringstream& os, int i, const InterfacePlane& p) {
  os << "interface " << i;
  put_vec(os, p.normal.vec());
  os << ' ' << num(p.depth) << '\n';
}

// Reads `count` indexed lines "<keyword> <index> <values...>" in index order.
template <typename F>
void indexed(Reader& in, std::string_view keyword, int count, int values, F&& f) {
  for (int k = 0; k < count; ++k) {
    const auto t = in.expect(keyword, values + 1);
    if (in.to_int(t[0]) != k) {
      parse_fail(in.line(), std::string(keyword) + " lines must be in index order");
    }
    f(k, t);
  }
}

}  // namespace

std::string format_number(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) throw Error(ErrorCode::IoError, kModule, "number formatting failed");
  return std::string(buf, ptr);
}

double parse_number(std::string_view token) {
  double v = 0.0;
  const char* begin = token.data();
  const char* end = token.data() + token.size();
  if (begin != end && *begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end || token.empty()) {
    throw Error(ErrorCode::ParseError, kModule, "invalid number '" + std::string(token) + "'");
  }
  return v;
}

std::string serialize_tracks(const TrackFile& f) {
  std::ostringstream os;
  os << "uwsfm-tracks " << kFormatVersion << '\n';
  os << "images " << f.tracks.image_count() << '\n';
  os << "points " << f.tracks.point_count() << '\n';
  put_intrinsics(os, f.intrinsics);
  os << "mu " << num(f.mu.value()) << '\n';
  put_reference(os, f.tracks.reference());
  os << "observations " << f.tracks.size() << '\n';
  for (const Observation& o : f.tracks.observations()) {
    os << o.image << ' ' << o.point << ' ' << num(o.pixel.x()) << ' ' << num(o.pixel.y()) << '\n';
  }
  return os.str();
}

TrackFile parse_tracks(std::string_view text) {
  return wrap([&] {
    Reader in(text);
    in.header("uwsfm-tracks");
    const int I = in.to_int(in.expect("images", 1)[0]);
    const int J = in.to_int(in.expect("points", 1)[0]);
    if (I < 0 || J < 0) parse_fail(in.line(), "negative count");
    const CameraIntrinsics k = get_intrinsics(in);
    const RefractiveIndex mu(in.to_double(in.expect("mu", 1)[0]));
    const std::optional<int> reference = get_reference(in, I);
    const int n = in.to_int(in.expect("observations", 1)[0]);
    if (n < 0) parse_fail(in.line(), "negative observation count");
    std::vector<Observation> obs;
    obs.reserve(static_cast<std::size_t>(n));
    for (int m = 0; m < n; ++m) {
      if (in.done()) parse_fail(in.line(), "expected " + std::to_string(n) + " observations, found " + std::to_string(m));
      const auto t = in.record(4);
      obs.push_back(Observation{in.to_int(t[0]), in.to_int(t[1]), Vec2(in.to_double(t[2]), in.to_double(t[3]))});
    }
    in.finish();
    return TrackFile{TrackSet(I, J, std::move(obs), reference), k, mu};
  });
}

std::string serialize_truth(const TruthFile& f, const TrackSet& tracks) {
  const SceneTruth& s = f.scene;
  std::ostringstream os;
  os << "uwsfm-truth " << kFormatVersion << '\n';
  os << "scenario " << to_string(s.scenario) << '\n';
  os << "images " << s.image_count() << '\n';
  os << "points " << s.point_count() << '\n';
  put_intrinsics(os, s.intrinsics);
  os << "image_size " << s.width << ' ' << s.height << '\n';
  os << "border " << num(s.border_px) << '\n';
  os << "mu " << num(s.mu.value()) << '\n';
  os << "reference " << s.reference_index << '\n';
  os << "drop_fraction " << num(s.drop_fraction) << '\n';
  os << "seed " << s.seed << '\n';
  for (int j = 0; j < s.point_count(); ++j) {
    os << "point " << j;
    put_vec(os, s.points[static_cast<std::size_t>(j)]);
    os << '\n';
  }
  for (int i = 0; i < s.image_count(); ++i) put_pose(os, i, s.poses[static_cast<std::size_t>(i)]);
  for (int i = 0; i < s.image_count(); ++i) put_interface(os, i, s.interfaces[static_cast<std::size_t>(i)]);
  for (int i = 0; i < s.image_count(); ++i) {
    const auto ii = static_cast<std::size_t>(i);
    const std::vector<Wave> none;
    const std::vector<Wave>& waves = ii < s.waves.size() ? s.waves[ii].waves : none;
    os << "waves " << i << ' ' << waves.size();
    for (const Wave& w : waves) {
      os << ' ' << num(w.amplitude) << ' ' << num(w.kx) << ' ' << num(w.ky) << ' ' << num(w.phase);
    }
    os << '\n';
  }
  std::size_t count = 0;
  if (!f.local_normals.empty()) count = tracks.size();
  os << "local_normals " << count << '\n';
  if (count > 0) {
    for (const Observation& o : tracks.observations()) {
      os << "normal " << o.image << ' ' << o.point;
      put_vec(os, f.local_normals[static_cast<std::size_t>(o.image)][static_cast<std::size_t>(o.point)].vec());
      os << '\n';
    }
  }
  return os.str();
}

TruthFile parse_truth(std::string_view text) {
  return wrap([&] {
    Reader in(text);
    in.header("uwsfm-truth");
    TruthFile f;
    SceneTruth& s = f.scene;
    s.scenario = parse_scenario(in.expect("scenario", 1)[0]);
    const int I = in.to_int(in.expect("images", 1)[0]);
    const int J = in.to_int(in.expect("points", 1)[0]);
    if (I < 0 || J < 0) parse_fail(in.line(), "negative count");
    s.intrinsics = get_intrinsics(in);
    const auto size = in.expect("image_size", 2);
    s.width = in.to_int(size[0]);
    s.height = in.to_int(size[1]);
    s.border_px = in.to_double(in.expect("border", 1)[0]);
    s.mu = RefractiveIndex(in.to_double(in.expect("mu", 1)[0]));
    s.reference_index = checked_index(in, in.expect("reference", 1)[0], std::max(I, 1), "reference");
    s.drop_fraction = in.to_double(in.expect("drop_fraction", 1)[0]);
    {
      const auto t = in.expect("seed", 1);
      std::uint64_t seed = 0;
      const auto [ptr, ec] = std::from_chars(t[0].data(), t[0].data() + t[0].size(), seed);
      if (ec != std::errc() || ptr != t[0].data() + t[0].size()) parse_fail(in.line(), "invalid seed");
      s.seed = seed;
    }
    indexed(in, "point", J, 3, [&](int, const auto& t) { s.points.push_back(get_vec(in, t, 1)); });
    indexed(in, "pose", I, 6, [&](int, const auto& t) {
      s.poses.push_back(Pose{get_vec(in, t, 1), get_vec(in, t, 4)});
    });
    indexed(in, "interface", I, 4, [&](int, const auto& t) {
      s.interfaces.push_back(InterfacePlane::canonical(get_vec(in, t, 1), in.to_double(t[4])));
    });
    for (int i = 0; i < I; ++i) {
      const auto t = in.expect("waves", -1);
      if (t.size() < 2 || in.to_int(t[0]) != i) parse_fail(in.line(), "waves lines must be in index order");
      const int n = in.to_int(t[1]);
      if (n < 0 || t.size() != static_cast<std::size_t>(2 + 4 * n)) parse_fail(in.line(), "wave record has the wrong length");
      WaveField field;
      for (int w = 0; w < n; ++w) {
        const auto b = static_cast<std::size_t>(2 + 4 * w);
        field.waves.push_back(Wave{in.to_double(t[b]), in.to_double(t[b + 1]), in.to_double(t[b + 2]),
                                   in.to_double(t[b + 3])});
      }
      s.waves.push_back(std::move(field));
    }
    const int normals = in.to_int(in.expect("local_normals", 1)[0]);
    if (normals > 0) {
      f.local_normals.resize(static_cast<std::size_t>(I));
      for (int i = 0; i < I; ++i) {
        f.local_normals[static_cast<std::size_t>(i)].assign(static_cast<std::size_t>(J),
                                                             s.interfaces[static_cast<std::size_t>(i)].normal);
      }
      for (int m = 0; m < normals; ++m) {
        const auto t = in.expect("normal", 5);
        const int i = checked_index(in, t[0], I, "image");
        const int j = checked_index(in, t[1], J, "point");
        f.local_normals[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = UnitVec3(get_vec(in, t, 2));
      }
    }
    in.finish();
    return f;
  });
}

std::string serialize_solution(const Solution& sol) {
  const ParameterState& st = sol.state;
  std::ostringstream os;
  os << "uwsfm-solution " << kFormatVersion << '\n';
  os << "scenario " << to_string(sol.scenario) << '\n';
  os << "mode " << to_string(sol.mode) << '\n';
  put_reference(os, sol.reference);
  os << "images " << st.poses.size() << '\n';
  os << "points " << sol.points.size() << '\n';
  os << "mu " << num(st.mu.value()) << '\n';
  for (std::size_t i = 0; i < st.poses.size(); ++i) put_pose(os, static_cast<int>(i), st.poses[i]);
  for (std::size_t i = 0; i < st.interfaces.size(); ++i) put_interface(os, static_cast<int>(i), st.interfaces[i]);
  os << "depths " << st.point_depths.size() << '\n';
  for (std::size_t j = 0; j < st.point_depths.size(); ++j) os << "depth " << j << ' ' << num(st.point_depths[j]) << '\n';
  for (std::size_t j = 0; j < sol.points.size(); ++j) {
    os << "point " << j;
    put_vec(os, sol.points[j]);
    os << '\n';
  }
  os << "initial_points " << sol.initial_points.size() << '\n';
  for (std::size_t j = 0; j < sol.initial_points.size(); ++j) {
    os << "initial " << j;
    put_vec(os, sol.initial_points[j]);
    os << '\n';
  }
  std::size_t normals = 0;
  for (const auto& row : st.local_normals) normals += row.size();
  os << "local_normals " << normals << '\n';
  for (std::size_t i = 0; i < st.local_normals.size(); ++i) {
    for (std::size_t j = 0; j < st.local_normals[i].size(); ++j) {
      os << "normal " << i << ' ' << j;
      put_vec(os, st.local_normals[i][j].vec());
      os << '\n';
    }
  }
  return os.str();
}

Solution parse_solution(std::string_view text) {
  return wrap([&] {
    Reader in(text);
    in.header("uwsfm-solution");
    Solution sol;
    sol.scenario = parse_scenario(in.expect("scenario", 1)[0]);
    sol.mode = parse_mode(in.expect("mode", 1)[0]);
    const auto ref = in.expect("reference", 1);
    const int I = in.to_int(in.expect("images", 1)[0]);
    const int J = in.to_int(in.expect("points", 1)[0]);
    if (I < 0 || J < 0) parse_fail(in.line(), "negative count");
    if (ref[0] != "none") sol.reference = checked_index(in, ref[0], I, "reference");
    ParameterState& st = sol.state;
    st.mu = RefractiveIndex(in.to_double(in.expect("mu", 1)[0]));
    indexed(in, "pose", I, 6, [&](int, const auto& t) {
      st.poses.push_back(Pose{get_vec(in, t, 1), get_vec(in, t, 4)});
    });
    indexed(in, "interface", I, 4, [&](int, const auto& t) {
      st.interfaces.push_back(InterfacePlane::canonical(get_vec(in, t, 1), in.to_double(t[4])));
    });
    const int depths = in.to_int(in.expect("depths", 1)[0]);
    if (depths != 0 && depths != J) parse_fail(in.line(), "depth count must be 0 or the point count");
    indexed(in, "depth", depths, 1, [&](int, const auto& t) { st.point_depths.push_back(in.to_double(t[1])); });
    indexed(in, "point", J, 3, [&](int, const auto& t) { sol.points.push_back(get_vec(in, t, 1)); });
    const int initial = in.to_int(in.expect("initial_points", 1)[0]);
    if (initial != 0 && initial != J) parse_fail(in.line(), "initial point count must be 0 or the point count");
    indexed(in, "initial", initial, 3, [&](int, const auto& t) { sol.initial_points.push_back(get_vec(in, t, 1)); });
    const int normals = in.to_int(in.expect("local_normals", 1)[0]);
    if (normals != 0 && normals != I * J) parse_fail(in.line(), "local normal count must be 0 or images x points");
    if (normals > 0) {
      st.local_normals.assign(static_cast<std::size_t>(I), std::vector<UnitVec3>(static_cast<std::size_t>(J)));
      for (int m = 0; m < normals; ++m) {
        const auto t = in.expect("normal", 5);
        const int i = in.to_int(t[0]);
        const int j = in.to_int(t[1]);
        if (i != m / J || j != m % J) parse_fail(in.line(), "normal lines must be in index order");
        st.local_normals[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = UnitVec3(get_vec(in, t, 2));
      }
    }
    if (sol.mode == ConstraintMode::HardNoRef) st.points = sol.points;
    in.finish();
    return sol;
  });
}

std::string format_solve_report(const SolveReport& r) {
  std::ostringstream os;
  os << "initial_energy=" << num(r.initial_energy) << '\n';
  os << "final_energy=" << num(r.final_energy) << '\n';
  os << "relative_final_energy=" << num(r.initial_energy > 0.0 ? r.final_energy / r.initial_energy : 0.0) << '\n';
  os << "iterations=" << r.iterations << '\n';
  os << "termination=" << r.termination << '\n';
  os << "converged=" << (r.converged ? "true" : "false") << '\n';
  os << "initial_residual_rms=" << num(r.initial_residual_rms) << '\n';
  os << "final_residual_rms=" << num(r.final_residual_rms) << '\n';
  os << "residual_components=" << r.residual_components << '\n';
  os << "free_parameters=" << r.free_parameters << '\n';
  os << "restarts=" << r.restarts << '\n';
  os << "energy_trace=";
  for (std::size_t k = 0; k < r.energy_trace.size(); ++k) os << (k ? "," : "") << num(r.energy_trace[k]);
  os << '\n';
  os << "step_norms=";
  for (std::size_t k = 0; k < r.step_norms.size(); ++k) os << (k ? "," : "") << num(r.step_norms[k]);
  os << '\n';
  return os.str();
}

std::string serialize_ply(const std::vector<PlyVertex>& vertices) {
  const bool color = !vertices.empty() &&
                     std::all_of(vertices.begin(), vertices.end(), [](const PlyVertex& v) { return v.color.has_value(); });
  std::ostringstream os;
  os << "ply\nformat ascii 1.0\ncomment uwsfm point cloud\n";
  os << "element vertex " << vertices.size() << '\n';
  os << "property double x\nproperty double y\nproperty double z\n";
  if (color) os << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  os << "end_header\n";
  for (const PlyVertex& v : vertices) {
    os << num(v.position.x()) << ' ' << num(v.position.y()) << ' ' << num(v.position.z());
    if (color) {
      os << ' ' << static_cast<int>((*v.color)[0]) << ' ' << static_cast<int>((*v.color)[1]) << ' '
         << static_cast<int>((*v.color)[2]);
    }
    os << '\n';
  }
  return os.str();
}

std::vector<PlyVertex> parse_ply(std::string_view text) {
  return wrap([&] {
    Reader in(text);
    in.expect("ply", 0);
    const auto fmt = in.expect("format", 2);
    if (fmt[0] != "ascii") parse_fail(in.line(), "only ascii PLY is supported");
    long count = -1;
    std::vector<std::string> props;
    while (!in.done() && in.peek_keyword() != "end_header") {
      const std::string_view key = in.peek_keyword();
      auto t = in.expect(key, -1);
      if (key == "comment" || key == "obj_info") continue;
      if (key == "element") {
        if (t.size() != 2) parse_fail(in.line(), "malformed element line");
        if (t[0] != "vertex") parse_fail(in.line(), "unsupported element '" + std::string(t[0]) + "'");
        count = in.to_int(t[1]);
      } else if (key == "property") {
        if (t.size() != 2) parse_fail(in.line(), "list properties are not supported");
        props.emplace_back(t[1]);
      } else {
        parse_fail(in.line(), "unexpected header line '" + std::string(key) + "'");
      }
    }
    in.expect("end_header", 0);
    if (count < 0) parse_fail(in.line(), "missing vertex element");
    const auto index = [&](const char* name) {
      const auto it = std::find(props.begin(), props.end(), name);
      return it == props.end() ? -1 : static_cast<int>(it - props.begin());
    };
    const int ix = index("x");
    const int iy = index("y");
    const int iz = index("z");
    const int ir = index("red");
    const int ig = index("green");
    const int ib = index("blue");
    if (ix < 0 || iy < 0 || iz < 0) parse_fail(in.line(), "vertex needs x, y and z");
    std::vector<PlyVertex> out;
    for (long v = 0; v < count; ++v) {
      if (in.done()) parse_fail(in.line(), "fewer vertices than declared");
      const auto t = in.record(props.size());
      PlyVertex pv;
      pv.position = Vec3(in.to_double(t[static_cast<std::size_t>(ix)]), in.to_double(t[static_cast<std::size_t>(iy)]),
                         in.to_double(t[static_cast<std::size_t>(iz)]));
      if (ir >= 0 && ig >= 0 && ib >= 0) {
        pv.color = std::array<unsigned char, 3>{static_cast<unsigned char>(in.to_int(t[static_cast<std::size_t>(ir)])),
                                                static_cast<unsigned char>(in.to_int(t[static_cast<std::size_t>(ig)])),
                                                static_cast<unsigned char>(in.to_int(t[static_cast<std::size_t>(ib)]))};
      }
      out.push_back(pv);
    }
    in.finish();
    return out;
  });
}

std::array<unsigned char, 3> residual_color(double value, double max_value) {
  const double t = max_value > 0.0 ? std::clamp(value / max_value, 0.0, 1.0) : 0.0;
  return {static_cast<unsigned char>(std::lround(255.0 * t)), 0,
          static_cast<unsigned char>(std::lround(255.0 * (1.0 - t)))};
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, kModule, "cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, kModule, "cannot write '" + path.string() + "'");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw Error(ErrorCode::IoError, kModule, "write to '" + path.string() + "' failed");
}

}  // namespace uwsfm
