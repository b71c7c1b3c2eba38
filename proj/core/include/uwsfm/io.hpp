#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "uwsfm/evaluation.hpp"
#include "uwsfm/geometry.hpp"
#include "uwsfm/optimizer.hpp"
#include "uwsfm/simulator.hpp"
#include "uwsfm/tracks.hpp"

namespace uwsfm {

/// Shortest decimal text that parses back to exactly `value`.
std::string format_number(double value);
/// Parses a full token as a double; throws ParseError otherwise.
double parse_number(std::string_view token);

struct TrackFile {
  TrackSet tracks;
  CameraIntrinsics intrinsics;
  RefractiveIndex mu{1.333};

  friend bool operator==(const TrackFile&, const TrackFile&) = default;
};

std::string serialize_tracks(const TrackFile& file);
TrackFile parse_tracks(std::string_view text);

/// Ground truth with optional per-observation local normals (written for
/// every observed pair when `local_normals` is non-empty).
struct TruthFile {
  SceneTruth scene;
  std::vector<std::vector<UnitVec3>> local_normals;
};

std::string serialize_truth(const TruthFile& file, const TrackSet& tracks);
/// Unlisted local normals default to the image's plane normal.
TruthFile parse_truth(std::string_view text);

std::string serialize_solution(const Solution& solution);
Solution parse_solution(std::string_view text);

std::string format_solve_report(const SolveReport& report);

struct PlyVertex {
  Vec3 position = Vec3::Zero();
  std::optional<std::array<unsigned char, 3>> color;
};

/// ASCII PLY with double xyz and, when every vertex has one, uchar rgb.
std::string serialize_ply(const std::vector<PlyVertex>& vertices);
std::vector<PlyVertex> parse_ply(std::string_view text);

/// Blue-to-red color ramp over [0, max_value].
std::array<unsigned char, 3> residual_color(double value, double max_value);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

}  // namespace uwsfm
