#include "uwsfm/tracks.hpp"

#include <cmath>
#include <string>

#include "uwsfm/modes.hpp"

namespace uwsfm {

namespace {
constexpr const char* kModule = "residuals";
}

std::string_view to_string(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::MovingInterface: return "moving-interface";
    case ScenarioKind::StaticInterface: return "static-interface";
    case ScenarioKind::FixedCamera: return "fixed-camera";
  }
  return "unknown";
}

std::string_view to_string(ConstraintMode mode) {
  switch (mode) {
    case ConstraintMode::HardWithRef: return "hard-ref";
    case ConstraintMode::HardNoRef: return "hard-noref";
    case ConstraintMode::Soft: return "soft";
  }
  return "unknown";
}

ScenarioKind parse_scenario(std::string_view text) {
  if (text == "moving-interface") return ScenarioKind::MovingInterface;
  if (text == "static-interface") return ScenarioKind::StaticInterface;
  if (text == "fixed-camera") return ScenarioKind::FixedCamera;
  throw Error(ErrorCode::ConfigError, "scenarios", "unknown scenario '" + std::string(text) + "'");
}

ConstraintMode parse_mode(std::string_view text) {
  if (text == "hard-ref") return ConstraintMode::HardWithRef;
  if (text == "hard-noref") return ConstraintMode::HardNoRef;
  if (text == "soft") return ConstraintMode::Soft;
  throw Error(ErrorCode::ConfigError, "scenarios", "unknown constraint mode '" + std::string(text) + "'");
}

TrackSet::TrackSet(int image_count, int point_count, std::vector<Observation> observations,
                   std::optional<int> reference)
    : image_count_(image_count),
      point_count_(point_count),
      observations_(std::move(observations)),
      reference_(reference) {
  if (image_count_ < 0 || point_count_ < 0) {
    throw Error(ErrorCode::InvalidArgument, kModule, "negative image or point count");
  }
  if (reference_ && (*reference_ < 0 || *reference_ >= image_count_)) {
    throw Error(ErrorCode::InvalidArgument, kModule, "reference image index out of range");
  }
  index_.assign(static_cast<std::size_t>(image_count_) * point_count_, -1);
  for (std::size_t k = 0; k < observations_.size(); ++k) {
    const Observation& obs = observations_[k];
    if (obs.image < 0 || obs.image >= image_count_ || obs.point < 0 || obs.point >= point_count_) {
      throw Error(ErrorCode::InvalidArgument, kModule,
                  "observation index out of range at record " + std::to_string(k));
    }
    if (!std::isfinite(obs.pixel.x()) || !std::isfinite(obs.pixel.y())) {
      throw Error(ErrorCode::InvalidArgument, kModule, "non-finite pixel at record " + std::to_string(k));
    }
    int& slot = index_[static_cast<std::size_t>(obs.image) * point_count_ + obs.point];
    if (slot >= 0) {
      throw Error(ErrorCode::InvalidArgument, kModule,
                  "duplicate observation (" + std::to_string(obs.image) + ", " +
                      std::to_string(obs.point) + ")");
    }
    slot = static_cast<int>(k);
  }
}

TrackSet TrackSet::with_reference(std::optional<int> reference) const {
  return TrackSet(image_count_, point_count_, observations_, reference);
}

std::optional<std::size_t> TrackSet::find(int image, int point) const {
  if (image < 0 || image >= image_count_ || point < 0 || point >= point_count_) return std::nullopt;
  const int slot = index_[static_cast<std::size_t>(image) * point_count_ + point];
  if (slot < 0) return std::nullopt;
  return static_cast<std::size_t>(slot);
}

const Observation& TrackSet::at(int image, int point) const {
  const auto k = find(image, point);
  if (!k) {
    throw Error(ErrorCode::InvalidArgument, kModule,
                "point " + std::to_string(point) + " is not observed in image " + std::to_string(image));
  }
  return observations_[*k];
}

std::vector<std::size_t> TrackSet::observations_in_image(int image) const {
  std::vector<std::size_t> out;
  for (int j = 0; j < point_count_; ++j) {
    if (auto k = find(image, j)) out.push_back(*k);
  }
  return out;
}

int TrackSet::views_of_point(int point) const {
  int views = 0;
  for (int i = 0; i < image_count_; ++i) views += observed(i, point) ? 1 : 0;
  return views;
}

void TrackSet::validate() const {
  for (int j = 0; j < point_count_; ++j) {
    if (views_of_point(j) < 2) {
      throw Error(ErrorCode::InvalidArgument, kModule,
                  "point " + std::to_string(j) + " is observed in fewer than two images");
    }
    if (reference_ && !observed(*reference_, j)) {
      throw Error(ErrorCode::InvalidArgument, kModule,
                  "point " + std::to_string(j) + " is not observed in the reference image");
    }
  }
}

}  // namespace uwsfm
