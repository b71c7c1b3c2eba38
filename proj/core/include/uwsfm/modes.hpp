#pragma once

#include <string>
#include <string_view>

namespace uwsfm {

/// Which entities move between images.
enum class ScenarioKind {
  MovingInterface,  // camera and interface both move
  StaticInterface,  // interface fixed in the world, camera moves
  FixedCamera,      // camera fixed in the world, interface moves
};

enum class ConstraintMode {
  HardWithRef,  // planar interfaces, reprojection of reference-image depths
  HardNoRef,    // planar interfaces, reprojection of free 3D points in every image
  Soft,         // per-observation normals, ray-point distance plus neighborhood regularizer
};

std::string_view to_string(ScenarioKind kind);
std::string_view to_string(ConstraintMode mode);

/// Parses "moving-interface", "static-interface", "fixed-camera".
ScenarioKind parse_scenario(std::string_view text);
/// Parses "hard-ref", "hard-noref", "soft".
ConstraintMode parse_mode(std::string_view text);

inline bool uses_reference(ConstraintMode mode) { return mode != ConstraintMode::HardNoRef; }

}  // namespace uwsfm
