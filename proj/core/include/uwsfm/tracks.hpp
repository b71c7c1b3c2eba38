#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "uwsfm/geometry.hpp"

namespace uwsfm {

struct Observation {
  int image = 0;
  int point = 0;
  Vec2 pixel = Vec2::Zero();

  friend bool operator==(const Observation&, const Observation&) = default;
};

/// 2D observations indexed by (image, point) plus an optional reference image.
class TrackSet {
 public:
  TrackSet() = default;
  /// Throws InvalidArgument on out-of-range or duplicate (image, point) pairs.
  TrackSet(int image_count, int point_count, std::vector<Observation> observations,
           std::optional<int> reference = std::nullopt);

  int image_count() const { return image_count_; }
  int point_count() const { return point_count_; }
  const std::vector<Observation>& observations() const { return observations_; }
  std::size_t size() const { return observations_.size(); }
  const std::optional<int>& reference() const { return reference_; }

  /// Returns a copy with the reference image replaced (or cleared).
  TrackSet with_reference(std::optional<int> reference) const;

  /// Observation index of (image, point), if observed.
  std::optional<std::size_t> find(int image, int point) const;
  bool observed(int image, int point) const { return find(image, point).has_value(); }
  const Observation& at(int image, int point) const;

  std::vector<std::size_t> observations_in_image(int image) const;
  int views_of_point(int point) const;

  /// Checks the structural invariants: every point is observed in at least two
  /// images and, when a reference is set, in the reference image.
  void validate() const;

  friend bool operator==(const TrackSet& a, const TrackSet& b) {
    return a.image_count_ == b.image_count_ && a.point_count_ == b.point_count_ &&
           a.observations_ == b.observations_ && a.reference_ == b.reference_;
  }

 private:
  int image_count_ = 0;
  int point_count_ = 0;
  std::vector<Observation> observations_;
  std::optional<int> reference_;
  std::vector<int> index_;  // image-major, -1 when unobserved
};

}  // namespace uwsfm
