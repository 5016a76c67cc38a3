#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mcdet/geometry.hpp"

namespace mcdet {

/// One predicted box. `score` is the top-1 class probability; when `probs`
/// is present it is the full class-probability vector and `score` must equal
/// its maximum.
struct Detection {
  BBox bbox;
  int class_id = 0;
  double score = 0.0;
  std::optional<std::vector<double>> probs;

  friend bool operator==(const Detection&, const Detection&) = default;
};

/// Throws PreconditionError if the detection breaks its invariants.
void validate(const Detection& det);

/// All detections from the N stochastic inference passes over one image.
/// `passes.size()` is N.
struct McDump {
  std::string image_id;
  ImageSize image;
  std::vector<std::vector<Detection>> passes;

  int n_passes() const noexcept { return static_cast<int>(passes.size()); }
  std::size_t detection_count() const noexcept;

  friend bool operator==(const McDump&, const McDump&) = default;
};

/// Throws PreconditionError unless N >= 1, every detection is valid, and
/// every box lies inside the image.
void validate(const McDump& dump);

/// Position of a detection inside its dump.
struct DetectionRef {
  int pass = 0;
  int index = 0;

  friend auto operator<=>(const DetectionRef&, const DetectionRef&) = default;
};

struct ClusterMember {
  DetectionRef ref;
  Detection detection;

  friend bool operator==(const ClusterMember&, const ClusterMember&) = default;
};

/// An anchor detection plus at most one same-class detection from each other
/// pass whose IoU with the anchor exceeds `gamma`. Members are ordered by pass.
struct Cluster {
  ClusterMember anchor;
  std::vector<ClusterMember> members;
  double gamma = 0.5;

  int consistency() const noexcept { return 1 + static_cast<int>(members.size()); }

  friend bool operator==(const Cluster&, const Cluster&) = default;
};

/// Groups detections across passes. Anchors are taken in descending score
/// order (ties: lower pass, then lower index). Each unconsumed detection
/// becomes an anchor and, from every other pass, claims the unconsumed
/// same-class detection with the highest IoU > gamma (ties: lower index).
/// Every input detection ends up in exactly one cluster.
std::vector<Cluster> build_clusters(const McDump& dump, double gamma);

enum class UncertaintyMode : std::uint8_t {
  /// Mean score over the anchor and its members.
  AnchorInclusive,
  /// Mean score over the members only; a singleton falls back to its anchor score.
  AnchorExclusive,
};

std::string_view to_string(UncertaintyMode mode) noexcept;
bool parse_uncertainty_mode(std::string_view text, UncertaintyMode& out) noexcept;

/// Mean confidence of the cluster; higher means more certain.
double uncertainty(const Cluster& cluster, UncertaintyMode mode = UncertaintyMode::AnchorInclusive);

/// One object hypothesis distilled from a cluster.
struct ConsolidatedDetection {
  BBox bbox;
  int class_id = 0;
  double uncertainty = 0.0;
  int consistency = 1;
  DetectionRef anchor;

  friend bool operator==(const ConsolidatedDetection&, const ConsolidatedDetection&) = default;
};

/// One consolidated detection per cluster, with the coordinate-wise mean box.
/// Sorted by descending uncertainty score; ties by class id, then anchor ref.
std::vector<ConsolidatedDetection> consolidate(
    const std::vector<Cluster>& clusters, int n_passes,
    UncertaintyMode mode = UncertaintyMode::AnchorInclusive);

/// build_clusters followed by consolidate.
std::vector<ConsolidatedDetection> aggregate(
    const McDump& dump, double gamma, UncertaintyMode mode = UncertaintyMode::AnchorInclusive);

}  // namespace mcdet
