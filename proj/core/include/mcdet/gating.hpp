#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "mcdet/mc_aggregation.hpp"

namespace mcdet {

enum class GateMode : std::uint8_t {
  /// Every detection that is not a pseudo-label anchors a tile.
  Complement,
  /// Only detections failing both thresholds anchor a tile; the rest are discarded.
  Strict,
};

std::string_view to_string(GateMode mode) noexcept;
bool parse_gate_mode(std::string_view text, GateMode& out) noexcept;

struct GateConfig {
  double kappa1 = 0.5;       ///< uncertainty-score threshold
  double kappa2_frac = 0.5;  ///< consistency threshold as a fraction of n_passes
  int n_passes = 10;
  GateMode mode = GateMode::Complement;
  double tau = 0.5;          ///< confidence-baseline threshold

  /// ceil(kappa2_frac * n_passes), computed so that products such as
  /// 0.3 * 10 do not round up past the intended integer.
  int required_consistency() const noexcept;

  friend bool operator==(const GateConfig&, const GateConfig&) = default;
};

/// Throws PreconditionError unless every threshold lies in [0, 1] and n_passes >= 1.
void validate(const GateConfig& cfg);

/// Pseudo-label gate: p >= kappa1 and consistency >= ceil(kappa2_frac * N).
bool ugpl_gate(const ConsolidatedDetection& d, const GateConfig& cfg);

/// Tile gate. Complement mode negates ugpl_gate; strict mode requires
/// p < kappa1 and consistency < ceil(kappa2_frac * N).
bool ugt_gate(const ConsolidatedDetection& d, const GateConfig& cfg);

/// Single-pass confidence baseline: score >= tau.
bool confidence_gate(const Detection& d, double tau);

enum class Verdict : std::uint8_t { PseudoLabel, TileAnchor, Discard };

std::string_view to_string(Verdict v) noexcept;

Verdict decide(const ConsolidatedDetection& d, const GateConfig& cfg);

struct Partition {
  std::vector<ConsolidatedDetection> pseudo_labels;
  std::vector<ConsolidatedDetection> tile_anchors;
  std::vector<ConsolidatedDetection> discards;
};

/// Splits one image's detections by verdict, preserving input order within
/// each list.
Partition partition(const std::vector<ConsolidatedDetection>& dets, const GateConfig& cfg);

}  // namespace mcdet
