#include "mcdet/gating.hpp"

#include <cmath>

#include "mcdet/errors.hpp"

namespace mcdet {

namespace {

bool unit_interval(double v) { return v >= 0.0 && v <= 1.0; }

void check_consistency(const ConsolidatedDetection& d, const GateConfig& cfg) {
  if (d.consistency > cfg.n_passes) {
    throw PreconditionError("gate: detection consistency exceeds n_passes");
  }
}

}  // namespace

std::string_view to_string(GateMode mode) noexcept {
  return mode == GateMode::Complement ? "complement" : "strict";
}

bool parse_gate_mode(std::string_view text, GateMode& out) noexcept {
  if (text == "complement") {
    out = GateMode::Complement;
  } else if (text == "strict") {
    out = GateMode::Strict;
  } else {
    return false;
  }
  return true;
}

int GateConfig::required_consistency() const noexcept {
  return static_cast<int>(std::ceil(kappa2_frac * n_passes - 1e-9));
}

void validate(const GateConfig& cfg) {
  if (!unit_interval(cfg.kappa1)) throw PreconditionError("gate: kappa1 must lie in [0, 1]");
  if (!unit_interval(cfg.kappa2_frac)) throw PreconditionError("gate: kappa2_frac must lie in [0, 1]");
  if (!unit_interval(cfg.tau)) throw PreconditionError("gate: tau must lie in [0, 1]");
  if (cfg.n_passes < 1) throw PreconditionError("gate: n_passes must be >= 1");
}

bool ugpl_gate(const ConsolidatedDetection& d, const GateConfig& cfg) {
  check_consistency(d, cfg);
  return d.uncertainty >= cfg.kappa1 && d.consistency >= cfg.required_consistency();
}

bool ugt_gate(const ConsolidatedDetection& d, const GateConfig& cfg) {
  if (cfg.mode == GateMode::Complement) return !ugpl_gate(d, cfg);
  check_consistency(d, cfg);
  return d.uncertainty < cfg.kappa1 && d.consistency < cfg.required_consistency();
}

bool confidence_gate(const Detection& d, double tau) { return d.score >= tau; }

std::string_view to_string(Verdict v) noexcept {
  switch (v) {
    case Verdict::PseudoLabel: return "pseudo-label";
    case Verdict::TileAnchor: return "tile-anchor";
    case Verdict::Discard: return "discard";
  }
  return "unknown";
}

Verdict decide(const ConsolidatedDetection& d, const GateConfig& cfg) {
  if (ugpl_gate(d, cfg)) return Verdict::PseudoLabel;
  if (ugt_gate(d, cfg)) return Verdict::TileAnchor;
  return Verdict::Discard;
}

Partition partition(const std::vector<ConsolidatedDetection>& dets, const GateConfig& cfg) {
  validate(cfg);
  Partition out;
  for (const auto& d : dets) {
    switch (decide(d, cfg)) {
      case Verdict::PseudoLabel: out.pseudo_labels.push_back(d); break;
      case Verdict::TileAnchor: out.tile_anchors.push_back(d); break;
      case Verdict::Discard: out.discards.push_back(d); break;
    }
  }
  return out;
}

}  // namespace mcdet
