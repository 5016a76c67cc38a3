#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "mcdet/gating.hpp"
#include "mcdet/mc_aggregation.hpp"
#include "mcdet/simulator.hpp"

namespace mcdet {

enum class TrainerKind : std::uint8_t { Simulated, External };

struct SimulatedTrainerConfig {
  /// Detector skill per round; the last value is reused once exhausted.
  std::vector<double> skill_schedule{0.3, 0.5, 0.7};
  int n_images = 100;
  sim::SceneParams scene;
  sim::DetectorProfile profile;  ///< `skill` is overridden by the schedule

  friend bool operator==(const SimulatedTrainerConfig&, const SimulatedTrainerConfig&) = default;
};

struct ExternalTrainerConfig {
  /// Shell command; the orchestrator appends the hook flags.
  std::string command;
  /// Dumps of the source-trained model, consumed by round 0.
  std::filesystem::path initial_dumps;
  /// Optional ground truth enabling calibration metrics.
  std::filesystem::path ground_truth;

  friend bool operator==(const ExternalTrainerConfig&, const ExternalTrainerConfig&) = default;
};

struct RoundConfig {
  int n_rounds = 3;
  int n_passes = 10;
  double gamma = 0.5;
  GateConfig gate;  ///< gate.n_passes mirrors n_passes
  UncertaintyMode uncertainty_mode = UncertaintyMode::AnchorInclusive;
  double tile_scale = 5.0;
  int ece_bins = 10;
  double ece_iou_thr = 0.5;
  std::uint64_t seed = 0;
  std::filesystem::path workdir = "mcdet_work";
  TrainerKind trainer = TrainerKind::Simulated;
  SimulatedTrainerConfig simulated;
  ExternalTrainerConfig external;
  /// Trainer iterations per round; opaque to the orchestrator.
  std::vector<long long> iterations{5000, 10000, 10000};
  /// Further opaque trainer settings (learning rate, batch size, ...).
  std::map<std::string, std::string> metadata;

  friend bool operator==(const RoundConfig&, const RoundConfig&) = default;
};

/// Throws PreconditionError on any invalid field.
void validate(const RoundConfig& cfg);

/// Parses the `key = value` config format. Lines starting with '#' are
/// comments; unknown or repeated keys are errors (ParseError with line).
RoundConfig parse_round_config(const std::string& text, const std::string& source = "<config>");
RoundConfig load_round_config(const std::filesystem::path& path);

/// Emits every field in the config format; parse_round_config inverts it.
std::string emit_round_config(const RoundConfig& cfg);

/// Applies MCDET_WORKDIR and MCDET_SEED when set in the environment.
void apply_env_overrides(RoundConfig& cfg);

}  // namespace mcdet
