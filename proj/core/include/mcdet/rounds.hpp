#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "mcdet/formats.hpp"
#include "mcdet/round_config.hpp"

namespace mcdet {

/// Files and counts produced by one round under `<workdir>/round_<i>/`.
struct RoundArtifacts {
  int round = 0;
  std::filesystem::path dir;
  std::filesystem::path dumps_path;         ///< dumps the round consumed
  std::filesystem::path consolidated_path;
  std::filesystem::path pseudo_labels_path;
  std::filesystem::path tiles_path;
  std::filesystem::path metrics_path;
  std::filesystem::path hook_meta_path;     ///< opaque trainer metadata for this round
  std::size_t n_pl = 0;
  std::size_t n_tiles = 0;
};

/// Produces the MC dumps each round consumes. `train` is the hook invoked
/// after a round with that round's artifacts; it returns the next round's
/// dumps (ignored when `final_round`).
class Trainer {
 public:
  virtual ~Trainer() = default;

  virtual std::vector<McDump> initial_dumps() = 0;
  virtual std::vector<McDump> train(const RoundArtifacts& artifacts, bool final_round) = 0;

  /// Ground truth for calibration metrics, when the trainer knows it.
  virtual std::span<const sim::Scene> ground_truth() const { return {}; }
};

/// Regenerates dumps from the simulator with the skill of the next round.
class SimulatedTrainer final : public Trainer {
 public:
  explicit SimulatedTrainer(const RoundConfig& cfg);

  std::vector<McDump> initial_dumps() override;
  std::vector<McDump> train(const RoundArtifacts& artifacts, bool final_round) override;
  std::span<const sim::Scene> ground_truth() const override { return scenes_; }

  /// Skill used for round `round`; the schedule's last value once exhausted.
  double skill_for_round(int round) const noexcept;
  std::vector<McDump> dumps_for_round(int round) const;

 private:
  SimulatedTrainerConfig cfg_;
  int n_passes_;
  std::uint64_t seed_;
  std::vector<sim::Scene> scenes_;
};

/// Invokes a shell command
///   <command> --pseudo-labels <path> --tiles <path> --out-dumps <dir> --round <i> --meta <path>
/// and reads the dumps it writes into <dir>.
class ExternalTrainer final : public Trainer {
 public:
  explicit ExternalTrainer(const RoundConfig& cfg);

  std::vector<McDump> initial_dumps() override;
  std::vector<McDump> train(const RoundArtifacts& artifacts, bool final_round) override;
  std::span<const sim::Scene> ground_truth() const override { return scenes_; }

 private:
  ExternalTrainerConfig cfg_;
  std::vector<sim::Scene> scenes_;
};

std::unique_ptr<Trainer> make_trainer(const RoundConfig& cfg);

struct RunOptions {
  bool overwrite = false;  ///< remove existing round_* directories first
  int jobs = 1;            ///< worker threads for per-image gating
};

/// Runs the adaptation schedule. Round 0 applies only the tile gate; later
/// rounds partition into pseudo-labels and tile anchors. Each round writes
/// its artifacts under `<workdir>/round_<i>/` and then calls the trainer hook.
///
/// Throws PreconditionError for an invalid config, a non-empty round directory
/// (unless overwrite), or dumps with the wrong pass count; TrainerError when
/// the hook fails.
std::vector<RoundArtifacts> run_rounds(const RoundConfig& cfg, Trainer& trainer,
                                       const RunOptions& options = {});

/// Builds the tile spec for one image's tile anchors.
io::TileImage tiles_for(const std::string& image_id, const ImageSize& image,
                        std::span<const ConsolidatedDetection> anchors, double tile_scale);

}  // namespace mcdet
