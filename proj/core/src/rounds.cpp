#include "mcdet/rounds.hpp"

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "json.hpp"
#include "mcdet/errors.hpp"
#include "mcdet/parallel.hpp"
#include "mcdet/random.hpp"

namespace mcdet {

namespace fs = std::filesystem;

namespace {

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') {
      out += "'\\''";
    } else {
      out += c;
    }
  }
  return out + "'";
}

std::string round_dir_name(int round) { return "round_" + std::to_string(round); }

std::vector<sim::Scene> load_ground_truth(const fs::path& path) {
  if (path.empty()) return {};
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return io::read_ground_truth(in, path.string());
}

struct ImageResult {
  std::vector<ConsolidatedDetection> consolidated;
  Partition parts;
};

void prepare_workdir(const RoundConfig& cfg, bool overwrite) {
  fs::create_directories(cfg.workdir);
  for (const auto& entry : fs::directory_iterator(cfg.workdir)) {
    const std::string name = entry.path().filename().string();
    if (!entry.is_directory() || name.rfind("round_", 0) != 0) continue;
    if (!overwrite) {
      throw PreconditionError("workdir " + cfg.workdir.string() + " already holds " + name +
                              "; pass overwrite to replace earlier runs");
    }
    fs::remove_all(entry.path());
  }
}

void write_hook_meta(const fs::path& path, const RoundConfig& cfg, int round) {
  nlohmann::ordered_json j;
  j["round"] = round;
  if (!cfg.iterations.empty()) {
    j["iterations"] = cfg.iterations[std::min<std::size_t>(static_cast<std::size_t>(round), cfg.iterations.size() - 1)];
  }
  j["metadata"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : cfg.metadata) j["metadata"][k] = v;
  io::write_text_file(path, j.dump(2) + "\n");
}

}  // namespace

io::TileImage tiles_for(const std::string& image_id, const ImageSize& image,
                        std::span<const ConsolidatedDetection> anchors, double tile_scale) {
  io::TileImage out{image_id, image, {}};
  out.tiles.reserve(anchors.size());
  for (const auto& a : anchors) out.tiles.push_back({tile_around(a.bbox, image, tile_scale), a.anchor});
  return out;
}

// ---------------------------------------------------------------------------

SimulatedTrainer::SimulatedTrainer(const RoundConfig& cfg)
    : cfg_(cfg.simulated), n_passes_(cfg.n_passes), seed_(cfg.seed) {
  scenes_ = sim::gen_scenes(derive_seed(seed_, {0x5ce7e5}), cfg_.n_images, cfg_.scene);
}

double SimulatedTrainer::skill_for_round(int round) const noexcept {
  if (cfg_.skill_schedule.empty()) return cfg_.profile.skill;
  const auto i = std::min<std::size_t>(static_cast<std::size_t>(std::max(0, round)),
                                       cfg_.skill_schedule.size() - 1);
  return cfg_.skill_schedule[i];
}

std::vector<McDump> SimulatedTrainer::dumps_for_round(int round) const {
  sim::DetectorProfile profile = cfg_.profile;
  profile.skill = skill_for_round(round);
  std::vector<McDump> dumps;
  dumps.reserve(scenes_.size());
  for (std::size_t i = 0; i < scenes_.size(); ++i) {
    dumps.push_back(sim::simulate_mc_dump(scenes_[i], profile, n_passes_,
                                          derive_seed(seed_, {0xd0, static_cast<std::uint64_t>(round), i})));
  }
  return dumps;
}

std::vector<McDump> SimulatedTrainer::initial_dumps() { return dumps_for_round(0); }

std::vector<McDump> SimulatedTrainer::train(const RoundArtifacts& artifacts, bool final_round) {
  if (final_round) return {};
  return dumps_for_round(artifacts.round + 1);
}

// ---------------------------------------------------------------------------

ExternalTrainer::ExternalTrainer(const RoundConfig& cfg)
    : cfg_(cfg.external), scenes_(load_ground_truth(cfg.external.ground_truth)) {}

std::vector<McDump> ExternalTrainer::initial_dumps() { return io::read_dumps_path(cfg_.initial_dumps); }

std::vector<McDump> ExternalTrainer::train(const RoundArtifacts& a, bool final_round) {
  const fs::path out_dir = a.dir / "next_dumps";
  std::ostringstream cmd;
  cmd << cfg_.command << " --pseudo-labels " << shell_quote(a.pseudo_labels_path.string())
      << " --tiles " << shell_quote(a.tiles_path.string()) << " --out-dumps "
      << shell_quote(out_dir.string()) << " --round " << a.round << " --meta "
      << shell_quote(a.hook_meta_path.string());
  const int status = std::system(cmd.str().c_str());
  if (status == -1) throw TrainerError(a.round, "could not launch trainer command");
  if (!WIFEXITED(status)) throw TrainerError(a.round, "trainer command terminated abnormally");
  if (WEXITSTATUS(status) != 0) {
    throw TrainerError(a.round, "trainer command exited with status " + std::to_string(WEXITSTATUS(status)));
  }
  if (final_round) return {};
  if (!fs::is_directory(out_dir)) {
    throw TrainerError(a.round, "trainer did not create the dump directory " + out_dir.string());
  }
  auto dumps = io::read_dumps_path(out_dir);
  if (dumps.empty()) throw TrainerError(a.round, "trainer wrote no dumps into " + out_dir.string());
  return dumps;
}

std::unique_ptr<Trainer> make_trainer(const RoundConfig& cfg) {
  if (cfg.trainer == TrainerKind::Simulated) return std::make_unique<SimulatedTrainer>(cfg);
  return std::make_unique<ExternalTrainer>(cfg);
}

// ---------------------------------------------------------------------------

std::vector<RoundArtifacts> run_rounds(const RoundConfig& cfg, Trainer& trainer, const RunOptions& options) {
  validate(cfg);
  prepare_workdir(cfg, options.overwrite);

  std::unordered_map<std::string, const sim::Scene*> truth;
  for (const auto& s : trainer.ground_truth()) truth.emplace(s.image_id, &s);

  std::vector<RoundArtifacts> history;
  std::vector<McDump> dumps = trainer.initial_dumps();
  for (int round = 0; round < cfg.n_rounds; ++round) {
    for (const auto& d : dumps) {
      validate(d);
      if (d.n_passes() != cfg.n_passes) {
        throw PreconditionError("round " + std::to_string(round) + ": dump " + d.image_id + " has " +
                                std::to_string(d.n_passes()) + " passes, expected " +
                                std::to_string(cfg.n_passes));
      }
    }

    RoundArtifacts art;
    art.round = round;
    art.dir = cfg.workdir / round_dir_name(round);
    art.dumps_path = art.dir / "dumps.jsonl";
    art.consolidated_path = art.dir / "consolidated.jsonl";
    art.pseudo_labels_path = art.dir / "pseudo_labels.json";
    art.tiles_path = art.dir / "tiles.json";
    art.metrics_path = art.dir / "metrics.json";
    art.hook_meta_path = art.dir / "hook.json";
    fs::create_directories(art.dir);

    std::vector<ImageResult> results(dumps.size());
    parallel_for(dumps.size(), options.jobs, [&](std::size_t i) {
      auto& r = results[i];
      r.consolidated = aggregate(dumps[i], cfg.gamma, cfg.uncertainty_mode);
      if (round == 0) {
        for (const auto& d : r.consolidated) {
          if (ugt_gate(d, cfg.gate)) {
            r.parts.tile_anchors.push_back(d);
          } else {
            r.parts.discards.push_back(d);
          }
        }
      } else {
        r.parts = partition(r.consolidated, cfg.gate);
      }
    });

    std::ostringstream consolidated_out;
    io::write_consolidated_header(consolidated_out, {cfg.n_passes, cfg.gamma, cfg.uncertainty_mode});
    std::vector<io::PseudoLabelImage> pl_images;
    io::TileSpecFile tile_file{cfg.tile_scale, {}};
    io::SelectionCounts counts;
    std::vector<MatchedPrediction> matched_all;
    std::vector<MatchedPrediction> matched_pl;
    sim::PlMetrics quality;

    for (std::size_t i = 0; i < dumps.size(); ++i) {
      const auto& d = dumps[i];
      const auto& r = results[i];
      io::write_consolidated(consolidated_out, {d.image_id, d.image, r.consolidated});
      pl_images.push_back({d.image_id, d.image, r.parts.pseudo_labels});
      tile_file.images.push_back(tiles_for(d.image_id, d.image, r.parts.tile_anchors, cfg.tile_scale));
      counts.consolidated += r.consolidated.size();
      counts.pseudo_labels += r.parts.pseudo_labels.size();
      counts.tile_anchors += r.parts.tile_anchors.size();
      counts.discards += r.parts.discards.size();

      if (auto it = truth.find(d.image_id); it != truth.end()) {
        const auto& scene = *it->second;
        const auto all = as_predictions(r.consolidated);
        const auto m_all = match_for_accuracy(all, scene.objects, cfg.ece_iou_thr);
        matched_all.insert(matched_all.end(), m_all.begin(), m_all.end());
        const auto pl = as_predictions(r.parts.pseudo_labels);
        const auto m_pl = match_for_accuracy(pl, scene.objects, cfg.ece_iou_thr);
        matched_pl.insert(matched_pl.end(), m_pl.begin(), m_pl.end());
        quality += sim::oracle_pl_metrics(std::span<const Detection>(pl), scene, cfg.ece_iou_thr);
      }
    }

    io::MetricsFile metrics;
    metrics.round = round;
    metrics.selection = counts;
    if (!truth.empty()) {
      if (!matched_all.empty()) metrics.ece = expected_calibration_error(matched_all, cfg.ece_bins);
      if (!matched_pl.empty()) metrics.ece_selected = expected_calibration_error(matched_pl, cfg.ece_bins);
      metrics.pl_quality = io::to_quality(quality);
    }

    std::ostringstream dumps_out, pl_out, tiles_out, metrics_out;
    io::write_dumps(dumps_out, dumps, cfg.n_passes);
    io::write_pseudo_labels(pl_out, pl_images);
    io::write_tiles(tiles_out, tile_file);
    io::write_metrics(metrics_out, metrics);
    io::write_text_file(art.dumps_path, dumps_out.str());
    io::write_text_file(art.consolidated_path, consolidated_out.str());
    io::write_text_file(art.pseudo_labels_path, pl_out.str());
    io::write_text_file(art.tiles_path, tiles_out.str());
    io::write_text_file(art.metrics_path, metrics_out.str());
    write_hook_meta(art.hook_meta_path, cfg, round);
    art.n_pl = counts.pseudo_labels;
    art.n_tiles = counts.tile_anchors;
    history.push_back(art);

    const bool final_round = round + 1 == cfg.n_rounds;
    dumps = trainer.train(art, final_round);
  }
  return history;
}

}  // namespace mcdet
