// mcdet: MC-dropout detection post-processing.
//
//   mcdet simulate    --out-dumps d.jsonl --out-gt gt.json
//   mcdet cluster     --in d.jsonl --out c.jsonl
//   mcdet select      --in c.jsonl --out-pl pl.json --out-tiles anchors.jsonl
//   mcdet tile        --in anchors.jsonl --out tiles.json
//   mcdet ece         --preds c.jsonl --gt gt.json --out metrics.json
//   mcdet run-rounds  --config rounds.cfg

#include <iostream>

#include "CLI11.hpp"
#include "commands.hpp"
#include "mcdet/errors.hpp"

namespace {

using namespace mcdet;

void add_gate_flags(CLI::App& cmd, GateConfig& gate, std::string& mode, CLI::Option*& n_passes) {
  cmd.add_option("--kappa1", gate.kappa1, "Uncertainty-score threshold")->capture_default_str();
  cmd.add_option("--kappa2-frac", gate.kappa2_frac, "Consistency threshold as a fraction of N")
      ->capture_default_str();
  cmd.add_option("--mode", mode, "Tile gate: complement or strict")
      ->check(CLI::IsMember({"complement", "strict"}))
      ->capture_default_str();
  n_passes = cmd.add_option("--n-passes", gate.n_passes, "Number of MC passes (default: from the input header)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Uncertainty-guided pseudo-labels and tiles from MC-dropout detection dumps"};
  app.require_subcommand(1);

  cli::ClusterOptions cluster;
  std::string cluster_mode = "anchor-inclusive";
  auto* c_cluster = app.add_subcommand("cluster", "Cluster MC passes into consolidated detections");
  c_cluster->add_option("--in", cluster.in, "Dump file (JSONL)")->required();
  c_cluster->add_option("--out", cluster.out, "Consolidated detections (JSONL)")->required();
  c_cluster->add_option("--gamma", cluster.gamma, "IoU threshold for cross-pass matching")->capture_default_str();
  c_cluster->add_option("--uncertainty-mode", cluster_mode, "anchor-inclusive or anchor-exclusive")
      ->check(CLI::IsMember({"anchor-inclusive", "anchor-exclusive"}))
      ->capture_default_str();
  c_cluster->add_option("--jobs", cluster.jobs, "Worker threads")->capture_default_str();

  cli::SelectOptions select;
  std::string select_mode = "complement";
  CLI::Option* select_passes = nullptr;
  auto* c_select = app.add_subcommand("select", "Gate consolidated detections into pseudo-labels and tile anchors");
  c_select->add_option("--in", select.in, "Consolidated detections (JSONL)")->required();
  c_select->add_option("--out-pl", select.out_pl, "Pseudo-label file (JSON)")->required();
  c_select->add_option("--out-tiles", select.out_tiles, "Tile anchors (consolidated JSONL)")->required();
  c_select->add_option("--out-discards", select.out_discards, "Discarded detections (strict mode)");
  add_gate_flags(*c_select, select.gate, select_mode, select_passes);

  cli::TileOptions tile;
  auto* c_tile = app.add_subcommand("tile", "Turn tile anchors into square crop specs");
  c_tile->add_option("--in", tile.in, "Tile anchors (consolidated JSONL)")->required();
  c_tile->add_option("--out", tile.out, "Tile spec file (JSON)")->required();
  c_tile->add_option("--scale", tile.scale, "Tile side as a multiple of the box's longer side")->capture_default_str();
  c_tile->add_option("--strategy", tile.strategy, "uncertain, random-baseline or full-image")
      ->check(CLI::IsMember({"uncertain", "random-baseline", "full-image"}))
      ->capture_default_str();
  c_tile->add_option("--seed", tile.seed, "Seed for random-baseline tiles")->capture_default_str();
  c_tile->add_option("--min-area-frac", tile.min_area_frac, "Minimum area fraction of random-baseline tiles")
      ->capture_default_str();

  cli::SourceTileOptions source;
  auto* c_source = app.add_subcommand("source-tiles", "Random square tiles around ground-truth boxes");
  c_source->add_option("--gt", source.gt, "Ground truth (JSON)")->required();
  c_source->add_option("--out", source.out, "Tile spec file (JSON)")->required();
  c_source->add_option("--scale-min", source.scale_min)->capture_default_str();
  c_source->add_option("--scale-max", source.scale_max)->capture_default_str();
  c_source->add_option("--seed", source.seed)->capture_default_str();

  cli::EceOptions ece;
  std::string ece_mode = "complement";
  CLI::Option* ece_passes = nullptr;
  auto* c_ece = app.add_subcommand("ece", "Detection calibration error against ground truth");
  c_ece->add_option("--preds", ece.preds, "Dump or consolidated detections (JSONL)")->required();
  c_ece->add_option("--gt", ece.gt, "Ground truth (JSON)")->required();
  c_ece->add_option("--out", ece.out, "Metrics file (JSON)")->required();
  c_ece->add_option("--bins", ece.bins, "Number of equal-width bins")->capture_default_str();
  c_ece->add_option("--iou-thr", ece.iou_thr, "IoU needed for a correct prediction")->capture_default_str();
  c_ece->add_option("--pass", ece.pass, "Only this pass of a dump (-1: all)")->capture_default_str();
  c_ece->add_option("--reliability-csv", ece.reliability_csv, "Write reliability-diagram rows here");
  add_gate_flags(*c_ece, ece.gate, ece_mode, ece_passes);

  cli::SimulateOptions simulate;
  auto* c_sim = app.add_subcommand("simulate", "Synthetic scenes and noisy MC dumps");
  c_sim->add_option("--seed", simulate.seed)->capture_default_str();
  c_sim->add_option("--n-images", simulate.n_images)->capture_default_str();
  c_sim->add_option("--n-passes", simulate.n_passes)->capture_default_str();
  c_sim->add_option("--width", simulate.scene.image.width)->capture_default_str();
  c_sim->add_option("--height", simulate.scene.image.height)->capture_default_str();
  c_sim->add_option("--n-classes", simulate.scene.n_classes)->capture_default_str();
  c_sim->add_option("--min-objects", simulate.scene.min_objects)->capture_default_str();
  c_sim->add_option("--max-objects", simulate.scene.max_objects)->capture_default_str();
  c_sim->add_option("--min-size", simulate.scene.min_size)->capture_default_str();
  c_sim->add_option("--max-size", simulate.scene.max_size)->capture_default_str();
  c_sim->add_option("--sigma", simulate.profile.localization_sigma, "Corner jitter std-dev (px)")
      ->capture_default_str();
  c_sim->add_option("--miss-rate", simulate.profile.miss_rate)->capture_default_str();
  c_sim->add_option("--fp-rate", simulate.profile.false_positive_rate)->capture_default_str();
  c_sim->add_option("--bias", simulate.profile.confidence_bias, "Confidence logit shift")->capture_default_str();
  c_sim->add_option("--confusion", simulate.profile.class_confusion)->capture_default_str();
  c_sim->add_option("--skill", simulate.profile.skill)->capture_default_str();
  c_sim->add_option("--out-dumps", simulate.out_dumps, "Dump file (JSONL)")->required();
  c_sim->add_option("--out-gt", simulate.out_gt, "Ground truth (JSON)");

  cli::RunRoundsOptions rounds;
  auto* c_rounds = app.add_subcommand("run-rounds", "Run the multi-round adaptation schedule");
  c_rounds->add_option("--config", rounds.config, "Round config (key = value)")->required();
  c_rounds->add_flag("--overwrite", rounds.overwrite, "Replace existing round directories");
  c_rounds->add_option("--jobs", rounds.jobs, "Worker threads")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? cli::kOk : cli::kPreconditionFailure;
  }

  try {
    if (c_cluster->parsed()) {
      parse_uncertainty_mode(cluster_mode, cluster.mode);
      cli::cluster(cluster);
    } else if (c_select->parsed()) {
      parse_gate_mode(select_mode, select.gate.mode);
      select.n_passes_given = select_passes->count() > 0;
      cli::select(select);
    } else if (c_tile->parsed()) {
      cli::tile(tile);
    } else if (c_source->parsed()) {
      cli::source_tiles(source);
    } else if (c_ece->parsed()) {
      parse_gate_mode(ece_mode, ece.gate.mode);
      ece.n_passes_given = ece_passes->count() > 0;
      cli::ece(ece);
    } else if (c_sim->parsed()) {
      cli::simulate(simulate);
    } else if (c_rounds->parsed()) {
      cli::run_rounds(rounds);
    }
  } catch (const ParseError& e) {
    std::cerr << "mcdet: parse error: " << e.what() << '\n';
    return cli::kParseFailure;
  } catch (const PreconditionError& e) {
    std::cerr << "mcdet: " << e.what() << '\n';
    return cli::kPreconditionFailure;
  } catch (const TrainerError& e) {
    std::cerr << "mcdet: trainer failure: " << e.what() << '\n';
    return cli::kTrainerFailure;
  } catch (const std::exception& e) {
    std::cerr << "mcdet: " << e.what() << '\n';
    return cli::kIoFailure;
  }
  return cli::kOk;
}
