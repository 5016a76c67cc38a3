#include "commands.hpp"

#include <fstream>
#include <iostream>
#include <sstream>
#include <unordered_map>

#include "mcdet/errors.hpp"
#include "mcdet/formats.hpp"
#include "mcdet/parallel.hpp"
#include "mcdet/random.hpp"
#include "mcdet/rounds.hpp"

namespace mcdet::cli {

namespace fs = std::filesystem;

namespace {

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open input " + path);
  return in;
}

std::ofstream open_output(const std::string& path) {
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open output " + path);
  return out;
}

void finish(std::ofstream& out, const std::string& path) {
  out.flush();
  if (!out) throw std::runtime_error("write failed for " + path);
}

std::vector<sim::Scene> load_gt(const std::string& path) {
  auto in = open_input(path);
  return io::read_ground_truth(in, path);
}

std::unordered_map<std::string, const sim::Scene*> index_scenes(const std::vector<sim::Scene>& scenes) {
  std::unordered_map<std::string, const sim::Scene*> out;
  for (const auto& s : scenes) out.emplace(s.image_id, &s);
  return out;
}

const sim::Scene& scene_for(const std::unordered_map<std::string, const sim::Scene*>& idx,
                            const std::string& image_id) {
  auto it = idx.find(image_id);
  if (it == idx.end()) throw PreconditionError("no ground truth for image '" + image_id + "'");
  return *it->second;
}

GateConfig resolve_gate(GateConfig gate, bool n_passes_given, int header_passes) {
  if (!n_passes_given) gate.n_passes = header_passes;
  validate(gate);
  return gate;
}

}  // namespace

void cluster(const ClusterOptions& o) {
  if (!(o.gamma >= 0.0 && o.gamma < 1.0)) throw PreconditionError("--gamma must lie in [0, 1)");
  auto in = open_input(o.in);
  io::DumpReader reader(in, o.in);
  auto out = open_output(o.out);
  if (!reader.has_header()) {
    finish(out, o.out);
    return;
  }
  io::write_consolidated_header(out, {reader.n_passes(), o.gamma, o.mode});

  // Bounded batches: at most `jobs` images are held in memory at once.
  const std::size_t batch = static_cast<std::size_t>(std::max(1, o.jobs));
  std::vector<McDump> dumps;
  std::vector<std::vector<ConsolidatedDetection>> results;
  for (;;) {
    dumps.clear();
    while (dumps.size() < batch) {
      auto d = reader.next();
      if (!d) break;
      dumps.push_back(std::move(*d));
    }
    if (dumps.empty()) break;
    results.assign(dumps.size(), {});
    parallel_for(dumps.size(), o.jobs,
                 [&](std::size_t i) { results[i] = aggregate(dumps[i], o.gamma, o.mode); });
    for (std::size_t i = 0; i < dumps.size(); ++i) {
      io::write_consolidated(out, {dumps[i].image_id, dumps[i].image, results[i]});
    }
  }
  finish(out, o.out);
}

void select(const SelectOptions& o) {
  auto in = open_input(o.in);
  io::ConsolidatedReader reader(in, o.in);
  auto tiles_out = open_output(o.out_tiles);
  std::ofstream discards_out;
  if (!o.out_discards.empty()) discards_out = open_output(o.out_discards);

  std::vector<io::PseudoLabelImage> labels;
  if (reader.has_header()) {
    const GateConfig gate = resolve_gate(o.gate, o.n_passes_given, reader.header().n_passes);
    io::ConsolidatedHeader header = reader.header();
    header.n_passes = gate.n_passes;
    io::write_consolidated_header(tiles_out, header);
    if (discards_out.is_open()) io::write_consolidated_header(discards_out, header);
    while (auto img = reader.next()) {
      Partition parts = partition(img->detections, gate);
      labels.push_back({img->image_id, img->image, std::move(parts.pseudo_labels)});
      io::write_consolidated(tiles_out, {img->image_id, img->image, std::move(parts.tile_anchors)});
      if (discards_out.is_open()) {
        io::write_consolidated(discards_out, {img->image_id, img->image, std::move(parts.discards)});
      }
    }
  } else {
    validate(o.gate);
  }
  finish(tiles_out, o.out_tiles);
  if (discards_out.is_open()) finish(discards_out, o.out_discards);

  std::ostringstream pl;
  io::write_pseudo_labels(pl, labels);
  io::write_text_file(o.out_pl, pl.str());
}

void tile(const TileOptions& o) {
  if (!(o.scale >= 1.0)) throw PreconditionError("--scale must be >= 1");
  if (o.strategy != "uncertain" && o.strategy != "random-baseline" && o.strategy != "full-image") {
    throw PreconditionError("--strategy must be uncertain, random-baseline or full-image");
  }
  auto in = open_input(o.in);
  io::ConsolidatedReader reader(in, o.in);
  io::TileSpecFile file{o.scale, {}};
  std::uint64_t image_index = 0;
  while (auto img = reader.next()) {
    if (o.strategy == "uncertain") {
      file.images.push_back(tiles_for(img->image_id, img->image, img->detections, o.scale));
    } else if (o.strategy == "random-baseline") {
      io::TileImage ti{img->image_id, img->image, {}};
      for (std::size_t k = 0; k < img->detections.size(); ++k) {
        const auto seed = derive_seed(o.seed, {image_index, k});
        ti.tiles.push_back({random_baseline_tile(img->image, seed, o.min_area_frac), img->detections[k].anchor});
      }
      file.images.push_back(std::move(ti));
    } else {
      io::TileImage ti{img->image_id, img->image, {}};
      if (!img->detections.empty()) ti.tiles.push_back({full_image_tile(img->image), std::nullopt});
      file.images.push_back(std::move(ti));
    }
    ++image_index;
  }
  std::ostringstream text;
  io::write_tiles(text, file);
  io::write_text_file(o.out, text.str());
}

void source_tiles(const SourceTileOptions& o) {
  const auto scenes = load_gt(o.gt);
  io::TileSpecFile file{o.scale_min, {}};
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    const auto& s = scenes[i];
    io::TileImage ti{s.image_id, s.image, {}};
    for (std::size_t k = 0; k < s.objects.size(); ++k) {
      const auto seed = derive_seed(o.seed, {i, k});
      ti.tiles.push_back({random_source_tile(s.objects[k].bbox, s.image, seed, {o.scale_min, o.scale_max}),
                          std::nullopt});
    }
    file.images.push_back(std::move(ti));
  }
  std::ostringstream text;
  io::write_tiles(text, file);
  io::write_text_file(o.out, text.str());
}

void ece(const EceOptions& o) {
  if (o.bins < 1) throw PreconditionError("--bins must be >= 1");
  if (!(o.iou_thr > 0.0 && o.iou_thr < 1.0)) throw PreconditionError("--iou-thr must lie in (0, 1)");
  const auto scenes = load_gt(o.gt);
  const auto idx = index_scenes(scenes);
  const std::string schema = io::sniff_schema(o.preds);

  io::MetricsFile metrics;
  std::vector<MatchedPrediction> all;
  if (schema == io::kDumpSchema) {
    auto in = open_input(o.preds);
    io::DumpReader reader(in, o.preds);
    if (o.pass >= reader.n_passes()) throw PreconditionError("--pass exceeds the dump's pass count");
    while (auto d = reader.next()) {
      const auto& scene = scene_for(idx, d->image_id);
      for (int n = 0; n < d->n_passes(); ++n) {
        if (o.pass >= 0 && n != o.pass) continue;
        const auto m = match_for_accuracy(d->passes[static_cast<std::size_t>(n)], scene.objects, o.iou_thr);
        all.insert(all.end(), m.begin(), m.end());
      }
    }
  } else if (schema == io::kConsolidatedSchema) {
    auto in = open_input(o.preds);
    io::ConsolidatedReader reader(in, o.preds);
    const GateConfig gate = resolve_gate(o.gate, o.n_passes_given, reader.header().n_passes);
    std::vector<MatchedPrediction> selected;
    io::SelectionCounts counts;
    sim::PlMetrics quality;
    while (auto img = reader.next()) {
      const auto& scene = scene_for(idx, img->image_id);
      const auto preds = as_predictions(img->detections);
      const auto m = match_for_accuracy(preds, scene.objects, o.iou_thr);
      all.insert(all.end(), m.begin(), m.end());

      const Partition parts = partition(img->detections, gate);
      counts.consolidated += img->detections.size();
      counts.pseudo_labels += parts.pseudo_labels.size();
      counts.tile_anchors += parts.tile_anchors.size();
      counts.discards += parts.discards.size();
      const auto pl = as_predictions(parts.pseudo_labels);
      const auto ms = match_for_accuracy(pl, scene.objects, o.iou_thr);
      selected.insert(selected.end(), ms.begin(), ms.end());
      quality += sim::oracle_pl_metrics(std::span<const Detection>(pl), scene, o.iou_thr);
    }
    metrics.selection = counts;
    metrics.pl_quality = io::to_quality(quality);
    if (!selected.empty()) metrics.ece_selected = expected_calibration_error(selected, o.bins);
  } else {
    throw ParseError(o.preds, 1, "expected a dump or consolidated-detections file");
  }

  if (all.empty()) throw PreconditionError("no predictions to calibrate: ECE is undefined");
  metrics.ece = expected_calibration_error(all, o.bins);

  std::ostringstream text;
  io::write_metrics(text, metrics);
  io::write_text_file(o.out, text.str());
  if (!o.reliability_csv.empty()) {
    std::ostringstream csv;
    io::write_reliability_csv(csv, *metrics.ece);
    io::write_text_file(o.reliability_csv, csv.str());
  }
}

void simulate(const SimulateOptions& o) {
  if (o.n_passes < 1) throw PreconditionError("--n-passes must be >= 1");
  const auto scenes = sim::gen_scenes(o.seed, o.n_images, o.scene);
  std::vector<McDump> dumps;
  dumps.reserve(scenes.size());
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    dumps.push_back(sim::simulate_mc_dump(scenes[i], o.profile, o.n_passes, derive_seed(o.seed, {0xd0, i})));
  }
  io::write_dumps_file(o.out_dumps, dumps, o.n_passes);
  if (!o.out_gt.empty()) {
    std::ostringstream gt;
    io::write_ground_truth(gt, scenes);
    io::write_text_file(o.out_gt, gt.str());
  }
}

void run_rounds(const RunRoundsOptions& o) {
  RoundConfig cfg = load_round_config(o.config);
  apply_env_overrides(cfg);
  validate(cfg);
  auto trainer = make_trainer(cfg);
  const auto rounds = mcdet::run_rounds(cfg, *trainer, {o.overwrite, o.jobs});
  for (const auto& r : rounds) {
    std::cout << "round " << r.round << ": pseudo_labels=" << r.n_pl << " tiles=" << r.n_tiles << " dir="
              << r.dir.string() << '\n';
  }
}

}  // namespace mcdet::cli
