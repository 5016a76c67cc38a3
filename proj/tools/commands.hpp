#pragma once

#include <cstdint>
#include <string>

#include "mcdet/gating.hpp"
#include "mcdet/mc_aggregation.hpp"
#include "mcdet/simulator.hpp"

namespace mcdet::cli {

enum ExitCode : int {
  kOk = 0,
  kIoFailure = 1,
  kParseFailure = 2,
  kPreconditionFailure = 3,
  kTrainerFailure = 4,
};

struct ClusterOptions {
  std::string in;
  std::string out;
  double gamma = 0.5;
  UncertaintyMode mode = UncertaintyMode::AnchorInclusive;
  int jobs = 1;
};

struct SelectOptions {
  std::string in;
  std::string out_pl;
  std::string out_tiles;
  std::string out_discards;
  GateConfig gate;
  bool n_passes_given = false;
};

struct TileOptions {
  std::string in;
  std::string out;
  double scale = 5.0;
  std::string strategy = "uncertain";
  std::uint64_t seed = 0;
  double min_area_frac = 0.6;
};

struct SourceTileOptions {
  std::string gt;
  std::string out;
  double scale_min = 5.0;
  double scale_max = 5.0;
  std::uint64_t seed = 0;
};

struct EceOptions {
  std::string preds;
  std::string gt;
  std::string out;
  std::string reliability_csv;
  int bins = 10;
  double iou_thr = 0.5;
  int pass = -1;
  GateConfig gate;
  bool n_passes_given = false;
};

struct SimulateOptions {
  std::uint64_t seed = 0;
  int n_images = 100;
  int n_passes = 10;
  sim::SceneParams scene;
  sim::DetectorProfile profile;
  std::string out_dumps;
  std::string out_gt;
};

struct RunRoundsOptions {
  std::string config;
  bool overwrite = false;
  int jobs = 1;
};

void cluster(const ClusterOptions& o);
void select(const SelectOptions& o);
void tile(const TileOptions& o);
void source_tiles(const SourceTileOptions& o);
void ece(const EceOptions& o);
void simulate(const SimulateOptions& o);
void run_rounds(const RunRoundsOptions& o);

}  // namespace mcdet::cli
