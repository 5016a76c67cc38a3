#pragma once

// Wire formats. docs/formats.md is the normative description of every schema
// written and read here.

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "mcdet/calibration.hpp"
#include "mcdet/geometry.hpp"
#include "mcdet/mc_aggregation.hpp"
#include "mcdet/simulator.hpp"

namespace mcdet::io {

inline constexpr int kSchemaVersion = 1;

inline constexpr const char* kDumpSchema = "mcdet.dump";
inline constexpr const char* kConsolidatedSchema = "mcdet.consolidated";
inline constexpr const char* kPseudoLabelSchema = "mcdet.pseudo_labels";
inline constexpr const char* kTileSchema = "mcdet.tiles";
inline constexpr const char* kMetricsSchema = "mcdet.metrics";
inline constexpr const char* kGroundTruthSchema = "mcdet.ground_truth";

/// Reads the `schema` field of the first non-blank line of a file; empty when
/// the file is empty or the line is not a JSON object with that field.
std::string sniff_schema(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// MC dumps: line-delimited, header line, then per image one image record
// followed by its detection records.

void write_dump_header(std::ostream& out, int n_passes);
/// Writes the image record and all detections, pass by pass, in index order.
void write_dump(std::ostream& out, const McDump& dump);
void write_dumps(std::ostream& out, std::span<const McDump> dumps, int n_passes);
void write_dumps_file(const std::filesystem::path& path, std::span<const McDump> dumps, int n_passes);

/// Streams one image's dump at a time; memory is bounded by the largest image.
class DumpReader {
 public:
  DumpReader(std::istream& in, std::string source);

  /// False for an empty input (no header, no records).
  bool has_header() const noexcept { return n_passes_ > 0; }
  int n_passes() const noexcept { return n_passes_; }

  /// Next image, or nullopt at end of input. Throws ParseError with the
  /// offending line number on malformed or schema-violating records.
  std::optional<McDump> next();

 private:
  struct PendingImage {
    std::string image_id;
    ImageSize image;
  };

  bool read_line(std::string& line);

  std::istream& in_;
  std::string source_;
  std::size_t line_no_ = 0;
  int n_passes_ = 0;
  std::optional<PendingImage> pending_;
  std::unordered_set<std::string> seen_;
};

std::vector<McDump> read_dumps(std::istream& in, const std::string& source, int* n_passes = nullptr);
/// A file, or a directory whose `*.jsonl` files are read in filename order.
std::vector<McDump> read_dumps_path(const std::filesystem::path& path, int* n_passes = nullptr);

// ---------------------------------------------------------------------------
// Consolidated detections: same line-delimited layout as dumps.

struct ConsolidatedHeader {
  int n_passes = 10;
  double gamma = 0.5;
  UncertaintyMode mode = UncertaintyMode::AnchorInclusive;

  friend bool operator==(const ConsolidatedHeader&, const ConsolidatedHeader&) = default;
};

struct ConsolidatedImage {
  std::string image_id;
  ImageSize image;
  std::vector<ConsolidatedDetection> detections;

  friend bool operator==(const ConsolidatedImage&, const ConsolidatedImage&) = default;
};

void write_consolidated_header(std::ostream& out, const ConsolidatedHeader& header);
void write_consolidated(std::ostream& out, const ConsolidatedImage& image);

class ConsolidatedReader {
 public:
  ConsolidatedReader(std::istream& in, std::string source);

  bool has_header() const noexcept { return header_.has_value(); }
  const ConsolidatedHeader& header() const;

  std::optional<ConsolidatedImage> next();

 private:
  struct PendingImage {
    std::string image_id;
    ImageSize image;
  };

  bool read_line(std::string& line);

  std::istream& in_;
  std::string source_;
  std::size_t line_no_ = 0;
  std::optional<ConsolidatedHeader> header_;
  std::optional<PendingImage> pending_;
  std::unordered_set<std::string> seen_;
};

// ---------------------------------------------------------------------------
// Pseudo-labels: one JSON document in the images/annotations/categories
// layout of common detection-annotation tooling.

struct PseudoLabelImage {
  std::string image_id;
  ImageSize image;
  std::vector<ConsolidatedDetection> labels;

  friend bool operator==(const PseudoLabelImage&, const PseudoLabelImage&) = default;
};

void write_pseudo_labels(std::ostream& out, std::span<const PseudoLabelImage> images);
std::vector<PseudoLabelImage> read_pseudo_labels(std::istream& in, const std::string& source);

// ---------------------------------------------------------------------------
// Tile specs.

struct TileRecord {
  TileRect tile;
  std::optional<DetectionRef> provenance;  ///< anchor of the uncertain detection

  friend bool operator==(const TileRecord&, const TileRecord&) = default;
};

struct TileImage {
  std::string image_id;
  ImageSize image;
  std::vector<TileRecord> tiles;

  friend bool operator==(const TileImage&, const TileImage&) = default;
};

struct TileSpecFile {
  double tile_scale = 5.0;
  std::vector<TileImage> images;

  friend bool operator==(const TileSpecFile&, const TileSpecFile&) = default;
};

void write_tiles(std::ostream& out, const TileSpecFile& file);
TileSpecFile read_tiles(std::istream& in, const std::string& source);

// ---------------------------------------------------------------------------
// Ground truth.

void write_ground_truth(std::ostream& out, std::span<const sim::Scene> scenes);
std::vector<sim::Scene> read_ground_truth(std::istream& in, const std::string& source);

// ---------------------------------------------------------------------------
// Metrics.

struct SelectionCounts {
  std::size_t consolidated = 0;
  std::size_t pseudo_labels = 0;
  std::size_t tile_anchors = 0;
  std::size_t discards = 0;

  friend bool operator==(const SelectionCounts&, const SelectionCounts&) = default;
};

struct PlQuality {
  std::size_t selected = 0;
  std::size_t correct = 0;
  std::size_t ground_truths = 0;
  double precision = 1.0;
  double recall = 1.0;

  friend bool operator==(const PlQuality&, const PlQuality&) = default;
};

PlQuality to_quality(const sim::PlMetrics& m) noexcept;

struct MetricsFile {
  std::optional<int> round;
  std::optional<SelectionCounts> selection;
  std::optional<EceReport> ece;           ///< over every prediction
  std::optional<EceReport> ece_selected;  ///< over the pseudo-label subset
  std::optional<PlQuality> pl_quality;

  friend bool operator==(const MetricsFile&, const MetricsFile&) = default;
};

void write_metrics(std::ostream& out, const MetricsFile& metrics);
MetricsFile read_metrics(std::istream& in, const std::string& source);

/// Reliability-diagram rows: bin,lower,upper,count,mean_confidence,accuracy,gap.
void write_reliability_csv(std::ostream& out, const EceReport& report);

// ---------------------------------------------------------------------------

/// Shortest round-trip decimal text for a double.
std::string format_double(double v);

/// Writes `text` to `path` through a temporary file and rename.
void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace mcdet::io
