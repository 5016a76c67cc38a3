#include "mcdet/formats.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <limits>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <system_error>

#include "json.hpp"
#include "mcdet/errors.hpp"

namespace mcdet::io {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

// Parsing context for error messages.
struct Where {
  const std::string& source;
  std::size_t line;

  [[noreturn]] void fail(const std::string& what) const { throw ParseError(source, line, what); }
};

json parse_json_line(const std::string& text, const Where& at) {
  try {
    json j = json::parse(text);
    if (!j.is_object()) at.fail("expected a JSON object");
    return j;
  } catch (const json::parse_error& e) {
    at.fail(std::string("malformed JSON: ") + e.what());
  }
}

json parse_json_document(std::istream& in, const Where& at) {
  try {
    json j = json::parse(in);
    if (!j.is_object()) at.fail("expected a JSON object");
    return j;
  } catch (const json::parse_error& e) {
    at.fail(std::string("malformed JSON: ") + e.what());
  }
}

const json& field(const json& j, const char* key, const Where& at) {
  auto it = j.find(key);
  if (it == j.end()) at.fail(std::string("missing field '") + key + "'");
  return *it;
}

double get_double(const json& j, const char* key, const Where& at) {
  const json& v = field(j, key, at);
  if (!v.is_number()) at.fail(std::string("field '") + key + "' must be a number");
  return v.get<double>();
}

long long get_int(const json& j, const char* key, const Where& at) {
  const json& v = field(j, key, at);
  if (!v.is_number_integer()) at.fail(std::string("field '") + key + "' must be an integer");
  return v.get<long long>();
}

int get_int32(const json& j, const char* key, const Where& at) {
  const long long v = get_int(j, key, at);
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
    at.fail(std::string("field '") + key + "' out of range");
  }
  return static_cast<int>(v);
}

std::size_t get_count(const json& j, const char* key, const Where& at) {
  const long long v = get_int(j, key, at);
  if (v < 0) at.fail(std::string("field '") + key + "' must be non-negative");
  return static_cast<std::size_t>(v);
}

bool get_bool(const json& j, const char* key, const Where& at) {
  const json& v = field(j, key, at);
  if (!v.is_boolean()) at.fail(std::string("field '") + key + "' must be a boolean");
  return v.get<bool>();
}

std::string get_string(const json& j, const char* key, const Where& at) {
  const json& v = field(j, key, at);
  if (!v.is_string()) at.fail(std::string("field '") + key + "' must be a string");
  return v.get<std::string>();
}

const json& get_array(const json& j, const char* key, const Where& at) {
  const json& v = field(j, key, at);
  if (!v.is_array()) at.fail(std::string("field '") + key + "' must be an array");
  return v;
}

BBox get_box(const json& j, const char* key, const Where& at) {
  const json& v = get_array(j, key, at);
  if (v.size() != 4) at.fail(std::string("field '") + key + "' must hold 4 numbers");
  for (const auto& x : v) {
    if (!x.is_number()) at.fail(std::string("field '") + key + "' must hold 4 numbers");
  }
  BBox b{v[0].get<double>(), v[1].get<double>(), v[2].get<double>(), v[3].get<double>()};
  if (!b.valid()) at.fail(std::string("field '") + key + "' is not a valid box (need x2 > x1, y2 > y1)");
  return b;
}

json box_json(const BBox& b) { return json::array({b.x1, b.y1, b.x2, b.y2}); }

void check_schema(const json& j, const char* expected, const Where& at) {
  const std::string schema = get_string(j, "schema", at);
  if (schema != expected) at.fail("expected schema '" + std::string(expected) + "', found '" + schema + "'");
  const long long version = get_int(j, "version", at);
  if (version != kSchemaVersion) at.fail("unsupported schema version " + std::to_string(version));
}

json header_json(const char* schema) {
  json j;
  j["schema"] = schema;
  j["version"] = kSchemaVersion;
  return j;
}

ImageSize get_image_size(const json& j, const Where& at) {
  ImageSize img{get_int32(j, "width", at), get_int32(j, "height", at)};
  if (!img.valid()) at.fail("image width and height must be >= 1");
  return img;
}

json image_record(const std::string& image_id, const ImageSize& img) {
  json j;
  j["image_id"] = image_id;
  j["width"] = img.width;
  j["height"] = img.height;
  return j;
}

bool is_blank(const std::string& s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c) != 0; });
}

bool next_content_line(std::istream& in, std::string& line, std::size_t& line_no) {
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!is_blank(line)) return true;
  }
  return false;
}

std::string register_image(const json& j, std::unordered_set<std::string>& seen, const Where& at) {
  std::string id = get_string(j, "image_id", at);
  if (id.empty()) at.fail("image_id must be non-empty");
  if (!seen.insert(id).second) at.fail("image '" + id + "' appears in more than one group");
  return id;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return in;
}

void check_in_image(const BBox& b, const ImageSize& img, const Where& at) {
  if (!inside(b, img)) at.fail("box lies outside its image");
}

json report_json(const EceReport& r) {
  json j;
  j["n_bins"] = r.n_bins;
  j["total"] = r.total;
  j["ece"] = r.ece;
  json bins = json::array();
  for (const auto& b : r.bins) {
    json jb;
    jb["lower"] = b.lower;
    jb["upper"] = b.upper;
    jb["count"] = b.count;
    jb["mean_confidence"] = b.mean_confidence;
    jb["accuracy"] = b.accuracy;
    jb["gap"] = b.gap;
    bins.push_back(std::move(jb));
  }
  j["bins"] = std::move(bins);
  return j;
}

EceReport parse_report(const json& j, const Where& at) {
  if (!j.is_object()) at.fail("ECE report must be an object");
  EceReport r;
  r.n_bins = get_int32(j, "n_bins", at);
  r.total = get_count(j, "total", at);
  r.ece = get_double(j, "ece", at);
  for (const auto& jb : get_array(j, "bins", at)) {
    CalibrationBin b;
    b.lower = get_double(jb, "lower", at);
    b.upper = get_double(jb, "upper", at);
    b.count = get_count(jb, "count", at);
    b.mean_confidence = get_double(jb, "mean_confidence", at);
    b.accuracy = get_double(jb, "accuracy", at);
    b.gap = get_double(jb, "gap", at);
    r.bins.push_back(b);
  }
  if (r.n_bins < 1 || r.bins.size() != static_cast<std::size_t>(r.n_bins)) {
    at.fail("ECE report must list exactly n_bins bins");
  }
  if (!(r.ece >= 0.0 && r.ece <= 1.0)) at.fail("ece must lie in [0, 1]");
  std::size_t sum = 0;
  for (const auto& b : r.bins) sum += b.count;
  if (sum != r.total) at.fail("ECE bin counts do not sum to total");
  return r;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_text_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << text;
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in = open_in(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string sniff_schema(const fs::path& path) {
  std::ifstream in = open_in(path);
  std::string line;
  std::size_t n = 0;
  if (!next_content_line(in, line, n)) return {};
  try {
    json j = json::parse(line);
    if (j.is_object() && j.contains("schema") && j["schema"].is_string()) {
      return j["schema"].get<std::string>();
    }
  } catch (const json::parse_error&) {
  }
  return {};
}

// ---------------------------------------------------------------------------
// Dumps

void write_dump_header(std::ostream& out, int n_passes) {
  json j = header_json(kDumpSchema);
  j["n_passes"] = n_passes;
  out << j.dump() << '\n';
}

void write_dump(std::ostream& out, const McDump& dump) {
  out << image_record(dump.image_id, dump.image).dump() << '\n';
  for (int n = 0; n < dump.n_passes(); ++n) {
    for (const auto& d : dump.passes[static_cast<std::size_t>(n)]) {
      json j;
      j["image_id"] = dump.image_id;
      j["pass_id"] = n;
      j["bbox"] = box_json(d.bbox);
      j["class_id"] = d.class_id;
      j["score"] = d.score;
      if (d.probs) j["probs"] = *d.probs;
      out << j.dump() << '\n';
    }
  }
}

void write_dumps(std::ostream& out, std::span<const McDump> dumps, int n_passes) {
  write_dump_header(out, n_passes);
  for (const auto& d : dumps) {
    if (d.n_passes() != n_passes) {
      throw PreconditionError("write_dumps: dump " + d.image_id + " has a different pass count");
    }
    write_dump(out, d);
  }
}

void write_dumps_file(const fs::path& path, std::span<const McDump> dumps, int n_passes) {
  std::ostringstream ss;
  write_dumps(ss, dumps, n_passes);
  write_text_file(path, ss.str());
}

DumpReader::DumpReader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {
  std::string line;
  if (!read_line(line)) return;
  const Where at{source_, line_no_};
  json j = parse_json_line(line, at);
  check_schema(j, kDumpSchema, at);
  n_passes_ = get_int32(j, "n_passes", at);
  if (n_passes_ < 1) at.fail("n_passes must be >= 1");
}

bool DumpReader::read_line(std::string& line) { return next_content_line(in_, line, line_no_); }

std::optional<McDump> DumpReader::next() {
  std::string line;
  if (!pending_) {
    if (!read_line(line)) return std::nullopt;
    const Where at{source_, line_no_};
    json j = parse_json_line(line, at);
    if (j.contains("bbox")) at.fail("detection record before any image record");
    std::string id = register_image(j, seen_, at);
    pending_ = PendingImage{std::move(id), get_image_size(j, at)};
  }

  McDump dump{std::move(pending_->image_id), pending_->image, {}};
  dump.passes.resize(static_cast<std::size_t>(n_passes_));
  pending_.reset();

  while (read_line(line)) {
    const Where at{source_, line_no_};
    json j = parse_json_line(line, at);
    if (!j.contains("bbox")) {
      std::string id = register_image(j, seen_, at);
      pending_ = PendingImage{std::move(id), get_image_size(j, at)};
      break;
    }
    const std::string id = get_string(j, "image_id", at);
    if (id != dump.image_id) at.fail("record for image '" + id + "' outside its image group");
    const int pass = get_int32(j, "pass_id", at);
    if (pass < 0 || pass >= n_passes_) at.fail("pass_id out of range [0, n_passes)");

    Detection det;
    det.bbox = get_box(j, "bbox", at);
    det.class_id = get_int32(j, "class_id", at);
    det.score = get_double(j, "score", at);
    if (auto it = j.find("probs"); it != j.end() && !it->is_null()) {
      if (!it->is_array()) at.fail("field 'probs' must be an array");
      std::vector<double> probs;
      for (const auto& p : *it) {
        if (!p.is_number()) at.fail("field 'probs' must hold numbers");
        probs.push_back(p.get<double>());
      }
      det.probs = std::move(probs);
    }
    try {
      validate(det);
    } catch (const PreconditionError& e) {
      at.fail(e.what());
    }
    check_in_image(det.bbox, dump.image, at);
    dump.passes[static_cast<std::size_t>(pass)].push_back(std::move(det));
  }
  return dump;
}

std::vector<McDump> read_dumps(std::istream& in, const std::string& source, int* n_passes) {
  DumpReader reader(in, source);
  std::vector<McDump> out;
  while (auto d = reader.next()) out.push_back(std::move(*d));
  if (n_passes) *n_passes = reader.n_passes();
  return out;
}

std::vector<McDump> read_dumps_path(const fs::path& path, int* n_passes) {
  std::vector<fs::path> files;
  if (fs::is_directory(path)) {
    for (const auto& entry : fs::directory_iterator(path)) {
      if (entry.is_regular_file() && entry.path().extension() == ".jsonl") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
  } else {
    files.push_back(path);
  }

  std::vector<McDump> out;
  std::unordered_set<std::string> ids;
  int passes = 0;
  for (const auto& f : files) {
    std::ifstream in = open_in(f);
    int file_passes = 0;
    auto dumps = read_dumps(in, f.string(), &file_passes);
    if (file_passes > 0) {
      if (passes > 0 && file_passes != passes) {
        throw ParseError(f.string(), 0, "pass count differs from earlier dump files");
      }
      passes = file_passes;
    }
    for (auto& d : dumps) {
      if (!ids.insert(d.image_id).second) {
        throw ParseError(f.string(), 0, "image '" + d.image_id + "' appears in more than one file");
      }
      out.push_back(std::move(d));
    }
  }
  if (n_passes) *n_passes = passes;
  return out;
}

// ---------------------------------------------------------------------------
// Consolidated detections

void write_consolidated_header(std::ostream& out, const ConsolidatedHeader& h) {
  json j = header_json(kConsolidatedSchema);
  j["n_passes"] = h.n_passes;
  j["gamma"] = h.gamma;
  j["uncertainty_mode"] = std::string(to_string(h.mode));
  out << j.dump() << '\n';
}

void write_consolidated(std::ostream& out, const ConsolidatedImage& image) {
  out << image_record(image.image_id, image.image).dump() << '\n';
  for (const auto& d : image.detections) {
    json j;
    j["image_id"] = image.image_id;
    j["bbox"] = box_json(d.bbox);
    j["class_id"] = d.class_id;
    j["uncertainty_score"] = d.uncertainty;
    j["consistency"] = d.consistency;
    j["anchor_pass"] = d.anchor.pass;
    j["anchor_index"] = d.anchor.index;
    out << j.dump() << '\n';
  }
}

ConsolidatedReader::ConsolidatedReader(std::istream& in, std::string source)
    : in_(in), source_(std::move(source)) {
  std::string line;
  if (!read_line(line)) return;
  const Where at{source_, line_no_};
  json j = parse_json_line(line, at);
  check_schema(j, kConsolidatedSchema, at);
  ConsolidatedHeader h;
  h.n_passes = get_int32(j, "n_passes", at);
  h.gamma = get_double(j, "gamma", at);
  if (h.n_passes < 1) at.fail("n_passes must be >= 1");
  if (!(h.gamma >= 0.0 && h.gamma < 1.0)) at.fail("gamma must lie in [0, 1)");
  if (!parse_uncertainty_mode(get_string(j, "uncertainty_mode", at), h.mode)) {
    at.fail("unknown uncertainty_mode");
  }
  header_ = h;
}

const ConsolidatedHeader& ConsolidatedReader::header() const {
  if (!header_) throw std::logic_error("ConsolidatedReader: empty input has no header");
  return *header_;
}

bool ConsolidatedReader::read_line(std::string& line) { return next_content_line(in_, line, line_no_); }

std::optional<ConsolidatedImage> ConsolidatedReader::next() {
  std::string line;
  if (!pending_) {
    if (!read_line(line)) return std::nullopt;
    const Where at{source_, line_no_};
    json j = parse_json_line(line, at);
    if (j.contains("bbox")) at.fail("detection record before any image record");
    std::string id = register_image(j, seen_, at);
    pending_ = PendingImage{std::move(id), get_image_size(j, at)};
  }

  ConsolidatedImage image{std::move(pending_->image_id), pending_->image, {}};
  pending_.reset();
  while (read_line(line)) {
    const Where at{source_, line_no_};
    json j = parse_json_line(line, at);
    if (!j.contains("bbox")) {
      std::string id = register_image(j, seen_, at);
      pending_ = PendingImage{std::move(id), get_image_size(j, at)};
      break;
    }
    const std::string id = get_string(j, "image_id", at);
    if (id != image.image_id) at.fail("record for image '" + id + "' outside its image group");
    ConsolidatedDetection d;
    d.bbox = get_box(j, "bbox", at);
    check_in_image(d.bbox, image.image, at);
    d.class_id = get_int32(j, "class_id", at);
    if (d.class_id < 0) at.fail("class_id must be non-negative");
    d.uncertainty = get_double(j, "uncertainty_score", at);
    if (!(d.uncertainty >= 0.0 && d.uncertainty <= 1.0)) at.fail("uncertainty_score must lie in [0, 1]");
    d.consistency = get_int32(j, "consistency", at);
    if (d.consistency < 1 || d.consistency > header_->n_passes) {
      at.fail("consistency must lie in [1, n_passes]");
    }
    d.anchor = {get_int32(j, "anchor_pass", at), get_int32(j, "anchor_index", at)};
    if (d.anchor.pass < 0 || d.anchor.pass >= header_->n_passes || d.anchor.index < 0) {
      at.fail("anchor reference out of range");
    }
    image.detections.push_back(d);
  }
  return image;
}

// ---------------------------------------------------------------------------
// Pseudo-labels

void write_pseudo_labels(std::ostream& out, std::span<const PseudoLabelImage> images) {
  json doc = header_json(kPseudoLabelSchema);
  json jimages = json::array();
  json janns = json::array();
  std::set<int> classes;
  long long ann_id = 1;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto& img = images[i];
    const long long image_num = static_cast<long long>(i) + 1;
    json ji;
    ji["id"] = image_num;
    ji["file_name"] = img.image_id;
    ji["width"] = img.image.width;
    ji["height"] = img.image.height;
    jimages.push_back(std::move(ji));
    for (const auto& d : img.labels) {
      json ja;
      ja["id"] = ann_id++;
      ja["image_id"] = image_num;
      ja["category_id"] = d.class_id;
      ja["bbox"] = json::array({d.bbox.x1, d.bbox.y1, d.bbox.width(), d.bbox.height()});
      ja["bbox_xyxy"] = box_json(d.bbox);
      ja["area"] = d.bbox.area();
      ja["iscrowd"] = 0;
      ja["uncertainty_score"] = d.uncertainty;
      ja["consistency"] = d.consistency;
      ja["anchor_pass"] = d.anchor.pass;
      ja["anchor_index"] = d.anchor.index;
      janns.push_back(std::move(ja));
      classes.insert(d.class_id);
    }
  }
  json jcats = json::array();
  for (int c : classes) {
    json jc;
    jc["id"] = c;
    jc["name"] = "class_" + std::to_string(c);
    jcats.push_back(std::move(jc));
  }
  doc["images"] = std::move(jimages);
  doc["annotations"] = std::move(janns);
  doc["categories"] = std::move(jcats);
  out << doc.dump() << '\n';
}

std::vector<PseudoLabelImage> read_pseudo_labels(std::istream& in, const std::string& source) {
  const Where at{source, 0};
  json doc = parse_json_document(in, at);
  check_schema(doc, kPseudoLabelSchema, at);

  std::vector<PseudoLabelImage> images;
  std::map<long long, std::size_t> by_id;
  std::unordered_set<std::string> names;
  for (const auto& ji : get_array(doc, "images", at)) {
    const long long id = get_int(ji, "id", at);
    PseudoLabelImage img{get_string(ji, "file_name", at), get_image_size(ji, at), {}};
    if (!by_id.emplace(id, images.size()).second) at.fail("duplicate image id " + std::to_string(id));
    if (!names.insert(img.image_id).second) at.fail("duplicate image '" + img.image_id + "'");
    images.push_back(std::move(img));
  }
  for (const auto& ja : get_array(doc, "annotations", at)) {
    const long long image_num = get_int(ja, "image_id", at);
    auto it = by_id.find(image_num);
    if (it == by_id.end()) at.fail("annotation references unknown image id " + std::to_string(image_num));
    auto& img = images[it->second];
    ConsolidatedDetection d;
    d.bbox = get_box(ja, "bbox_xyxy", at);
    check_in_image(d.bbox, img.image, at);
    d.class_id = get_int32(ja, "category_id", at);
    if (d.class_id < 0) at.fail("category_id must be non-negative");
    d.uncertainty = get_double(ja, "uncertainty_score", at);
    if (!(d.uncertainty >= 0.0 && d.uncertainty <= 1.0)) at.fail("uncertainty_score must lie in [0, 1]");
    d.consistency = get_int32(ja, "consistency", at);
    if (d.consistency < 1) at.fail("consistency must be >= 1");
    d.anchor = {get_int32(ja, "anchor_pass", at), get_int32(ja, "anchor_index", at)};
    img.labels.push_back(d);
  }
  return images;
}

// ---------------------------------------------------------------------------
// Tiles

void write_tiles(std::ostream& out, const TileSpecFile& file) {
  json doc = header_json(kTileSchema);
  doc["tile_scale"] = file.tile_scale;
  json jimages = json::array();
  for (const auto& img : file.images) {
    json ji = image_record(img.image_id, img.image);
    json jtiles = json::array();
    for (const auto& t : img.tiles) {
      json jt;
      jt["rect"] = box_json(t.tile.rect);
      const auto px = rasterize(t.tile.rect);
      jt["pixel_rect"] = json::array({px[0], px[1], px[2], px[3]});
      jt["clamped"] = t.tile.clamped;
      jt["source_kind"] = std::string(to_string(t.tile.source_kind));
      if (t.provenance) {
        json jp;
        jp["anchor_pass"] = t.provenance->pass;
        jp["anchor_index"] = t.provenance->index;
        jt["provenance"] = std::move(jp);
      } else {
        jt["provenance"] = nullptr;
      }
      jtiles.push_back(std::move(jt));
    }
    ji["tiles"] = std::move(jtiles);
    jimages.push_back(std::move(ji));
  }
  doc["images"] = std::move(jimages);
  out << doc.dump() << '\n';
}

TileSpecFile read_tiles(std::istream& in, const std::string& source) {
  const Where at{source, 0};
  json doc = parse_json_document(in, at);
  check_schema(doc, kTileSchema, at);
  TileSpecFile file;
  file.tile_scale = get_double(doc, "tile_scale", at);
  if (!(file.tile_scale >= 1.0)) at.fail("tile_scale must be >= 1");
  std::unordered_set<std::string> names;
  for (const auto& ji : get_array(doc, "images", at)) {
    TileImage img{get_string(ji, "image_id", at), get_image_size(ji, at), {}};
    if (!names.insert(img.image_id).second) at.fail("duplicate image '" + img.image_id + "'");
    for (const auto& jt : get_array(ji, "tiles", at)) {
      TileRecord rec;
      rec.tile.rect = get_box(jt, "rect", at);
      rec.tile.clamped = get_bool(jt, "clamped", at);
      if (!parse_tile_source(get_string(jt, "source_kind", at), rec.tile.source_kind)) {
        at.fail("unknown source_kind");
      }
      if (!satisfies_invariants(rec.tile, img.image)) {
        at.fail("tile rect violates containment or squareness in image '" + img.image_id + "'");
      }
      const json& px = get_array(jt, "pixel_rect", at);
      const auto expect = rasterize(rec.tile.rect);
      if (px.size() != 4) at.fail("pixel_rect must hold 4 integers");
      for (std::size_t k = 0; k < 4; ++k) {
        if (!px[k].is_number_integer() || px[k].get<long long>() != expect[k]) {
          at.fail("pixel_rect does not match the rounded rect");
        }
      }
      const json& prov = field(jt, "provenance", at);
      if (!prov.is_null()) {
        rec.provenance = DetectionRef{get_int32(prov, "anchor_pass", at), get_int32(prov, "anchor_index", at)};
      }
      img.tiles.push_back(rec);
    }
    file.images.push_back(std::move(img));
  }
  return file;
}

// ---------------------------------------------------------------------------
// Ground truth

void write_ground_truth(std::ostream& out, std::span<const sim::Scene> scenes) {
  json doc = header_json(kGroundTruthSchema);
  json jimages = json::array();
  for (const auto& s : scenes) {
    json ji = image_record(s.image_id, s.image);
    ji["n_classes"] = s.n_classes;
    json jobjs = json::array();
    for (const auto& o : s.objects) {
      json jo;
      jo["bbox"] = box_json(o.bbox);
      jo["class_id"] = o.class_id;
      jobjs.push_back(std::move(jo));
    }
    ji["objects"] = std::move(jobjs);
    jimages.push_back(std::move(ji));
  }
  doc["images"] = std::move(jimages);
  out << doc.dump() << '\n';
}

std::vector<sim::Scene> read_ground_truth(std::istream& in, const std::string& source) {
  const Where at{source, 0};
  json doc = parse_json_document(in, at);
  check_schema(doc, kGroundTruthSchema, at);
  std::vector<sim::Scene> scenes;
  std::unordered_set<std::string> names;
  for (const auto& ji : get_array(doc, "images", at)) {
    sim::Scene s{get_string(ji, "image_id", at), get_image_size(ji, at), get_int32(ji, "n_classes", at), {}};
    if (s.n_classes < 1) at.fail("n_classes must be >= 1");
    if (!names.insert(s.image_id).second) at.fail("duplicate image '" + s.image_id + "'");
    for (const auto& jo : get_array(ji, "objects", at)) {
      GroundTruth g{get_box(jo, "bbox", at), get_int32(jo, "class_id", at)};
      check_in_image(g.bbox, s.image, at);
      if (g.class_id < 0 || g.class_id >= s.n_classes) at.fail("class_id out of range [0, n_classes)");
      s.objects.push_back(g);
    }
    scenes.push_back(std::move(s));
  }
  return scenes;
}

// ---------------------------------------------------------------------------
// Metrics

PlQuality to_quality(const sim::PlMetrics& m) noexcept {
  return {m.selected, m.correct, m.ground_truths, m.precision(), m.recall()};
}

void write_metrics(std::ostream& out, const MetricsFile& m) {
  json doc = header_json(kMetricsSchema);
  if (m.round) doc["round"] = *m.round;
  if (m.selection) {
    json js;
    js["consolidated"] = m.selection->consolidated;
    js["pseudo_labels"] = m.selection->pseudo_labels;
    js["tile_anchors"] = m.selection->tile_anchors;
    js["discards"] = m.selection->discards;
    doc["selection"] = std::move(js);
  }
  if (m.ece) doc["ece"] = report_json(*m.ece);
  if (m.ece_selected) doc["ece_selected"] = report_json(*m.ece_selected);
  if (m.pl_quality) {
    json jq;
    jq["selected"] = m.pl_quality->selected;
    jq["correct"] = m.pl_quality->correct;
    jq["ground_truths"] = m.pl_quality->ground_truths;
    jq["precision"] = m.pl_quality->precision;
    jq["recall"] = m.pl_quality->recall;
    doc["pl_quality"] = std::move(jq);
  }
  out << doc.dump(2) << '\n';
}

MetricsFile read_metrics(std::istream& in, const std::string& source) {
  const Where at{source, 0};
  json doc = parse_json_document(in, at);
  check_schema(doc, kMetricsSchema, at);
  MetricsFile m;
  if (doc.contains("round")) m.round = get_int32(doc, "round", at);
  if (doc.contains("selection")) {
    const json& js = doc["selection"];
    m.selection = SelectionCounts{get_count(js, "consolidated", at), get_count(js, "pseudo_labels", at),
                                  get_count(js, "tile_anchors", at), get_count(js, "discards", at)};
  }
  if (doc.contains("ece")) m.ece = parse_report(doc["ece"], at);
  if (doc.contains("ece_selected")) m.ece_selected = parse_report(doc["ece_selected"], at);
  if (doc.contains("pl_quality")) {
    const json& jq = doc["pl_quality"];
    m.pl_quality = PlQuality{get_count(jq, "selected", at), get_count(jq, "correct", at),
                             get_count(jq, "ground_truths", at), get_double(jq, "precision", at),
                             get_double(jq, "recall", at)};
  }
  return m;
}

void write_reliability_csv(std::ostream& out, const EceReport& report) {
  out << "bin,lower,upper,count,mean_confidence,accuracy,gap\n";
  for (std::size_t k = 0; k < report.bins.size(); ++k) {
    const auto& b = report.bins[k];
    out << k << ',' << format_double(b.lower) << ',' << format_double(b.upper) << ',' << b.count << ','
        << format_double(b.mean_confidence) << ',' << format_double(b.accuracy) << ','
        << format_double(b.gap) << '\n';
  }
}

}  // namespace mcdet::io
