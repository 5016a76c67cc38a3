#include "mcdet/round_config.hpp"

#include <charconv>
#include <cstdlib>
#include <functional>
#include <set>
#include <sstream>

#include "mcdet/errors.hpp"
#include "mcdet/formats.hpp"

namespace mcdet {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
bool parse_number(const std::string& text, T& out) {
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc{} && ptr == last;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  if (out.size() == 1 && out[0].empty()) out.clear();
  return out;
}

template <typename T>
std::string join(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    if constexpr (std::is_floating_point_v<T>) {
      out += io::format_double(v[i]);
    } else {
      out += std::to_string(v[i]);
    }
  }
  return out;
}

using Setter = std::function<void(RoundConfig&, const std::string&)>;

struct Bad {
  std::string msg;
};

double to_double(const std::string& v) {
  double d = 0.0;
  if (!parse_number(v, d)) throw Bad{"expected a number, got '" + v + "'"};
  return d;
}

int to_int(const std::string& v) {
  int i = 0;
  if (!parse_number(v, i)) throw Bad{"expected an integer, got '" + v + "'"};
  return i;
}

std::uint64_t to_u64(const std::string& v) {
  std::uint64_t i = 0;
  if (!parse_number(v, i)) throw Bad{"expected a non-negative integer, got '" + v + "'"};
  return i;
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"n_rounds", [](RoundConfig& c, const std::string& v) { c.n_rounds = to_int(v); }},
      {"n_passes",
       [](RoundConfig& c, const std::string& v) {
         c.n_passes = to_int(v);
         c.gate.n_passes = c.n_passes;
       }},
      {"gamma", [](RoundConfig& c, const std::string& v) { c.gamma = to_double(v); }},
      {"kappa1", [](RoundConfig& c, const std::string& v) { c.gate.kappa1 = to_double(v); }},
      {"kappa2_frac", [](RoundConfig& c, const std::string& v) { c.gate.kappa2_frac = to_double(v); }},
      {"tau", [](RoundConfig& c, const std::string& v) { c.gate.tau = to_double(v); }},
      {"gate_mode",
       [](RoundConfig& c, const std::string& v) {
         if (!parse_gate_mode(v, c.gate.mode)) throw Bad{"gate_mode must be complement or strict"};
       }},
      {"uncertainty_mode",
       [](RoundConfig& c, const std::string& v) {
         if (!parse_uncertainty_mode(v, c.uncertainty_mode)) {
           throw Bad{"uncertainty_mode must be anchor-inclusive or anchor-exclusive"};
         }
       }},
      {"tile_scale", [](RoundConfig& c, const std::string& v) { c.tile_scale = to_double(v); }},
      {"ece_bins", [](RoundConfig& c, const std::string& v) { c.ece_bins = to_int(v); }},
      {"ece_iou_thr", [](RoundConfig& c, const std::string& v) { c.ece_iou_thr = to_double(v); }},
      {"seed", [](RoundConfig& c, const std::string& v) { c.seed = to_u64(v); }},
      {"workdir", [](RoundConfig& c, const std::string& v) { c.workdir = v; }},
      {"trainer",
       [](RoundConfig& c, const std::string& v) {
         if (v == "simulated") {
           c.trainer = TrainerKind::Simulated;
         } else if (v == "external") {
           c.trainer = TrainerKind::External;
         } else {
           throw Bad{"trainer must be simulated or external"};
         }
       }},
      {"trainer_command", [](RoundConfig& c, const std::string& v) { c.external.command = v; }},
      {"initial_dumps", [](RoundConfig& c, const std::string& v) { c.external.initial_dumps = v; }},
      {"ground_truth", [](RoundConfig& c, const std::string& v) { c.external.ground_truth = v; }},
      {"skill_schedule",
       [](RoundConfig& c, const std::string& v) {
         c.simulated.skill_schedule.clear();
         for (const auto& item : split_list(v)) c.simulated.skill_schedule.push_back(to_double(item));
       }},
      {"n_images", [](RoundConfig& c, const std::string& v) { c.simulated.n_images = to_int(v); }},
      {"scene.width", [](RoundConfig& c, const std::string& v) { c.simulated.scene.image.width = to_int(v); }},
      {"scene.height", [](RoundConfig& c, const std::string& v) { c.simulated.scene.image.height = to_int(v); }},
      {"scene.n_classes", [](RoundConfig& c, const std::string& v) { c.simulated.scene.n_classes = to_int(v); }},
      {"scene.min_objects", [](RoundConfig& c, const std::string& v) { c.simulated.scene.min_objects = to_int(v); }},
      {"scene.max_objects", [](RoundConfig& c, const std::string& v) { c.simulated.scene.max_objects = to_int(v); }},
      {"scene.min_size", [](RoundConfig& c, const std::string& v) { c.simulated.scene.min_size = to_double(v); }},
      {"scene.max_size", [](RoundConfig& c, const std::string& v) { c.simulated.scene.max_size = to_double(v); }},
      {"scene.max_retries", [](RoundConfig& c, const std::string& v) { c.simulated.scene.max_retries = to_int(v); }},
      {"profile.localization_sigma",
       [](RoundConfig& c, const std::string& v) { c.simulated.profile.localization_sigma = to_double(v); }},
      {"profile.miss_rate", [](RoundConfig& c, const std::string& v) { c.simulated.profile.miss_rate = to_double(v); }},
      {"profile.false_positive_rate",
       [](RoundConfig& c, const std::string& v) { c.simulated.profile.false_positive_rate = to_double(v); }},
      {"profile.confidence_bias",
       [](RoundConfig& c, const std::string& v) { c.simulated.profile.confidence_bias = to_double(v); }},
      {"profile.class_confusion",
       [](RoundConfig& c, const std::string& v) { c.simulated.profile.class_confusion = to_double(v); }},
      {"iterations",
       [](RoundConfig& c, const std::string& v) {
         c.iterations.clear();
         for (const auto& item : split_list(v)) {
           long long n = 0;
           if (!parse_number(item, n)) throw Bad{"iterations must be a comma-separated integer list"};
           c.iterations.push_back(n);
         }
       }},
  };
  return table;
}

}  // namespace

void validate(const RoundConfig& c) {
  if (c.n_rounds < 1) throw PreconditionError("config: n_rounds must be >= 1");
  if (c.n_passes < 1) throw PreconditionError("config: n_passes must be >= 1");
  if (c.gate.n_passes != c.n_passes) throw PreconditionError("config: gate pass count differs from n_passes");
  validate(c.gate);
  if (!(c.gamma >= 0.0 && c.gamma < 1.0)) throw PreconditionError("config: gamma must lie in [0, 1)");
  if (!(c.tile_scale >= 1.0)) throw PreconditionError("config: tile_scale must be >= 1");
  if (c.ece_bins < 1) throw PreconditionError("config: ece_bins must be >= 1");
  if (!(c.ece_iou_thr > 0.0 && c.ece_iou_thr < 1.0)) throw PreconditionError("config: ece_iou_thr must lie in (0, 1)");
  if (c.workdir.empty()) throw PreconditionError("config: workdir must be set");
  if (c.trainer == TrainerKind::Simulated) {
    if (c.simulated.skill_schedule.empty()) throw PreconditionError("config: skill_schedule must be non-empty");
    for (double s : c.simulated.skill_schedule) {
      if (!(s >= 0.0 && s <= 1.0)) throw PreconditionError("config: skill values must lie in [0, 1]");
    }
    if (c.simulated.n_images < 1) throw PreconditionError("config: n_images must be >= 1");
    sim::validate(c.simulated.scene);
    sim::validate(c.simulated.profile);
  } else {
    if (c.external.command.empty()) throw PreconditionError("config: trainer_command is required for an external trainer");
    if (c.external.initial_dumps.empty()) throw PreconditionError("config: initial_dumps is required for an external trainer");
  }
  for (const auto& [k, v] : c.metadata) {
    if (k.empty() || v.find('\n') != std::string::npos) throw PreconditionError("config: invalid metadata entry");
  }
}

RoundConfig parse_round_config(const std::string& text, const std::string& source) {
  RoundConfig cfg;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(source, line_no, "expected 'key = value'");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    if (key.empty()) throw ParseError(source, line_no, "empty key");
    if (!seen.insert(key).second) throw ParseError(source, line_no, "key '" + key + "' given twice");
    if (key.rfind("meta.", 0) == 0) {
      cfg.metadata[key.substr(5)] = value;
      continue;
    }
    const auto& table = setters();
    auto it = table.find(key);
    if (it == table.end()) throw ParseError(source, line_no, "unknown key '" + key + "'");
    try {
      it->second(cfg, value);
    } catch (const Bad& b) {
      throw ParseError(source, line_no, key + ": " + b.msg);
    }
  }
  return cfg;
}

RoundConfig load_round_config(const std::filesystem::path& path) {
  return parse_round_config(io::read_text_file(path), path.string());
}

std::string emit_round_config(const RoundConfig& c) {
  std::ostringstream o;
  auto d = [](double v) { return io::format_double(v); };
  o << "n_rounds = " << c.n_rounds << '\n'
    << "n_passes = " << c.n_passes << '\n'
    << "gamma = " << d(c.gamma) << '\n'
    << "kappa1 = " << d(c.gate.kappa1) << '\n'
    << "kappa2_frac = " << d(c.gate.kappa2_frac) << '\n'
    << "gate_mode = " << to_string(c.gate.mode) << '\n'
    << "tau = " << d(c.gate.tau) << '\n'
    << "uncertainty_mode = " << to_string(c.uncertainty_mode) << '\n'
    << "tile_scale = " << d(c.tile_scale) << '\n'
    << "ece_bins = " << c.ece_bins << '\n'
    << "ece_iou_thr = " << d(c.ece_iou_thr) << '\n'
    << "seed = " << c.seed << '\n'
    << "workdir = " << c.workdir.string() << '\n'
    << "trainer = " << (c.trainer == TrainerKind::Simulated ? "simulated" : "external") << '\n'
    << "trainer_command = " << c.external.command << '\n'
    << "initial_dumps = " << c.external.initial_dumps.string() << '\n'
    << "ground_truth = " << c.external.ground_truth.string() << '\n'
    << "skill_schedule = " << join(c.simulated.skill_schedule) << '\n'
    << "n_images = " << c.simulated.n_images << '\n'
    << "scene.width = " << c.simulated.scene.image.width << '\n'
    << "scene.height = " << c.simulated.scene.image.height << '\n'
    << "scene.n_classes = " << c.simulated.scene.n_classes << '\n'
    << "scene.min_objects = " << c.simulated.scene.min_objects << '\n'
    << "scene.max_objects = " << c.simulated.scene.max_objects << '\n'
    << "scene.min_size = " << d(c.simulated.scene.min_size) << '\n'
    << "scene.max_size = " << d(c.simulated.scene.max_size) << '\n'
    << "scene.max_retries = " << c.simulated.scene.max_retries << '\n'
    << "profile.localization_sigma = " << d(c.simulated.profile.localization_sigma) << '\n'
    << "profile.miss_rate = " << d(c.simulated.profile.miss_rate) << '\n'
    << "profile.false_positive_rate = " << d(c.simulated.profile.false_positive_rate) << '\n'
    << "profile.confidence_bias = " << d(c.simulated.profile.confidence_bias) << '\n'
    << "profile.class_confusion = " << d(c.simulated.profile.class_confusion) << '\n'
    << "iterations = " << join(c.iterations) << '\n';
  for (const auto& [k, v] : c.metadata) o << "meta." << k << " = " << v << '\n';
  return o.str();
}

void apply_env_overrides(RoundConfig& cfg) {
  if (const char* w = std::getenv("MCDET_WORKDIR"); w && *w) cfg.workdir = w;
  if (const char* s = std::getenv("MCDET_SEED"); s && *s) {
    std::uint64_t seed = 0;
    if (!parse_number(std::string(s), seed)) throw PreconditionError("MCDET_SEED must be a non-negative integer");
    cfg.seed = seed;
  }
}

}  // namespace mcdet
