#include "mcdet/mc_aggregation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mcdet/errors.hpp"

namespace mcdet {

namespace {

constexpr double kProbTolerance = 1e-6;

}  // namespace

void validate(const Detection& det) {
  require_valid(det.bbox, "detection");
  if (det.class_id < 0) throw PreconditionError("detection: class_id must be non-negative");
  if (!(det.score >= 0.0 && det.score <= 1.0)) {
    throw PreconditionError("detection: score must lie in [0, 1]");
  }
  if (!det.probs) return;
  const auto& p = *det.probs;
  if (p.empty() || det.class_id >= static_cast<int>(p.size())) {
    throw PreconditionError("detection: class_id out of range of the probability vector");
  }
  double sum = 0.0;
  for (double v : p) {
    if (!(v >= 0.0 && v <= 1.0)) throw PreconditionError("detection: probabilities must lie in [0, 1]");
    sum += v;
  }
  if (sum > 1.0 + kProbTolerance) throw PreconditionError("detection: probabilities sum above 1");
  const double top = *std::max_element(p.begin(), p.end());
  if (std::abs(top - det.score) > kProbTolerance ||
      std::abs(p[static_cast<std::size_t>(det.class_id)] - top) > kProbTolerance) {
    throw PreconditionError("detection: score/class must be the top-1 entry of the probabilities");
  }
}

std::size_t McDump::detection_count() const noexcept {
  std::size_t n = 0;
  for (const auto& pass : passes) n += pass.size();
  return n;
}

void validate(const McDump& dump) {
  require_valid(dump.image, "dump " + dump.image_id);
  if (dump.passes.empty()) throw PreconditionError("dump " + dump.image_id + ": needs N >= 1 passes");
  for (const auto& pass : dump.passes) {
    for (const auto& det : pass) {
      validate(det);
      if (!inside(det.bbox, dump.image)) {
        throw PreconditionError("dump " + dump.image_id + ": detection box outside the image");
      }
    }
  }
}

std::vector<Cluster> build_clusters(const McDump& dump, double gamma) {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw PreconditionError("build_clusters: gamma must lie in [0, 1)");

  std::vector<DetectionRef> order;
  order.reserve(dump.detection_count());
  for (int n = 0; n < dump.n_passes(); ++n) {
    for (int m = 0; m < static_cast<int>(dump.passes[n].size()); ++m) order.push_back({n, m});
  }
  auto at = [&dump](DetectionRef r) -> const Detection& { return dump.passes[r.pass][r.index]; };
  std::stable_sort(order.begin(), order.end(), [&](DetectionRef a, DetectionRef b) {
    return at(a).score > at(b).score;
  });

  std::vector<std::vector<char>> consumed(dump.passes.size());
  for (std::size_t n = 0; n < dump.passes.size(); ++n) consumed[n].assign(dump.passes[n].size(), 0);

  std::vector<Cluster> clusters;
  for (const DetectionRef ref : order) {
    if (consumed[ref.pass][ref.index]) continue;
    consumed[ref.pass][ref.index] = 1;
    const Detection& anchor = at(ref);
    Cluster cluster{{ref, anchor}, {}, gamma};

    for (int k = 0; k < dump.n_passes(); ++k) {
      if (k == ref.pass) continue;
      int best = -1;
      double best_iou = gamma;
      const auto& pass = dump.passes[k];
      for (int l = 0; l < static_cast<int>(pass.size()); ++l) {
        if (consumed[k][l] || pass[l].class_id != anchor.class_id) continue;
        const double v = iou(anchor.bbox, pass[l].bbox);
        if (v > best_iou) {
          best_iou = v;
          best = l;
        }
      }
      if (best >= 0) {
        consumed[k][best] = 1;
        cluster.members.push_back({{k, best}, pass[best]});
      }
    }
    clusters.push_back(std::move(cluster));
  }
  return clusters;
}

std::string_view to_string(UncertaintyMode mode) noexcept {
  return mode == UncertaintyMode::AnchorInclusive ? "anchor-inclusive" : "anchor-exclusive";
}

bool parse_uncertainty_mode(std::string_view text, UncertaintyMode& out) noexcept {
  if (text == "anchor-inclusive") {
    out = UncertaintyMode::AnchorInclusive;
  } else if (text == "anchor-exclusive") {
    out = UncertaintyMode::AnchorExclusive;
  } else {
    return false;
  }
  return true;
}

double uncertainty(const Cluster& cluster, UncertaintyMode mode) {
  const bool with_anchor = mode == UncertaintyMode::AnchorInclusive || cluster.members.empty();
  double sum = with_anchor ? cluster.anchor.detection.score : 0.0;
  for (const auto& m : cluster.members) sum += m.detection.score;
  const auto count = cluster.members.size() + (with_anchor ? 1 : 0);
  return std::clamp(sum / static_cast<double>(count), 0.0, 1.0);
}

std::vector<ConsolidatedDetection> consolidate(const std::vector<Cluster>& clusters, int n_passes,
                                               UncertaintyMode mode) {
  if (n_passes < 1) throw PreconditionError("consolidate: n_passes must be >= 1");
  std::vector<ConsolidatedDetection> out;
  out.reserve(clusters.size());
  for (const auto& c : clusters) {
    if (c.consistency() > n_passes) {
      throw PreconditionError("consolidate: cluster spans more passes than n_passes");
    }
    BBox mean = c.anchor.detection.bbox;
    for (const auto& m : c.members) {
      mean.x1 += m.detection.bbox.x1;
      mean.y1 += m.detection.bbox.y1;
      mean.x2 += m.detection.bbox.x2;
      mean.y2 += m.detection.bbox.y2;
    }
    const double n = c.consistency();
    mean = {mean.x1 / n, mean.y1 / n, mean.x2 / n, mean.y2 / n};
    out.push_back({mean, c.anchor.detection.class_id, uncertainty(c, mode), c.consistency(),
                   c.anchor.ref});
  }
  std::sort(out.begin(), out.end(), [](const ConsolidatedDetection& a, const ConsolidatedDetection& b) {
    if (a.uncertainty != b.uncertainty) return a.uncertainty > b.uncertainty;
    if (a.class_id != b.class_id) return a.class_id < b.class_id;
    return a.anchor < b.anchor;
  });
  return out;
}

std::vector<ConsolidatedDetection> aggregate(const McDump& dump, double gamma, UncertaintyMode mode) {
  return consolidate(build_clusters(dump, gamma), std::max(1, dump.n_passes()), mode);
}

}  // namespace mcdet
