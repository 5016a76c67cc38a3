#include "mcdet/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mcdet/errors.hpp"

namespace mcdet {

std::vector<MatchedPrediction> match_for_accuracy(std::span<const Detection> preds,
                                                  std::span<const GroundTruth> gts,
                                                  double iou_thr) {
  if (!(iou_thr > 0.0 && iou_thr < 1.0)) {
    throw PreconditionError("match_for_accuracy: iou_thr must lie in (0, 1)");
  }
  std::vector<std::size_t> order(preds.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return preds[a].score > preds[b].score; });

  std::vector<char> taken(gts.size(), 0);
  std::vector<MatchedPrediction> out(preds.size());
  for (std::size_t i : order) {
    const Detection& p = preds[i];
    std::size_t best = gts.size();
    double best_iou = -1.0;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (taken[g] || gts[g].class_id != p.class_id) continue;
      const double v = iou(p.bbox, gts[g].bbox);
      if (v >= iou_thr && v > best_iou) {
        best_iou = v;
        best = g;
      }
    }
    const bool hit = best < gts.size();
    if (hit) taken[best] = 1;
    out[i] = {p.score, hit};
  }
  return out;
}

std::vector<Detection> as_predictions(std::span<const ConsolidatedDetection> dets) {
  std::vector<Detection> out;
  out.reserve(dets.size());
  for (const auto& d : dets) out.push_back({d.bbox, d.class_id, d.uncertainty, std::nullopt});
  return out;
}

int bin_index(double confidence, int n_bins) noexcept {
  if (n_bins <= 1 || confidence <= 0.0) return 0;
  if (confidence >= 1.0) return n_bins - 1;
  int k = static_cast<int>(std::ceil(confidence * n_bins)) - 1;
  k = std::clamp(k, 0, n_bins - 1);
  // confidence * K can round across an edge; settle against the edges k/K themselves.
  while (k > 0 && confidence <= static_cast<double>(k) / n_bins) --k;
  while (k < n_bins - 1 && confidence > static_cast<double>(k + 1) / n_bins) ++k;
  return k;
}

EceReport expected_calibration_error(std::span<const MatchedPrediction> matched, int n_bins) {
  if (n_bins < 1) throw PreconditionError("ece: number of bins must be >= 1");
  if (matched.empty()) throw PreconditionError("ece: undefined for an empty prediction set");

  struct Acc {
    std::size_t count = 0;
    double conf = 0.0;
    double hits = 0.0;
  };
  std::vector<Acc> acc(static_cast<std::size_t>(n_bins));
  for (const auto& m : matched) {
    if (!(m.confidence >= 0.0 && m.confidence <= 1.0)) {
      throw PreconditionError("ece: confidence must lie in [0, 1]");
    }
    auto& a = acc[static_cast<std::size_t>(bin_index(m.confidence, n_bins))];
    ++a.count;
    a.conf += m.confidence;
    a.hits += m.correct ? 1.0 : 0.0;
  }

  EceReport report;
  report.n_bins = n_bins;
  report.total = matched.size();
  report.bins.reserve(acc.size());
  const double total = static_cast<double>(matched.size());
  for (int k = 0; k < n_bins; ++k) {
    const auto& a = acc[static_cast<std::size_t>(k)];
    CalibrationBin bin;
    bin.lower = static_cast<double>(k) / n_bins;
    bin.upper = static_cast<double>(k + 1) / n_bins;
    bin.count = a.count;
    if (a.count > 0) {
      const double n = static_cast<double>(a.count);
      bin.mean_confidence = a.conf / n;
      bin.accuracy = a.hits / n;
      bin.gap = std::abs(bin.mean_confidence - bin.accuracy);
      report.ece += (n / total) * bin.gap;
    }
    report.bins.push_back(bin);
  }
  report.ece = std::clamp(report.ece, 0.0, 1.0);
  return report;
}

}  // namespace mcdet
