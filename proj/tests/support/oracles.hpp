#pragma once

// Test-only reference implementations and generators. Nothing here calls the
// code paths it is used to check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "mcdet/calibration.hpp"
#include "mcdet/mc_aggregation.hpp"

namespace mcdet::testing {

inline double oracle_iou(const BBox& a, const BBox& b) {
  const double ix1 = a.x1 > b.x1 ? a.x1 : b.x1;
  const double iy1 = a.y1 > b.y1 ? a.y1 : b.y1;
  const double ix2 = a.x2 < b.x2 ? a.x2 : b.x2;
  const double iy2 = a.y2 < b.y2 ? a.y2 : b.y2;
  if (!(ix2 > ix1) || !(iy2 > iy1)) return 0.0;
  const double inter = (ix2 - ix1) * (iy2 - iy1);
  const double area_a = (a.x2 - a.x1) * (a.y2 - a.y1);
  const double area_b = (b.x2 - b.x1) * (b.y2 - b.y1);
  return inter / (area_a + area_b - inter);
}

/// Exhaustive anchor-greedy clustering: repeatedly pick the highest-scoring
/// unconsumed detection (ties: lowest pass, then lowest index) and scan every
/// other pass for its best unconsumed same-class partner.
inline std::vector<Cluster> brute_force_clusters(const McDump& dump, double gamma) {
  const int n_passes = static_cast<int>(dump.passes.size());
  std::vector<std::vector<bool>> used(dump.passes.size());
  std::size_t remaining = 0;
  for (std::size_t n = 0; n < dump.passes.size(); ++n) {
    used[n].assign(dump.passes[n].size(), false);
    remaining += dump.passes[n].size();
  }

  std::vector<Cluster> out;
  while (remaining > 0) {
    int bp = -1, bi = -1;
    for (int n = 0; n < n_passes; ++n) {
      for (int m = 0; m < static_cast<int>(dump.passes[n].size()); ++m) {
        if (used[n][m]) continue;
        if (bp < 0 || dump.passes[n][m].score > dump.passes[bp][bi].score) {
          bp = n;
          bi = m;
        }
      }
    }
    used[bp][bi] = true;
    --remaining;
    const Detection& anchor = dump.passes[bp][bi];
    Cluster c;
    c.anchor = {{bp, bi}, anchor};
    c.gamma = gamma;
    for (int k = 0; k < n_passes; ++k) {
      if (k == bp) continue;
      int best = -1;
      double best_v = 0.0;
      for (int l = 0; l < static_cast<int>(dump.passes[k].size()); ++l) {
        const Detection& cand = dump.passes[k][l];
        if (used[k][l] || cand.class_id != anchor.class_id) continue;
        const double v = oracle_iou(anchor.bbox, cand.bbox);
        if (v > gamma && (best < 0 || v > best_v)) {
          best = l;
          best_v = v;
        }
      }
      if (best >= 0) {
        used[k][best] = true;
        --remaining;
        c.members.push_back({{k, best}, dump.passes[k][best]});
      }
    }
    out.push_back(std::move(c));
  }
  return out;
}

/// ECE by scanning every bin's membership directly from the interval
/// definition: bin 0 is [0, 1/K], bin k > 0 is (k/K, (k+1)/K].
inline double brute_force_ece(const std::vector<MatchedPrediction>& matched, int n_bins) {
  double ece = 0.0;
  for (int k = 0; k < n_bins; ++k) {
    const double lo = static_cast<double>(k) / n_bins;
    const double hi = static_cast<double>(k + 1) / n_bins;
    double conf = 0.0, hits = 0.0, count = 0.0;
    for (const auto& m : matched) {
      const bool in = k == 0 ? (m.confidence >= 0.0 && m.confidence <= hi)
                             : (m.confidence > lo && m.confidence <= hi);
      if (!in) continue;
      conf += m.confidence;
      hits += m.correct ? 1.0 : 0.0;
      count += 1.0;
    }
    if (count > 0) ece += (count / matched.size()) * std::abs(conf / count - hits / count);
  }
  return ece;
}

/// Greedy one-to-one matching written as "repeatedly take the globally best
/// remaining (prediction, gt) pair in confidence order".
inline std::vector<bool> brute_force_match(const std::vector<Detection>& preds,
                                           const std::vector<GroundTruth>& gts, double thr) {
  std::vector<bool> correct(preds.size(), false), done(preds.size(), false), taken(gts.size(), false);
  for (std::size_t step = 0; step < preds.size(); ++step) {
    std::size_t p = preds.size();
    for (std::size_t i = 0; i < preds.size(); ++i) {
      if (!done[i] && (p == preds.size() || preds[i].score > preds[p].score)) p = i;
    }
    done[p] = true;
    std::size_t g_best = gts.size();
    double v_best = 0.0;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (taken[g] || gts[g].class_id != preds[p].class_id) continue;
      const double v = oracle_iou(preds[p].bbox, gts[g].bbox);
      if (v >= thr && (g_best == gts.size() || v > v_best)) {
        g_best = g;
        v_best = v;
      }
    }
    if (g_best < gts.size()) {
      taken[g_best] = true;
      correct[p] = true;
    }
  }
  return correct;
}

// ---------------------------------------------------------------------------
// Generators

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline int uniform_int(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

inline BBox random_box_in(std::mt19937_64& rng, const ImageSize& img, double min_side = 2.0,
                          double max_side = 120.0) {
  const double w = std::min<double>(uniform(rng, min_side, max_side), img.width);
  const double h = std::min<double>(uniform(rng, min_side, max_side), img.height);
  const double x = uniform(rng, 0.0, img.width - w);
  const double y = uniform(rng, 0.0, img.height - h);
  return {x, y, std::min<double>(x + w, img.width), std::min<double>(y + h, img.height)};
}

/// Dump with objects seen by several passes (jittered), clutter, and
/// occasionally quantized scores so ties get exercised.
inline McDump random_dump(std::mt19937_64& rng, int max_passes = 10, int max_per_pass = 20) {
  McDump d;
  d.image_id = "img_" + std::to_string(rng() % 100000);
  d.image = {uniform_int(rng, 64, 640), uniform_int(rng, 64, 480)};
  const int n_passes = uniform_int(rng, 1, max_passes);
  d.passes.resize(static_cast<std::size_t>(n_passes));
  const int n_objects = uniform_int(rng, 0, 8);
  std::vector<std::pair<BBox, int>> objects;
  for (int i = 0; i < n_objects; ++i) objects.push_back({random_box_in(rng, d.image, 8.0, 100.0), uniform_int(rng, 0, 2)});
  const bool quantize = uniform(rng, 0.0, 1.0) < 0.3;
  auto score = [&] {
    double s = uniform(rng, 0.0, 1.0);
    return quantize ? std::round(s * 10.0) / 10.0 : s;
  };
  for (auto& pass : d.passes) {
    for (const auto& [box, cls] : objects) {
      if (static_cast<int>(pass.size()) >= max_per_pass || uniform(rng, 0.0, 1.0) < 0.25) continue;
      const double j = uniform(rng, 0.0, 6.0);
      BBox b{box.x1 + uniform(rng, -j, j), box.y1 + uniform(rng, -j, j), box.x2 + uniform(rng, -j, j),
             box.y2 + uniform(rng, -j, j)};
      b = {std::clamp(b.x1, 0.0, double(d.image.width) - 1.0), std::clamp(b.y1, 0.0, double(d.image.height) - 1.0),
           std::clamp(b.x2, 0.0, double(d.image.width)), std::clamp(b.y2, 0.0, double(d.image.height))};
      if (!(b.x2 > b.x1 && b.y2 > b.y1)) continue;
      const int c = uniform(rng, 0.0, 1.0) < 0.1 ? (cls + 1) % 3 : cls;
      pass.push_back({b, c, score(), std::nullopt});
    }
    const int clutter = uniform_int(rng, 0, 4);
    for (int i = 0; i < clutter && static_cast<int>(pass.size()) < max_per_pass; ++i) {
      pass.push_back({random_box_in(rng, d.image), uniform_int(rng, 0, 2), score(), std::nullopt});
    }
    std::shuffle(pass.begin(), pass.end(), rng);
  }
  return d;
}

inline ConsolidatedDetection random_consolidated(std::mt19937_64& rng, int n_passes) {
  ConsolidatedDetection d;
  d.bbox = random_box_in(rng, {640, 480});
  d.class_id = uniform_int(rng, 0, 4);
  d.uncertainty = uniform(rng, 0.0, 1.0);
  d.consistency = uniform_int(rng, 1, n_passes);
  d.anchor = {uniform_int(rng, 0, n_passes - 1), uniform_int(rng, 0, 50)};
  return d;
}

}  // namespace mcdet::testing
