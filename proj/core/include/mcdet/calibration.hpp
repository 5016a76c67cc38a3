#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mcdet/mc_aggregation.hpp"

namespace mcdet {

struct GroundTruth {
  BBox bbox;
  int class_id = 0;

  friend bool operator==(const GroundTruth&, const GroundTruth&) = default;
};

/// A prediction's confidence and whether it hit a ground truth
/// (IoU >= threshold and identical class).
struct MatchedPrediction {
  double confidence = 0.0;
  bool correct = false;

  friend bool operator==(const MatchedPrediction&, const MatchedPrediction&) = default;
};

/// Greedy one-to-one matching of one image's predictions to its ground truths.
///
/// Predictions are visited in descending confidence (stable on ties). Each
/// claims the unconsumed same-class ground truth of highest IoU, provided that
/// IoU reaches `iou_thr`; a ground truth is consumed by at most one prediction.
/// Results are returned in input order.
std::vector<MatchedPrediction> match_for_accuracy(std::span<const Detection> preds,
                                                  std::span<const GroundTruth> gts,
                                                  double iou_thr = 0.5);

/// Views consolidated detections as predictions scored by their uncertainty score.
std::vector<Detection> as_predictions(std::span<const ConsolidatedDetection> dets);

struct CalibrationBin {
  double lower = 0.0;  ///< exclusive, except for the first bin which also holds 0
  double upper = 0.0;  ///< inclusive
  std::size_t count = 0;
  double mean_confidence = 0.0;
  double accuracy = 0.0;
  double gap = 0.0;  ///< |mean_confidence - accuracy|

  friend bool operator==(const CalibrationBin&, const CalibrationBin&) = default;
};

struct EceReport {
  int n_bins = 10;
  std::size_t total = 0;
  std::vector<CalibrationBin> bins;
  double ece = 0.0;

  friend bool operator==(const EceReport&, const EceReport&) = default;
};

/// Index of the equal-width bin (k/K, (k+1)/K] holding `confidence`; 0 maps to
/// the first bin.
int bin_index(double confidence, int n_bins) noexcept;

/// Expected calibration error over K equal-width bins: the count-weighted mean
/// of |mean confidence - accuracy| per bin. Throws PreconditionError for an
/// empty input or K < 1.
EceReport expected_calibration_error(std::span<const MatchedPrediction> matched, int n_bins = 10);

}  // namespace mcdet
