#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mcdet/calibration.hpp"
#include "mcdet/mc_aggregation.hpp"

namespace mcdet::sim {

/// Ground truth for one synthetic image.
struct Scene {
  std::string image_id;
  ImageSize image;
  int n_classes = 3;
  std::vector<GroundTruth> objects;

  friend bool operator==(const Scene&, const Scene&) = default;
};

struct SceneParams {
  ImageSize image{1024, 512};
  int n_classes = 3;
  int min_objects = 1;
  int max_objects = 8;
  double min_size = 24.0;   ///< px, per side
  double max_size = 160.0;  ///< px, per side
  int max_retries = 200;    ///< placement attempts per object

  friend bool operator==(const SceneParams&, const SceneParams&) = default;
};

/// Noise model of a stochastic (MC-dropout) detector. Every noise term is
/// multiplied by (1 - skill), so skill = 1 reproduces the ground truth.
struct DetectorProfile {
  double localization_sigma = 6.0;   ///< px std-dev of per-corner jitter
  double miss_rate = 0.3;            ///< per-pass probability an object is missed
  double false_positive_rate = 0.6;  ///< expected spurious detections per pass
  double confidence_bias = 2.0;      ///< additive logit shift (overconfidence)
  double class_confusion = 0.1;      ///< per-detection probability of a wrong class
  double skill = 0.0;

  friend bool operator==(const DetectorProfile&, const DetectorProfile&) = default;
};

/// Throws PreconditionError unless all rates and skill lie in [0, 1] and the
/// sigma is non-negative and finite.
void validate(const DetectorProfile& profile);
void validate(const SceneParams& params);

/// Deterministic scene set. Same-class objects never overlap with IoU > 0.5.
/// Throws PreconditionError for n_images < 1 or invalid params, and
/// std::runtime_error when an object cannot be placed within max_retries.
std::vector<Scene> gen_scenes(std::uint64_t seed, int n_images, const SceneParams& params = {});

/// Maps a localization quality in [0, 1] to a confidence through the
/// profile's logit shift.
double biased_confidence(double quality, double confidence_bias) noexcept;

/// N passes of the noisy detector over one scene.
McDump simulate_mc_dump(const Scene& scene, const DetectorProfile& profile, int n_passes,
                        std::uint64_t seed);

/// Counts of a pseudo-label selection evaluated against the scene.
struct PlMetrics {
  std::size_t selected = 0;
  std::size_t correct = 0;
  std::size_t ground_truths = 0;

  /// 1 for an empty selection.
  double precision() const noexcept;
  /// 1 when the scene has no objects.
  double recall() const noexcept;

  PlMetrics& operator+=(const PlMetrics& other) noexcept;
};

PlMetrics oracle_pl_metrics(std::span<const ConsolidatedDetection> selected, const Scene& scene,
                            double iou_thr = 0.5);
PlMetrics oracle_pl_metrics(std::span<const Detection> selected, const Scene& scene,
                            double iou_thr = 0.5);

}  // namespace mcdet::sim
