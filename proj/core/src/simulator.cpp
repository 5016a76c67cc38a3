#include "mcdet/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "mcdet/errors.hpp"
#include "mcdet/random.hpp"

namespace mcdet::sim {

namespace {

constexpr double kMaxSameClassIou = 0.5;
constexpr double kMaxFalsePositiveIou = 0.3;
constexpr double kQualityFloor = 0.02;
constexpr double kQualityCeil = 0.98;
constexpr int kFalsePositiveRetries = 50;

bool rate(double v) { return v >= 0.0 && v <= 1.0; }

std::string image_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "img_%06d", index);
  return buf;
}

BBox random_box(Rng& rng, const ImageSize& img, double min_size, double max_size) {
  std::uniform_real_distribution<double> size(min_size, max_size);
  const double w = std::min<double>(size(rng), img.width);
  const double h = std::min<double>(size(rng), img.height);
  const double x = std::uniform_real_distribution<double>(0.0, img.width - w)(rng);
  const double y = std::uniform_real_distribution<double>(0.0, img.height - h)(rng);
  return {x, y, std::min<double>(x + w, img.width), std::min<double>(y + h, img.height)};
}

// Clips to the image and keeps at least 1 px of extent per axis.
BBox clip(BBox b, const ImageSize& img) {
  auto axis = [](double& lo, double& hi, double extent) {
    if (hi < lo) std::swap(lo, hi);
    lo = std::clamp(lo, 0.0, extent);
    hi = std::clamp(hi, 0.0, extent);
    if (hi - lo < 1.0) {
      const double len = std::min(1.0, extent);
      const double mid = std::clamp(0.5 * (lo + hi), 0.5 * len, extent - 0.5 * len);
      lo = mid - 0.5 * len;
      hi = mid + 0.5 * len;
    }
  };
  axis(b.x1, b.x2, img.width);
  axis(b.y1, b.y2, img.height);
  return b;
}

int other_class(Rng& rng, int cls, int n_classes) {
  if (n_classes < 2) return cls;
  const int shift = std::uniform_int_distribution<int>(1, n_classes - 1)(rng);
  return (cls + shift) % n_classes;
}

}  // namespace

void validate(const DetectorProfile& p) {
  if (!(std::isfinite(p.localization_sigma) && p.localization_sigma >= 0.0)) {
    throw PreconditionError("profile: localization_sigma must be finite and >= 0");
  }
  if (!rate(p.miss_rate) || !rate(p.false_positive_rate) || !rate(p.class_confusion) ||
      !rate(p.skill)) {
    throw PreconditionError("profile: rates and skill must lie in [0, 1]");
  }
  if (!std::isfinite(p.confidence_bias)) throw PreconditionError("profile: confidence_bias must be finite");
}

void validate(const SceneParams& p) {
  require_valid(p.image, "scene params");
  if (p.n_classes < 1) throw PreconditionError("scene params: n_classes must be >= 1");
  if (p.min_objects < 0 || p.max_objects < p.min_objects) {
    throw PreconditionError("scene params: need 0 <= min_objects <= max_objects");
  }
  if (!(p.min_size >= 1.0 && p.max_size >= p.min_size)) {
    throw PreconditionError("scene params: need 1 <= min_size <= max_size");
  }
  if (p.min_size > std::min(p.image.width, p.image.height)) {
    throw PreconditionError("scene params: min_size exceeds the image");
  }
  if (p.max_retries < 1) throw PreconditionError("scene params: max_retries must be >= 1");
}

std::vector<Scene> gen_scenes(std::uint64_t seed, int n_images, const SceneParams& params) {
  if (n_images < 1) throw PreconditionError("gen_scenes: n_images must be >= 1");
  validate(params);

  std::vector<Scene> scenes;
  scenes.reserve(static_cast<std::size_t>(n_images));
  for (int i = 0; i < n_images; ++i) {
    Rng rng = make_rng(seed, {0x5ce7e, static_cast<std::uint64_t>(i)});
    Scene scene{image_name(i), params.image, params.n_classes, {}};
    const int count = std::uniform_int_distribution<int>(params.min_objects, params.max_objects)(rng);
    std::uniform_int_distribution<int> cls(0, params.n_classes - 1);
    for (int k = 0; k < count; ++k) {
      const int c = cls(rng);
      bool placed = false;
      for (int attempt = 0; attempt < params.max_retries && !placed; ++attempt) {
        const BBox box = random_box(rng, params.image, params.min_size, params.max_size);
        placed = std::none_of(scene.objects.begin(), scene.objects.end(), [&](const GroundTruth& g) {
          return g.class_id == c && iou(g.bbox, box) > kMaxSameClassIou;
        });
        if (placed) scene.objects.push_back({box, c});
      }
      if (!placed) {
        throw std::runtime_error("gen_scenes: could not place object " + std::to_string(k) +
                                 " in " + scene.image_id + " within max_retries");
      }
    }
    scenes.push_back(std::move(scene));
  }
  return scenes;
}

double biased_confidence(double quality, double confidence_bias) noexcept {
  const double q = std::clamp(quality, kQualityFloor, kQualityCeil);
  const double logit = std::log(q / (1.0 - q)) + confidence_bias;
  return 1.0 / (1.0 + std::exp(-logit));
}

McDump simulate_mc_dump(const Scene& scene, const DetectorProfile& profile, int n_passes,
                        std::uint64_t seed) {
  if (n_passes < 1) throw PreconditionError("simulate_mc_dump: n_passes must be >= 1");
  validate(profile);
  require_valid(scene.image, "simulate_mc_dump");

  const double noise = 1.0 - profile.skill;
  const double sigma = profile.localization_sigma * noise;
  const double p_detect = 1.0 - profile.miss_rate * noise;
  const double p_confuse = profile.class_confusion * noise;
  const double fp_mean = profile.false_positive_rate * noise;

  McDump dump{scene.image_id, scene.image, {}};
  dump.passes.resize(static_cast<std::size_t>(n_passes));
  for (int n = 0; n < n_passes; ++n) {
    Rng rng = make_rng(seed, {static_cast<std::uint64_t>(n)});
    std::normal_distribution<double> jitter(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto& pass = dump.passes[static_cast<std::size_t>(n)];

    for (const auto& obj : scene.objects) {
      // Draw every variate even when unused so streams do not shift with the profile.
      const double u_detect = unit(rng);
      const double u_confuse = unit(rng);
      const double e[4] = {jitter(rng), jitter(rng), jitter(rng), jitter(rng)};
      const int wrong = other_class(rng, obj.class_id, scene.n_classes);
      if (u_detect >= p_detect) continue;

      BBox box = obj.bbox;
      if (sigma > 0.0) {
        box = clip({box.x1 + sigma * e[0], box.y1 + sigma * e[1], box.x2 + sigma * e[2],
                    box.y2 + sigma * e[3]},
                   scene.image);
      }
      const int cls = u_confuse < p_confuse ? wrong : obj.class_id;
      pass.push_back({box, cls, biased_confidence(iou(box, obj.bbox), profile.confidence_bias),
                      std::nullopt});
    }

    const int n_fp = fp_mean > 0.0 ? std::poisson_distribution<int>(fp_mean)(rng) : 0;
    for (int f = 0; f < n_fp; ++f) {
      BBox box{};
      bool ok = false;
      for (int attempt = 0; attempt < kFalsePositiveRetries && !ok; ++attempt) {
        box = random_box(rng, scene.image, 16.0, 128.0);
        ok = std::all_of(scene.objects.begin(), scene.objects.end(), [&](const GroundTruth& g) {
          return iou(g.bbox, box) < kMaxFalsePositiveIou;
        });
      }
      const double quality = std::uniform_real_distribution<double>(0.05, 0.45)(rng);
      const int cls = std::uniform_int_distribution<int>(0, std::max(0, scene.n_classes - 1))(rng);
      if (ok) pass.push_back({box, cls, biased_confidence(quality, profile.confidence_bias), std::nullopt});
    }
  }
  return dump;
}

double PlMetrics::precision() const noexcept {
  return selected == 0 ? 1.0 : static_cast<double>(correct) / static_cast<double>(selected);
}

double PlMetrics::recall() const noexcept {
  return ground_truths == 0 ? 1.0 : static_cast<double>(correct) / static_cast<double>(ground_truths);
}

PlMetrics& PlMetrics::operator+=(const PlMetrics& o) noexcept {
  selected += o.selected;
  correct += o.correct;
  ground_truths += o.ground_truths;
  return *this;
}

PlMetrics oracle_pl_metrics(std::span<const Detection> selected, const Scene& scene, double iou_thr) {
  const auto matched = match_for_accuracy(selected, scene.objects, iou_thr);
  PlMetrics m{selected.size(), 0, scene.objects.size()};
  for (const auto& mp : matched) m.correct += mp.correct ? 1 : 0;
  return m;
}

PlMetrics oracle_pl_metrics(std::span<const ConsolidatedDetection> selected, const Scene& scene,
                            double iou_thr) {
  const auto preds = as_predictions(selected);
  return oracle_pl_metrics(std::span<const Detection>(preds), scene, iou_thr);
}

}  // namespace mcdet::sim
