#include "mcdet/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mcdet/errors.hpp"
#include "mcdet/random.hpp"

namespace mcdet {

namespace {

constexpr double kSquareTolerance = 1e-9;

// Places an interval of length `side` centered at `center` inside [0, extent].
// Returns {start, length, shrunk}.
struct Span {
  double start;
  double length;
  bool shrunk;
};

Span fit_axis(double center, double side, double extent) {
  if (side > extent) return {0.0, extent, true};
  double start = center - 0.5 * side;
  if (start < 0.0) start = 0.0;
  if (start + side > extent) start = extent - side;
  return {start, side, false};
}

bool anchored(TileSource kind) {
  return kind == TileSource::UncertainDetection || kind == TileSource::SourceRandom;
}

}  // namespace

bool BBox::valid() const noexcept {
  return std::isfinite(x1) && std::isfinite(y1) && std::isfinite(x2) && std::isfinite(y2) &&
         x2 > x1 && y2 > y1;
}

bool inside(const BBox& box, const ImageSize& img) noexcept {
  return box.x1 >= 0.0 && box.y1 >= 0.0 && box.x2 <= img.width && box.y2 <= img.height;
}

bool contains(const BBox& outer, const BBox& inner) noexcept {
  return inner.x1 >= outer.x1 && inner.y1 >= outer.y1 && inner.x2 <= outer.x2 &&
         inner.y2 <= outer.y2;
}

bool contains_point(const BBox& box, double x, double y) noexcept {
  return x >= box.x1 && x <= box.x2 && y >= box.y1 && y <= box.y2;
}

void require_valid(const BBox& box, std::string_view what) {
  if (!box.valid()) {
    throw PreconditionError(std::string(what) + ": box must be finite with x2 > x1 and y2 > y1");
  }
}

void require_valid(const ImageSize& img, std::string_view what) {
  if (!img.valid()) {
    throw PreconditionError(std::string(what) + ": image size must be at least 1x1");
  }
}

double iou(const BBox& a, const BBox& b) noexcept {
  const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

std::string_view to_string(TileSource kind) noexcept {
  switch (kind) {
    case TileSource::UncertainDetection: return "uncertain-detection";
    case TileSource::SourceRandom: return "source-random";
    case TileSource::RandomBaseline: return "random-baseline";
    case TileSource::FullImage: return "full-image";
  }
  return "unknown";
}

bool parse_tile_source(std::string_view text, TileSource& out) noexcept {
  for (auto kind : {TileSource::UncertainDetection, TileSource::SourceRandom,
                    TileSource::RandomBaseline, TileSource::FullImage}) {
    if (text == to_string(kind)) {
      out = kind;
      return true;
    }
  }
  return false;
}

bool satisfies_invariants(const TileRect& tile, const ImageSize& img) noexcept {
  if (!tile.rect.valid() || !inside(tile.rect, img)) return false;
  if (anchored(tile.source_kind) && !tile.clamped) {
    return std::abs(tile.rect.width() - tile.rect.height()) <= kSquareTolerance;
  }
  return true;
}

TileRect tile_around(const BBox& center_box, const ImageSize& img, double scale) {
  require_valid(center_box, "tile_around");
  require_valid(img, "tile_around");
  if (!(scale >= 1.0) || !std::isfinite(scale)) {
    throw PreconditionError("tile_around: scale must be a finite value >= 1");
  }
  const double cx = center_box.center_x();
  const double cy = center_box.center_y();
  if (cx < 0.0 || cx > img.width || cy < 0.0 || cy > img.height) {
    throw PreconditionError("tile_around: box center lies outside the image");
  }

  const double side = scale * std::max(center_box.width(), center_box.height());
  const Span xs = fit_axis(cx, side, img.width);
  const Span ys = fit_axis(cy, side, img.height);
  return TileRect{{xs.start, ys.start, xs.start + xs.length, ys.start + ys.length},
                  xs.shrunk || ys.shrunk,
                  TileSource::UncertainDetection};
}

TileRect random_source_tile(const BBox& gt_box, const ImageSize& img, std::uint64_t seed,
                            std::pair<double, double> scale_range) {
  require_valid(gt_box, "random_source_tile");
  require_valid(img, "random_source_tile");
  const auto [lo, hi] = scale_range;
  if (!(lo >= 1.0 && hi <= 10.0 && lo <= hi)) {
    throw PreconditionError("random_source_tile: scale range must satisfy 1 <= lo <= hi <= 10");
  }
  if (!inside(gt_box, img)) {
    throw PreconditionError("random_source_tile: ground-truth box does not fit inside the image");
  }

  Rng rng{seed};
  const double scale = std::uniform_real_distribution<double>(lo, hi)(rng);
  const double side = scale * std::max(gt_box.width(), gt_box.height());

  // Admissible starts keep [start, start+len] inside the image and around the box.
  auto place = [&rng](double side_len, double extent, double box_lo, double box_hi) -> Span {
    if (side_len > extent) return {0.0, extent, true};
    const double min_start = std::max(0.0, box_hi - side_len);
    const double max_start = std::min(box_lo, extent - side_len);
    const double start =
        min_start >= max_start ? min_start
                               : std::uniform_real_distribution<double>(min_start, max_start)(rng);
    return {start, side_len, false};
  };
  const Span xs = place(side, img.width, gt_box.x1, gt_box.x2);
  const Span ys = place(side, img.height, gt_box.y1, gt_box.y2);
  return TileRect{{xs.start, ys.start, xs.start + xs.length, ys.start + ys.length},
                  xs.shrunk || ys.shrunk,
                  TileSource::SourceRandom};
}

TileRect random_baseline_tile(const ImageSize& img, std::uint64_t seed, double min_area_frac) {
  require_valid(img, "random_baseline_tile");
  if (!(min_area_frac > 0.0 && min_area_frac <= 1.0)) {
    throw PreconditionError("random_baseline_tile: min_area_frac must be in (0, 1]");
  }
  const double W = img.width;
  const double H = img.height;
  const double min_area = min_area_frac * W * H;

  Rng rng{seed};
  const double frac = std::uniform_real_distribution<double>(min_area_frac, 1.0)(rng);
  const double w = std::min(W, std::uniform_real_distribution<double>(frac * W, W)(rng));
  double h = std::min(H, frac * W * H / w);
  while (w * h < min_area && h < H) h = std::min(H, std::nextafter(h, H));

  const double x0 = std::uniform_real_distribution<double>(0.0, W - w)(rng);
  const double y0 = std::uniform_real_distribution<double>(0.0, H - h)(rng);
  BBox rect{x0, y0, std::min(W, x0 + w), std::min(H, y0 + h)};
  return TileRect{rect, false, TileSource::RandomBaseline};
}

TileRect full_image_tile(const ImageSize& img) {
  require_valid(img, "full_image_tile");
  return TileRect{{0.0, 0.0, double(img.width), double(img.height)}, false, TileSource::FullImage};
}

std::array<long long, 4> rasterize(const BBox& box) noexcept {
  return {std::llround(box.x1), std::llround(box.y1), std::llround(box.x2), std::llround(box.y2)};
}

}  // namespace mcdet
