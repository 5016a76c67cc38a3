#pragma once

#include <array>
#include <cstdint>
#include <string_view>
#include <utility>

namespace mcdet {

/// Axis-aligned box in continuous pixel coordinates, (x1,y1) top-left and
/// (x2,y2) bottom-right.
struct BBox {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;

  double width() const noexcept { return x2 - x1; }
  double height() const noexcept { return y2 - y1; }
  double area() const noexcept { return width() * height(); }
  double center_x() const noexcept { return 0.5 * (x1 + x2); }
  double center_y() const noexcept { return 0.5 * (y1 + y2); }

  /// Finite coordinates and strictly positive extent on both axes.
  bool valid() const noexcept;

  friend bool operator==(const BBox&, const BBox&) = default;
};

struct ImageSize {
  int width = 0;
  int height = 0;

  bool valid() const noexcept { return width >= 1 && height >= 1; }

  friend bool operator==(const ImageSize&, const ImageSize&) = default;
};

bool inside(const BBox& box, const ImageSize& img) noexcept;
bool contains(const BBox& outer, const BBox& inner) noexcept;
bool contains_point(const BBox& box, double x, double y) noexcept;

/// Throws PreconditionError when `box` is not valid; `what` names the value.
void require_valid(const BBox& box, std::string_view what);
void require_valid(const ImageSize& img, std::string_view what);

/// Intersection over union; 0 for disjoint boxes. Both boxes must be valid.
double iou(const BBox& a, const BBox& b) noexcept;

enum class TileSource : std::uint8_t {
  UncertainDetection,
  SourceRandom,
  RandomBaseline,
  FullImage,
};

std::string_view to_string(TileSource kind) noexcept;
/// Returns false when `text` names no tile source.
bool parse_tile_source(std::string_view text, TileSource& out) noexcept;

/// A crop rectangle inside one image.
///
/// Tiles anchored on a box (UncertainDetection, SourceRandom) are exact squares
/// unless `clamped`, which marks a tile that had to be shrunk because the image
/// is smaller than the requested side on at least one axis. RandomBaseline and
/// FullImage rects follow the image shape and carry no squareness guarantee.
struct TileRect {
  BBox rect;
  bool clamped = false;
  TileSource source_kind = TileSource::UncertainDetection;

  friend bool operator==(const TileRect&, const TileRect&) = default;
};

/// True when `tile` lies inside `img` and, for box-anchored kinds, is square
/// (within 1e-9 px) whenever it is not clamped.
bool satisfies_invariants(const TileRect& tile, const ImageSize& img) noexcept;

/// Square of side `scale * max(w, h)` centered on the box center, translated
/// into the image when it crosses a border. Only when the image is smaller than
/// the side on an axis is that axis shrunk to the image extent (clamped=true).
///
/// Requires scale >= 1 and the box center to lie inside the image.
TileRect tile_around(const BBox& center_box, const ImageSize& img, double scale);

/// Random square tile fully containing `gt_box`. The side is drawn uniformly
/// from `scale_range * max(w, h)`; the offset is drawn uniformly among the
/// placements that keep `gt_box` inside the tile and the tile inside the image.
///
/// Requires `gt_box` inside the image and 1 <= lo <= hi <= 10.
TileRect random_source_tile(const BBox& gt_box, const ImageSize& img, std::uint64_t seed,
                            std::pair<double, double> scale_range = {5.0, 5.0});

/// Random axis-aligned rectangle covering at least `min_area_frac` of the
/// image area. Used by the random-tile ablation baseline.
TileRect random_baseline_tile(const ImageSize& img, std::uint64_t seed, double min_area_frac = 0.6);

/// The whole image as a tile.
TileRect full_image_tile(const ImageSize& img);

/// Integer pixel rect, rounding each coordinate half away from zero.
std::array<long long, 4> rasterize(const BBox& box) noexcept;

}  // namespace mcdet
