#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "pba/image.hpp"

namespace pba {

/// Per-pixel flag marking where new scene points may still be created.
class OccupancyMask {
 public:
  OccupancyMask() = default;
  OccupancyMask(int width, int height) : valid_(width, height, 1) {}

  int width() const { return valid_.width(); }
  int height() const { return valid_.height(); }

  bool valid(int x, int y) const { return valid_.contains(x, y) && valid_(x, y) != 0; }
  void set_invalid(int x, int y) { valid_(x, y) = 0; }

  std::size_t invalid_count() const {
    return static_cast<std::size_t>(std::count(valid_.data().begin(), valid_.data().end(), 0));
  }

  bool operator==(const OccupancyMask&) const = default;

 private:
  Raster<std::uint8_t> valid_;
};

struct SelectionConfig {
  int nms_radius = 1;         // 3x3 non-maximum suppression
  int mask_block_radius = 1;  // 3x3 block reserved around projections
  double min_gradient = 0.0;
  int border = 2;             // keeps reference and gating patches inside the image

  void validate() const {
    if (nms_radius < 1 || mask_block_radius < 1) {
      throw std::invalid_argument("SelectionConfig: radii must be >= 1");
    }
    if (border < 0) throw std::invalid_argument("SelectionConfig: border must be >= 0");
  }
};

/// Invalidates every in-bounds pixel within Chebyshev distance `radius` of
/// the rounded location.
inline void mark_occupied(OccupancyMask& mask, const Vec2& px, int radius) {
  const int cx = static_cast<int>(std::lround(px.x()));
  const int cy = static_cast<int>(std::lround(px.y()));
  const int x0 = std::max(cx - radius, 0), x1 = std::min(cx + radius, mask.width() - 1);
  const int y0 = std::max(cy - radius, 0), y1 = std::min(cy + radius, mask.height() - 1);
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) mask.set_invalid(x, y);
}

inline void mark_occupied(OccupancyMask& mask, const Pixel& px, int radius) {
  mark_occupied(mask, px.vec(), radius);
}

/// Local maxima of a gradient magnitude raster on valid mask cells, in
/// row-major order. A neighbor that precedes the candidate in row-major
/// order must be strictly smaller; later neighbors may tie.
inline std::vector<Pixel> select_maxima(const FloatRaster& magnitude, const OccupancyMask& mask,
                                        const SelectionConfig& cfg = {}) {
  cfg.validate();
  if (mask.width() != magnitude.width() || mask.height() != magnitude.height()) {
    throw std::invalid_argument("select_pixels: mask and image dimensions differ");
  }
  const int w = magnitude.width();
  const int h = magnitude.height();
  const int r = cfg.nms_radius;
  const int margin = std::max(cfg.nms_radius, cfg.border);
  std::vector<Pixel> out;
  for (int y = margin; y < h - margin; ++y) {
    for (int x = margin; x < w - margin; ++x) {
      if (!mask.valid(x, y)) continue;
      const double g = magnitude(x, y);
      if (!(g > cfg.min_gradient)) continue;
      bool is_max = true;
      for (int dy = -r; dy <= r && is_max; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
          if (dx == 0 && dy == 0) continue;
          const double q = magnitude(x + dx, y + dy);
          const bool earlier = dy < 0 || (dy == 0 && dx < 0);
          if (earlier ? !(g > q) : !(g >= q)) {
            is_max = false;
            break;
          }
        }
      }
      if (is_max) out.push_back({x, y});
    }
  }
  return out;
}

/// Gradient-magnitude maxima of `img` on valid mask cells.
inline std::vector<Pixel> select_pixels(const GrayImage& img, const OccupancyMask& mask,
                                        const SelectionConfig& cfg = {}) {
  return select_maxima(gradient_magnitude(img), mask, cfg);
}

}  // namespace pba
