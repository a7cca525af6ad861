#pragma once

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "pba/geometry.hpp"
#include "pba/image.hpp"
#include "pba/parallel.hpp"

namespace pba {

struct StereoConfig {
  int max_disparity = 128;
  int sad_radius = 3;  // 7x7 aggregation window
  int lr_tolerance = 1;
  int threads = 1;

  void validate() const {
    if (max_disparity < 1) throw std::invalid_argument("StereoConfig: max_disparity must be >= 1");
    if (sad_radius < 1) throw std::invalid_argument("StereoConfig: sad_radius must be >= 1");
    if (lr_tolerance < 0) throw std::invalid_argument("StereoConfig: lr_tolerance must be >= 0");
  }
};

/// Per-pixel disparity of the left image in pixels; negative entries are
/// invalid.
class DisparityMap {
 public:
  static constexpr double kInvalid = -1.0;

  DisparityMap() = default;
  DisparityMap(int width, int height) : disp_(width, height, kInvalid) {}
  explicit DisparityMap(FloatRaster disp) : disp_(std::move(disp)) {}

  int width() const { return disp_.width(); }
  int height() const { return disp_.height(); }

  bool valid(int x, int y) const { return disp_.contains(x, y) && disp_(x, y) >= 0.0; }
  double operator()(int x, int y) const { return disp_(x, y); }
  double& operator()(int x, int y) { return disp_(x, y); }
  void invalidate(int x, int y) { disp_(x, y) = kInvalid; }

  const FloatRaster& raster() const { return disp_; }

  /// 16-bit encoding: value / 256 = disparity in pixels, 0 = invalid.
  static DisparityMap from_u16(const Raster<std::uint16_t>& raw) {
    DisparityMap m(raw.width(), raw.height());
    for (int y = 0; y < raw.height(); ++y)
      for (int x = 0; x < raw.width(); ++x)
        if (raw(x, y) != 0) m(x, y) = raw(x, y) / 256.0;
    return m;
  }

  Raster<std::uint16_t> to_u16() const {
    Raster<std::uint16_t> raw(width(), height(), 0);
    for (int y = 0; y < height(); ++y) {
      for (int x = 0; x < width(); ++x) {
        if (!valid(x, y)) continue;
        const double v = std::round(disp_(x, y) * 256.0);
        raw(x, y) = static_cast<std::uint16_t>(std::clamp(v, 1.0, 65535.0));
      }
    }
    return raw;
  }

 private:
  FloatRaster disp_;
};

/// Left and right disparity maps before the consistency check.
struct DisparityPair {
  DisparityMap left;
  DisparityMap right;  // right pixel x matches left pixel x + d
};

namespace detail {

// Winner-takes-all SAD search for both views. Rectified convention:
// left(x, y) corresponds to right(x - d, y).
inline DisparityPair wta_sad(const GrayImage& left, const GrayImage& right,
                             const StereoConfig& cfg) {
  const int w = left.width();
  const int h = left.height();
  const int r = cfg.sad_radius;
  constexpr double kInf = std::numeric_limits<double>::infinity();

  FloatRaster best_l(w, h, kInf), best_r(w, h, kInf);
  DisparityPair out{DisparityMap(w, h), DisparityMap(w, h)};

  // Each row of the output depends only on rows y-r..y+r, so rows are
  // independent.
  parallel_for(static_cast<std::size_t>(std::max(h - 2 * r, 0)), cfg.threads, [&](std::size_t i) {
    const int y = static_cast<int>(i) + r;
    std::vector<double> col(static_cast<std::size_t>(w));
    for (int d = 0; d <= cfg.max_disparity && d < w; ++d) {
      // Vertical sums of |L(x) - R(x - d)| for x >= d.
      for (int x = d; x < w; ++x) {
        double s = 0.0;
        for (int dy = -r; dy <= r; ++dy) s += std::abs(left(x, y + dy) - right(x - d, y + dy));
        col[static_cast<std::size_t>(x)] = s;
      }
      for (int x = d + r; x + r < w; ++x) {
        double sad = 0.0;
        for (int dx = -r; dx <= r; ++dx) sad += col[static_cast<std::size_t>(x + dx)];
        if (sad < best_l(x, y)) {
          best_l(x, y) = sad;
          out.left(x, y) = d;
        }
        const int xr = x - d;
        if (sad < best_r(xr, y)) {
          best_r(xr, y) = sad;
          out.right(xr, y) = d;
        }
      }
    }
  });
  return out;
}

}  // namespace detail

/// Integer WTA SAD block matching with a left-right consistency check.
/// Disparities are reported for the left image; pixels whose window leaves
/// the image or that fail the check are invalid. SAD ties go to the smaller
/// disparity.
inline DisparityMap block_match(const GrayImage& left, const GrayImage& right,
                                const StereoConfig& cfg = {}) {
  cfg.validate();
  if (left.width() != right.width() || left.height() != right.height()) {
    throw std::invalid_argument("block_match: left and right image dimensions differ");
  }
  auto pair = detail::wta_sad(left, right, cfg);
  DisparityMap& dl = pair.left;
  for (int y = 0; y < dl.height(); ++y) {
    for (int x = 0; x < dl.width(); ++x) {
      if (!dl.valid(x, y)) continue;
      const int d = static_cast<int>(dl(x, y));
      const int xr = x - d;
      if (!pair.right.valid(xr, y) ||
          std::abs(pair.right(xr, y) - d) > cfg.lr_tolerance) {
        dl.invalidate(x, y);
      }
    }
  }
  return dl;
}

struct PointCandidate {
  Pixel pixel;
  Point3 position;  // world coordinates
  double depth;     // camera-frame depth in the source frame
};

/// Triangulates the selected pixels that have a valid disparity. `pose` maps
/// world to the frame's camera.
inline std::vector<PointCandidate> init_points_from_disparity(
    const Pose& pose, const DisparityMap& dmap, const std::vector<Pixel>& pixels,
    const Intrinsics& K, const GeometryConfig& geo = {}) {
  std::vector<PointCandidate> out;
  out.reserve(pixels.size());
  const Pose cam_to_world = pose.inverse();
  for (const Pixel& px : pixels) {
    if (!dmap.valid(px.x, px.y)) continue;
    const double d = dmap(px.x, px.y);
    auto X = triangulate_stereo(px.vec(), d, K, cam_to_world, geo.min_disparity);
    if (!X) continue;
    out.push_back({px, *X, K.fx * K.baseline / d});
  }
  return out;
}

/// Same as init_points_from_disparity but from a metric depth raster
/// (non-positive or non-finite entries are invalid).
inline std::vector<PointCandidate> init_points_from_depth(const Pose& pose,
                                                          const FloatRaster& depth,
                                                          const std::vector<Pixel>& pixels,
                                                          const Intrinsics& K,
                                                          const GeometryConfig& geo = {}) {
  std::vector<PointCandidate> out;
  out.reserve(pixels.size());
  const Pose cam_to_world = pose.inverse();
  for (const Pixel& px : pixels) {
    if (!depth.contains(px.x, px.y)) continue;
    const double z = depth(px.x, px.y);
    if (!std::isfinite(z) || !(z > geo.min_depth)) continue;
    const Vec3 Xc{(px.x - K.cx) * z / K.fx, (px.y - K.cy) * z / K.fy, z};
    out.push_back({px, cam_to_world * Xc, z});
  }
  return out;
}

}  // namespace pba
