#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pba/geometry.hpp"

namespace pba {

/// Row-major single-channel raster. GrayImage holds intensities in [0, 1];
/// the same container backs gradient and magnitude rasters.
template <typename T>
class Raster {
 public:
  Raster() = default;
  Raster(int width, int height, T fill = T{})
      : width_(width), height_(height), data_(checkedSize(width, height), fill) {}
  Raster(int width, int height, std::vector<T> data)
      : width_(width), height_(height), data_(std::move(data)) {
    if (data_.size() != checkedSize(width, height)) {
      throw std::invalid_argument("Raster: data length " + std::to_string(data_.size()) +
                                  " does not match " + std::to_string(width) + "x" +
                                  std::to_string(height));
    }
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& operator()(int x, int y) { return data_[index(x, y)]; }
  const T& operator()(int x, int y) const { return data_[index(x, y)]; }

  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }

  bool operator==(const Raster&) const = default;

 private:
  static std::size_t checkedSize(int w, int h) {
    if (w < 0 || h < 0) throw std::invalid_argument("Raster: negative dimensions");
    return static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  }
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

using GrayImage = Raster<double>;
using FloatRaster = Raster<double>;

struct Pixel {
  int x = 0;
  int y = 0;

  Vec2 vec() const { return {static_cast<double>(x), static_cast<double>(y)}; }
  bool operator==(const Pixel&) const = default;
  auto operator<=>(const Pixel&) const = default;
};

struct GradientPair {
  FloatRaster gx;
  FloatRaster gy;
};

struct Patch {
  int radius = 1;
  std::vector<double> values;

  int side() const { return 2 * radius + 1; }
  std::size_t dim() const { return values.size(); }
};

/// Whether (x, y) lies in the bilinear sampling domain [0, w-1] x [0, h-1].
template <typename T>
bool in_sampling_domain(const Raster<T>& img, double x, double y) {
  return x >= 0.0 && y >= 0.0 && x <= img.width() - 1 && y <= img.height() - 1;
}

/// Bilinear interpolation without bounds checks. The caller guarantees
/// in_sampling_domain(img, x, y).
template <typename T>
double sample_bilinear_unchecked(const Raster<T>& img, double x, double y) {
  int x0 = static_cast<int>(std::floor(x));
  int y0 = static_cast<int>(std::floor(y));
  // Keep the 2x2 stencil inside the image on the last row/column.
  if (x0 >= img.width() - 1) x0 = std::max(img.width() - 2, 0);
  if (y0 >= img.height() - 1) y0 = std::max(img.height() - 2, 0);
  const double ax = x - x0;
  const double ay = y - y0;
  const int x1 = std::min(x0 + 1, img.width() - 1);
  const int y1 = std::min(y0 + 1, img.height() - 1);
  const double top = (1.0 - ax) * img(x0, y0) + ax * img(x1, y0);
  const double bot = (1.0 - ax) * img(x0, y1) + ax * img(x1, y1);
  return (1.0 - ay) * top + ay * bot;
}

template <typename T>
std::optional<double> sample_bilinear(const Raster<T>& img, double x, double y) {
  if (!in_sampling_domain(img, x, y)) return std::nullopt;
  return sample_bilinear_unchecked(img, x, y);
}

template <typename T>
std::optional<double> sample_bilinear(const Raster<T>& img, const Vec2& p) {
  return sample_bilinear(img, p.x(), p.y());
}

/// Central differences 1/2 [-1 0 1] in x and y; one-sided differences on the
/// border. Throws std::invalid_argument for images smaller than 3x3.
inline GradientPair gradients(const GrayImage& img) {
  const int w = img.width();
  const int h = img.height();
  if (w < 3 || h < 3) {
    throw std::invalid_argument("gradients: image must be at least 3x3, got " +
                                std::to_string(w) + "x" + std::to_string(h));
  }
  GradientPair g{FloatRaster(w, h), FloatRaster(w, h)};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (x == 0) {
        g.gx(x, y) = img(1, y) - img(0, y);
      } else if (x == w - 1) {
        g.gx(x, y) = img(w - 1, y) - img(w - 2, y);
      } else {
        g.gx(x, y) = 0.5 * (img(x + 1, y) - img(x - 1, y));
      }
      if (y == 0) {
        g.gy(x, y) = img(x, 1) - img(x, 0);
      } else if (y == h - 1) {
        g.gy(x, y) = img(x, h - 1) - img(x, h - 2);
      } else {
        g.gy(x, y) = 0.5 * (img(x, y + 1) - img(x, y - 1));
      }
    }
  }
  return g;
}

inline FloatRaster gradient_magnitude(const GradientPair& g) {
  FloatRaster mag(g.gx.width(), g.gx.height());
  auto gx = g.gx.data();
  auto gy = g.gy.data();
  auto out = mag.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::hypot(gx[i], gy[i]);
  return mag;
}

inline FloatRaster gradient_magnitude(const GrayImage& img) {
  return gradient_magnitude(gradients(img));
}

/// Samples the (2r+1)^2 axis-aligned footprint around `center`, offsets
/// enumerated row-major. Returns nullopt if any sample leaves the image.
inline std::optional<Patch> extract_patch(const GrayImage& img, const Vec2& center, int radius) {
  if (radius < 0) throw std::invalid_argument("extract_patch: negative radius");
  if (!in_sampling_domain(img, center.x() - radius, center.y() - radius) ||
      !in_sampling_domain(img, center.x() + radius, center.y() + radius)) {
    return std::nullopt;
  }
  Patch p;
  p.radius = radius;
  p.values.reserve(static_cast<std::size_t>(p.side() * p.side()));
  for (int dy = -radius; dy <= radius; ++dy) {
    for (int dx = -radius; dx <= radius; ++dx) {
      p.values.push_back(sample_bilinear_unchecked(img, center.x() + dx, center.y() + dy));
    }
  }
  return p;
}

/// Zero-mean normalized cross-correlation in [-1, 1]. A patch whose
/// variance is below 1e-12 is uninformative and scores 0.
inline double zncc(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("zncc: dimension mismatch (" + std::to_string(a.size()) +
                                " vs " + std::to_string(b.size()) + ")");
  }
  if (a.empty()) return 0.0;
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa / n < 1e-12 || sbb / n < 1e-12) return 0.0;
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

inline double zncc(const Patch& a, const Patch& b) { return zncc(a.values, b.values); }

}  // namespace pba
