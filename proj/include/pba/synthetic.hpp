#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "pba/geometry.hpp"
#include "pba/image.hpp"
#include "pba/parallel.hpp"
#include "pba/stereo.hpp"

namespace pba::synth {

struct Plane {
  Vec3 normal;    // unit
  double offset;  // normal . X = offset
};

struct Sphere {
  Vec3 center;
  double radius;
};

/// Band-limited solid texture 0.5 + sum a_i sin(k_i . X + phi_i).
struct SolidTexture {
  struct Wave {
    Vec3 k;
    double amplitude;
    double phase;
  };
  std::vector<Wave> waves;

  double operator()(const Vec3& X) const {
    double v = 0.5;
    for (const auto& w : waves) v += w.amplitude * std::sin(w.k.dot(X) + w.phase);
    return v;
  }

  /// Eight waves with wavelengths in [min_wavelength, max_wavelength] and a
  /// total amplitude of 0.45, so values stay inside [0.05, 0.95].
  static SolidTexture random(std::mt19937_64& rng, double min_wavelength, double max_wavelength,
                             int count = 8) {
    std::normal_distribution<double> n01(0.0, 1.0);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    SolidTexture t;
    std::vector<double> amps;
    double total = 0.0;
    for (int i = 0; i < count; ++i) {
      Vec3 dir{n01(rng), n01(rng), n01(rng)};
      dir.normalize();
      const double lambda = min_wavelength + (max_wavelength - min_wavelength) * u01(rng);
      const double a = 0.5 + u01(rng);
      total += a;
      t.waves.push_back({dir * (2.0 * M_PI / lambda), a, 2.0 * M_PI * u01(rng)});
    }
    for (auto& w : t.waves) w.amplitude *= 0.45 / total;
    return t;
  }
};

struct Scene {
  std::vector<Plane> planes;
  std::vector<Sphere> spheres;
  SolidTexture texture;
  double background = 0.5;
};

struct Render {
  GrayImage image;
  FloatRaster depth;  // camera-frame z, +inf where nothing is hit
};

/// Nearest ray hit along camera-frame direction `dc` (unit z), as depth.
inline double cast_ray(const Scene& scene, const Pose& c2w, const Vec3& dc) {
  double best = std::numeric_limits<double>::infinity();
  const Vec3 C = c2w.t;
  const Vec3 d = c2w.R * dc;
  for (const auto& pl : scene.planes) {
    const double den = pl.normal.dot(d);
    if (std::abs(den) < 1e-12) continue;
    const double s = (pl.offset - pl.normal.dot(C)) / den;
    if (s > 1e-6 && s < best) best = s;
  }
  for (const auto& sp : scene.spheres) {
    const Vec3 oc = C - sp.center;
    const double a = d.squaredNorm();
    const double b = oc.dot(d);
    const double c = oc.squaredNorm() - sp.radius * sp.radius;
    const double disc = b * b - a * c;
    if (disc < 0) continue;
    const double s = (-b - std::sqrt(disc)) / a;
    if (s > 1e-6 && s < best) best = s;
  }
  return best;
}

/// Ray-casts the scene and evaluates the texture at the nearest hit. Each
/// pixel averages a `supersample` x `supersample` grid of rays; the depth
/// raster holds the hit through the pixel center. `pose` maps world to
/// camera.
inline Render render(const Scene& scene, const Pose& pose, const Intrinsics& K, int width,
                     int height, int threads = 1, int supersample = 1) {
  if (supersample < 1) throw std::invalid_argument("render: supersample must be >= 1");
  constexpr double kInf = std::numeric_limits<double>::infinity();
  Render out{GrayImage(width, height, scene.background), FloatRaster(width, height, kInf)};
  const Pose c2w = pose.inverse();
  const int n = supersample;
  parallel_for(static_cast<std::size_t>(height), threads, [&](std::size_t row) {
    const int y = static_cast<int>(row);
    for (int x = 0; x < width; ++x) {
      double sum = 0.0;
      for (int sy = 0; sy < n; ++sy) {
        for (int sx = 0; sx < n; ++sx) {
          const double px = x + (sx + 0.5) / n - 0.5;
          const double py = y + (sy + 0.5) / n - 0.5;
          const Vec3 dc{(px - K.cx) / K.fx, (py - K.cy) / K.fy, 1.0};
          const double s = cast_ray(scene, c2w, dc);
          sum += s < kInf ? scene.texture(c2w.t + s * (c2w.R * dc)) : scene.background;
        }
      }
      out.image(x, y) = sum / (n * n);
      out.depth(x, y) = cast_ray(scene, c2w, Vec3{(x - K.cx) / K.fx, (y - K.cy) / K.fy, 1.0});
    }
  });
  return out;
}

enum class Scenario { kPlane, kCorridor, kPointCloud };

inline std::optional<Scenario> parse_scenario(const std::string& name) {
  if (name == "plane") return Scenario::kPlane;
  if (name == "corridor") return Scenario::kCorridor;
  if (name == "point-cloud") return Scenario::kPointCloud;
  return std::nullopt;
}

struct NoiseLevels {
  double rotation = 0.0;     // radians
  double translation = 0.0;  // fraction of the scene scale
  double depth = 0.0;        // relative depth error
};

struct SequenceOptions {
  Scenario scenario = Scenario::kPlane;
  int frames = 10;
  int width = 320;
  int height = 240;
  NoiseLevels noise;
  std::uint64_t seed = 1;
  int threads = 1;
  int supersample = 3;
};

/// Ground truth plus perturbed initializations of a rendered sequence.
struct SyntheticSequence {
  Intrinsics K;
  Scene scene;
  double scene_scale = 1.0;
  std::vector<Pose> gt;    // camera to world
  std::vector<Pose> init;  // camera to world, first frame exact
  std::vector<GrayImage> images;
  std::vector<FloatRaster> depths;  // perturbed depth rasters
};

inline Scene make_scene(Scenario s, std::mt19937_64& rng, double& scene_scale) {
  Scene scene;
  switch (s) {
    case Scenario::kPlane: {
      scene.planes.push_back({Vec3(0.08, -0.05, 1.0).normalized(), 4.0});
      scene.texture = SolidTexture::random(rng, 0.3, 0.8);
      scene_scale = 4.0;
      break;
    }
    case Scenario::kCorridor: {
      scene.planes.push_back({Vec3(1, 0, 0), 1.5});
      scene.planes.push_back({Vec3(-1, 0, 0), 1.5});
      scene.planes.push_back({Vec3(0, 1, 0), 1.0});
      scene.planes.push_back({Vec3(0, -1, 0), 1.0});
      scene.planes.push_back({Vec3(0, 0, 1), 10.0});
      scene.texture = SolidTexture::random(rng, 0.4, 1.2);
      scene_scale = 3.0;
      break;
    }
    case Scenario::kPointCloud: {
      std::uniform_real_distribution<double> ux(-2.0, 2.0), uy(-1.5, 1.5), uz(3.0, 7.0),
          ur(0.25, 0.5);
      for (int i = 0; i < 30; ++i) scene.spheres.push_back({Vec3(ux(rng), uy(rng), uz(rng)), ur(rng)});
      scene.planes.push_back({Vec3(0, 0, 1), 9.0});
      scene.texture = SolidTexture::random(rng, 0.4, 1.0);
      scene_scale = 5.0;
      break;
    }
  }
  return scene;
}

/// Ground-truth camera-to-world pose of frame i.
inline Pose trajectory_pose(Scenario s, int i) {
  switch (s) {
    case Scenario::kPlane:
      return {so3_exp(Vec3(0.0, 0.004 * i, 0.002 * i)), Vec3(0.24 * i, 0.04 * i, 0.12 * i)};
    case Scenario::kCorridor:
      return {so3_exp(Vec3(0.0, 0.003 * i, 0.0)), Vec3(0.0, 0.0, 0.3 * i)};
    case Scenario::kPointCloud:
      return {so3_exp(Vec3(0.002 * i, -0.004 * i, 0.0)), Vec3(0.15 * i, -0.03 * i, 0.15 * i)};
  }
  return {};
}

/// Disparity f * b / z of a depth raster; pixels without a finite positive
/// depth are invalid.
inline DisparityMap disparity_from_depth(const FloatRaster& depth, const Intrinsics& K) {
  DisparityMap d(depth.width(), depth.height());
  for (int y = 0; y < depth.height(); ++y) {
    for (int x = 0; x < depth.width(); ++x) {
      const double z = depth(x, y);
      if (std::isfinite(z) && z > 0.0) d(x, y) = K.fx * K.baseline / z;
    }
  }
  return d;
}

inline SyntheticSequence make_sequence(const SequenceOptions& opt) {
  if (opt.frames < 1) throw std::invalid_argument("make_sequence: frames must be >= 1");
  std::mt19937_64 rng(opt.seed);
  SyntheticSequence seq;
  // Wide field of view (about 100 degrees horizontally).
  const double f = opt.width / 2.4;
  seq.K = {f, f, (opt.width - 1) / 2.0,
           (opt.height - 1) / 2.0, 0.5};
  seq.scene = make_scene(opt.scenario, rng, seq.scene_scale);

  std::normal_distribution<double> n01(0.0, 1.0);
  const double k3 = 1.0 / std::sqrt(3.0);
  for (int i = 0; i < opt.frames; ++i) {
    const Pose gt = trajectory_pose(opt.scenario, i);
    seq.gt.push_back(gt);
    Pose init = gt;
    if (i > 0) {
      const Vec3 w{n01(rng), n01(rng), n01(rng)};
      const Vec3 v{n01(rng), n01(rng), n01(rng)};
      // Perturbation in the camera frame: c2w * [exp(w) | v].
      const Pose delta{so3_exp(w * k3 * opt.noise.rotation),
                       v * k3 * opt.noise.translation * seq.scene_scale};
      init = gt * delta;
    }
    seq.init.push_back(init);

    Render r = render(seq.scene, gt.inverse(), seq.K, opt.width, opt.height, opt.threads, opt.supersample);
    if (opt.noise.depth > 0.0) {
      for (double& z : r.depth.data()) {
        if (std::isfinite(z)) z *= 1.0 + opt.noise.depth * n01(rng);
      }
    }
    seq.images.push_back(std::move(r.image));
    seq.depths.push_back(std::move(r.depth));
  }
  return seq;
}

}  // namespace pba::synth
