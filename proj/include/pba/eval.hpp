#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "pba/geometry.hpp"

namespace pba {

struct SegmentError {
  double length = 0.0;              // segment length (scene units, meters on KITTI)
  double translation_percent = 0.0; // mean translation error / length * 100
  double rotation_deg_per_m = 0.0;  // mean rotation error / length, degrees
  std::size_t samples = 0;
};

/// Segment lengths used by the KITTI odometry benchmark.
inline std::vector<double> kitti_segment_lengths() {
  return {100, 200, 300, 400, 500, 600, 700, 800};
}

/// KITTI-style relative pose error between camera-to-world trajectories.
/// For every `step`-th start frame and every length L, the relative motion
/// to the first frame whose ground-truth path distance exceeds L is
/// compared. Lengths without any complete segment are omitted, so a
/// trajectory shorter than every length gives an empty result.
inline std::vector<SegmentError> relative_error(const std::vector<Pose>& estimate,
                                                const std::vector<Pose>& ground_truth,
                                                const std::vector<double>& lengths,
                                                std::size_t step = 10) {
  if (estimate.size() != ground_truth.size()) {
    throw std::invalid_argument("relative_error: trajectories differ in length (" +
                                std::to_string(estimate.size()) + " vs " +
                                std::to_string(ground_truth.size()) + ")");
  }
  if (step == 0) throw std::invalid_argument("relative_error: step must be >= 1");
  const std::size_t n = ground_truth.size();
  std::vector<double> dist(n, 0.0);
  for (std::size_t i = 1; i < n; ++i) {
    dist[i] = dist[i - 1] + (ground_truth[i].t - ground_truth[i - 1].t).norm();
  }

  std::vector<SegmentError> out;
  for (double len : lengths) {
    double t_sum = 0.0, r_sum = 0.0;
    std::size_t count = 0;
    for (std::size_t first = 0; first < n; first += step) {
      std::size_t last = n;
      for (std::size_t i = first; i < n; ++i) {
        if (dist[i] > dist[first] + len) {
          last = i;
          break;
        }
      }
      if (last == n) continue;
      const Pose d_gt = ground_truth[first].inverse() * ground_truth[last];
      const Pose d_est = estimate[first].inverse() * estimate[last];
      const Pose err = d_est.inverse() * d_gt;
      r_sum += rotation_angle(err.R) / len;
      t_sum += err.t.norm() / len;
      ++count;
    }
    if (count == 0) continue;
    out.push_back({len, 100.0 * t_sum / static_cast<double>(count),
                   (r_sum / static_cast<double>(count)) * 180.0 / M_PI, count});
  }
  return out;
}

}  // namespace pba
