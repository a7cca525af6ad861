#pragma once

#include <algorithm>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "pba/geometry.hpp"
#include "pba/image.hpp"
#include "pba/photometric_ba.hpp"
#include "pba/selection.hpp"
#include "pba/stereo.hpp"
#include "pba/visibility.hpp"
#include "pba/window.hpp"

namespace pba {

struct PipelineConfig {
  int window_size = 5;
  int window_stride = 4;  // consecutive windows share window_size - stride frames
  /// Initialize new frames by applying the external relative motion to the
  /// last refined pose instead of using the external pose directly.
  bool chain_initialization = false;
  /// Also gate newly created points against the preceding window frames
  /// within max_frame_distance, so visibility is symmetric around the
  /// reference frame.
  bool backward_visibility = true;
  SelectionConfig selection;
  VisibilityConfig visibility;
  SolverConfig solver;
  StereoConfig stereo;
  GeometryConfig geometry;

  void validate() const {
    if (window_size < 2) throw std::invalid_argument("PipelineConfig: window_size must be >= 2");
    if (window_stride < 1 || window_stride >= window_size) {
      throw std::invalid_argument("PipelineConfig: window_stride must lie in [1, window_size)");
    }
    selection.validate();
    visibility.validate();
    solver.validate();
    stereo.validate();
  }
};

/// One input frame. `pose_init` maps world to camera. At most one depth
/// source is used, in the order right image, disparity, depth.
struct FrameInput {
  GrayImage image;
  Pose pose_init;
  std::optional<GrayImage> right;
  std::optional<DisparityMap> disparity;
  std::optional<FloatRaster> depth;
};

struct FrameStats {
  FrameId id = 0;
  std::size_t visibility_accepted = 0;
  std::size_t visibility_rejected = 0;
  std::size_t selected = 0;
  std::size_t created = 0;
  std::size_t backward_accepted = 0;
};

struct WindowResult {
  int index = 0;
  std::vector<FrameId> frames;
  WindowReport report;
};

struct RetiredPoint {
  PointId id;
  Point3 position;
  FrameId ref_frame;
  std::size_t n_visible;
};

class Pipeline {
 public:
  Pipeline(const Intrinsics& K, PipelineConfig cfg = {}) : K_(K), cfg_(std::move(cfg)) {
    cfg_.validate();
    cfg_.selection.border = std::max({cfg_.selection.border, cfg_.solver.patch_radius,
                                      cfg_.visibility.zncc_patch_radius});
  }

  const PipelineConfig& config() const { return cfg_; }
  const Intrinsics& intrinsics() const { return K_; }
  const SlidingWindow& window() const { return window_; }
  /// World-to-camera pose per processed frame, refined where optimized.
  const std::vector<Pose>& trajectory() const { return trajectory_; }
  const std::vector<WindowResult>& windows() const { return windows_; }
  const std::vector<RetiredPoint>& retired_points() const { return retired_; }
  const std::vector<FrameStats>& frame_stats() const { return stats_; }

  /// Connects the frame to existing points, then seeds new points on the
  /// unoccupied gradient maxima and appends the frame to the window.
  const FrameStats& process_frame(FrameInput in) {
    if (window_full()) {
      throw std::logic_error("process_frame: window is full, call slide_and_optimize first");
    }
    const FrameId id = next_id_++;
    FrameStats st;
    st.id = id;

    Pose pose = in.pose_init;
    if (cfg_.chain_initialization && !external_.empty()) {
      pose = (in.pose_init * external_.back().inverse()) * trajectory_.back();
    }
    external_.push_back(in.pose_init);

    auto data = std::make_shared<const FrameData>(std::move(in.image));
    const GrayImage& img = data->image;

    // Step 1: visibility of existing points in the new frame.
    VisibilityUpdate vis = update_visibility(id, img, pose, window_.points, K_, cfg_.visibility,
                                             cfg_.selection.mask_block_radius, cfg_.geometry);
    st.visibility_accepted = vis.accepted;
    st.visibility_rejected = vis.rejected;

    // Step 2: new points on unmasked gradient maxima.
    const FloatRaster mag = gradient_magnitude(data->grads);
    const std::vector<Pixel> selected = select_maxima(mag, vis.mask, cfg_.selection);
    st.selected = selected.size();

    std::vector<PointCandidate> candidates;
    if (in.right) {
      const DisparityMap dm = block_match(img, *in.right, cfg_.stereo);
      candidates = init_points_from_disparity(pose, dm, selected, K_, cfg_.geometry);
    } else if (in.disparity) {
      candidates = init_points_from_disparity(pose, *in.disparity, selected, K_, cfg_.geometry);
    } else if (in.depth) {
      candidates = init_points_from_depth(pose, *in.depth, selected, K_, cfg_.geometry);
    }
    const std::size_t first_new = window_.points.size();
    for (const auto& c : candidates) {
      auto ref = extract_patch(img, c.pixel.vec(), cfg_.solver.patch_radius);
      auto gate = extract_patch(img, c.pixel.vec(), cfg_.visibility.zncc_patch_radius);
      if (!ref || !gate) continue;
      window_.points.emplace_back(next_point_id_++, c.position, id, c.pixel.vec(),
                                  std::move(*ref), std::move(*gate));
      ++st.created;
    }

    if (cfg_.backward_visibility) {
      std::span<ScenePoint> fresh(window_.points.begin() + static_cast<std::ptrdiff_t>(first_new),
                                  window_.points.end());
      for (const auto& f : window_.frames) {
        if (id - f.id > cfg_.visibility.max_frame_distance) continue;
        const auto back = update_visibility(f.id, f.data->image, f.pose, fresh, K_, cfg_.visibility,
                                            cfg_.selection.mask_block_radius, cfg_.geometry);
        st.backward_accepted += back.accepted;
      }
    }

    window_.frames.push_back({id, std::move(data), pose});
    trajectory_.push_back(pose);
    stats_.push_back(st);
    return stats_.back();
  }

  bool window_full() const {
    return static_cast<int>(window_.frames.size()) >= cfg_.window_size;
  }

  /// Optimizes the full window with its first frame fixed, records the
  /// refined poses and slides the window by the configured stride.
  const WindowResult& slide_and_optimize() {
    if (!window_full()) throw std::logic_error("slide_and_optimize: window is not full");
    const WindowResult& res = optimize_current();
    window_.frames.erase(window_.frames.begin(), window_.frames.begin() + cfg_.window_stride);
    retire_points(false);
    return res;
  }

  /// process_frame followed by slide_and_optimize when the window fills up.
  std::optional<WindowResult> push(FrameInput in) {
    process_frame(std::move(in));
    if (window_full()) return slide_and_optimize();
    return std::nullopt;
  }

  /// Optimizes a trailing partial window (if it holds at least two frames,
  /// one of them not yet refined) and retires all remaining points.
  void finish() {
    if (window_.frames.size() >= 2 && window_.frames.back().id > last_refined_) optimize_current();
    window_.frames.clear();
    retire_points(true);
  }

 private:
  const WindowResult& optimize_current() {
    WindowResult res;
    res.index = static_cast<int>(windows_.size());
    for (const auto& f : window_.frames) res.frames.push_back(f.id);
    res.report = optimize_window(window_, K_, cfg_.solver);
    for (std::size_t i = 1; i < window_.frames.size(); ++i) {
      trajectory_[static_cast<std::size_t>(window_.frames[i].id)] = window_.frames[i].pose;
    }
    last_refined_ = window_.frames.back().id;
    windows_.push_back(std::move(res));
    return windows_.back();
  }

  void retire_points(bool all) {
    const FrameId first = window_.frames.empty() ? next_id_ : window_.frames.front().id;
    auto keep = std::stable_partition(window_.points.begin(), window_.points.end(),
                                      [&](const ScenePoint& p) {
                                        if (all) return false;
                                        FrameId last = p.ref_frame();
                                        for (FrameId f : p.visibility()) last = std::max(last, f);
                                        const bool in_window = last >= first;
                                        const bool can_gain =
                                            p.ref_frame() + cfg_.visibility.max_frame_distance >= next_id_;
                                        return in_window || can_gain;
                                      });
    for (auto it = keep; it != window_.points.end(); ++it) {
      retired_.push_back({it->id(), it->position, it->ref_frame(), it->visibility().size()});
    }
    window_.points.erase(keep, window_.points.end());
  }

  Intrinsics K_;
  PipelineConfig cfg_;
  SlidingWindow window_;
  std::vector<Pose> trajectory_;
  std::vector<Pose> external_;
  std::vector<WindowResult> windows_;
  std::vector<RetiredPoint> retired_;
  std::vector<FrameStats> stats_;
  FrameId next_id_ = 0;
  FrameId last_refined_ = -1;
  PointId next_point_id_ = 0;
};

}  // namespace pba
