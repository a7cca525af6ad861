#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <span>
#include <stdexcept>
#include <vector>

#include "pba/geometry.hpp"
#include "pba/image.hpp"
#include "pba/selection.hpp"

namespace pba {

using FrameId = int;
using PointId = std::int64_t;

/// A scene point with its descriptor frozen at the reference frame.
class ScenePoint {
 public:
  ScenePoint(PointId id, const Point3& position, FrameId ref_frame, const Vec2& ref_pixel,
             Patch ref_patch, Patch gate_patch)
      : id_(id),
        ref_frame_(ref_frame),
        ref_pixel_(ref_pixel),
        ref_patch_(std::move(ref_patch)),
        gate_patch_(std::move(gate_patch)),
        position(position) {}

  PointId id() const { return id_; }
  FrameId ref_frame() const { return ref_frame_; }
  const Vec2& ref_pixel() const { return ref_pixel_; }
  /// Photometric descriptor used by the solver.
  const Patch& ref_patch() const { return ref_patch_; }
  /// Reference-side patch for the ZNCC visibility gate.
  const Patch& gate_patch() const { return gate_patch_; }
  const std::vector<FrameId>& visibility() const { return visibility_; }

  bool visible_in(FrameId f) const {
    return std::find(visibility_.begin(), visibility_.end(), f) != visibility_.end();
  }

  /// Returns false (and leaves the list unchanged) for the reference frame or
  /// a frame that is already present.
  bool add_visibility(FrameId f) {
    if (f == ref_frame_ || visible_in(f)) return false;
    visibility_.push_back(f);
    return true;
  }

 private:
  PointId id_;
  FrameId ref_frame_;
  Vec2 ref_pixel_;
  Patch ref_patch_;
  Patch gate_patch_;
  std::vector<FrameId> visibility_;

 public:
  Point3 position;
};

struct VisibilityConfig {
  double zncc_threshold = 0.6;
  int max_frame_distance = 2;
  int zncc_patch_radius = 2;  // 5x5

  void validate() const {
    if (!(zncc_threshold > -1.0 && zncc_threshold < 1.0)) {
      throw std::invalid_argument("VisibilityConfig: zncc_threshold must lie in (-1, 1)");
    }
    if (max_frame_distance < 1 || zncc_patch_radius < 1) {
      throw std::invalid_argument("VisibilityConfig: distances must be >= 1");
    }
  }
};

struct VisibilityUpdate {
  OccupancyMask mask;
  std::size_t accepted = 0;
  std::size_t rejected = 0;
};

/// Connects a new frame to nearby scene points. Every point whose reference
/// frame is within max_frame_distance is projected with the frame's pose
/// initialization and gated by ZNCC against its reference-side patch.
/// Accepted points gain `frame_id` in their visibility list and reserve a
/// block of the returned occupancy mask.
inline VisibilityUpdate update_visibility(FrameId frame_id, const GrayImage& img,
                                          const Pose& pose, std::span<ScenePoint> points,
                                          const Intrinsics& K, const VisibilityConfig& cfg = {},
                                          int mask_block_radius = 1,
                                          const GeometryConfig& geo = {}) {
  cfg.validate();
  VisibilityUpdate out{OccupancyMask(img.width(), img.height())};
  for (ScenePoint& pt : points) {
    if (std::abs(frame_id - pt.ref_frame()) > cfg.max_frame_distance) continue;
    if (frame_id == pt.ref_frame()) continue;
    const auto proj = project(pose, K, pt.position, geo.min_depth);
    if (!proj) continue;
    const auto patch = extract_patch(img, proj->uv, cfg.zncc_patch_radius);
    if (!patch) continue;
    if (patch->dim() != pt.gate_patch().dim()) {
      throw std::invalid_argument("update_visibility: gate patch radius mismatch");
    }
    if (zncc(pt.gate_patch(), *patch) > cfg.zncc_threshold) {
      pt.add_visibility(frame_id);
      mark_occupied(out.mask, proj->uv, mask_block_radius);
      ++out.accepted;
    } else {
      ++out.rejected;
    }
  }
  return out;
}

}  // namespace pba
