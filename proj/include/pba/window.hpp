#pragma once

#include <memory>
#include <vector>

#include "pba/geometry.hpp"
#include "pba/image.hpp"
#include "pba/visibility.hpp"

namespace pba {

/// Immutable per-frame image data shared between the window and points.
struct FrameData {
  GrayImage image;
  GradientPair grads;

  explicit FrameData(GrayImage img) : image(std::move(img)), grads(gradients(image)) {}
};

struct WindowFrame {
  FrameId id = 0;
  std::shared_ptr<const FrameData> data;
  Pose pose;  // world to camera
};

/// Frames (strictly increasing ids) and the scene points jointly refined
/// with them.
struct SlidingWindow {
  std::vector<WindowFrame> frames;
  std::vector<ScenePoint> points;

  /// Index of frame `id` in `frames`, or -1.
  int frame_index(FrameId id) const {
    for (std::size_t i = 0; i < frames.size(); ++i)
      if (frames[i].id == id) return static_cast<int>(i);
    return -1;
  }
};

}  // namespace pba
