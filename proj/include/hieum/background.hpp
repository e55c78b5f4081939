#pragma once

#include "hieum/dataset.hpp"

#include <span>
#include <vector>

namespace hieum {

struct Image {
  int height = 0;
  int width = 0;
  std::vector<float> pixels;
};

// Signed residuals frame - background, plus the background they were taken against.
struct ResidualClip {
  int frames = 0;
  int height = 0;
  int width = 0;
  std::vector<float> residuals;
  Image background;

  std::size_t frame_size() const { return static_cast<std::size_t>(height) * width; }
  std::span<const float> frame(int t) const {
    return std::span<const float>(residuals).subspan(static_cast<std::size_t>(t) * frame_size(), frame_size());
  }
};

// Per-pixel median over all frames of the clip; even T averages the two central values.
Image temporal_median(const FrameClip& clip);

ResidualClip compute_residuals(const FrameClip& clip, const Image& background);

inline ResidualClip background_residuals(const FrameClip& clip) {
  return compute_residuals(clip, temporal_median(clip));
}

}  // namespace hieum
