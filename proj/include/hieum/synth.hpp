#pragma once

#include "hieum/dataset.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace hieum {

struct TargetSpec {
  double cx = 0.0;  // center at frame 0, pixels
  double cy = 0.0;
  double vx = 0.0;  // px/frame
  double vy = 0.0;
  int size = 3;     // square side, pixels
  double delta = 40.0;  // intensity offset over the background (negative = dark target)
};

struct SynthConfig {
  std::string video_id = "synth";
  int height = 256;
  int width = 256;
  int frames = 60;
  int n_targets = 8;
  double delta_min = 30.0;  // |target intensity delta| range
  double delta_max = 60.0;
  double dark_fraction = 0.25;
  double speed_min = 0.8;  // px/frame
  double speed_max = 2.0;
  int size_min = 2;
  int size_max = 4;
  double noise_sigma = 3.0;
  int n_clutter_blinks = 10;
  bool textured_background = true;
  std::uint64_t seed = 0;
  // When non-empty these targets are rendered instead of n_targets random ones.
  std::vector<TargetSpec> targets;
};

struct SynthVideo {
  FrameClip clip;
  LabelStore truth;
};

// Moving squares over a static background, with border reflection and
// single-frame clutter blinks. Ground truth has provenance manual.
SynthVideo synth_video(const SynthConfig& cfg);

// Center of a reflecting constant-velocity trajectory at frame t.
std::pair<double, double> target_center(const TargetSpec& target, int t, int height, int width);

}  // namespace hieum
