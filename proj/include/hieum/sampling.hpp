#pragma once

#include "hieum/background.hpp"
#include "hieum/sparse/coords.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace hieum {

struct ThresholdParams {
  double k = 3.0;
  // Statistics over the whole clip instead of each frame.
  bool per_clip = false;
};

struct ThresholdResult {
  double mean = 0.0;    // of |residual|
  double stddev = 0.0;  // population
  double threshold = 0.0;
  std::vector<std::uint8_t> mask;  // |residual| > threshold
};

// th = mean(|r|) + k * std(|r|) over one residual image, strict comparison.
ThresholdResult adaptive_threshold(std::span<const float> residual, double k);

// Active spatio-temporal sites with one feature channel (signed residual / 255).
struct PointCloud {
  int frames = 0;
  int height = 0;
  int width = 0;
  std::vector<sparse::Coord> coords;  // sorted by (t, y, x)
  std::vector<float> feats;

  std::size_t size() const { return coords.size(); }
  bool empty() const { return coords.empty(); }
  double sampling_ratio() const {
    const double total = static_cast<double>(frames) * height * width;
    return total > 0.0 ? static_cast<double>(coords.size()) / total : 0.0;
  }
};

struct SampleResult {
  PointCloud cloud;
  std::vector<double> thresholds;  // per frame (identical entries in per-clip mode)
  bool empty_cloud = false;        // no pixel passed in any frame
};

SampleResult sample_points(const ResidualClip& residuals, const ThresholdParams& params);

struct ComponentBox {
  double cx = 0.0;
  double cy = 0.0;
  double w = 0.0;
  double h = 0.0;
  int area = 0;
};

// 8-connected components of a row-major mask, tight boxes, dropping components below min_area.
std::vector<ComponentBox> connected_components(std::span<const std::uint8_t> mask, int height, int width,
                                               int min_area = 2);

}  // namespace hieum
