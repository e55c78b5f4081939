#include "hieum/sampling.hpp"

#include "hieum/error.hpp"

#include <algorithm>
#include <cmath>

namespace hieum {
namespace {

struct Moments {
  double mean = 0.0;
  double stddev = 0.0;
};

// Two-pass mean / population std of |r| in storage order.
Moments abs_moments(std::span<const float> r) {
  if (r.empty()) return {};
  double sum = 0.0;
  for (float v : r) sum += std::fabs(static_cast<double>(v));
  const double mean = sum / static_cast<double>(r.size());
  double sq = 0.0;
  for (float v : r) {
    const double d = std::fabs(static_cast<double>(v)) - mean;
    sq += d * d;
  }
  return {mean, std::sqrt(sq / static_cast<double>(r.size()))};
}

}  // namespace

ThresholdResult adaptive_threshold(std::span<const float> residual, double k) {
  if (k < 0.0) throw Error(ErrorCode::InvalidArgument, "threshold k must be >= 0");
  ThresholdResult out;
  const auto m = abs_moments(residual);
  out.mean = m.mean;
  out.stddev = m.stddev;
  out.threshold = m.mean + k * m.stddev;
  out.mask.resize(residual.size());
  for (std::size_t i = 0; i < residual.size(); ++i) {
    out.mask[i] = std::fabs(static_cast<double>(residual[i])) > out.threshold ? 1 : 0;
  }
  return out;
}

SampleResult sample_points(const ResidualClip& residuals, const ThresholdParams& params) {
  if (params.k < 0.0) throw Error(ErrorCode::InvalidArgument, "threshold k must be >= 0");
  SampleResult out;
  auto& cloud = out.cloud;
  cloud.frames = residuals.frames;
  cloud.height = residuals.height;
  cloud.width = residuals.width;

  double clip_threshold = 0.0;
  if (params.per_clip) {
    const auto m = abs_moments(residuals.residuals);
    clip_threshold = m.mean + params.k * m.stddev;
  }
  for (int t = 0; t < residuals.frames; ++t) {
    const auto frame = residuals.frame(t);
    double th = clip_threshold;
    if (!params.per_clip) {
      const auto m = abs_moments(frame);
      th = m.mean + params.k * m.stddev;
    }
    out.thresholds.push_back(th);
    for (int y = 0; y < residuals.height; ++y) {
      for (int x = 0; x < residuals.width; ++x) {
        const float r = frame[static_cast<std::size_t>(y) * residuals.width + x];
        if (std::fabs(static_cast<double>(r)) > th) {
          cloud.coords.push_back({t, y, x});
          cloud.feats.push_back(r / 255.0f);
        }
      }
    }
  }
  out.empty_cloud = cloud.empty();
  return out;
}

std::vector<ComponentBox> connected_components(std::span<const std::uint8_t> mask, int height, int width,
                                               int min_area) {
  if (mask.size() != static_cast<std::size_t>(height) * width) {
    throw Error(ErrorCode::ShapeMismatch, "mask size does not match height*width");
  }
  std::vector<ComponentBox> boxes;
  std::vector<std::uint8_t> seen(mask.size(), 0);
  std::vector<int> stack;
  for (int sy = 0; sy < height; ++sy) {
    for (int sx = 0; sx < width; ++sx) {
      const auto start = static_cast<std::size_t>(sy) * width + sx;
      if (!mask[start] || seen[start]) continue;
      int y0 = sy, y1 = sy, x0 = sx, x1 = sx, area = 0;
      seen[start] = 1;
      stack.assign(1, static_cast<int>(start));
      while (!stack.empty()) {
        const int p = stack.back();
        stack.pop_back();
        const int py = p / width;
        const int px = p % width;
        ++area;
        y0 = std::min(y0, py);
        y1 = std::max(y1, py);
        x0 = std::min(x0, px);
        x1 = std::max(x1, px);
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int ny = py + dy;
            const int nx = px + dx;
            if (ny < 0 || nx < 0 || ny >= height || nx >= width) continue;
            const auto q = static_cast<std::size_t>(ny) * width + nx;
            if (mask[q] && !seen[q]) {
              seen[q] = 1;
              stack.push_back(static_cast<int>(q));
            }
          }
        }
      }
      if (area < min_area) continue;
      boxes.push_back({(x0 + x1) / 2.0, (y0 + y1) / 2.0, static_cast<double>(x1 - x0 + 1),
                       static_cast<double>(y1 - y0 + 1), area});
    }
  }
  return boxes;
}

}  // namespace hieum
