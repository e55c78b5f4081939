#include "hieum/background.hpp"

#include "hieum/error.hpp"
#include "hieum/parallel.hpp"

#include <algorithm>

namespace hieum {

Image temporal_median(const FrameClip& clip) {
  const int T = clip.frames();
  const auto n = clip.frame_size();
  Image bg{clip.height(), clip.width(), std::vector<float>(n)};
  const auto data = clip.data();
  parallel_for(n, 4096, [&](std::size_t begin, std::size_t end) {
    std::vector<float> series(T);
    const auto mid = static_cast<std::size_t>(T / 2);
    for (std::size_t i = begin; i < end; ++i) {
      for (int t = 0; t < T; ++t) series[t] = data[static_cast<std::size_t>(t) * n + i];
      std::nth_element(series.begin(), series.begin() + static_cast<std::ptrdiff_t>(mid), series.end());
      const float upper = series[mid];
      if (T % 2 == 1) {
        bg.pixels[i] = upper;
      } else {
        const float lower = *std::max_element(series.begin(), series.begin() + static_cast<std::ptrdiff_t>(mid));
        bg.pixels[i] = static_cast<float>((static_cast<double>(lower) + upper) / 2.0);
      }
    }
  });
  return bg;
}

ResidualClip compute_residuals(const FrameClip& clip, const Image& background) {
  if (background.height != clip.height() || background.width != clip.width() ||
      background.pixels.size() != clip.frame_size()) {
    throw Error(ErrorCode::ShapeMismatch, "background shape does not match clip frames");
  }
  ResidualClip out;
  out.frames = clip.frames();
  out.height = clip.height();
  out.width = clip.width();
  out.background = background;
  out.residuals.resize(clip.data().size());
  const auto n = clip.frame_size();
  const auto data = clip.data();
  for (std::size_t i = 0; i < data.size(); ++i) out.residuals[i] = data[i] - background.pixels[i % n];
  return out;
}

}  // namespace hieum
