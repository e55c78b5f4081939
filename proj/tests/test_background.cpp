#include "hieum/background.hpp"
#include "hieum/error.hpp"
#include "hieum/parallel.hpp"

#include "test_util.hpp"

#include <doctest.h>

#include <algorithm>

using namespace hieum;

namespace {

// Full sort of each pixel's series.
std::vector<float> sort_median(const FrameClip& clip) {
  std::vector<float> out(clip.frame_size());
  for (int y = 0; y < clip.height(); ++y) {
    for (int x = 0; x < clip.width(); ++x) {
      std::vector<double> s;
      for (int t = 0; t < clip.frames(); ++t) s.push_back(clip.at(t, y, x));
      std::sort(s.begin(), s.end());
      const auto n = s.size();
      const double m = n % 2 ? s[n / 2] : (s[n / 2 - 1] + s[n / 2]) / 2.0;
      out[static_cast<std::size_t>(y) * clip.width() + x] = static_cast<float>(m);
    }
  }
  return out;
}

}  // namespace

TEST_CASE("temporal median equals the sorting oracle") {
  Rng rng(21);
  for (int trial = 0; trial < 40; ++trial) {
    const int T = rng.uniform_int(2, 25);
    const auto clip = testing::random_clip(rng, T, rng.uniform_int(1, 9), rng.uniform_int(1, 9), trial % 2 == 0);
    const auto bg = temporal_median(clip);
    CHECK(bg.pixels == sort_median(clip));
  }
}

TEST_CASE("median ignores a minority of outlier frames") {
  Rng rng(4);
  const int T = 20, H = 5, W = 6;
  std::vector<float> data(static_cast<std::size_t>(T) * H * W);
  std::vector<float> base(H * W);
  for (auto& b : base) b = static_cast<float>(rng.uniform_int(0, 255));
  for (int t = 0; t < T; ++t) {
    for (int i = 0; i < H * W; ++i) data[static_cast<std::size_t>(t) * H * W + i] = base[i];
  }
  // Up to floor((T - 1) / 2) = 9 outliers per pixel.
  for (int i = 0; i < H * W; ++i) {
    std::vector<int> frames(T);
    for (int t = 0; t < T; ++t) frames[t] = t;
    rng.shuffle(frames.begin(), frames.end());
    const int outliers = rng.uniform_int(0, (T - 1) / 2);
    for (int j = 0; j < outliers; ++j) {
      data[static_cast<std::size_t>(frames[j]) * H * W + i] = static_cast<float>(rng.uniform_int(0, 255));
    }
  }
  const auto bg = temporal_median(FrameClip("o", 0, T, H, W, data));
  CHECK(bg.pixels == base);
}

TEST_CASE("median does not depend on the worker count") {
  Rng rng(8);
  const auto clip = testing::random_clip(rng, 20, 90, 100, false);
  const int before = threads();
  set_threads(1);
  const auto one = temporal_median(clip);
  set_threads(4);
  const auto four = temporal_median(clip);
  set_threads(before);
  CHECK(one.pixels == four.pixels);
}

TEST_CASE("residuals are frame minus background") {
  Rng rng(5);
  const auto clip = testing::random_clip(rng, 4, 3, 3);
  const auto res = background_residuals(clip);
  for (int t = 0; t < 4; ++t) {
    for (int y = 0; y < 3; ++y) {
      for (int x = 0; x < 3; ++x) {
        CHECK(res.frame(t)[y * 3 + x] == clip.at(t, y, x) - res.background.pixels[y * 3 + x]);
      }
    }
  }
  const FrameClip still("s", 0, 5, 2, 2, std::vector<float>(20, 42.0f));
  const auto zero = background_residuals(still);
  CHECK(std::all_of(zero.residuals.begin(), zero.residuals.end(), [](float v) { return v == 0.0f; }));

  CHECK_THROWS_AS(compute_residuals(clip, Image{2, 2, std::vector<float>(4)}), Error);
}
