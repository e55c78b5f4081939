#include "hieum/error.hpp"
#include "hieum/sampling.hpp"

#include "test_util.hpp"

#include <doctest.h>

#include <cmath>

using namespace hieum;

namespace {

ResidualClip random_residuals(Rng& rng, int T, int H, int W) {
  ResidualClip r;
  r.frames = T;
  r.height = H;
  r.width = W;
  for (int i = 0; i < T * H * W; ++i) {
    // Mostly small noise with a few large spikes, like real residuals.
    const double v = rng.uniform() < 0.02 ? rng.uniform(-200, 200) : rng.normal() * 4.0;
    r.residuals.push_back(static_cast<float>(std::round(v)));
  }
  return r;
}

// Component labelling by repeated relaxation: each pixel takes the smallest
// label among its 8 neighbours until nothing changes.
std::vector<ComponentBox> relaxation_components(const std::vector<std::uint8_t>& mask, int H, int W, int min_area) {
  std::vector<int> label(mask.size(), -1);
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) label[i] = static_cast<int>(i);
  }
  for (bool changed = true; changed;) {
    changed = false;
    for (int y = 0; y < H; ++y) {
      for (int x = 0; x < W; ++x) {
        int& l = label[y * W + x];
        if (l < 0) continue;
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int ny = y + dy, nx = x + dx;
            if (ny < 0 || nx < 0 || ny >= H || nx >= W) continue;
            const int o = label[ny * W + nx];
            if (o >= 0 && o < l) {
              l = o;
              changed = true;
            }
          }
        }
      }
    }
  }
  std::vector<ComponentBox> out;
  for (int root = 0; root < H * W; ++root) {
    if (label[root] != root) continue;
    int y0 = H, y1 = -1, x0 = W, x1 = -1, area = 0;
    for (int i = 0; i < H * W; ++i) {
      if (label[i] != root) continue;
      ++area;
      y0 = std::min(y0, i / W);
      y1 = std::max(y1, i / W);
      x0 = std::min(x0, i % W);
      x1 = std::max(x1, i % W);
    }
    if (area >= min_area) out.push_back({(x0 + x1) / 2.0, (y0 + y1) / 2.0, x1 - x0 + 1.0, y1 - y0 + 1.0, area});
  }
  return out;
}

}  // namespace

TEST_CASE("threshold of a known frame") {
  const std::vector<float> r{0, 0, 0, 4, -4, 0, 0, 0};
  const auto th = adaptive_threshold(r, 1.0);
  CHECK(th.mean == doctest::Approx(1.0));
  CHECK(th.stddev == doctest::Approx(std::sqrt(3.0)));
  CHECK(th.mask == std::vector<std::uint8_t>{0, 0, 0, 1, 1, 0, 0, 0});
  // |r| == threshold is not sampled.
  const std::vector<float> flat{2, 2, 2, 2};
  CHECK(adaptive_threshold(flat, 3.0).mask == std::vector<std::uint8_t>(4, 0));
  CHECK_THROWS_AS(adaptive_threshold(r, -1.0), Error);
}

TEST_CASE("per-clip statistics share one threshold") {
  Rng rng(2);
  const auto res = random_residuals(rng, 3, 10, 10);
  const auto out = sample_points(res, {2.0, true});
  CHECK(out.thresholds.size() == 3);
  CHECK(out.thresholds[0] == out.thresholds[2]);
  const auto whole = adaptive_threshold(res.residuals, 2.0);
  CHECK(out.thresholds[0] == whole.threshold);
  std::size_t n = 0;
  for (auto m : whole.mask) n += m;
  CHECK(out.cloud.size() == n);
}

TEST_CASE("static clip yields an empty cloud") {
  ResidualClip r;
  r.frames = 4;
  r.height = 3;
  r.width = 3;
  r.residuals.assign(36, 0.0f);
  const auto out = sample_points(r, {});
  CHECK(out.empty_cloud);
  CHECK(out.cloud.sampling_ratio() == 0.0);
}

TEST_CASE("connected components match the relaxation oracle") {
  Rng rng(13);
  for (int trial = 0; trial < 200; ++trial) {
    const int H = rng.uniform_int(1, 12), W = rng.uniform_int(1, 12);
    const double density = rng.uniform(0.05, 0.6);
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(H) * W);
    for (auto& m : mask) m = rng.uniform() < density;
    const int min_area = rng.uniform_int(1, 3);
    auto got = connected_components(mask, H, W, min_area);
    auto want = relaxation_components(mask, H, W, min_area);
    auto key = [](const ComponentBox& b) { return std::tuple(b.cy, b.cx, b.w, b.h, b.area); };
    std::sort(got.begin(), got.end(), [&](auto& a, auto& b) { return key(a) < key(b); });
    std::sort(want.begin(), want.end(), [&](auto& a, auto& b) { return key(a) < key(b); });
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < got.size(); ++i) CHECK(key(got[i]) == key(want[i]));
  }
}

TEST_CASE("diagonal pixels join and single pixels drop at min_area 2") {
  const std::vector<std::uint8_t> mask{1, 0, 0, 0,  //
                                       0, 1, 0, 1,  //
                                       0, 0, 0, 0};
  const auto boxes = connected_components(mask, 3, 4, 2);
  REQUIRE(boxes.size() == 1);
  CHECK(boxes[0].cx == 0.5);
  CHECK(boxes[0].cy == 0.5);
  CHECK(boxes[0].w == 2.0);
  CHECK(boxes[0].area == 2);
}
