#include "hieum/evaluation.hpp"
#include "hieum/image_io.hpp"

#include "test_util.hpp"

#include <doctest.h>

#include <json.hpp>

using namespace hieum;

namespace {

BoxLabel gt(int frame, double cx, double cy) { return {frame, cx, cy, 2, 2, {}, Provenance::Manual, 0}; }

}  // namespace

TEST_CASE("matching radius is inclusive") {
  const std::vector<BoxLabel> gts{gt(0, 10, 10)};
  const std::vector<Detection> at{{0, 13, 14, 2, 2, 0.9}};            // distance 5 exactly
  const std::vector<Detection> beyond{{0, 15.000001, 10, 2, 2, 0.9}};  // 5.000001
  CHECK(match_frame(at, gts, 5.0).tp == 1);
  const auto miss = match_frame(beyond, gts, 5.0);
  CHECK(miss.tp == 0);
  CHECK(miss.fp == 1);
  CHECK(miss.fn == 1);
}

TEST_CASE("greedy matching runs in score order and is one-to-one") {
  const std::vector<BoxLabel> gts{gt(0, 0, 0), gt(0, 4, 0)};
  // In score order: (3,0) takes (4,0), then (3.5,0) takes (0,0) even though (1,0) is closer to it.
  const std::vector<Detection> dets{{0, 1, 0, 2, 2, 0.2}, {0, 3, 0, 2, 2, 0.8}, {0, 3.5, 0, 2, 2, 0.7}};
  const auto m = match_frame_detail(dets, gts, 5.0);
  CHECK(m.det_match == std::vector<int>{-1, 1, 0});
  CHECK(m.gt_match == std::vector<int>{2, 1});
  CHECK(m.counts.tp == 2);
  CHECK(m.counts.fp == 1);
  CHECK(m.counts.fn == 0);
}

TEST_CASE("per-video metrics and arithmetic averages") {
  LabelStore labels;
  DetectionSet dets;
  // Video a: 4 truths, 3 hits, 1 false alarm -> Re 75, Pr 75.
  for (int f = 0; f < 4; ++f) labels.add("a", gt(f, 10, 10));
  for (int f = 0; f < 3; ++f) dets.add("a", {f, 10, 11, 2, 2, 0.9});
  dets.add("a", {3, 40, 40, 2, 2, 0.9});
  // Video b: 1 truth, 1 hit -> 100/100.
  labels.add("b", gt(0, 5, 5));
  dets.add("b", {0, 5, 5, 2, 2, 0.5});
  // Video c: truth only -> 0/0.
  labels.add("c", gt(2, 5, 5));
  const auto r = score(dets, labels);
  REQUIRE(r.videos.size() == 3);
  CHECK(r.videos[0].recall == doctest::Approx(75.0));
  CHECK(r.videos[0].precision == doctest::Approx(75.0));
  CHECK(r.videos[0].f1 == doctest::Approx(75.0));
  CHECK(r.videos[2].f1 == 0.0);
  CHECK(r.recall == doctest::Approx((75.0 + 100.0 + 0.0) / 3));
  CHECK(r.f1 == doctest::Approx((75.0 + 100.0) / 3));
  CHECK(r.total.tp == 4);
  CHECK(r.total.fp == 1);
  CHECK(r.total.fn == 2);

  CHECK(f1_score(50.0, 100.0) == doctest::Approx(2 * 50.0 * 100.0 / 150.0));
  CHECK(f1_score(0.0, 0.0) == 0.0);

  const auto j = nlohmann::json::parse(report_json(r));
  CHECK(j["videos"].size() == 3);
  CHECK(j["average"]["recall"].get<double>() == doctest::Approx(r.recall));
  CHECK(j["total"]["fn"] == 2);
  const auto table = report_table(r);
  CHECK(table.find("average") != std::string::npos);
  CHECK(table.find("75.0") != std::string::npos);
}

TEST_CASE("overlays colour hits, false alarms and misses") {
  testing::TempDir tmp("overlay");
  std::vector<float> px(2 * 20 * 20, 100.0f);
  const FrameClip clip("v", 0, 2, 20, 20, px);
  LabelStore labels;
  labels.add("v", gt(0, 5, 5));
  labels.add("v", gt(1, 15, 15));
  DetectionSet dets;
  dets.add("v", {0, 5, 5, 2, 2, 0.9});
  dets.add("v", {1, 5, 5, 2, 2, 0.9});
  write_overlays(clip, dets, labels, 5.0, tmp / "ov");
  const auto f0 = read_rgb_png(tmp / "ov" / "img000001.png");
  const auto f1 = read_rgb_png(tmp / "ov" / "img000002.png");
  auto pixel = [](const RgbImage& img, int x, int y) {
    const auto* p = &img.pixels[(static_cast<std::size_t>(y) * img.width + x) * 3];
    return std::array<int, 3>{p[0], p[1], p[2]};
  };
  // Box outline for a 2x2 box at (5,5) runs through x = 3.
  CHECK(pixel(f0, 3, 5) == std::array<int, 3>{255, 255, 0});
  CHECK(pixel(f1, 3, 5) == std::array<int, 3>{255, 0, 0});
  CHECK(pixel(f1, 13, 15) == std::array<int, 3>{0, 255, 0});
  CHECK(pixel(f0, 10, 10) == std::array<int, 3>{100, 100, 100});
}
