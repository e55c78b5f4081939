#include "hieum/evolution.hpp"
#include "hieum/synth.hpp"

#include "test_util.hpp"

#include <doctest.h>

#include <cmath>

using namespace hieum;

namespace {

BoxLabel box(int frame, double cx, double cy, Provenance p = Provenance::Initial) {
  return {frame, cx, cy, 2, 2, {}, p, 0};
}

}  // namespace

TEST_CASE("a static scene yields no detections and no labels") {
  Rng rng(5);
  const auto frame = testing::random_clip(rng, 1 + 1, 24, 24);
  std::vector<float> px;
  for (int t = 0; t < 30; ++t) px.insert(px.end(), frame.frame(0).begin(), frame.frame(0).end());
  const FrameClip still("still", 0, 30, 24, 24, px);
  CHECK(traditional_detect(still, 3.0).size() == 0);
  CHECK(make_initial_labels(still, {}).size() == 0);
}

TEST_CASE("a one-frame blink is detected in exactly that frame") {
  std::vector<float> px(9 * 32 * 32, 80.0f);
  for (int y = 10; y < 13; ++y)
    for (int x = 20; x < 23; ++x) px[static_cast<std::size_t>((4 * 32 + y) * 32 + x)] = 130.0f;
  const FrameClip clip("b", 100, 9, 32, 32, px);
  const auto dets = traditional_detect(clip, 3.0);
  REQUIRE(dets.size() == 1);
  const auto f = dets.frame("b", 104);
  REQUIRE(f.size() == 1);
  CHECK(f[0].cx == 21.0);
  CHECK(f[0].cy == 11.0);
  CHECK(f[0].w == 3.0);
  // A lone blink never lasts long enough to survive the track filter.
  CHECK(make_initial_labels(clip, {}).size() == 0);
}

TEST_CASE("initial labels follow a moving target and drop clutter") {
  SynthConfig sc;
  sc.height = 64;
  sc.width = 96;
  sc.frames = 40;
  sc.n_clutter_blinks = 6;
  sc.seed = 3;
  sc.targets = {TargetSpec{10.5, 30.5, 1.5, 0.25, 3, 50.0}};
  const auto v = synth_video(sc);
  const auto labels = make_initial_labels(v.clip, {});
  CHECK(labels.size() >= 36);
  CHECK(labels.size() <= 40);
  CHECK(labels.count(Provenance::Initial) == labels.size());
  for (const auto& [frame, boxes] : labels.video("synth")) {
    REQUIRE(boxes.size() == 1);
    const auto truth = v.truth.frame("synth", frame);
    REQUIRE(truth.size() == 1);
    CHECK(std::hypot(boxes[0].cx - truth[0].cx, boxes[0].cy - truth[0].cy) <= 1.0);
    CHECK(boxes[0].track_id.has_value());
  }
}

TEST_CASE("merge adds only candidates beyond the radius") {
  LabelStore store;
  store.add("v", box(0, 10, 10));
  LabelStore cand;
  cand.add("v", box(0, 15, 10, Provenance::Evolved));      // exactly 5 away
  cand.add("v", box(0, 10, 15.01, Provenance::Evolved));   // just outside
  cand.add("v", box(0, 10, 17, Provenance::Evolved));      // near the one just added
  cand.add("v", box(1, 10, 10, Provenance::Evolved));      // other frame
  cand.add("w", box(0, 10, 10, Provenance::Evolved));      // other video
  const auto stats = merge_labels(store, cand, 5.0);
  CHECK(stats.candidates == 5);
  CHECK(stats.added == 3);
  CHECK(store.frame("v", 0).size() == 2);
  CHECK(store.frame("v", 0)[1].cy == 15.01);
  CHECK(store.count(Provenance::Initial) == 1);

  // A negative radius only rejects exact duplicates.
  LabelStore all;
  CHECK(merge_labels(all, cand, -1.0).added == 5);
}

TEST_CASE("framework alternates training and label rounds") {
  testing::TempDir tmp("framework");
  SynthConfig sc;
  sc.height = 48;
  sc.width = 48;
  sc.frames = 16;
  sc.n_targets = 3;
  sc.seed = 9;
  const auto v = synth_video(sc);

  FrameworkConfig cfg;
  cfg.train.network = {2, {4, 8}};
  cfg.train.clip_frames = 8;
  cfg.train.crop = 32;
  cfg.train.batch = 2;
  cfg.train.epochs = 3;
  cfg.train.lr = 1e-3;
  cfg.train.lr_milestones = {};
  cfg.pseudo.clip_frames = 8;
  cfg.pseudo.filter.min_length = 5;
  cfg.update_period = 1;
  cfg.output_dir = tmp / "out";

  const auto res = run_framework({v.clip}, cfg);
  CHECK(res.epochs.size() == 3);
  REQUIRE(res.state.history.size() == 3);  // round 0 plus one after epochs 1 and 2
  CHECK(res.state.round == 2);
  CHECK(res.state.history[2].epoch == 2);
  CHECK(res.state.current.size() == res.state.initial.size() + res.state.history[1].added + res.state.history[2].added);
  for (const auto& [frame, boxes] : res.state.initial.video("synth")) {
    for (const auto& b : boxes) {
      bool kept = false;
      for (const auto& c : res.state.current.frame("synth", frame)) kept = kept || c == b;
      CHECK(kept);
    }
  }
  for (const char* name : {"labels_round0.csv", "labels_round1.csv", "labels_round2.csv", "model.ckpt",
                           "framework.json", "checkpoints/epoch_3.ckpt"}) {
    CHECK_MESSAGE(std::filesystem::exists(tmp / "out" / name), name);
  }
  CHECK(load_labels(tmp / "out" / "labels_round2.csv") == res.state.current);

  // Given labels replace round 0; update_period 0 trains once on them.
  LabelStore given;
  given.add("synth", box(0, 20, 20, Provenance::Manual));
  cfg.output_dir.clear();
  cfg.update_period = 0;
  cfg.train.epochs = 1;
  const auto once = run_framework({v.clip}, cfg, given);
  CHECK(once.state.round == 0);
  CHECK(once.state.current == given);
}
