#include "hieum/dataset.hpp"
#include "hieum/error.hpp"
#include "hieum/image_io.hpp"
#include "hieum/synth.hpp"

#include "test_util.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

using namespace hieum;

namespace {

void write_frames(const std::filesystem::path& dir, int count, int height, int width, std::uint8_t value) {
  std::filesystem::create_directories(dir);
  GrayImage img{height, width, std::vector<std::uint8_t>(static_cast<std::size_t>(height) * width, value)};
  for (int i = 1; i <= count; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "img%06d.pgm", i);
    write_pgm(dir / name, img);
  }
}

}  // namespace

TEST_CASE("load_clip reads the requested window") {
  testing::TempDir tmp("clip");
  write_frames(tmp / "v", 30, 4, 4, 17);
  const auto clip = load_clip(tmp / "v", 0, 20);
  CHECK(clip.frames() == 20);
  CHECK(clip.height() == 4);
  CHECK(clip.width() == 4);
  CHECK(clip.video_id() == "v");
  CHECK(clip.at(19, 3, 3) == 17.0f);

  const auto tail = load_clip(tmp / "v", 25, 5);
  CHECK(tail.start_frame() == 25);
  CHECK_THROWS_AS(load_clip(tmp / "v", 25, 6), Error);
}

TEST_CASE("missing frames and size mismatches are reported") {
  testing::TempDir tmp("clip-err");
  write_frames(tmp / "v", 5, 4, 4, 1);
  std::filesystem::remove(tmp / "v" / "img000003.pgm");
  try {
    load_clip(tmp / "v", 0, 5);
    FAIL("expected MissingFrame");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MissingFrame);
    CHECK(std::string(e.what()).find("img000003") != std::string::npos);
  }

  write_frames(tmp / "w", 3, 4, 4, 1);
  write_pgm(tmp / "w" / "img000002.pgm", GrayImage{4, 5, std::vector<std::uint8_t>(20, 0)});
  try {
    load_clip(tmp / "w", 0, 3);
    FAIL("expected ShapeMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ShapeMismatch);
  }
}

TEST_CASE("save then load is the identity on 8-bit clips") {
  testing::TempDir tmp("roundtrip");
  Rng rng(3);
  const auto clip = testing::random_clip(rng, 6, 7, 9);
  save_clip(clip, tmp / "rand");
  const auto back = load_video(tmp / "rand");
  CHECK(back.frames() == clip.frames());
  CHECK(std::equal(back.data().begin(), back.data().end(), clip.data().begin(), clip.data().end()));
}

TEST_CASE("png and ascii pgm frames decode to the same gray values") {
  testing::TempDir tmp("png");
  GrayImage img{3, 4, {0, 10, 20, 30, 40, 50, 60, 70, 80, 90, 100, 255}};
  write_png(tmp / "a.png", img);
  const auto png = read_gray_image(tmp / "a.png");
  CHECK(png.pixels == img.pixels);

  std::ofstream(tmp / "b.pgm") << "P2\n# comment\n4 3\n255\n0 10 20 30\n40 50 60 70\n80 90 100 255\n";
  CHECK(read_gray_image(tmp / "b.pgm").pixels == img.pixels);

  RgbImage rgb{1, 2, {255, 0, 0, 0, 0, 255}};
  write_png(tmp / "c.png", rgb);
  const auto gray = read_gray_image(tmp / "c.png");
  CHECK(gray.pixels[0] == static_cast<std::uint8_t>(std::lround(0.299 * 255)));
  CHECK(gray.pixels[1] == static_cast<std::uint8_t>(std::lround(0.114 * 255)));

  std::ofstream(tmp / "bad.pgm") << "P5\n4 3\n255\n";
  CHECK_THROWS_AS(read_gray_image(tmp / "bad.pgm"), Error);
}

TEST_CASE("clip windows crop frames and space") {
  Rng rng(1);
  const auto clip = testing::random_clip(rng, 5, 6, 7);
  const auto w = clip.window(1, 3, 2, 3, 4, 2);
  CHECK(w.start_frame() == 1);
  for (int t = 0; t < 3; ++t) {
    for (int y = 0; y < 4; ++y) {
      for (int x = 0; x < 2; ++x) CHECK(w.at(t, y, x) == clip.at(t + 1, y + 2, x + 3));
    }
  }
  CHECK_THROWS_AS(clip.window(4, 2), Error);
}

TEST_CASE("clips reject out-of-range intensities") {
  CHECK_THROWS_AS(FrameClip("x", 0, 2, 1, 1, {0.0f, 256.0f}), Error);
  CHECK_THROWS_AS(FrameClip("x", 0, 2, 1, 1, {0.0f, NAN}), Error);
  CHECK_THROWS_AS(FrameClip("x", 0, 1, 1, 1, {0.0f}), Error);
}

TEST_CASE("label CSV round trip is lossless") {
  testing::TempDir tmp("labels");
  LabelStore store;
  store.add("a", BoxLabel{0, 1.0 / 3.0, 2.5, 3, 4, 7, Provenance::Manual, 0});
  store.add("a", BoxLabel{5, 100.125, 0.0, 1, 1, std::nullopt, Provenance::Initial, 0});
  store.add("b,c", BoxLabel{2, 1e-7, 12345.678901234, 2, 2, 1, Provenance::Evolved, 3});
  save_labels(store, tmp / "l.csv");
  const auto back = load_labels(tmp / "l.csv");
  CHECK(back == store);
  CHECK(back.round() == 3);
  CHECK(back.count(Provenance::Initial) == 1);

  std::ifstream in(tmp / "l.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == "video_id,frame,cx,cy,w,h,track_id,provenance,round");
}

TEST_CASE("malformed label rows name the line") {
  testing::TempDir tmp("labels-bad");
  const std::string header = "video_id,frame,cx,cy,w,h,track_id,provenance,round\n";
  auto expect_line = [&](const std::string& body, std::size_t line) {
    std::ofstream(tmp / "x.csv") << header << body;
    try {
      load_labels(tmp / "x.csv");
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line() == line);
    }
  };
  expect_line("a,0,1.000,1.000,1.000,1.000,,manual,0\na,zero,1,1,1,1,,manual,0\n", 3);
  expect_line("a,0,1,1,1,1,,robot,0\n", 2);
  expect_line("a,0,1,1,-1,1,,manual,0\n", 2);
  expect_line("a,0,1,1,1\n", 2);
  expect_line("a,0,nan,1,1,1,,manual,0\n", 2);
}

TEST_CASE("format_decimal keeps three decimals and round-trips") {
  CHECK(format_decimal(1.0) == "1.000");
  CHECK(format_decimal(0.1) == "0.100");
  const double third = 1.0 / 3.0;
  CHECK(std::stod(format_decimal(third)) == third);
}

TEST_CASE("synth_video is deterministic and labels every target") {
  SynthConfig cfg;
  cfg.height = 64;
  cfg.width = 80;
  cfg.frames = 12;
  cfg.n_targets = 3;
  cfg.seed = 11;
  const auto a = synth_video(cfg);
  const auto b = synth_video(cfg);
  CHECK(a.clip == b.clip);
  CHECK(a.truth == b.truth);
  CHECK(a.truth.size() == 36);
  for (const auto& [frame, boxes] : a.truth.video("synth")) {
    for (const auto& box : boxes) {
      CHECK(box.cx >= box.w / 2 - 0.5);
      CHECK(box.cx <= cfg.width - 0.5 - box.w / 2);
    }
  }
  cfg.seed = 12;
  CHECK_FALSE(synth_video(cfg).clip == a.clip);
}

TEST_CASE("synth targets land where the trajectory says") {
  SynthConfig cfg;
  cfg.height = 40;
  cfg.width = 40;
  cfg.frames = 4;
  cfg.noise_sigma = 0.0;
  cfg.textured_background = false;
  cfg.n_clutter_blinks = 0;
  cfg.targets = {TargetSpec{9.5, 19.5, 2.0, 0.0, 2, 50.0}};
  const auto v = synth_video(cfg);
  // Pixel p spans [p - 0.5, p + 0.5], so a 2x2 box centered at (9.5, 19.5)
  // fills pixels 9..10 in x and 19..20 in y exactly.
  CHECK(v.clip.at(0, 19, 9) == 160.0f);
  CHECK(v.clip.at(0, 20, 10) == 160.0f);
  CHECK(v.clip.at(0, 20, 11) == 110.0f);
  CHECK(v.clip.at(1, 19, 11) == 160.0f);
  CHECK(v.clip.at(1, 19, 13) == 110.0f);
  // Off-grid centers spread intensity by area.
  cfg.targets = {TargetSpec{10.0, 19.5, 0.0, 0.0, 2, 50.0}};
  const auto half = synth_video(cfg);
  CHECK(half.clip.at(0, 19, 9) == 135.0f);
  CHECK(half.clip.at(0, 19, 10) == 160.0f);
  CHECK(v.truth.frame("synth", 3)[0].cx == doctest::Approx(15.5));
}
