#include "hieum/error.hpp"
#include "hieum/rng.hpp"
#include "hieum/tracker.hpp"

#include "test_util.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

using namespace hieum;

namespace {

using Mat = std::vector<std::vector<double>>;

Mat matmul(const Mat& a, const Mat& b) {
  Mat c(a.size(), std::vector<double>(b[0].size(), 0.0));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t k = 0; k < b.size(); ++k)
      for (std::size_t j = 0; j < b[0].size(); ++j) c[i][j] += a[i][k] * b[k][j];
  return c;
}

Mat transpose(const Mat& a) {
  Mat t(a[0].size(), std::vector<double>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[0].size(); ++j) t[j][i] = a[i][j];
  return t;
}

Mat from_state(const KalmanState& s) {
  Mat m(4, std::vector<double>(4));
  for (int i = 0; i < 16; ++i) m[static_cast<std::size_t>(i / 4)][static_cast<std::size_t>(i % 4)] = s.P[static_cast<std::size_t>(i)];
  return m;
}

double best_cost(const std::vector<double>& cost, int rows, int cols) {
  // Enumerates every injective assignment of the smaller side.
  const bool flip = rows > cols;
  const int n = flip ? cols : rows, m = flip ? rows : cols;
  std::vector<int> perm(static_cast<std::size_t>(m));
  std::iota(perm.begin(), perm.end(), 0);
  double best = 1e300;
  do {
    double c = 0.0;
    for (int i = 0; i < n; ++i) {
      const int j = perm[static_cast<std::size_t>(i)];
      c += flip ? cost[static_cast<std::size_t>(j) * cols + i] : cost[static_cast<std::size_t>(i) * cols + j];
    }
    best = std::min(best, c);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

KalmanTrack line_track(int length, double step) {
  KalmanTrack t;
  for (int i = 0; i < length; ++i) t.history.push_back({i, 10.0 + step * i, 5.0, 2, 2});
  return t;
}

}  // namespace

TEST_CASE("hungarian matches exhaustive search") {
  Rng rng(21);
  for (int trial = 0; trial < 300; ++trial) {
    const int rows = rng.uniform_int(1, 6);
    const int cols = rng.uniform_int(1, 6);
    std::vector<double> cost(static_cast<std::size_t>(rows * cols));
    for (auto& c : cost) c = trial % 3 == 0 ? static_cast<double>(rng.uniform_int(0, 3)) : rng.uniform(0, 10);
    const auto assign = hungarian(cost, rows, cols);
    double total = 0.0;
    std::vector<char> used(static_cast<std::size_t>(cols), 0);
    int matched = 0;
    for (int i = 0; i < rows; ++i) {
      const int j = assign[static_cast<std::size_t>(i)];
      if (j < 0) continue;
      REQUIRE(j < cols);
      REQUIRE_FALSE(used[static_cast<std::size_t>(j)]);
      used[static_cast<std::size_t>(j)] = 1;
      total += cost[static_cast<std::size_t>(i * cols + j)];
      ++matched;
    }
    CHECK(matched == std::min(rows, cols));
    CHECK(total == doctest::Approx(best_cost(cost, rows, cols)));
  }
  CHECK(hungarian({}, 0, 3).empty());
  CHECK_THROWS_AS(hungarian(std::vector<double>(5), 2, 3), Error);
}

TEST_CASE("association prefers more gated pairs over lower cost") {
  // Greedy nearest would pair track 0 with det 0 and leave track 1 stranded.
  const std::vector<std::array<double, 2>> tracks{{0, 0}, {9, 0}};
  const std::vector<Detection> dets{{0, 4.6, 0, 1, 1, 1}, {0, -4.6, 0, 1, 1, 1}};
  const auto a = associate(tracks, dets, 5.0);
  REQUIRE(a.matches.size() == 2);
  CHECK(a.matches[0] == std::pair{0, 1});
  CHECK(a.matches[1] == std::pair{1, 0});

  const std::vector<Detection> far{{0, 100, 100, 1, 1, 1}};
  const auto b = associate(tracks, far, 5.0);
  CHECK(b.matches.empty());
  CHECK(b.unmatched_tracks.size() == 2);
  CHECK(b.unmatched_detections == std::vector<int>{0});
}

TEST_CASE("kalman steps agree with the matrix equations") {
  TrackerConfig cfg;
  auto s = kalman_init(3.0, 4.0, cfg);
  Mat F{{1, 0, 1, 0}, {0, 1, 0, 1}, {0, 0, 1, 0}, {0, 0, 0, 1}};
  Mat H{{1, 0, 0, 0}, {0, 1, 0, 0}};
  Mat P = from_state(s);
  std::vector<double> x{3, 4, 0, 0};
  Rng rng(2);
  for (int step = 0; step < 8; ++step) {
    kalman_predict(s, cfg);
    P = matmul(matmul(F, P), transpose(F));
    for (int i = 0; i < 4; ++i) P[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)] += cfg.q;
    x = {x[0] + x[2], x[1] + x[3], x[2], x[3]};

    const double zx = 3.0 + 1.5 * (step + 1) + 0.5 * rng.normal();
    const double zy = 4.0 - 0.7 * (step + 1) + 0.5 * rng.normal();
    kalman_update(s, zx, zy, cfg);
    Mat S = matmul(matmul(H, P), transpose(H));
    S[0][0] += cfg.r;
    S[1][1] += cfg.r;
    const double det = S[0][0] * S[1][1] - S[0][1] * S[1][0];
    Mat Si{{S[1][1] / det, -S[0][1] / det}, {-S[1][0] / det, S[0][0] / det}};
    Mat K = matmul(matmul(P, transpose(H)), Si);
    const double y0 = zx - x[0], y1 = zy - x[1];
    for (std::size_t i = 0; i < 4; ++i) x[i] += K[i][0] * y0 + K[i][1] * y1;
    Mat KH = matmul(K, H);
    Mat IKH(4, std::vector<double>(4));
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 4; ++j) IKH[i][j] = (i == j ? 1.0 : 0.0) - KH[i][j];
    P = matmul(IKH, P);

    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(s.x[i] == doctest::Approx(x[i]).epsilon(1e-12));
      for (std::size_t j = 0; j < 4; ++j) CHECK(s.P[i * 4 + j] == doctest::Approx(P[i][j]).epsilon(1e-9));
    }
  }
  // A steady track converges to its true velocity.
  CHECK(s.x[2] == doctest::Approx(1.5).epsilon(0.3));
}

TEST_CASE("tracks survive short gaps and end after max_age misses") {
  DetectionSet dets;
  for (int f = 0; f < 20; ++f) {
    if (f == 7 || f == 8) continue;  // two-frame gap
    dets.add("v", {f, 10.0 + 1.0 * f, 20.0, 2, 2, 0.9});
  }
  // A second target that vanishes for three frames is split.
  for (int f = 0; f < 20; ++f) {
    if (f >= 10 && f <= 12) continue;
    dets.add("v", {f, 100.0, 50.0 + 0.5 * f, 2, 2, 0.9});
  }
  const auto set = track_video("v", dets, {});
  REQUIRE(set.tracks.size() == 3);
  CHECK(set.tracks[0].history.size() == 18);
  CHECK(set.tracks[1].history.size() == 10);
  CHECK(set.tracks[2].history.size() == 7);
  CHECK(set.tracks[2].history.front().frame == 13);
  for (const auto& t : set.tracks) CHECK(t.finished);
  CHECK(set.tracks[0].mean_velocity() == doctest::Approx(1.0));
  CHECK(track_video("none", dets, {}).tracks.empty());
}

TEST_CASE("filter keeps exactly the tracks at or above both limits") {
  const TrackFilter filter;
  CHECK_FALSE(keep_track(line_track(29, 0.55), filter));
  CHECK(keep_track(line_track(30, 0.55), filter));
  CHECK_FALSE(keep_track(line_track(30, 0.54), filter));
  CHECK_FALSE(keep_track(line_track(29, 0.54), filter));
  CHECK(keep_track(line_track(31, 2.0), filter));
  // Velocity uses the frame span, so gaps slow a track down.
  auto gappy = line_track(30, 0.55);
  for (auto& p : gappy.history) p.frame *= 2;
  CHECK_FALSE(keep_track(gappy, filter));
}

TEST_CASE("track CSV round trip") {
  testing::TempDir tmp("tracks");
  DetectionSet dets;
  for (int f = 0; f < 5; ++f) dets.add("a,b", {f, 1.0 / 3.0 + f, 2.0, 2, 3, 0.5});
  const auto set = track_video("a,b", dets, {});
  std::vector<TrackSet> sets{set};
  save_tracks(sets, tmp / "t.csv");
  const auto back = load_tracks(tmp / "t.csv");
  REQUIRE(back.size() == 1);
  CHECK(back[0].video_id == "a,b");
  REQUIRE(back[0].tracks.size() == 1);
  CHECK(back[0].tracks[0].history == set.tracks[0].history);

  std::ofstream(tmp / "bad.csv") << "video_id,track_id,frame,cx,cy,w,h\nv,0,3,1,1,1,1\nv,0,2,1,1,1,1\n";
  try {
    load_tracks(tmp / "bad.csv");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
}
