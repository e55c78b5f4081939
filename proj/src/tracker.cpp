#include "hieum/tracker.hpp"

#include "csv_util.hpp"
#include "hieum/dataset.hpp"
#include "hieum/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>

namespace hieum {

KalmanState kalman_init(double x, double y, const TrackerConfig& cfg) {
  KalmanState s;
  s.x = {x, y, 0.0, 0.0};
  s.P.fill(0.0);
  s.P[0] = cfg.r;
  s.P[5] = cfg.r;
  s.P[10] = cfg.initial_velocity_var;
  s.P[15] = cfg.initial_velocity_var;
  return s;
}

std::pair<double, double> kalman_predict(KalmanState& s, const TrackerConfig& cfg) {
  s.x[0] += s.x[2];
  s.x[1] += s.x[3];
  // P = F P F^T + qI with F = [[I, I], [0, I]] in 2x2 blocks.
  const auto& P = s.P;
  std::array<double, 16> FP{};
  for (int c = 0; c < 4; ++c) {
    FP[0 * 4 + c] = P[0 * 4 + c] + P[2 * 4 + c];
    FP[1 * 4 + c] = P[1 * 4 + c] + P[3 * 4 + c];
    FP[2 * 4 + c] = P[2 * 4 + c];
    FP[3 * 4 + c] = P[3 * 4 + c];
  }
  std::array<double, 16> out{};
  for (int r = 0; r < 4; ++r) {
    out[r * 4 + 0] = FP[r * 4 + 0] + FP[r * 4 + 2];
    out[r * 4 + 1] = FP[r * 4 + 1] + FP[r * 4 + 3];
    out[r * 4 + 2] = FP[r * 4 + 2];
    out[r * 4 + 3] = FP[r * 4 + 3];
  }
  for (int i = 0; i < 4; ++i) out[i * 5] += cfg.q;
  s.P = out;
  return {s.x[0], s.x[1]};
}

void kalman_update(KalmanState& s, double zx, double zy, const TrackerConfig& cfg) {
  auto& P = s.P;
  // H selects (x, y); S = P[:2,:2] + rI.
  const double s00 = P[0] + cfg.r;
  const double s01 = P[1];
  const double s10 = P[4];
  const double s11 = P[5] + cfg.r;
  const double det = s00 * s11 - s01 * s10;
  const double i00 = s11 / det;
  const double i01 = -s01 / det;
  const double i10 = -s10 / det;
  const double i11 = s00 / det;
  // K = P H^T S^-1 (4x2)
  std::array<double, 8> K{};
  for (int r = 0; r < 4; ++r) {
    const double p0 = P[r * 4 + 0];
    const double p1 = P[r * 4 + 1];
    K[r * 2 + 0] = p0 * i00 + p1 * i10;
    K[r * 2 + 1] = p0 * i01 + p1 * i11;
  }
  const double y0 = zx - s.x[0];
  const double y1 = zy - s.x[1];
  for (int r = 0; r < 4; ++r) s.x[static_cast<std::size_t>(r)] += K[r * 2] * y0 + K[r * 2 + 1] * y1;
  // P = (I - K H) P
  std::array<double, 16> out{};
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) {
      out[r * 4 + c] = P[r * 4 + c] - K[r * 2] * P[0 * 4 + c] - K[r * 2 + 1] * P[1 * 4 + c];
    }
  }
  // Keep the covariance exactly symmetric against rounding drift.
  for (int r = 0; r < 4; ++r) {
    for (int c = r + 1; c < 4; ++c) {
      const double m = 0.5 * (out[r * 4 + c] + out[c * 4 + r]);
      out[r * 4 + c] = m;
      out[c * 4 + r] = m;
    }
  }
  P = out;
}

double KalmanTrack::mean_velocity() const {
  if (history.size() < 2) return 0.0;
  double path = 0.0;
  for (std::size_t i = 1; i < history.size(); ++i) {
    path += std::hypot(history[i].cx - history[i - 1].cx, history[i].cy - history[i - 1].cy);
  }
  return path / static_cast<double>(history.back().frame - history.front().frame);
}

std::vector<int> hungarian(std::span<const double> cost, int rows, int cols) {
  if (rows < 0 || cols < 0 || cost.size() != static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols)) {
    throw Error(ErrorCode::ShapeMismatch, "cost matrix size mismatch");
  }
  std::vector<int> result(static_cast<std::size_t>(rows), -1);
  if (rows == 0 || cols == 0) return result;
  // Shortest augmenting path formulation with potentials; needs n <= m.
  const bool transpose = rows > cols;
  const int n = transpose ? cols : rows;
  const int m = transpose ? rows : cols;
  auto a = [&](int i, int j) {
    return transpose ? cost[static_cast<std::size_t>(j) * cols + i] : cost[static_cast<std::size_t>(i) * cols + j];
  };
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(static_cast<std::size_t>(n + 1), 0.0), v(static_cast<std::size_t>(m + 1), 0.0);
  std::vector<int> p(static_cast<std::size_t>(m + 1), 0), way(static_cast<std::size_t>(m + 1), 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(m + 1), inf);
    std::vector<char> used(static_cast<std::size_t>(m + 1), 0);
    do {
      used[static_cast<std::size_t>(j0)] = 1;
      const int i0 = p[static_cast<std::size_t>(j0)];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= m; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        const double cur = a(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] - v[static_cast<std::size_t>(j)];
        if (cur < minv[static_cast<std::size_t>(j)]) {
          minv[static_cast<std::size_t>(j)] = cur;
          way[static_cast<std::size_t>(j)] = j0;
        }
        if (minv[static_cast<std::size_t>(j)] < delta) {
          delta = minv[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[static_cast<std::size_t>(j)]) {
          u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
          v[static_cast<std::size_t>(j)] -= delta;
        } else {
          minv[static_cast<std::size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<std::size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<std::size_t>(j0)];
      p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }
  for (int j = 1; j <= m; ++j) {
    const int i = p[static_cast<std::size_t>(j)];
    if (i == 0) continue;
    if (transpose) {
      result[static_cast<std::size_t>(j - 1)] = i - 1;
    } else {
      result[static_cast<std::size_t>(i - 1)] = j - 1;
    }
  }
  return result;
}

Association associate(std::span<const std::array<double, 2>> tracks, std::span<const Detection> dets, double gate) {
  Association out;
  const int n = static_cast<int>(tracks.size());
  const int m = static_cast<int>(dets.size());
  std::vector<double> dist(static_cast<std::size_t>(n) * static_cast<std::size_t>(m));
  // Out-of-gate pairs cost more than any full set of in-gate pairs, so the
  // optimum first maximises the number of gated matches.
  const double big = gate * (std::min(n, m) + 1) + 1.0;
  std::vector<double> cost(dist.size());
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) {
      const auto k = static_cast<std::size_t>(i) * m + j;
      dist[k] = std::hypot(tracks[static_cast<std::size_t>(i)][0] - dets[static_cast<std::size_t>(j)].cx,
                           tracks[static_cast<std::size_t>(i)][1] - dets[static_cast<std::size_t>(j)].cy);
      cost[k] = dist[k] <= gate ? dist[k] : big;
    }
  }
  const auto assign = hungarian(cost, n, m);
  std::vector<char> det_used(static_cast<std::size_t>(m), 0);
  for (int i = 0; i < n; ++i) {
    const int j = assign[static_cast<std::size_t>(i)];
    if (j >= 0 && dist[static_cast<std::size_t>(i) * m + j] <= gate) {
      out.matches.emplace_back(i, j);
      det_used[static_cast<std::size_t>(j)] = 1;
    } else {
      out.unmatched_tracks.push_back(i);
    }
  }
  for (int j = 0; j < m; ++j) {
    if (!det_used[static_cast<std::size_t>(j)]) out.unmatched_detections.push_back(j);
  }
  return out;
}

TrackSet track_video(const std::string& video_id, const DetectionSet::FrameMap& frames, const TrackerConfig& cfg) {
  TrackSet set;
  set.video_id = video_id;
  if (frames.empty()) return set;
  std::vector<std::size_t> active;  // indices into set.tracks
  const int first = frames.begin()->first;
  const int last = frames.rbegin()->first;
  int next_id = 0;
  for (int f = first; f <= last; ++f) {
    const auto it = frames.find(f);
    const std::span<const Detection> dets =
        it == frames.end() ? std::span<const Detection>() : std::span<const Detection>(it->second);

    std::vector<std::array<double, 2>> predicted;
    for (auto idx : active) {
      const auto [px, py] = kalman_predict(set.tracks[idx].state, cfg);
      predicted.push_back({px, py});
    }
    const auto assoc = associate(predicted, dets, cfg.gate);
    for (const auto& [ti, di] : assoc.matches) {
      auto& tr = set.tracks[active[static_cast<std::size_t>(ti)]];
      const auto& d = dets[static_cast<std::size_t>(di)];
      kalman_update(tr.state, d.cx, d.cy, cfg);
      tr.history.push_back({f, d.cx, d.cy, d.w, d.h});
      ++tr.hits;
      tr.misses = 0;
    }
    for (int ti : assoc.unmatched_tracks) {
      auto& tr = set.tracks[active[static_cast<std::size_t>(ti)]];
      if (++tr.misses >= cfg.max_age) tr.finished = true;
    }
    std::vector<std::size_t> still;
    for (auto idx : active) {
      if (!set.tracks[idx].finished) still.push_back(idx);
    }
    for (int di : assoc.unmatched_detections) {
      const auto& d = dets[static_cast<std::size_t>(di)];
      KalmanTrack tr;
      tr.id = next_id++;
      tr.state = kalman_init(d.cx, d.cy, cfg);
      tr.hits = 1;
      tr.history.push_back({f, d.cx, d.cy, d.w, d.h});
      set.tracks.push_back(std::move(tr));
      still.push_back(set.tracks.size() - 1);
    }
    active = std::move(still);
  }
  for (auto idx : active) set.tracks[idx].finished = true;
  return set;
}

TrackSet track_video(const std::string& video_id, const DetectionSet& dets, const TrackerConfig& cfg) {
  return track_video(video_id, dets.video(video_id), cfg);
}

bool keep_track(const KalmanTrack& track, const TrackFilter& filter) {
  // Slack absorbs rounding in the path-length sum for tracks sitting exactly on the threshold.
  constexpr double kSlack = 1e-9;
  return static_cast<int>(track.history.size()) >= filter.min_length &&
         track.mean_velocity() >= filter.min_velocity - kSlack;
}

TrackSet filter_tracks(const TrackSet& tracks, const TrackFilter& filter) {
  TrackSet out;
  out.video_id = tracks.video_id;
  for (const auto& t : tracks.tracks) {
    if (keep_track(t, filter)) out.tracks.push_back(t);
  }
  return out;
}

namespace {
constexpr const char* kTrackHeader = "video_id,track_id,frame,cx,cy,w,h";
}

void save_tracks(std::span<const TrackSet> sets, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << kTrackHeader << '\n';
  for (const auto& set : sets) {
    for (const auto& t : set.tracks) {
      for (const auto& p : t.history) {
        out << detail::quote_csv(set.video_id) << ',' << t.id << ',' << p.frame << ',' << format_decimal(p.cx) << ','
            << format_decimal(p.cy) << ',' << format_decimal(p.w) << ',' << format_decimal(p.h) << '\n';
      }
    }
  }
  if (!out) throw Error(ErrorCode::Io, "short write to " + path.string());
}

std::vector<TrackSet> load_tracks(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ParseError(1, "missing header");
  detail::strip_cr(line);
  if (line != kTrackHeader) throw ParseError(1, "unexpected header '" + line + "'");
  std::map<std::string, std::map<int, KalmanTrack>> byvideo;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    detail::strip_cr(line);
    if (line.empty()) continue;
    const auto f = detail::split_csv(line);
    if (f.size() != 7) throw ParseError(line_no, "expected 7 fields, got " + std::to_string(f.size()));
    const int id = detail::parse_int(f[1], line_no, "track_id");
    TrackPoint p;
    p.frame = detail::parse_int(f[2], line_no, "frame");
    p.cx = detail::parse_double(f[3], line_no, "cx");
    p.cy = detail::parse_double(f[4], line_no, "cy");
    p.w = detail::parse_double(f[5], line_no, "w");
    p.h = detail::parse_double(f[6], line_no, "h");
    auto& tr = byvideo[f[0]][id];
    tr.id = id;
    tr.finished = true;
    if (!tr.history.empty() && tr.history.back().frame >= p.frame) {
      throw ParseError(line_no, "track frames must increase");
    }
    tr.history.push_back(p);
    tr.hits = static_cast<int>(tr.history.size());
  }
  std::vector<TrackSet> out;
  for (auto& [vid, tracks] : byvideo) {
    TrackSet set;
    set.video_id = vid;
    for (auto& [id, t] : tracks) set.tracks.push_back(std::move(t));
    out.push_back(std::move(set));
  }
  return out;
}

}  // namespace hieum
