#pragma once

#include "hieum/detections.hpp"

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace hieum {

struct TrackerConfig {
  double gate = 10.0;  // px
  int max_age = 3;     // consecutive misses before a track is finished
  double q = 0.01;     // process noise
  double r = 1.0;      // measurement noise
  double initial_velocity_var = 100.0;
};

// Constant-velocity point filter, state (x, y, vx, vy).
struct KalmanState {
  std::array<double, 4> x{};
  std::array<double, 16> P{};  // row-major
};

KalmanState kalman_init(double x, double y, const TrackerConfig& cfg);
// Advances one frame and returns the predicted position.
std::pair<double, double> kalman_predict(KalmanState& s, const TrackerConfig& cfg);
void kalman_update(KalmanState& s, double zx, double zy, const TrackerConfig& cfg);

struct TrackPoint {
  int frame = 0;
  double cx = 0.0;
  double cy = 0.0;
  double w = 1.0;
  double h = 1.0;

  bool operator==(const TrackPoint&) const = default;
};

struct KalmanTrack {
  int id = 0;
  KalmanState state;
  int hits = 0;
  int misses = 0;
  bool finished = false;
  std::vector<TrackPoint> history;  // observed detections, frames strictly increasing

  // Path length over frame span; 0 for a single point.
  double mean_velocity() const;
};

struct TrackSet {
  std::string video_id;
  std::vector<KalmanTrack> tracks;  // ordered by id
};

// Minimum-cost assignment on a rows x cols cost matrix (row-major). Returns the
// column of each row, or -1. Every row is matched when rows <= cols and vice versa.
std::vector<int> hungarian(std::span<const double> cost, int rows, int cols);

struct Association {
  std::vector<std::pair<int, int>> matches;  // (track, detection)
  std::vector<int> unmatched_tracks;
  std::vector<int> unmatched_detections;
};

// Gated optimal assignment: maximises the number of pairs within `gate`, then
// minimises their summed distance.
Association associate(std::span<const std::array<double, 2>> tracks, std::span<const Detection> dets, double gate);

TrackSet track_video(const std::string& video_id, const DetectionSet::FrameMap& frames, const TrackerConfig& cfg);
TrackSet track_video(const std::string& video_id, const DetectionSet& dets, const TrackerConfig& cfg);

struct TrackFilter {
  int min_length = 30;
  double min_velocity = 0.55;  // px/frame
};

bool keep_track(const KalmanTrack& track, const TrackFilter& filter);
TrackSet filter_tracks(const TrackSet& tracks, const TrackFilter& filter);

// CSV: video_id,track_id,frame,cx,cy,w,h
void save_tracks(std::span<const TrackSet> sets, const std::filesystem::path& path);
std::vector<TrackSet> load_tracks(const std::filesystem::path& path);

}  // namespace hieum
