#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace hieum {

struct Detection {
  int frame = 0;
  double cx = 0.0;
  double cy = 0.0;
  double w = 1.0;
  double h = 1.0;
  double score = 0.0;

  bool operator==(const Detection&) const = default;
};

// Per-video, per-frame detections (0-based frames).
class DetectionSet {
 public:
  using FrameMap = std::map<int, std::vector<Detection>>;

  void add(const std::string& video_id, const Detection& det);
  void add_frame(const std::string& video_id, int frame, std::span<const Detection> dets);
  // Registers a video with no detections so it still shows up in reports.
  void touch(const std::string& video_id) { videos_[video_id]; }

  std::span<const Detection> frame(const std::string& video_id, int frame) const;
  const FrameMap& video(const std::string& video_id) const;
  std::vector<std::string> videos() const;
  std::size_t size() const;

  bool operator==(const DetectionSet&) const = default;

 private:
  std::map<std::string, FrameMap> videos_;
};

// CSV: video_id,frame,cx,cy,w,h,score
void save_detections(const DetectionSet& dets, const std::filesystem::path& path);
DetectionSet load_detections(const std::filesystem::path& path);

}  // namespace hieum
