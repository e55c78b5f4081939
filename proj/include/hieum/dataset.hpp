#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace hieum {

// A window of grayscale frames, t-major then row-major, intensities in [0, 255].
class FrameClip {
 public:
  FrameClip() = default;
  FrameClip(std::string video_id, int start_frame, int frames, int height, int width,
            std::vector<float> data, double frame_rate = 10.0);

  const std::string& video_id() const { return video_id_; }
  int start_frame() const { return start_frame_; }
  double frame_rate() const { return frame_rate_; }
  int frames() const { return frames_; }
  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t frame_size() const { return static_cast<std::size_t>(height_) * width_; }

  std::span<const float> data() const { return data_; }
  std::span<const float> frame(int t) const {
    return std::span<const float>(data_).subspan(static_cast<std::size_t>(t) * frame_size(), frame_size());
  }
  float at(int t, int y, int x) const {
    return data_[static_cast<std::size_t>(t) * frame_size() + static_cast<std::size_t>(y) * width_ + x];
  }

  // Sub-window of frames [start, start + length) cropped to the given rectangle.
  FrameClip window(int start, int length, int y0, int x0, int height, int width) const;
  FrameClip window(int start, int length) const { return window(start, length, 0, 0, height_, width_); }

  bool operator==(const FrameClip&) const = default;

 private:
  std::string video_id_;
  int start_frame_ = 0;
  int frames_ = 0;
  int height_ = 0;
  int width_ = 0;
  std::vector<float> data_;
  double frame_rate_ = 10.0;
};

// Sorted frame files of a video directory: img000001.pgm, img000002.png, ...
std::vector<std::filesystem::path> list_frames(const std::filesystem::path& dir);

// Frames [start, start + length) of the directory; start is 0-based (file img000001 is index 0).
FrameClip load_clip(const std::filesystem::path& dir, int start, int length);
// Whole video directory as one clip.
FrameClip load_video(const std::filesystem::path& dir);
// Writes img000001.pgm... (rounded and clamped to 8 bits).
void save_clip(const FrameClip& clip, const std::filesystem::path& dir);

enum class Provenance { Manual, Initial, Evolved };

const char* to_string(Provenance p);

struct BoxLabel {
  int frame = 0;
  double cx = 0.0;
  double cy = 0.0;
  double w = 1.0;
  double h = 1.0;
  std::optional<int> track_id;
  Provenance provenance = Provenance::Manual;
  int round = 0;  // evolution round for Evolved labels, 0 otherwise

  bool operator==(const BoxLabel&) const = default;
};

// Per-video, per-frame boxes. Frames are 0-based indices into the video.
class LabelStore {
 public:
  using FrameMap = std::map<int, std::vector<BoxLabel>>;

  // Rejects (returns false) a label whose (cx, cy, provenance) already exists in its frame.
  bool add(const std::string& video_id, const BoxLabel& label);

  std::span<const BoxLabel> frame(const std::string& video_id, int frame) const;
  const FrameMap& video(const std::string& video_id) const;
  std::vector<std::string> videos() const;
  bool contains(const std::string& video_id) const { return videos_.count(video_id) != 0; }

  std::size_t size() const;
  std::size_t count(Provenance provenance) const;
  // Highest evolution round present among the labels.
  int round() const;

  bool operator==(const LabelStore&) const = default;

 private:
  std::map<std::string, FrameMap> videos_;
};

void save_labels(const LabelStore& store, const std::filesystem::path& path);
LabelStore load_labels(const std::filesystem::path& path);

// Shortest fixed-point text with at least three decimals that parses back to
// the same double.
std::string format_decimal(double value);

}  // namespace hieum
