#include "hieum/dataset.hpp"

#include "csv_util.hpp"

#include "hieum/error.hpp"
#include "hieum/image_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <regex>
#include <sstream>

namespace hieum {

FrameClip::FrameClip(std::string video_id, int start_frame, int frames, int height, int width,
                     std::vector<float> data, double frame_rate)
    : video_id_(std::move(video_id)),
      start_frame_(start_frame),
      frames_(frames),
      height_(height),
      width_(width),
      data_(std::move(data)),
      frame_rate_(frame_rate) {
  if (frames_ < 2 || height_ < 1 || width_ < 1) {
    throw Error(ErrorCode::InvalidArgument, "clip needs T >= 2 and H, W >= 1");
  }
  if (data_.size() != static_cast<std::size_t>(frames_) * frame_size()) {
    throw Error(ErrorCode::ShapeMismatch, "clip data size does not match T*H*W");
  }
  for (float v : data_) {
    if (!std::isfinite(v) || v < 0.0f || v > 255.0f) {
      throw Error(ErrorCode::InvalidArgument, "clip intensities must be finite and within [0, 255]");
    }
  }
}

FrameClip FrameClip::window(int start, int length, int y0, int x0, int height, int width) const {
  if (start < 0 || length < 2 || start + length > frames_ || y0 < 0 || x0 < 0 || height < 1 ||
      width < 1 || y0 + height > height_ || x0 + width > width_) {
    throw Error(ErrorCode::InvalidArgument, "clip window out of range");
  }
  std::vector<float> out(static_cast<std::size_t>(length) * height * width);
  auto dst = out.begin();
  for (int t = start; t < start + length; ++t) {
    for (int y = y0; y < y0 + height; ++y) {
      const auto row = data_.begin() + static_cast<std::ptrdiff_t>(t * frame_size() + static_cast<std::size_t>(y) * width_ + x0);
      dst = std::copy(row, row + width, dst);
    }
  }
  return FrameClip(video_id_, start_frame_ + start, length, height, width, std::move(out), frame_rate_);
}

namespace {

const std::regex& frame_pattern() {
  static const std::regex pattern(R"(img(\d{6})\.(pgm|png|PGM|PNG))");
  return pattern;
}

}  // namespace

std::vector<std::filesystem::path> list_frames(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw Error(ErrorCode::Io, "not a directory: " + dir.string());
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    if (std::regex_match(entry.path().filename().string(), frame_pattern())) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end(),
            [](const auto& a, const auto& b) { return a.filename().string() < b.filename().string(); });
  return files;
}

FrameClip load_clip(const std::filesystem::path& dir, int start, int length) {
  if (start < 0 || length < 2) throw Error(ErrorCode::InvalidArgument, "load_clip needs start >= 0 and length >= 2");
  std::map<int, std::filesystem::path> by_index;
  for (const auto& file : list_frames(dir)) {
    std::smatch m;
    const auto name = file.filename().string();
    std::regex_match(name, m, frame_pattern());
    by_index.emplace(std::stoi(m[1].str()) - 1, file);
  }
  int height = 0;
  int width = 0;
  std::vector<float> data;
  for (int i = start; i < start + length; ++i) {
    const auto it = by_index.find(i);
    if (it == by_index.end()) {
      char name[32];
      std::snprintf(name, sizeof(name), "img%06d", i + 1);
      throw Error(ErrorCode::MissingFrame, "missing frame " + std::string(name) + " in " + dir.string());
    }
    const auto image = read_gray_image(it->second);
    if (i == start) {
      height = image.height;
      width = image.width;
      data.reserve(static_cast<std::size_t>(length) * height * width);
    } else if (image.height != height || image.width != width) {
      throw Error(ErrorCode::ShapeMismatch, "frame " + it->second.filename().string() + " is " +
                                                std::to_string(image.width) + "x" + std::to_string(image.height) +
                                                ", expected " + std::to_string(width) + "x" + std::to_string(height));
    }
    for (auto p : image.pixels) data.push_back(static_cast<float>(p));
  }
  auto id = dir.filename().string();
  if (id.empty()) id = dir.parent_path().filename().string();
  return FrameClip(id, start, length, height, width, std::move(data));
}

FrameClip load_video(const std::filesystem::path& dir) {
  return load_clip(dir, 0, static_cast<int>(list_frames(dir).size()));
}

void save_clip(const FrameClip& clip, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  GrayImage image{clip.height(), clip.width(), std::vector<std::uint8_t>(clip.frame_size())};
  for (int t = 0; t < clip.frames(); ++t) {
    const auto frame = clip.frame(t);
    for (std::size_t i = 0; i < frame.size(); ++i) {
      image.pixels[i] = static_cast<std::uint8_t>(std::clamp(std::lround(frame[i]), 0L, 255L));
    }
    char name[32];
    std::snprintf(name, sizeof(name), "img%06d.pgm", t + 1);
    write_pgm(dir / name, image);
  }
}

const char* to_string(Provenance p) {
  switch (p) {
    case Provenance::Manual: return "manual";
    case Provenance::Initial: return "initial";
    case Provenance::Evolved: return "evolved";
  }
  return "manual";
}

bool LabelStore::add(const std::string& video_id, const BoxLabel& label) {
  auto& boxes = videos_[video_id][label.frame];
  for (const auto& b : boxes) {
    if (b.cx == label.cx && b.cy == label.cy && b.provenance == label.provenance) return false;
  }
  boxes.push_back(label);
  return true;
}

std::span<const BoxLabel> LabelStore::frame(const std::string& video_id, int frame) const {
  const auto v = videos_.find(video_id);
  if (v == videos_.end()) return {};
  const auto f = v->second.find(frame);
  if (f == v->second.end()) return {};
  return f->second;
}

const LabelStore::FrameMap& LabelStore::video(const std::string& video_id) const {
  static const FrameMap empty;
  const auto v = videos_.find(video_id);
  return v == videos_.end() ? empty : v->second;
}

std::vector<std::string> LabelStore::videos() const {
  std::vector<std::string> ids;
  for (const auto& [id, frames] : videos_) ids.push_back(id);
  return ids;
}

std::size_t LabelStore::size() const {
  std::size_t n = 0;
  for (const auto& [id, frames] : videos_) {
    for (const auto& [f, boxes] : frames) n += boxes.size();
  }
  return n;
}

std::size_t LabelStore::count(Provenance provenance) const {
  std::size_t n = 0;
  for (const auto& [id, frames] : videos_) {
    for (const auto& [f, boxes] : frames) {
      n += static_cast<std::size_t>(std::count_if(boxes.begin(), boxes.end(),
                                                  [&](const BoxLabel& b) { return b.provenance == provenance; }));
    }
  }
  return n;
}

int LabelStore::round() const {
  int r = 0;
  for (const auto& [id, frames] : videos_) {
    for (const auto& [f, boxes] : frames) {
      for (const auto& b : boxes) r = std::max(r, b.round);
    }
  }
  return r;
}

std::string format_decimal(double value) {
  char buf[64];
  for (int precision = 3; precision <= 17; ++precision) {
    const auto res = std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::fixed, precision);
    double back = 0.0;
    std::from_chars(buf, res.ptr, back);
    if (back == value) return std::string(buf, res.ptr);
  }
  const auto res = std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::scientific, 17);
  return std::string(buf, res.ptr);
}

namespace {

constexpr const char* kLabelHeader = "video_id,frame,cx,cy,w,h,track_id,provenance,round";

}  // namespace

void save_labels(const LabelStore& store, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << kLabelHeader << '\n';
  for (const auto& id : store.videos()) {
    for (const auto& [frame, boxes] : store.video(id)) {
      for (const auto& b : boxes) {
        out << detail::quote_csv(id) << ',' << b.frame << ',' << format_decimal(b.cx) << ',' << format_decimal(b.cy) << ','
            << format_decimal(b.w) << ',' << format_decimal(b.h) << ',';
        if (b.track_id) out << *b.track_id;
        out << ',' << to_string(b.provenance) << ',' << b.round << '\n';
      }
    }
  }
  if (!out) throw Error(ErrorCode::Io, "short write to " + path.string());
}

LabelStore load_labels(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  LabelStore store;
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw ParseError(1, "missing header");
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kLabelHeader) throw ParseError(line_no, "unexpected header '" + line + "'");
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = detail::split_csv(line);
    if (f.size() != 9) throw ParseError(line_no, "expected 9 fields, got " + std::to_string(f.size()));
    if (f[0].empty()) throw ParseError(line_no, "empty video_id");
    BoxLabel b;
    b.frame = detail::parse_int(f[1], line_no, "frame");
    b.cx = detail::parse_double(f[2], line_no, "cx");
    b.cy = detail::parse_double(f[3], line_no, "cy");
    b.w = detail::parse_double(f[4], line_no, "w");
    b.h = detail::parse_double(f[5], line_no, "h");
    if (b.frame < 0) throw ParseError(line_no, "negative frame");
    if (b.cx < 0.0 || b.cy < 0.0) throw ParseError(line_no, "negative center");
    if (b.w <= 0.0 || b.h <= 0.0) throw ParseError(line_no, "box size must be positive");
    if (!f[6].empty()) b.track_id = detail::parse_int(f[6], line_no, "track_id");
    if (f[7] == "manual") {
      b.provenance = Provenance::Manual;
    } else if (f[7] == "initial") {
      b.provenance = Provenance::Initial;
    } else if (f[7] == "evolved") {
      b.provenance = Provenance::Evolved;
    } else {
      throw ParseError(line_no, "unknown provenance '" + f[7] + "'");
    }
    b.round = detail::parse_int(f[8], line_no, "round");
    if (b.round < 0) throw ParseError(line_no, "negative round");
    if (!store.add(f[0], b)) throw ParseError(line_no, "duplicate label");
  }
  return store;
}

}  // namespace hieum
