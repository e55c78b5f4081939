#include "hieum/detections.hpp"

#include "csv_util.hpp"
#include "hieum/dataset.hpp"

#include <fstream>

namespace hieum {

void DetectionSet::add(const std::string& video_id, const Detection& det) { videos_[video_id][det.frame].push_back(det); }

void DetectionSet::add_frame(const std::string& video_id, int frame, std::span<const Detection> dets) {
  auto& slot = videos_[video_id][frame];
  slot.insert(slot.end(), dets.begin(), dets.end());
}

std::span<const Detection> DetectionSet::frame(const std::string& video_id, int frame) const {
  const auto v = videos_.find(video_id);
  if (v == videos_.end()) return {};
  const auto f = v->second.find(frame);
  if (f == v->second.end()) return {};
  return f->second;
}

const DetectionSet::FrameMap& DetectionSet::video(const std::string& video_id) const {
  static const FrameMap empty;
  const auto v = videos_.find(video_id);
  return v == videos_.end() ? empty : v->second;
}

std::vector<std::string> DetectionSet::videos() const {
  std::vector<std::string> ids;
  for (const auto& [id, frames] : videos_) ids.push_back(id);
  return ids;
}

std::size_t DetectionSet::size() const {
  std::size_t n = 0;
  for (const auto& [id, frames] : videos_) {
    for (const auto& [f, dets] : frames) n += dets.size();
  }
  return n;
}

namespace {
constexpr const char* kHeader = "video_id,frame,cx,cy,w,h,score";
}

void save_detections(const DetectionSet& dets, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << kHeader << '\n';
  for (const auto& id : dets.videos()) {
    for (const auto& [frame, list] : dets.video(id)) {
      for (const auto& d : list) {
        out << detail::quote_csv(id) << ',' << d.frame << ',' << format_decimal(d.cx) << ',' << format_decimal(d.cy) << ','
            << format_decimal(d.w) << ',' << format_decimal(d.h) << ',' << format_decimal(d.score) << '\n';
      }
    }
  }
  if (!out) throw Error(ErrorCode::Io, "short write to " + path.string());
}

DetectionSet load_detections(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  DetectionSet dets;
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line)) throw ParseError(1, "missing header");
  detail::strip_cr(line);
  if (line != kHeader) throw ParseError(1, "unexpected header '" + line + "'");
  while (std::getline(in, line)) {
    ++line_no;
    detail::strip_cr(line);
    if (line.empty()) continue;
    const auto f = detail::split_csv(line);
    if (f.size() != 7) throw ParseError(line_no, "expected 7 fields, got " + std::to_string(f.size()));
    if (f[0].empty()) throw ParseError(line_no, "empty video_id");
    Detection d;
    d.frame = detail::parse_int(f[1], line_no, "frame");
    d.cx = detail::parse_double(f[2], line_no, "cx");
    d.cy = detail::parse_double(f[3], line_no, "cy");
    d.w = detail::parse_double(f[4], line_no, "w");
    d.h = detail::parse_double(f[5], line_no, "h");
    d.score = detail::parse_double(f[6], line_no, "score");
    if (d.frame < 0) throw ParseError(line_no, "negative frame");
    if (d.w <= 0.0 || d.h <= 0.0) throw ParseError(line_no, "box size must be positive");
    dets.add(f[0], d);
  }
  return dets;
}

}  // namespace hieum
