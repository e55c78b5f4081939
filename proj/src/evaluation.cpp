#include "hieum/evaluation.hpp"

#include "hieum/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <json.hpp>
#include <numeric>
#include <set>
#include <sstream>

namespace hieum {

FrameMatch match_frame_detail(std::span<const Detection> dets, std::span<const BoxLabel> gts, double d_max) {
  FrameMatch m;
  m.det_match.assign(dets.size(), -1);
  m.gt_match.assign(gts.size(), -1);
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });
  for (auto i : order) {
    int best = -1;
    double best_d = 0.0;
    for (std::size_t j = 0; j < gts.size(); ++j) {
      if (m.gt_match[j] >= 0) continue;
      const double d = std::hypot(dets[i].cx - gts[j].cx, dets[i].cy - gts[j].cy);
      if (d <= d_max && (best < 0 || d < best_d)) {
        best = static_cast<int>(j);
        best_d = d;
      }
    }
    if (best >= 0) {
      m.det_match[i] = best;
      m.gt_match[static_cast<std::size_t>(best)] = static_cast<int>(i);
      ++m.counts.tp;
    } else {
      ++m.counts.fp;
    }
  }
  m.counts.fn = gts.size() - m.counts.tp;
  return m;
}

MatchCounts match_frame(std::span<const Detection> dets, std::span<const BoxLabel> gts, double d_max) {
  return match_frame_detail(dets, gts, d_max).counts;
}

double recall_pct(const MatchCounts& c) {
  const auto gt = c.tp + c.fn;
  return gt ? 100.0 * static_cast<double>(c.tp) / static_cast<double>(gt) : 0.0;
}

double precision_pct(const MatchCounts& c) {
  const auto n = c.tp + c.fp;
  return n ? 100.0 * static_cast<double>(c.tp) / static_cast<double>(n) : 0.0;
}

double f1_score(double precision, double recall) {
  return precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

EvalReport score(const DetectionSet& dets, const LabelStore& labels, double d_max) {
  EvalReport report;
  report.d_max = d_max;
  std::set<std::string> ids;
  for (const auto& id : labels.videos()) ids.insert(id);
  for (const auto& id : dets.videos()) ids.insert(id);
  for (const auto& id : ids) {
    std::set<int> frames;
    for (const auto& [f, v] : labels.video(id)) frames.insert(f);
    for (const auto& [f, v] : dets.video(id)) frames.insert(f);
    VideoMetrics vm;
    vm.video_id = id;
    for (int f : frames) vm.counts += match_frame(dets.frame(id, f), labels.frame(id, f), d_max);
    vm.recall = recall_pct(vm.counts);
    vm.precision = precision_pct(vm.counts);
    vm.f1 = f1_score(vm.precision, vm.recall);
    report.total += vm.counts;
    report.videos.push_back(vm);
  }
  if (!report.videos.empty()) {
    const double n = static_cast<double>(report.videos.size());
    for (const auto& v : report.videos) {
      report.recall += v.recall / n;
      report.precision += v.precision / n;
      report.f1 += v.f1 / n;
    }
  }
  return report;
}

std::string report_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["d_max"] = r.d_max;
  j["videos"] = nlohmann::ordered_json::array();
  for (const auto& v : r.videos) {
    j["videos"].push_back({{"video_id", v.video_id},
                           {"tp", v.counts.tp},
                           {"fp", v.counts.fp},
                           {"fn", v.counts.fn},
                           {"recall", v.recall},
                           {"precision", v.precision},
                           {"f1", v.f1}});
  }
  j["average"] = {{"recall", r.recall}, {"precision", r.precision}, {"f1", r.f1}};
  j["total"] = {{"tp", r.total.tp}, {"fp", r.total.fp}, {"fn", r.total.fn}};
  return j.dump(2);
}

std::string report_table(const EvalReport& r) {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof(line), "%-20s %8s %8s %8s %7s %7s %7s\n", "video", "TP", "FP", "FN", "Re", "Pr", "F1");
  out << line;
  for (const auto& v : r.videos) {
    std::snprintf(line, sizeof(line), "%-20s %8zu %8zu %8zu %7.1f %7.1f %7.1f\n", v.video_id.c_str(), v.counts.tp,
                  v.counts.fp, v.counts.fn, v.recall, v.precision, v.f1);
    out << line;
  }
  std::snprintf(line, sizeof(line), "%-20s %8zu %8zu %8zu %7.1f %7.1f %7.1f\n", "average", r.total.tp, r.total.fp,
                r.total.fn, r.recall, r.precision, r.f1);
  out << line;
  return out.str();
}

namespace {

void draw_box(RgbImage& img, double cx, double cy, double w, double h, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  // One pixel of margin so the outline does not cover the target itself.
  const int x0 = static_cast<int>(std::floor(cx - w / 2.0)) - 1;
  const int x1 = static_cast<int>(std::ceil(cx + w / 2.0));
  const int y0 = static_cast<int>(std::floor(cy - h / 2.0)) - 1;
  const int y1 = static_cast<int>(std::ceil(cy + h / 2.0));
  auto put = [&](int x, int y) {
    if (x < 0 || y < 0 || x >= img.width || y >= img.height) return;
    auto* p = &img.pixels[(static_cast<std::size_t>(y) * img.width + x) * 3];
    p[0] = r;
    p[1] = g;
    p[2] = b;
  };
  for (int x = x0; x <= x1; ++x) {
    put(x, y0);
    put(x, y1);
  }
  for (int y = y0; y <= y1; ++y) {
    put(x0, y);
    put(x1, y);
  }
}

}  // namespace

void write_overlays(const FrameClip& video, const DetectionSet& dets, const LabelStore& labels, double d_max,
                    const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto& id = video.video_id();
  for (int t = 0; t < video.frames(); ++t) {
    const int f = video.start_frame() + t;
    RgbImage img{video.height(), video.width(), std::vector<std::uint8_t>(video.frame_size() * 3)};
    const auto px = video.frame(t);
    for (std::size_t i = 0; i < px.size(); ++i) {
      const auto v = static_cast<std::uint8_t>(std::clamp(std::lround(px[i]), 0L, 255L));
      img.pixels[3 * i] = img.pixels[3 * i + 1] = img.pixels[3 * i + 2] = v;
    }
    const auto fd = dets.frame(id, f);
    const auto fg = labels.frame(id, f);
    const auto m = match_frame_detail(fd, fg, d_max);
    for (std::size_t j = 0; j < fg.size(); ++j) {
      if (m.gt_match[j] < 0) draw_box(img, fg[j].cx, fg[j].cy, fg[j].w, fg[j].h, 0, 255, 0);
    }
    for (std::size_t i = 0; i < fd.size(); ++i) {
      if (m.det_match[i] >= 0) {
        draw_box(img, fd[i].cx, fd[i].cy, fd[i].w, fd[i].h, 255, 255, 0);
      } else {
        draw_box(img, fd[i].cx, fd[i].cy, fd[i].w, fd[i].h, 255, 0, 0);
      }
    }
    char name[32];
    std::snprintf(name, sizeof(name), "img%06d.png", f + 1);
    write_png(dir / name, img);
  }
}

}  // namespace hieum
