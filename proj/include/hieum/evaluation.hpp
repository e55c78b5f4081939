#pragma once

#include "hieum/dataset.hpp"
#include "hieum/detections.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace hieum {

struct MatchCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;

  MatchCounts& operator+=(const MatchCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
};

struct FrameMatch {
  MatchCounts counts;
  std::vector<int> det_match;  // ground-truth index per detection, -1 for FP
  std::vector<int> gt_match;   // detection index per ground truth, -1 for FN
};

// Greedy one-to-one matching in descending score order; a detection takes the
// nearest unmatched ground truth within d_max (inclusive).
FrameMatch match_frame_detail(std::span<const Detection> dets, std::span<const BoxLabel> gts, double d_max);
MatchCounts match_frame(std::span<const Detection> dets, std::span<const BoxLabel> gts, double d_max);

// Percentages from counts. Precision is 0 without detections, recall 0 without ground truth.
double recall_pct(const MatchCounts& c);
double precision_pct(const MatchCounts& c);
double f1_score(double precision, double recall);

struct VideoMetrics {
  std::string video_id;
  MatchCounts counts;
  double recall = 0.0;
  double precision = 0.0;
  double f1 = 0.0;
};

struct EvalReport {
  std::vector<VideoMetrics> videos;
  MatchCounts total;
  // Arithmetic means of the per-video values.
  double recall = 0.0;
  double precision = 0.0;
  double f1 = 0.0;
  double d_max = 5.0;
};

EvalReport score(const DetectionSet& dets, const LabelStore& labels, double d_max = 5.0);

std::string report_json(const EvalReport& report);
std::string report_table(const EvalReport& report);

// PNG per frame: matched detections yellow, false alarms red, misses green.
void write_overlays(const FrameClip& video, const DetectionSet& dets, const LabelStore& labels, double d_max,
                    const std::filesystem::path& dir);

}  // namespace hieum
