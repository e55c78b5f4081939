#pragma once

#include "hieum/detector.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace hieum {

struct BenchConfig {
  int runs = 5;    // timed sparse runs; the median is reported
  int warmup = 1;  // untimed sparse runs before timing
  // Timed dense reference runs (same weights, every voxel computed); 0 skips
  // the dense timing but still reports its analytic MAC count.
  int dense_runs = 1;
  ThresholdParams threshold;
  DecodeParams decode;
};

struct BenchReport {
  int frames = 0;
  int height = 0;
  int width = 0;
  std::size_t points = 0;
  double sampling_ratio = 0.0;
  std::size_t detections = 0;
  std::uint64_t sparse_macs = 0;
  std::uint64_t dense_macs = 0;
  std::vector<double> sparse_seconds;  // per timed run, whole pipeline
  std::vector<double> dense_seconds;
  double sparse_median = 0.0;
  double dense_median = 0.0;

  double sparse_fps() const { return sparse_median > 0.0 ? frames / sparse_median : 0.0; }
  double dense_fps() const { return dense_median > 0.0 ? frames / dense_median : 0.0; }
  double mac_ratio() const { return dense_macs ? static_cast<double>(sparse_macs) / static_cast<double>(dense_macs) : 0.0; }
  double speedup() const { return sparse_median > 0.0 ? dense_median / sparse_median : 0.0; }
};

// Times background estimation, sampling, the network and decoding on one clip.
BenchReport bench(Detector<float>& model, const FrameClip& clip, const BenchConfig& cfg);

std::string bench_json(const BenchReport& report);

}  // namespace hieum
