#include "hieum/bench.hpp"

#include "hieum/background.hpp"
#include "hieum/error.hpp"
#include "hieum/sparse/flops.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <json.hpp>

namespace hieum {

namespace {

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// 3x3 peak picking over a full grid; counts the peaks.
std::size_t dense_peaks(const HeadOutput<float>& out, sparse::Dims3 shape, const DecodeParams& params) {
  std::size_t found = 0;
  const int H = shape.y;
  const int W = shape.x;
  for (int t = 0; t < shape.t; ++t) {
    std::size_t in_frame = 0;
    for (int y = 0; y < H; ++y) {
      for (int x = 0; x < W; ++x) {
        const std::size_t i = (static_cast<std::size_t>(t) * H + y) * W + x;
        const float s = out.center_logits[i];
        if (1.0 / (1.0 + std::exp(-static_cast<double>(s))) < params.score_thresh) continue;
        bool peak = true;
        for (int dy = -1; dy <= 1 && peak; ++dy) {
          for (int dx = -1; dx <= 1 && peak; ++dx) {
            const int yy = y + dy, xx = x + dx;
            if ((dy == 0 && dx == 0) || yy < 0 || xx < 0 || yy >= H || xx >= W) continue;
            const std::size_t j = (static_cast<std::size_t>(t) * H + yy) * W + xx;
            if (out.center_logits[j] > s || (out.center_logits[j] == s && j < i)) peak = false;
          }
        }
        if (peak) ++in_frame;
      }
    }
    found += std::min<std::size_t>(in_frame, static_cast<std::size_t>(std::max(params.max_per_frame, 0)));
  }
  return found;
}

}  // namespace

BenchReport bench(Detector<float>& model, const FrameClip& clip, const BenchConfig& cfg) {
  if (cfg.runs < 1) throw Error(ErrorCode::InvalidConfig, "bench needs at least one timed run");
  BenchReport r;
  r.frames = clip.frames();
  r.height = clip.height();
  r.width = clip.width();
  const sparse::Dims3 shape{clip.frames(), clip.height(), clip.width()};

  auto sparse_run = [&](bool count) {
    const auto residuals = background_residuals(clip);
    const auto sampled = sample_points(residuals, cfg.threshold);
    sparse::MacScope scope;
    const auto head = model.predict(sampled.cloud);
    const auto dets = decode(head, cfg.decode, clip.height(), clip.width());
    if (count) {
      r.sparse_macs = scope.elapsed();
      r.points = sampled.cloud.size();
      r.sampling_ratio = sampled.cloud.sampling_ratio();
      r.detections = 0;
      for (const auto& f : dets) r.detections += f.size();
    }
  };
  for (int i = 0; i < cfg.warmup; ++i) sparse_run(false);
  for (int i = 0; i < cfg.runs; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    sparse_run(i == 0);
    r.sparse_seconds.push_back(seconds_since(t0));
  }
  r.sparse_median = median(r.sparse_seconds);

  r.dense_macs = dense_macs(model.config(), shape);
  for (int i = 0; i < cfg.dense_runs; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<float> feats;
    {
      const auto residuals = background_residuals(clip);
      feats.resize(residuals.residuals.size());
      for (std::size_t k = 0; k < feats.size(); ++k) feats[k] = residuals.residuals[k] / 255.0f;
    }
    std::uint64_t macs = 0;
    const auto head = model.dense_predict(feats, shape, &macs);
    dense_peaks(head, shape, cfg.decode);
    r.dense_seconds.push_back(seconds_since(t0));
    if (macs != r.dense_macs) throw Error(ErrorCode::ShapeMismatch, "dense MAC count disagrees with its model");
  }
  r.dense_median = median(r.dense_seconds);
  return r;
}

std::string bench_json(const BenchReport& r) {
  nlohmann::ordered_json j;
  j["frames"] = r.frames;
  j["height"] = r.height;
  j["width"] = r.width;
  j["points"] = r.points;
  j["sampling_ratio"] = r.sampling_ratio;
  j["detections"] = r.detections;
  j["sparse_macs"] = r.sparse_macs;
  j["dense_macs"] = r.dense_macs;
  j["mac_ratio"] = r.mac_ratio();
  j["sparse_seconds"] = r.sparse_seconds;
  j["dense_seconds"] = r.dense_seconds;
  j["sparse_fps"] = r.sparse_fps();
  j["dense_fps"] = r.dense_fps();
  j["speedup"] = r.speedup();
  return j.dump(2);
}

}  // namespace hieum
