#include "hieum/train.hpp"

#include "hieum/background.hpp"
#include "hieum/error.hpp"

#include <algorithm>
#include <cmath>

namespace hieum {

using sparse::Graph;
using sparse::NodeId;

Trainer::Trainer(TrainConfig cfg)
    : cfg_(std::move(cfg)),
      model_(cfg_.network, cfg_.seed),
      adam_(model_.parameters(), sparse::AdamConfig{cfg_.lr}),
      data_rng_(Rng::stream(cfg_.seed, "data")),
      crop_rng_(Rng::stream(cfg_.seed, "crops")) {
  if (cfg_.clip_frames < 2) throw Error(ErrorCode::InvalidConfig, "clip_frames must be >= 2");
  if (cfg_.crop < 1) throw Error(ErrorCode::InvalidConfig, "crop must be >= 1");
  if (cfg_.batch < 1) throw Error(ErrorCode::InvalidConfig, "batch must be >= 1");
  if (!(cfg_.lr > 0.0)) throw Error(ErrorCode::InvalidConfig, "lr must be > 0");
}

EpochStats Trainer::train_epoch(const std::vector<FrameClip>& videos, const LabelStore& labels) {
  if (labels.size() == 0) throw Error(ErrorCode::InvalidArgument, "training needs a non-empty label store");
  EpochStats stats;
  stats.epoch = epoch_;
  double lr = cfg_.lr;
  for (int m : cfg_.lr_milestones) {
    if (epoch_ >= m) lr *= cfg_.lr_decay;
  }
  adam_.set_lr(lr);
  stats.lr = lr;

  std::vector<std::size_t> order;
  for (std::size_t v = 0; v < videos.size(); ++v) {
    const auto& clip = videos[v];
    const int T = std::min(cfg_.clip_frames, clip.frames());
    const int ch = std::min(cfg_.crop, clip.height());
    const int cw = std::min(cfg_.crop, clip.width());
    const int n = ((clip.frames() + T - 1) / T) * ((clip.height() + ch - 1) / ch) * ((clip.width() + cw - 1) / cw);
    order.insert(order.end(), static_cast<std::size_t>(n), v);
  }
  data_rng_.shuffle(order.begin(), order.end());

  double loss_sum = 0.0;
  int loss_count = 0;
  for (std::size_t b0 = 0; b0 < order.size(); b0 += static_cast<std::size_t>(cfg_.batch)) {
    const std::size_t b1 = std::min(order.size(), b0 + static_cast<std::size_t>(cfg_.batch));
    const double scale = 1.0 / static_cast<double>(b1 - b0);
    adam_.zero_grad();
    bool any = false;
    for (std::size_t s = b0; s < b1; ++s) {
      const auto& video = videos[order[s]];
      const int T = std::min(cfg_.clip_frames, video.frames());
      const int ch = std::min(cfg_.crop, video.height());
      const int cw = std::min(cfg_.crop, video.width());
      const int start = crop_rng_.uniform_int(0, video.frames() - T);
      const int y0 = crop_rng_.uniform_int(0, video.height() - ch);
      const int x0 = crop_rng_.uniform_int(0, video.width() - cw);
      ++stats.samples;

      // Cropping first keeps the threshold statistics local to the patch.
      const auto clip = video.window(start, T, y0, x0, ch, cw);
      const auto sampled = sample_points(background_residuals(clip), cfg_.threshold);
      if (sampled.empty_cloud) {
        ++stats.skipped_empty;
        continue;
      }
      const auto coords = cloud_coords(sampled.cloud);
      const auto plan = make_plan(coords, cfg_.network.depth);
      const auto targets =
          render_targets(window_labels(labels, video.video_id(), video.start_frame() + start, T, y0, x0, ch, cw), *coords);
      stats.positives += targets.num_positive;
      stats.coverage_misses += targets.coverage_misses;

      Graph<float> g;
      const NodeId in = g.input(sparse::SparseTensor<float>(coords, 1, sampled.cloud.feats));
      const auto head = model_.forward(g, in, plan, true);
      auto loss = detection_loss<float>(g.value(head.center).feats(), g.value(head.size).feats(),
                                        g.value(head.offset).feats(), targets, cfg_.loss);
      if (!std::isfinite(loss.total)) {
        throw Error(ErrorCode::Diverged, "non-finite loss at epoch " + std::to_string(epoch_));
      }
      loss_sum += loss.total;
      ++loss_count;
      for (auto* grads : {&loss.grad_center, &loss.grad_size, &loss.grad_offset}) {
        for (auto& v : *grads) v = static_cast<float>(v * scale);
      }
      const std::vector<Graph<float>::Seed> seeds{{head.center, loss.grad_center},
                                                  {head.size, loss.grad_size},
                                                  {head.offset, loss.grad_offset}};
      g.backward(seeds);
      any = true;
    }
    if (any) {
      adam_.step();
      ++stats.steps;
    }
  }
  stats.mean_loss = loss_count ? loss_sum / loss_count : 0.0;
  if (!std::isfinite(stats.mean_loss)) throw Error(ErrorCode::Diverged, "non-finite epoch loss");
  ++epoch_;
  if (!cfg_.checkpoint_dir.empty()) {
    std::filesystem::create_directories(cfg_.checkpoint_dir);
    sparse::save_checkpoint(model_.to_checkpoint(),
                            cfg_.checkpoint_dir / ("epoch_" + std::to_string(epoch_) + ".ckpt"));
  }
  history_.push_back(stats);
  return stats;
}

std::vector<int> window_starts(int frames, int clip_frames) {
  std::vector<int> starts;
  if (frames <= 0) return starts;
  const int T = std::min(clip_frames, frames);
  for (int s = 0; s < frames; s += T) starts.push_back(std::min(s, frames - T));
  return starts;
}

DetectionSet infer_video(Detector<float>& model, const FrameClip& video, const InferConfig& cfg, InferStats* stats) {
  DetectionSet out;
  out.touch(video.video_id());
  const int T = std::min(cfg.clip_frames, video.frames());
  if (T < 2) throw Error(ErrorCode::InvalidArgument, "inference needs at least two frames");
  int emitted = 0;  // frames [0, emitted) already produced
  for (int start : window_starts(video.frames(), T)) {
    const auto clip = video.window(start, T);
    const auto sampled = sample_points(background_residuals(clip), cfg.threshold);
    if (stats) {
      stats->points += sampled.cloud.size();
      stats->voxels += static_cast<std::size_t>(T) * clip.frame_size();
    }
    const auto head = model.predict(sampled.cloud);
    const auto frames = decode(head, cfg.decode, clip.height(), clip.width());
    for (int t = 0; t < T; ++t) {
      const int f = start + t;
      if (f < emitted) continue;
      if (static_cast<std::size_t>(t) < frames.size()) {
        for (auto d : frames[static_cast<std::size_t>(t)]) {
          d.frame = video.start_frame() + f;
          out.add(video.video_id(), d);
        }
      }
    }
    emitted = start + T;
  }
  return out;
}

}  // namespace hieum
