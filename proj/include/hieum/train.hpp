#pragma once

#include "hieum/detector.hpp"
#include "hieum/rng.hpp"

#include <filesystem>
#include <vector>

namespace hieum {

struct TrainConfig {
  NetworkConfig network;
  int clip_frames = 20;
  int crop = 256;
  int batch = 6;
  int epochs = 55;
  double lr = 1.25e-4;
  std::vector<int> lr_milestones{30, 45};
  double lr_decay = 0.1;
  ThresholdParams threshold;
  LossWeights loss;
  std::uint64_t seed = 0;
  // Per-epoch checkpoints (epoch_<n>.ckpt) go here when set.
  std::filesystem::path checkpoint_dir;
};

struct EpochStats {
  int epoch = 0;
  double mean_loss = 0.0;
  double lr = 0.0;
  int samples = 0;
  int skipped_empty = 0;
  int steps = 0;
  std::size_t positives = 0;
  std::size_t coverage_misses = 0;
};

// Stateful trainer so label evolution can swap the label store between epochs
// without resetting optimizer moments or random streams.
class Trainer {
 public:
  explicit Trainer(TrainConfig cfg);
  // The optimizer holds pointers into the model.
  Trainer(const Trainer&) = delete;
  Trainer& operator=(const Trainer&) = delete;

  // One pass of ceil(frames / clip_frames) * tiles random windows per video.
  EpochStats train_epoch(const std::vector<FrameClip>& videos, const LabelStore& labels);

  int epoch() const { return epoch_; }
  const TrainConfig& config() const { return cfg_; }
  Detector<float>& model() { return model_; }
  const Detector<float>& model() const { return model_; }
  const std::vector<EpochStats>& history() const { return history_; }

 private:
  TrainConfig cfg_;
  Detector<float> model_;
  sparse::Adam<float> adam_;
  Rng data_rng_;
  Rng crop_rng_;
  int epoch_ = 0;
  std::vector<EpochStats> history_;
};

// Background, sampling and decoding over consecutive windows of a whole video.
struct InferConfig {
  int clip_frames = 20;
  ThresholdParams threshold;
  DecodeParams decode;
};

struct InferStats {
  std::size_t points = 0;
  std::size_t voxels = 0;
  double sampling_ratio() const { return voxels ? static_cast<double>(points) / static_cast<double>(voxels) : 0.0; }
};

// Window starts covering [0, frames): 0, T, 2T, ... with the last window moved
// back so it stays inside the video.
std::vector<int> window_starts(int frames, int clip_frames);

DetectionSet infer_video(Detector<float>& model, const FrameClip& video, const InferConfig& cfg,
                         InferStats* stats = nullptr);

}  // namespace hieum
