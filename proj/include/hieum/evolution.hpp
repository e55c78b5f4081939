#pragma once

#include "hieum/dataset.hpp"
#include "hieum/tracker.hpp"
#include "hieum/train.hpp"

#include <filesystem>
#include <optional>
#include <vector>

namespace hieum {

struct PseudoLabelConfig {
  int clip_frames = 20;
  ThresholdParams threshold;
  int min_area = 2;
  TrackerConfig tracker;
  TrackFilter filter;
};

// Median background, adaptive threshold and connected components on every
// frame of the clip. Frames are reported as clip.start_frame() + t.
DetectionSet traditional_detect(const FrameClip& clip, double k, int min_area = 2);
// The same over consecutive clip_frames windows of a whole video.
DetectionSet traditional_detect_video(const FrameClip& video, const PseudoLabelConfig& cfg);

// Boxes of every track point, tagged with the track id.
LabelStore labels_from_tracks(const TrackSet& tracks, Provenance provenance, int round);

// traditional detection -> tracking -> length/velocity filter.
LabelStore make_initial_labels(const FrameClip& video, const PseudoLabelConfig& cfg);

struct MergeStats {
  std::size_t candidates = 0;
  std::size_t added = 0;
};

// Adds each candidate whose center is more than `radius` px from every label
// already in the same frame (including ones added earlier in this call).
MergeStats merge_labels(LabelStore& store, const LabelStore& candidates, double radius = 5.0);

struct RoundRecord {
  int round = 0;
  int epoch = 0;  // training epochs completed when the round was produced
  std::size_t labels = 0;
  std::size_t added = 0;
};

struct EvolutionState {
  int round = 0;
  LabelStore initial;
  LabelStore current;
  std::vector<RoundRecord> history;
};

struct EvolveConfig {
  InferConfig infer;
  TrackerConfig tracker;
  TrackFilter filter;
  double merge_radius = 5.0;
};

// Re-labels the videos with the model and merges filtered tracks into the store.
EvolutionState evolve_labels(const EvolutionState& state, Detector<float>& model, const std::vector<FrameClip>& videos,
                             const EvolveConfig& cfg, int epoch = 0);

struct FrameworkConfig {
  TrainConfig train;
  PseudoLabelConfig pseudo;
  DecodeParams decode;
  // Evolve every update_period epochs; 0 or >= epochs trains once on the round-0 labels.
  int update_period = 10;
  double merge_radius = 5.0;
  // labels_round<r>.csv, checkpoints and the manifest go here when set.
  std::filesystem::path output_dir;
};

struct FrameworkResult {
  EvolutionState state;
  std::vector<EpochStats> epochs;
  sparse::Checkpoint checkpoint;
};

// Round-0 labels come from `initial` when given, else from make_initial_labels.
FrameworkResult run_framework(const std::vector<FrameClip>& videos, const FrameworkConfig& cfg,
                              const std::optional<LabelStore>& initial = std::nullopt);

}  // namespace hieum
