#pragma once

#include "hieum/bench.hpp"
#include "hieum/evolution.hpp"
#include "hieum/synth.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace hieum {

// Every tunable of a run, serialised as one flat JSON object. Unknown keys are
// rejected; missing keys keep their defaults.
struct RunConfig {
  // sampling
  double k = 3.0;
  bool per_clip_threshold = false;
  int clip_frames = 20;
  int min_area = 2;
  // network
  int depth = 3;
  std::vector<int> channels{16, 32, 64};
  // loss and optimisation
  double lambda_size = 0.1;
  double lambda_offset = 1.0;
  double lr = 1.25e-4;
  std::vector<int> lr_milestones{30, 45};
  double lr_decay = 0.1;
  int epochs = 55;
  int batch = 6;
  int crop = 256;
  // decoding
  double score_thresh = 0.3;
  int max_per_frame = 500;
  // tracking and filtering
  double gate = 10.0;
  int max_age = 3;
  double process_noise = 0.01;
  double measurement_noise = 1.0;
  int min_track_length = 30;
  double min_velocity = 0.55;
  // evolution and evaluation
  int update_period = 10;
  double merge_radius = 5.0;
  double d_max = 5.0;
  // benchmarking
  int bench_runs = 5;
  int bench_warmup = 1;
  int dense_runs = 1;
  // run
  std::uint64_t seed = 0;
  int threads = 0;  // 0 = all available cores
};

// Throws InvalidConfig naming the offending key.
RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::filesystem::path& path);
std::string run_config_json(const RunConfig& cfg, int indent = 2);
void validate(const RunConfig& cfg);

// Human-readable description of each key, in serialisation order.
std::vector<std::pair<std::string, std::string>> run_config_keys();

// Scalar SynthConfig fields, same strictness as RunConfig. Explicit target
// lists are not expressible here.
SynthConfig parse_synth_config(const std::string& json_text);
std::string synth_config_json(const SynthConfig& cfg, int indent = 2);

ThresholdParams threshold_params(const RunConfig& cfg);
NetworkConfig network_config(const RunConfig& cfg);
TrainConfig train_config(const RunConfig& cfg);
DecodeParams decode_params(const RunConfig& cfg);
InferConfig infer_config(const RunConfig& cfg);
TrackerConfig tracker_config(const RunConfig& cfg);
TrackFilter track_filter(const RunConfig& cfg);
PseudoLabelConfig pseudo_label_config(const RunConfig& cfg);
FrameworkConfig framework_config(const RunConfig& cfg);
BenchConfig bench_config(const RunConfig& cfg);

}  // namespace hieum
