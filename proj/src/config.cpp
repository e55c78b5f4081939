#include "hieum/config.hpp"

#include "hieum/error.hpp"

#include <fstream>
#include <json.hpp>
#include <sstream>

namespace hieum {

namespace {

using Json = nlohmann::ordered_json;

// One row per key: name, help text, and accessors to and from JSON.
struct Field {
  const char* name;
  const char* help;
  void (*get)(const RunConfig&, Json&);
  void (*set)(RunConfig&, const Json&);
};

#define HIEUM_FIELD(member, help)                                                        \
  Field {                                                                                \
    #member, help, [](const RunConfig& c, Json& j) { j[#member] = c.member; },           \
        [](RunConfig& c, const Json& j) { c.member = j.get<decltype(RunConfig::member)>(); } \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table{
      HIEUM_FIELD(k, "adaptive threshold factor: mean + k * std of |residual|"),
      HIEUM_FIELD(per_clip_threshold, "threshold statistics over the whole clip instead of per frame"),
      HIEUM_FIELD(clip_frames, "frames per clip"),
      HIEUM_FIELD(min_area, "smallest connected component kept by the traditional detector, px"),
      HIEUM_FIELD(depth, "U-Net levels, 2 to 4"),
      HIEUM_FIELD(channels, "channel width per level"),
      HIEUM_FIELD(lambda_size, "size loss weight"),
      HIEUM_FIELD(lambda_offset, "offset loss weight"),
      HIEUM_FIELD(lr, "initial Adam learning rate"),
      HIEUM_FIELD(lr_milestones, "epochs at which the learning rate decays"),
      HIEUM_FIELD(lr_decay, "learning-rate decay factor"),
      HIEUM_FIELD(epochs, "training epochs"),
      HIEUM_FIELD(batch, "clips per optimizer step"),
      HIEUM_FIELD(crop, "square training crop, px"),
      HIEUM_FIELD(score_thresh, "minimum center score of a detection"),
      HIEUM_FIELD(max_per_frame, "detections kept per frame"),
      HIEUM_FIELD(gate, "tracker association gate, px"),
      HIEUM_FIELD(max_age, "consecutive misses before a track ends"),
      HIEUM_FIELD(process_noise, "Kalman process noise"),
      HIEUM_FIELD(measurement_noise, "Kalman measurement noise"),
      HIEUM_FIELD(min_track_length, "shortest trajectory kept, frames"),
      HIEUM_FIELD(min_velocity, "slowest mean trajectory speed kept, px/frame"),
      HIEUM_FIELD(update_period, "epochs between label updates, 0 disables"),
      HIEUM_FIELD(merge_radius, "new labels closer than this to an existing one are dropped, px"),
      HIEUM_FIELD(d_max, "evaluation match distance, px"),
      HIEUM_FIELD(bench_runs, "timed benchmark runs"),
      HIEUM_FIELD(bench_warmup, "untimed warm-up runs"),
      HIEUM_FIELD(dense_runs, "timed dense reference runs, 0 skips them"),
      HIEUM_FIELD(seed, "random seed"),
      HIEUM_FIELD(threads, "worker threads, 0 uses every core"),
  };
  return table;
}

#undef HIEUM_FIELD

[[noreturn]] void bad(const std::string& key, const std::string& why) {
  throw Error(ErrorCode::InvalidConfig, "config key '" + key + "': " + why);
}

template <class C, class Table>
C parse_flat(const std::string& text, const Table& table, const char* what) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::InvalidConfig, std::string(what) + " is not valid JSON: " + e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, std::string(what) + " must be a JSON object");
  C cfg;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const auto* field = static_cast<decltype(&table[0])>(nullptr);
    for (const auto& f : table) {
      if (it.key() == f.name) field = &f;
    }
    if (!field) bad(it.key(), "unknown key");
    // Integers must not silently truncate floats.
    Json probe;
    field->get(cfg, probe);
    const auto& want = probe[field->name];
    if (want.is_number_integer() && !it.value().is_number_integer()) bad(it.key(), "expected an integer");
    if (want.is_number_unsigned() && it.value().is_number_integer() && it.value().template get<std::int64_t>() < 0) {
      bad(it.key(), "expected a non-negative integer");
    }
    if (want.is_string() && !it.value().is_string()) bad(it.key(), "expected a string");
    try {
      field->set(cfg, it.value());
    } catch (const nlohmann::json::exception&) {
      bad(it.key(), "wrong type " + std::string(it.value().type_name()));
    }
  }
  return cfg;
}

struct SynthField {
  const char* name;
  void (*get)(const SynthConfig&, Json&);
  void (*set)(SynthConfig&, const Json&);
};

#define HIEUM_SYNTH(member)                                                                     \
  SynthField {                                                                                  \
    #member, [](const SynthConfig& c, Json& j) { j[#member] = c.member; },                      \
        [](SynthConfig& c, const Json& j) { c.member = j.get<decltype(SynthConfig::member)>(); } \
  }

const std::vector<SynthField>& synth_fields() {
  static const std::vector<SynthField> table{
      HIEUM_SYNTH(video_id),   HIEUM_SYNTH(height),          HIEUM_SYNTH(width),
      HIEUM_SYNTH(frames),     HIEUM_SYNTH(n_targets),       HIEUM_SYNTH(delta_min),
      HIEUM_SYNTH(delta_max),  HIEUM_SYNTH(dark_fraction),   HIEUM_SYNTH(speed_min),
      HIEUM_SYNTH(speed_max),  HIEUM_SYNTH(size_min),        HIEUM_SYNTH(size_max),
      HIEUM_SYNTH(noise_sigma), HIEUM_SYNTH(n_clutter_blinks), HIEUM_SYNTH(textured_background),
      HIEUM_SYNTH(seed),
  };
  return table;
}

#undef HIEUM_SYNTH

}  // namespace

SynthConfig parse_synth_config(const std::string& text) {
  return parse_flat<SynthConfig>(text, synth_fields(), "synth config");
}

std::string synth_config_json(const SynthConfig& cfg, int indent) {
  Json j = Json::object();
  for (const auto& f : synth_fields()) f.get(cfg, j);
  return j.dump(indent);
}

RunConfig parse_run_config(const std::string& text) {
  auto cfg = parse_flat<RunConfig>(text, fields(), "config");
  // A depth without explicit widths gets the default 16 * 2^l ladder.
  const auto j = Json::parse(text);
  if (j.contains("depth") && !j.contains("channels")) cfg.channels = NetworkConfig{cfg.depth, {}}.widths();
  validate(cfg);
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

std::string run_config_json(const RunConfig& cfg, int indent) {
  Json j = Json::object();
  for (const auto& f : fields()) f.get(cfg, j);
  return j.dump(indent);
}

std::vector<std::pair<std::string, std::string>> run_config_keys() {
  std::vector<std::pair<std::string, std::string>> keys;
  for (const auto& f : fields()) keys.emplace_back(f.name, f.help);
  return keys;
}

void validate(const RunConfig& c) {
  if (!(c.k >= 0.0)) bad("k", "must be >= 0");
  if (c.clip_frames < 2) bad("clip_frames", "must be >= 2");
  if (c.min_area < 1) bad("min_area", "must be >= 1");
  if (c.depth < 2 || c.depth > 4) bad("depth", "must be 2, 3 or 4");
  if (static_cast<int>(c.channels.size()) != c.depth) bad("channels", "needs one width per level");
  for (int w : c.channels) {
    if (w < 1) bad("channels", "widths must be positive");
  }
  if (!(c.lambda_size >= 0.0)) bad("lambda_size", "must be >= 0");
  if (!(c.lambda_offset >= 0.0)) bad("lambda_offset", "must be >= 0");
  if (!(c.lr > 0.0)) bad("lr", "must be > 0");
  if (!(c.lr_decay > 0.0)) bad("lr_decay", "must be > 0");
  for (int m : c.lr_milestones) {
    if (m < 0) bad("lr_milestones", "must be non-negative");
  }
  if (c.epochs < 0) bad("epochs", "must be >= 0");
  if (c.batch < 1) bad("batch", "must be >= 1");
  if (c.crop < 1) bad("crop", "must be >= 1");
  if (!(c.score_thresh >= 0.0 && c.score_thresh <= 1.0)) bad("score_thresh", "must be in [0, 1]");
  if (c.max_per_frame < 0) bad("max_per_frame", "must be >= 0");
  if (!(c.gate > 0.0)) bad("gate", "must be > 0");
  if (c.max_age < 1) bad("max_age", "must be >= 1");
  if (!(c.process_noise >= 0.0)) bad("process_noise", "must be >= 0");
  if (!(c.measurement_noise > 0.0)) bad("measurement_noise", "must be > 0");
  if (c.min_track_length < 0) bad("min_track_length", "must be >= 0");
  if (!(c.min_velocity >= 0.0)) bad("min_velocity", "must be >= 0");
  if (c.update_period < 0) bad("update_period", "must be >= 0");
  if (!(c.merge_radius >= 0.0)) bad("merge_radius", "must be >= 0");
  if (!(c.d_max >= 0.0)) bad("d_max", "must be >= 0");
  if (c.bench_runs < 1) bad("bench_runs", "must be >= 1");
  if (c.bench_warmup < 0) bad("bench_warmup", "must be >= 0");
  if (c.dense_runs < 0) bad("dense_runs", "must be >= 0");
  if (c.threads < 0) bad("threads", "must be >= 0");
}

ThresholdParams threshold_params(const RunConfig& c) { return {c.k, c.per_clip_threshold}; }

NetworkConfig network_config(const RunConfig& c) { return {c.depth, c.channels}; }

TrainConfig train_config(const RunConfig& c) {
  TrainConfig t;
  t.network = network_config(c);
  t.clip_frames = c.clip_frames;
  t.crop = c.crop;
  t.batch = c.batch;
  t.epochs = c.epochs;
  t.lr = c.lr;
  t.lr_milestones = c.lr_milestones;
  t.lr_decay = c.lr_decay;
  t.threshold = threshold_params(c);
  t.loss = {c.lambda_size, c.lambda_offset};
  t.seed = c.seed;
  return t;
}

DecodeParams decode_params(const RunConfig& c) { return {c.score_thresh, c.max_per_frame}; }

InferConfig infer_config(const RunConfig& c) { return {c.clip_frames, threshold_params(c), decode_params(c)}; }

TrackerConfig tracker_config(const RunConfig& c) {
  TrackerConfig t;
  t.gate = c.gate;
  t.max_age = c.max_age;
  t.q = c.process_noise;
  t.r = c.measurement_noise;
  return t;
}

TrackFilter track_filter(const RunConfig& c) { return {c.min_track_length, c.min_velocity}; }

PseudoLabelConfig pseudo_label_config(const RunConfig& c) {
  PseudoLabelConfig p;
  p.clip_frames = c.clip_frames;
  p.threshold = threshold_params(c);
  p.min_area = c.min_area;
  p.tracker = tracker_config(c);
  p.filter = track_filter(c);
  return p;
}

FrameworkConfig framework_config(const RunConfig& c) {
  FrameworkConfig f;
  f.train = train_config(c);
  f.pseudo = pseudo_label_config(c);
  f.decode = decode_params(c);
  f.update_period = c.update_period;
  f.merge_radius = c.merge_radius;
  return f;
}

BenchConfig bench_config(const RunConfig& c) {
  BenchConfig b;
  b.runs = c.bench_runs;
  b.warmup = c.bench_warmup;
  b.dense_runs = c.dense_runs;
  b.threshold = threshold_params(c);
  b.decode = decode_params(c);
  return b;
}

}  // namespace hieum
