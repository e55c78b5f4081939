#include "hieum/hieum.h"

#include "hieum/bench.hpp"
#include "hieum/config.hpp"
#include "hieum/error.hpp"
#include "hieum/evaluation.hpp"
#include "hieum/evolution.hpp"
#include "hieum/parallel.hpp"
#include "hieum/synth.hpp"

#include <cstdlib>
#include <cstring>
#include <json.hpp>
#include <new>
#include <string>
#include <thread>

struct hieum_clip {
  hieum::FrameClip clip;
};
struct hieum_labels {
  hieum::LabelStore store;
};
struct hieum_detections {
  hieum::DetectionSet set;
};
struct hieum_tracks {
  std::vector<hieum::TrackSet> sets;
};
struct hieum_model {
  hieum::Detector<float> model;
};

namespace {

thread_local std::string g_last_error;

hieum_status status_of(hieum::ErrorCode code) {
  return static_cast<hieum_status>(static_cast<int>(code) + 1);
}

template <class F>
hieum_status guarded(F&& body) {
  try {
    body();
    g_last_error.clear();
    return HIEUM_OK;
  } catch (const hieum::Error& e) {
    g_last_error = e.what();
    return status_of(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return HIEUM_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return HIEUM_ERR_INTERNAL;
  }
}

void require(bool ok, const char* what) {
  if (!ok) throw hieum::Error(hieum::ErrorCode::InvalidArgument, what);
}

hieum::RunConfig run_config(const char* json) {
  return json ? hieum::parse_run_config(json) : hieum::RunConfig{};
}

char* dup(const std::string& s) {
  auto* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

}  // namespace

extern "C" {

const char* hieum_last_error(void) { return g_last_error.c_str(); }

const char* hieum_status_name(hieum_status status) {
  if (status == HIEUM_OK) return "Ok";
  if (status == HIEUM_ERR_INTERNAL) return "Internal";
  if (status > HIEUM_OK && status < HIEUM_ERR_INTERNAL) {
    return hieum::to_string(static_cast<hieum::ErrorCode>(static_cast<int>(status) - 1));
  }
  return "Unknown";
}

const char* hieum_version(void) { return HIEUM_VERSION; }

hieum_status hieum_set_threads(int threads) {
  return guarded([&] {
    require(threads >= 0, "threads must be >= 0");
    hieum::set_threads(threads == 0 ? static_cast<int>(std::max(1u, std::thread::hardware_concurrency())) : threads);
  });
}

int hieum_threads(void) { return hieum::threads(); }

void hieum_string_free(char* s) { std::free(s); }

hieum_status hieum_config_normalize(const char* config_json, char** out_json) {
  return guarded([&] {
    require(out_json, "out_json is null");
    *out_json = dup(hieum::run_config_json(run_config(config_json)));
  });
}

hieum_status hieum_config_describe(char** out_json) {
  return guarded([&] {
    require(out_json, "out_json is null");
    const auto defaults = nlohmann::ordered_json::parse(hieum::run_config_json(hieum::RunConfig{}));
    auto arr = nlohmann::ordered_json::array();
    for (const auto& [key, help] : hieum::run_config_keys()) {
      arr.push_back({{"key", key}, {"help", help}, {"default", defaults[key]}});
    }
    *out_json = dup(arr.dump(2));
  });
}

hieum_status hieum_synth_config_normalize(const char* synth_json, char** out_json) {
  return guarded([&] {
    require(out_json, "out_json is null");
    const auto cfg = synth_json ? hieum::parse_synth_config(synth_json) : hieum::SynthConfig{};
    *out_json = dup(hieum::synth_config_json(cfg));
  });
}

hieum_status hieum_clip_load(const char* dir, int start, int length, hieum_clip** out) {
  return guarded([&] {
    require(dir && out, "null argument");
    *out = new hieum_clip{hieum::load_clip(dir, start, length)};
  });
}

hieum_status hieum_video_load(const char* dir, hieum_clip** out) {
  return guarded([&] {
    require(dir && out, "null argument");
    *out = new hieum_clip{hieum::load_video(dir)};
  });
}

hieum_status hieum_clip_save(const hieum_clip* clip, const char* dir) {
  return guarded([&] {
    require(clip && dir, "null argument");
    hieum::save_clip(clip->clip, dir);
  });
}

hieum_status hieum_clip_shape(const hieum_clip* clip, int* frames, int* height, int* width) {
  return guarded([&] {
    require(clip, "clip is null");
    if (frames) *frames = clip->clip.frames();
    if (height) *height = clip->clip.height();
    if (width) *width = clip->clip.width();
  });
}

const char* hieum_clip_video_id(const hieum_clip* clip) { return clip ? clip->clip.video_id().c_str() : ""; }

void hieum_clip_free(hieum_clip* clip) { delete clip; }

hieum_status hieum_synth(const char* synth_json, hieum_clip** out_clip, hieum_labels** out_truth) {
  return guarded([&] {
    require(out_clip, "out_clip is null");
    const auto cfg = synth_json ? hieum::parse_synth_config(synth_json) : hieum::SynthConfig{};
    auto video = hieum::synth_video(cfg);
    auto* clip = new hieum_clip{std::move(video.clip)};
    if (out_truth) *out_truth = new hieum_labels{std::move(video.truth)};
    *out_clip = clip;
  });
}

hieum_status hieum_labels_new(hieum_labels** out) {
  return guarded([&] {
    require(out, "out is null");
    *out = new hieum_labels{};
  });
}

hieum_status hieum_labels_load(const char* path, hieum_labels** out) {
  return guarded([&] {
    require(path && out, "null argument");
    *out = new hieum_labels{hieum::load_labels(path)};
  });
}

hieum_status hieum_labels_save(const hieum_labels* labels, const char* path) {
  return guarded([&] {
    require(labels && path, "null argument");
    hieum::save_labels(labels->store, path);
  });
}

hieum_status hieum_labels_union(hieum_labels* dst, const hieum_labels* src) {
  return guarded([&] {
    require(dst && src, "null argument");
    for (const auto& id : src->store.videos()) {
      for (const auto& [frame, boxes] : src->store.video(id)) {
        for (const auto& b : boxes) dst->store.add(id, b);
      }
    }
  });
}

size_t hieum_labels_count(const hieum_labels* labels) { return labels ? labels->store.size() : 0; }

void hieum_labels_free(hieum_labels* labels) { delete labels; }

hieum_status hieum_detections_new(hieum_detections** out) {
  return guarded([&] {
    require(out, "out is null");
    *out = new hieum_detections{};
  });
}

hieum_status hieum_detections_load(const char* path, hieum_detections** out) {
  return guarded([&] {
    require(path && out, "null argument");
    *out = new hieum_detections{hieum::load_detections(path)};
  });
}

hieum_status hieum_detections_save(const hieum_detections* dets, const char* path) {
  return guarded([&] {
    require(dets && path, "null argument");
    hieum::save_detections(dets->set, path);
  });
}

hieum_status hieum_detections_union(hieum_detections* dst, const hieum_detections* src) {
  return guarded([&] {
    require(dst && src, "null argument");
    for (const auto& id : src->set.videos()) {
      dst->set.touch(id);
      for (const auto& [frame, dets] : src->set.video(id)) dst->set.add_frame(id, frame, dets);
    }
  });
}

size_t hieum_detections_count(const hieum_detections* dets) { return dets ? dets->set.size() : 0; }

void hieum_detections_free(hieum_detections* dets) { delete dets; }

hieum_status hieum_model_new(const char* config_json, hieum_model** out) {
  return guarded([&] {
    require(out, "out is null");
    const auto cfg = run_config(config_json);
    *out = new hieum_model{hieum::Detector<float>(hieum::network_config(cfg), cfg.seed)};
  });
}

hieum_status hieum_model_load(const char* path, hieum_model** out) {
  return guarded([&] {
    require(path && out, "null argument");
    *out = new hieum_model{hieum::Detector<float>::from_checkpoint(hieum::sparse::load_checkpoint(path))};
  });
}

hieum_status hieum_model_save(const hieum_model* model, const char* path) {
  return guarded([&] {
    require(model && path, "null argument");
    hieum::sparse::save_checkpoint(model->model.to_checkpoint(), path);
  });
}

void hieum_model_free(hieum_model* model) { delete model; }

hieum_status hieum_pseudo_label(const hieum_clip* video, const char* config_json, hieum_labels** out) {
  return guarded([&] {
    require(video && out, "null argument");
    const auto cfg = run_config(config_json);
    *out = new hieum_labels{hieum::make_initial_labels(video->clip, hieum::pseudo_label_config(cfg))};
  });
}

hieum_status hieum_train(const hieum_clip* const* videos, size_t n_videos, const hieum_labels* initial,
                         const char* config_json, const char* output_dir, hieum_model** out_model,
                         hieum_labels** out_labels, char** summary_json) {
  return guarded([&] {
    require(videos && n_videos > 0, "no training videos");
    std::vector<hieum::FrameClip> clips;
    for (size_t i = 0; i < n_videos; ++i) {
      require(videos[i], "null video");
      clips.push_back(videos[i]->clip);
    }
    auto fc = hieum::framework_config(run_config(config_json));
    if (output_dir) fc.output_dir = output_dir;
    std::optional<hieum::LabelStore> start;
    if (initial) start = initial->store;
    auto result = hieum::run_framework(clips, fc, start);

    std::string summary;
    if (summary_json) {
      nlohmann::ordered_json j;
      j["rounds"] = nlohmann::ordered_json::array();
      for (const auto& r : result.state.history) {
        j["rounds"].push_back({{"round", r.round}, {"epoch", r.epoch}, {"labels", r.labels}, {"added", r.added}});
      }
      j["epochs"] = nlohmann::ordered_json::array();
      for (const auto& s : result.epochs) {
        j["epochs"].push_back({{"epoch", s.epoch},
                               {"loss", s.mean_loss},
                               {"lr", s.lr},
                               {"samples", s.samples},
                               {"steps", s.steps}});
      }
      summary = j.dump(2);
    }
    auto model = std::make_unique<hieum_model>(hieum_model{hieum::Detector<float>::from_checkpoint(result.checkpoint)});
    auto labels = std::make_unique<hieum_labels>(hieum_labels{std::move(result.state.current)});
    if (summary_json) *summary_json = dup(summary);
    if (out_model) *out_model = model.release();
    if (out_labels) *out_labels = labels.release();
  });
}

hieum_status hieum_infer(hieum_model* model, const hieum_clip* video, const char* config_json,
                         hieum_detections** out) {
  return guarded([&] {
    require(model && video && out, "null argument");
    const auto cfg = run_config(config_json);
    *out = new hieum_detections{hieum::infer_video(model->model, video->clip, hieum::infer_config(cfg))};
  });
}

hieum_status hieum_track(const hieum_detections* dets, const char* config_json, int filter, hieum_tracks** out) {
  return guarded([&] {
    require(dets && out, "null argument");
    const auto cfg = run_config(config_json);
    auto result = std::make_unique<hieum_tracks>();
    for (const auto& id : dets->set.videos()) {
      auto set = hieum::track_video(id, dets->set, hieum::tracker_config(cfg));
      if (filter) set = hieum::filter_tracks(set, hieum::track_filter(cfg));
      result->sets.push_back(std::move(set));
    }
    *out = result.release();
  });
}

hieum_status hieum_tracks_save(const hieum_tracks* tracks, const char* path) {
  return guarded([&] {
    require(tracks && path, "null argument");
    hieum::save_tracks(tracks->sets, path);
  });
}

size_t hieum_tracks_count(const hieum_tracks* tracks) {
  if (!tracks) return 0;
  size_t n = 0;
  for (const auto& s : tracks->sets) n += s.tracks.size();
  return n;
}

hieum_status hieum_tracks_to_labels(const hieum_tracks* tracks, hieum_labels** out) {
  return guarded([&] {
    require(tracks && out, "null argument");
    auto result = std::make_unique<hieum_labels>();
    for (const auto& s : tracks->sets) {
      const auto store = hieum::labels_from_tracks(s, hieum::Provenance::Initial, 0);
      for (const auto& [frame, boxes] : store.video(s.video_id)) {
        for (const auto& b : boxes) result->store.add(s.video_id, b);
      }
    }
    *out = result.release();
  });
}

void hieum_tracks_free(hieum_tracks* tracks) { delete tracks; }

hieum_status hieum_eval(const hieum_detections* dets, const hieum_labels* labels, const char* config_json,
                        char** out_json, char** out_table) {
  return guarded([&] {
    require(dets && labels, "null argument");
    const auto cfg = run_config(config_json);
    const auto report = hieum::score(dets->set, labels->store, cfg.d_max);
    const auto json = hieum::report_json(report);
    const auto table = hieum::report_table(report);
    char* j = out_json ? dup(json) : nullptr;
    if (out_table) *out_table = dup(table);
    if (out_json) *out_json = j;
  });
}

hieum_status hieum_write_overlays(const hieum_clip* video, const hieum_detections* dets, const hieum_labels* labels,
                                  const char* config_json, const char* dir) {
  return guarded([&] {
    require(video && dets && labels && dir, "null argument");
    const auto cfg = run_config(config_json);
    hieum::write_overlays(video->clip, dets->set, labels->store, cfg.d_max, dir);
  });
}

hieum_status hieum_bench(hieum_model* model, const hieum_clip* clip, const char* config_json, char** out_json) {
  return guarded([&] {
    require(model && clip && out_json, "null argument");
    const auto cfg = run_config(config_json);
    *out_json = dup(hieum::bench_json(hieum::bench(model->model, clip->clip, hieum::bench_config(cfg))));
  });
}

}  // extern "C"
