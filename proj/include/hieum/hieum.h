#ifndef HIEUM_H
#define HIEUM_H

#include <stddef.h>

#if defined(_WIN32)
#define HIEUM_API __declspec(dllexport)
#else
#define HIEUM_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum hieum_status {
  HIEUM_OK = 0,
  HIEUM_ERR_INVALID_ARGUMENT = 1,
  HIEUM_ERR_MISSING_FRAME = 2,
  HIEUM_ERR_SHAPE_MISMATCH = 3,
  HIEUM_ERR_PARSE = 4,
  HIEUM_ERR_INVALID_CONFIG = 5,
  HIEUM_ERR_IO = 6,
  HIEUM_ERR_DIVERGED = 7,
  HIEUM_ERR_EMPTY_CLOUD = 8,
  HIEUM_ERR_INVALID_KERNEL = 9,
  HIEUM_ERR_GRAPH_STALE = 10,
  HIEUM_ERR_INTERNAL = 11
} hieum_status;

typedef struct hieum_clip hieum_clip;
typedef struct hieum_labels hieum_labels;
typedef struct hieum_detections hieum_detections;
typedef struct hieum_tracks hieum_tracks;
typedef struct hieum_model hieum_model;

/* Message of the last failure on the calling thread; empty after success. */
HIEUM_API const char* hieum_last_error(void);
HIEUM_API const char* hieum_status_name(hieum_status status);
HIEUM_API const char* hieum_version(void);

/* Worker threads for all later calls; 0 selects every available core. */
HIEUM_API hieum_status hieum_set_threads(int threads);
HIEUM_API int hieum_threads(void);

/* Strings returned through char** out-parameters are owned by the caller. */
HIEUM_API void hieum_string_free(char* s);

/*
 * Configuration strings are flat JSON objects. Missing keys take defaults,
 * unknown keys fail with HIEUM_ERR_INVALID_CONFIG. NULL means all defaults.
 */
HIEUM_API hieum_status hieum_config_normalize(const char* config_json, char** out_json);
/* JSON array of {"key", "help", "default"} objects. */
HIEUM_API hieum_status hieum_config_describe(char** out_json);
HIEUM_API hieum_status hieum_synth_config_normalize(const char* synth_json, char** out_json);

/* Clips */
HIEUM_API hieum_status hieum_clip_load(const char* dir, int start, int length, hieum_clip** out);
HIEUM_API hieum_status hieum_video_load(const char* dir, hieum_clip** out);
HIEUM_API hieum_status hieum_clip_save(const hieum_clip* clip, const char* dir);
HIEUM_API hieum_status hieum_clip_shape(const hieum_clip* clip, int* frames, int* height, int* width);
HIEUM_API const char* hieum_clip_video_id(const hieum_clip* clip);
HIEUM_API void hieum_clip_free(hieum_clip* clip);

HIEUM_API hieum_status hieum_synth(const char* synth_json, hieum_clip** out_clip, hieum_labels** out_truth);

/* Label stores */
HIEUM_API hieum_status hieum_labels_new(hieum_labels** out);
HIEUM_API hieum_status hieum_labels_load(const char* path, hieum_labels** out);
HIEUM_API hieum_status hieum_labels_save(const hieum_labels* labels, const char* path);
/* Copies every label of src into dst (exact duplicates are skipped). */
HIEUM_API hieum_status hieum_labels_union(hieum_labels* dst, const hieum_labels* src);
HIEUM_API size_t hieum_labels_count(const hieum_labels* labels);
HIEUM_API void hieum_labels_free(hieum_labels* labels);

/* Detection sets */
HIEUM_API hieum_status hieum_detections_new(hieum_detections** out);
HIEUM_API hieum_status hieum_detections_load(const char* path, hieum_detections** out);
HIEUM_API hieum_status hieum_detections_save(const hieum_detections* dets, const char* path);
HIEUM_API hieum_status hieum_detections_union(hieum_detections* dst, const hieum_detections* src);
HIEUM_API size_t hieum_detections_count(const hieum_detections* dets);
HIEUM_API void hieum_detections_free(hieum_detections* dets);

/* Models */
/* Fresh weights from the config's depth, channels and seed. */
HIEUM_API hieum_status hieum_model_new(const char* config_json, hieum_model** out);
HIEUM_API hieum_status hieum_model_load(const char* path, hieum_model** out);
HIEUM_API hieum_status hieum_model_save(const hieum_model* model, const char* path);
HIEUM_API void hieum_model_free(hieum_model* model);

/* Pipeline operations */

/* Traditional detector, tracking and trajectory filter over a whole video. */
HIEUM_API hieum_status hieum_pseudo_label(const hieum_clip* video, const char* config_json, hieum_labels** out);

/*
 * Trains on the videos with periodic label evolution (update_period in the
 * config; 0 disables it). initial may be NULL, in which case round-0 labels
 * are generated. output_dir may be NULL. summary_json, when not NULL,
 * receives the per-epoch and per-round history.
 */
HIEUM_API hieum_status hieum_train(const hieum_clip* const* videos, size_t n_videos, const hieum_labels* initial,
                                   const char* config_json, const char* output_dir, hieum_model** out_model,
                                   hieum_labels** out_labels, char** summary_json);

HIEUM_API hieum_status hieum_infer(hieum_model* model, const hieum_clip* video, const char* config_json,
                                   hieum_detections** out);

/* Tracks every video of the set; filter != 0 applies the length/velocity filter. */
HIEUM_API hieum_status hieum_track(const hieum_detections* dets, const char* config_json, int filter,
                                   hieum_tracks** out);
HIEUM_API hieum_status hieum_tracks_save(const hieum_tracks* tracks, const char* path);
HIEUM_API size_t hieum_tracks_count(const hieum_tracks* tracks);
/* Every track point as an initial-provenance label. */
HIEUM_API hieum_status hieum_tracks_to_labels(const hieum_tracks* tracks, hieum_labels** out);
HIEUM_API void hieum_tracks_free(hieum_tracks* tracks);

/* Report as JSON and as a text table; either output may be NULL. */
HIEUM_API hieum_status hieum_eval(const hieum_detections* dets, const hieum_labels* labels, const char* config_json,
                                  char** out_json, char** out_table);
HIEUM_API hieum_status hieum_write_overlays(const hieum_clip* video, const hieum_detections* dets,
                                            const hieum_labels* labels, const char* config_json, const char* dir);

HIEUM_API hieum_status hieum_bench(hieum_model* model, const hieum_clip* clip, const char* config_json,
                                   char** out_json);

#ifdef __cplusplus
}
#endif

#endif
