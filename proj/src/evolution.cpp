#include "hieum/evolution.hpp"

#include "hieum/background.hpp"
#include "hieum/error.hpp"

#include <cmath>
#include <fstream>
#include <json.hpp>

namespace hieum {

DetectionSet traditional_detect(const FrameClip& clip, double k, int min_area) {
  DetectionSet out;
  out.touch(clip.video_id());
  const auto residuals = background_residuals(clip);
  for (int t = 0; t < clip.frames(); ++t) {
    const auto th = adaptive_threshold(residuals.frame(t), k);
    for (const auto& c : connected_components(th.mask, clip.height(), clip.width(), min_area)) {
      Detection d;
      d.frame = clip.start_frame() + t;
      d.cx = c.cx;
      d.cy = c.cy;
      d.w = c.w;
      d.h = c.h;
      d.score = 1.0;
      out.add(clip.video_id(), d);
    }
  }
  return out;
}

DetectionSet traditional_detect_video(const FrameClip& video, const PseudoLabelConfig& cfg) {
  DetectionSet out;
  out.touch(video.video_id());
  const int T = std::min(cfg.clip_frames, video.frames());
  int emitted = 0;
  for (int start : window_starts(video.frames(), T)) {
    const auto dets = traditional_detect(video.window(start, T), cfg.threshold.k, cfg.min_area);
    for (const auto& [frame, list] : dets.video(video.video_id())) {
      if (frame - video.start_frame() >= emitted) out.add_frame(video.video_id(), frame, list);
    }
    emitted = start + T;
  }
  return out;
}

LabelStore labels_from_tracks(const TrackSet& tracks, Provenance provenance, int round) {
  LabelStore store;
  for (const auto& t : tracks.tracks) {
    for (const auto& p : t.history) {
      BoxLabel b;
      b.frame = p.frame;
      b.cx = p.cx;
      b.cy = p.cy;
      b.w = p.w;
      b.h = p.h;
      b.track_id = t.id;
      b.provenance = provenance;
      b.round = round;
      store.add(tracks.video_id, b);
    }
  }
  return store;
}

LabelStore make_initial_labels(const FrameClip& video, const PseudoLabelConfig& cfg) {
  const auto dets = traditional_detect_video(video, cfg);
  const auto tracks = filter_tracks(track_video(video.video_id(), dets, cfg.tracker), cfg.filter);
  return labels_from_tracks(tracks, Provenance::Initial, 0);
}

MergeStats merge_labels(LabelStore& store, const LabelStore& candidates, double radius) {
  MergeStats stats;
  for (const auto& id : candidates.videos()) {
    for (const auto& [frame, boxes] : candidates.video(id)) {
      for (const auto& b : boxes) {
        ++stats.candidates;
        bool clear = true;
        for (const auto& e : store.frame(id, frame)) {
          if (std::hypot(e.cx - b.cx, e.cy - b.cy) <= radius) {
            clear = false;
            break;
          }
        }
        if (clear && store.add(id, b)) ++stats.added;
      }
    }
  }
  return stats;
}

EvolutionState evolve_labels(const EvolutionState& state, Detector<float>& model, const std::vector<FrameClip>& videos,
                             const EvolveConfig& cfg, int epoch) {
  EvolutionState next = state;
  next.round = state.round + 1;
  LabelStore candidates;
  for (const auto& video : videos) {
    const auto dets = infer_video(model, video, cfg.infer);
    const auto tracks = filter_tracks(track_video(video.video_id(), dets, cfg.tracker), cfg.filter);
    const auto found = labels_from_tracks(tracks, Provenance::Evolved, next.round);
    merge_labels(candidates, found, -1.0);
  }
  const auto stats = merge_labels(next.current, candidates, cfg.merge_radius);
  next.history.push_back({next.round, epoch, next.current.size(), stats.added});
  return next;
}

namespace {

nlohmann::ordered_json train_config_json(const TrainConfig& c) {
  nlohmann::ordered_json j;
  j["depth"] = c.network.depth;
  j["channels"] = c.network.widths();
  j["clip_frames"] = c.clip_frames;
  j["crop"] = c.crop;
  j["batch"] = c.batch;
  j["epochs"] = c.epochs;
  j["lr"] = c.lr;
  j["lr_milestones"] = c.lr_milestones;
  j["lr_decay"] = c.lr_decay;
  j["k"] = c.threshold.k;
  j["lambda_size"] = c.loss.size;
  j["lambda_offset"] = c.loss.offset;
  j["seed"] = c.seed;
  return j;
}

}  // namespace

FrameworkResult run_framework(const std::vector<FrameClip>& videos, const FrameworkConfig& cfg,
                              const std::optional<LabelStore>& initial) {
  const auto& out_dir = cfg.output_dir;
  if (!out_dir.empty()) std::filesystem::create_directories(out_dir);

  EvolutionState state;
  if (initial) {
    state.initial = *initial;
  } else {
    for (const auto& v : videos) merge_labels(state.initial, make_initial_labels(v, cfg.pseudo), -1.0);
  }
  state.current = state.initial;
  state.history.push_back({0, 0, state.current.size(), state.current.size()});
  if (!out_dir.empty()) save_labels(state.current, out_dir / "labels_round0.csv");

  TrainConfig tc = cfg.train;
  if (!out_dir.empty() && tc.checkpoint_dir.empty()) tc.checkpoint_dir = out_dir / "checkpoints";
  Trainer trainer(tc);

  EvolveConfig ec;
  ec.infer.clip_frames = tc.clip_frames;
  ec.infer.threshold = tc.threshold;
  ec.infer.decode = cfg.decode;
  ec.tracker = cfg.pseudo.tracker;
  ec.filter = cfg.pseudo.filter;
  ec.merge_radius = cfg.merge_radius;

  FrameworkResult result;
  for (int e = 0; e < tc.epochs; ++e) {
    result.epochs.push_back(trainer.train_epoch(videos, state.current));
    const int done = e + 1;
    if (cfg.update_period > 0 && done < tc.epochs && done % cfg.update_period == 0) {
      state = evolve_labels(state, trainer.model(), videos, ec, done);
      if (!out_dir.empty()) save_labels(state.current, out_dir / ("labels_round" + std::to_string(state.round) + ".csv"));
    }
  }
  result.checkpoint = trainer.model().to_checkpoint();

  if (!out_dir.empty()) {
    sparse::save_checkpoint(result.checkpoint, out_dir / "model.ckpt");
    nlohmann::ordered_json manifest;
    manifest["seed"] = tc.seed;
    manifest["train"] = train_config_json(tc);
    manifest["update_period"] = cfg.update_period;
    manifest["rounds"] = nlohmann::ordered_json::array();
    for (const auto& r : state.history) {
      manifest["rounds"].push_back({{"round", r.round}, {"epoch", r.epoch}, {"labels", r.labels}, {"added", r.added}});
    }
    manifest["epochs"] = nlohmann::ordered_json::array();
    for (const auto& s : result.epochs) {
      manifest["epochs"].push_back({{"epoch", s.epoch}, {"loss", s.mean_loss}, {"lr", s.lr}, {"steps", s.steps}});
    }
    std::ofstream(out_dir / "framework.json") << manifest.dump(2) << '\n';
  }
  result.state = std::move(state);
  return result;
}

}  // namespace hieum
