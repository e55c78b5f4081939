#include "hieum/hieum.h"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

// Failure of a library call; carries the status as the exit code.
struct Failure {
  hieum_status status;
  std::string message;
};

void check(hieum_status s) {
  if (s != HIEUM_OK) throw Failure{s, std::string(hieum_status_name(s)) + ": " + hieum_last_error()};
}

std::string take(char* s) {
  std::string out = s ? s : "";
  hieum_string_free(s);
  return out;
}

template <class T, void (*Free)(T*)>
struct Deleter {
  void operator()(T* p) const { Free(p); }
};
using Clip = std::unique_ptr<hieum_clip, Deleter<hieum_clip, hieum_clip_free>>;
using Labels = std::unique_ptr<hieum_labels, Deleter<hieum_labels, hieum_labels_free>>;
using Dets = std::unique_ptr<hieum_detections, Deleter<hieum_detections, hieum_detections_free>>;
using Tracks = std::unique_ptr<hieum_tracks, Deleter<hieum_tracks, hieum_tracks_free>>;
using Model = std::unique_ptr<hieum_model, Deleter<hieum_model, hieum_model_free>>;

Clip load_video(const std::string& dir) {
  hieum_clip* c = nullptr;
  check(hieum_video_load(dir.c_str(), &c));
  return Clip(c);
}

Labels load_labels(const std::string& path) {
  hieum_labels* l = nullptr;
  check(hieum_labels_load(path.c_str(), &l));
  return Labels(l);
}

Dets load_dets(const std::string& path) {
  hieum_detections* d = nullptr;
  check(hieum_detections_load(path.c_str(), &d));
  return Dets(d);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Failure{HIEUM_ERR_IO, "cannot open " + path};
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  out << text;
  if (!text.empty() && text.back() != '\n') out << '\n';
  if (!out) throw Failure{HIEUM_ERR_IO, "cannot write " + path.string()};
}

// Converts a flag value to the JSON type of the key's default.
Json convert(const std::string& key, const std::string& text, const Json& like) {
  const std::string flag = "--" + key;
  auto fail = [&]() -> Json { throw Failure{HIEUM_ERR_INVALID_CONFIG, "flag " + flag + ": cannot parse '" + text + "'"}; };
  try {
    std::size_t used = 0;
    if (like.is_boolean()) {
      if (text == "true" || text == "1") return true;
      if (text == "false" || text == "0") return false;
      return fail();
    }
    if (like.is_number_unsigned()) {
      if (text.empty() || text[0] == '-') return fail();
      const auto v = std::stoull(text, &used);
      return used == text.size() ? Json(v) : fail();
    }
    if (like.is_number_integer()) {
      const auto v = std::stoll(text, &used);
      return used == text.size() ? Json(v) : fail();
    }
    if (like.is_number()) {
      const auto v = std::stod(text, &used);
      return used == text.size() ? Json(v) : fail();
    }
    if (like.is_array()) {
      Json arr = Json::array();
      std::stringstream ss(text);
      std::string item;
      while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        const auto v = std::stoll(item, &used);
        if (used != item.size()) return fail();
        arr.push_back(v);
      }
      return arr;
    }
  } catch (const std::logic_error&) {
    return fail();
  }
  return Json(text);
}

std::string flag_name(std::string key) {
  for (auto& c : key) {
    if (c == '_') c = '-';
  }
  return key;
}

struct Options {
  std::string config_file;
  std::string manifest;
  std::map<std::string, std::string> overrides;  // config key -> flag text
  Json described;                                // from hieum_config_describe
};

struct Run {
  std::string command;
  std::vector<std::string> argv;
  std::string config;  // normalised JSON text
  Json config_json;
  Json inputs = Json::object();
  Json outputs = Json::object();
  Json result = Json::object();
};

std::string resolve_config(const Options& opt) {
  Json j = Json::object();
  if (!opt.config_file.empty()) {
    try {
      j = Json::parse(read_file(opt.config_file));
    } catch (const nlohmann::json::parse_error& e) {
      throw Failure{HIEUM_ERR_INVALID_CONFIG, opt.config_file + ": " + e.what()};
    }
    if (!j.is_object()) throw Failure{HIEUM_ERR_INVALID_CONFIG, opt.config_file + ": config must be a JSON object"};
  }
  for (const auto& entry : opt.described) {
    const auto key = entry["key"].get<std::string>();
    const auto it = opt.overrides.find(key);
    if (it != opt.overrides.end() && !it->second.empty()) j[key] = convert(flag_name(key), it->second, entry["default"]);
  }
  // depth alone resets channels to the default ladder inside the library.
  if (opt.overrides.count("depth") && !opt.overrides.at("depth").empty() &&
      (!opt.overrides.count("channels") || opt.overrides.at("channels").empty())) {
    j.erase("channels");
  }
  char* out = nullptr;
  check(hieum_config_normalize(j.dump().c_str(), &out));
  return take(out);
}

void write_manifest(const Run& run, const fs::path& path) {
  Json m;
  m["tool"] = "hieum";
  m["version"] = hieum_version();
  m["command"] = run.command;
  m["argv"] = run.argv;
  m["seed"] = run.config_json["seed"];
  m["threads"] = hieum_threads();
  m["config"] = run.config_json;
  m["inputs"] = run.inputs;
  m["outputs"] = run.outputs;
  m["result"] = run.result;
  write_file(path, m.dump(2));
}

fs::path default_manifest(const Run& run, const std::string& out, bool out_is_dir) {
  if (out.empty()) return fs::path("hieum-" + run.command + ".manifest.json");
  if (out_is_dir) return fs::path(out) / "manifest.json";
  return fs::path(out + ".manifest.json");
}

std::vector<Clip> load_videos(const std::vector<std::string>& dirs, Run& run) {
  std::vector<Clip> clips;
  for (const auto& d : dirs) clips.push_back(load_video(d));
  run.inputs["videos"] = dirs;
  return clips;
}

}  // namespace

int main(int argc, char** argv) {
  Options opt;
  {
    char* described = nullptr;
    if (hieum_config_describe(&described) != HIEUM_OK) {
      std::fprintf(stderr, "hieum: %s\n", hieum_last_error());
      return 1;
    }
    opt.described = Json::parse(take(described));
  }

  CLI::App app{"Moving-object detection in satellite video with sparse spatio-temporal networks"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", std::string(hieum_version()));
  app.add_option("--config", opt.config_file, "flat JSON config file; flags override its values")
      ->check(CLI::ExistingFile)
      ->group("Config");
  app.add_option("--manifest", opt.manifest, "where to write the run manifest (default: next to the output)")
      ->group("Config");
  for (const auto& entry : opt.described) {
    const auto key = entry["key"].get<std::string>();
    std::string def = entry["default"].dump();
    if (entry["default"].is_array()) {
      def.clear();
      for (const auto& v : entry["default"]) def += (def.empty() ? "" : ",") + v.dump();
    }
    app.add_option("--" + flag_name(key), opt.overrides[key],
                   entry["help"].get<std::string>() + " [default: " + def + "]")
        ->group("Config");
  }

  // synth
  auto* synth = app.add_subcommand("synth", "render a synthetic video with ground truth");
  std::string synth_out, synth_labels, synth_file, synth_id;
  std::map<std::string, std::string> synth_flags;
  synth->add_option("--out", synth_out, "frame directory to create")->required();
  synth->add_option("--labels", synth_labels, "ground-truth CSV (default: <out>/labels.csv)");
  synth->add_option("--synth-config", synth_file, "flat JSON synthetic scene description")->check(CLI::ExistingFile);
  synth->add_option("--video-id", synth_id, "video id (default: directory name)");
  for (const char* key : {"height", "width", "frames", "n_targets", "noise_sigma", "n_clutter_blinks", "size_min",
                          "size_max", "speed_min", "speed_max", "delta_min", "delta_max"}) {
    synth->add_option("--" + flag_name(key), synth_flags[key], std::string("scene ") + key);
  }

  // pseudo-label
  auto* pseudo = app.add_subcommand("pseudo-label", "traditional detection, tracking and filtering -> round-0 labels");
  std::vector<std::string> pseudo_videos;
  std::string pseudo_out;
  pseudo->add_option("--video", pseudo_videos, "video frame directory (repeatable)")->required();
  pseudo->add_option("--out", pseudo_out, "output directory for labels_round0.csv")->required();

  // train / evolve
  auto* train = app.add_subcommand("train", "train on given labels, evolving them every --update-period epochs");
  auto* evolve = app.add_subcommand("evolve", "full unsupervised run: pseudo labels, training and label evolution");
  std::vector<std::string> train_videos;
  std::string train_labels, train_out;
  for (auto* sub : {train, evolve}) {
    sub->add_option("--video", train_videos, "video frame directory (repeatable)")->required();
    sub->add_option("--out", train_out, "output directory")->required();
  }
  train->add_option("--labels", train_labels, "training labels CSV")->required();
  evolve->add_option("--labels", train_labels, "round-0 labels CSV (default: generated)");

  // infer
  auto* infer = app.add_subcommand("infer", "detect objects in every frame of the videos");
  std::vector<std::string> infer_videos;
  std::string infer_model, infer_out;
  infer->add_option("--model", infer_model, "checkpoint")->required()->check(CLI::ExistingFile);
  infer->add_option("--video", infer_videos, "video frame directory (repeatable)")->required();
  infer->add_option("--out", infer_out, "detections CSV")->required();

  // track
  auto* track = app.add_subcommand("track", "link detections into trajectories");
  std::string track_dets, track_out, track_labels;
  bool track_filter = false;
  track->add_option("--dets", track_dets, "detections CSV")->required()->check(CLI::ExistingFile);
  track->add_option("--out", track_out, "tracks CSV")->required();
  track->add_flag("--filter", track_filter, "drop short and slow trajectories");
  track->add_option("--labels-out", track_labels, "also write the track points as a labels CSV");

  // eval
  auto* eval = app.add_subcommand("eval", "score detections against labels (JSON on stdout, table on stderr)");
  std::string eval_labels, eval_dets, eval_report, eval_overlays;
  std::vector<std::string> eval_videos;
  eval->add_option("--labels", eval_labels, "ground-truth labels CSV")->required()->check(CLI::ExistingFile);
  eval->add_option("--dets", eval_dets, "detections CSV")->required()->check(CLI::ExistingFile);
  eval->add_option("--report", eval_report, "also write the JSON report here");
  eval->add_option("--dump-overlays", eval_overlays, "write TP/FP/FN overlay PNGs under this directory");
  eval->add_option("--video", eval_videos, "frame directories for --dump-overlays (repeatable)");

  // bench
  auto* bench = app.add_subcommand("bench", "time the sparse pipeline against the dense reference");
  std::string bench_video, bench_model, bench_out;
  bench->add_option("--video", bench_video, "clip frame directory")->required();
  bench->add_option("--model", bench_model, "checkpoint (default: fresh weights from the config)")
      ->check(CLI::ExistingFile);
  bench->add_option("--out", bench_out, "also write the JSON report here");

  CLI11_PARSE(app, argc, argv);

  Run run;
  run.command = app.get_subcommands().front()->get_name();
  for (int i = 0; i < argc; ++i) run.argv.push_back(argv[i]);

  try {
    run.config = resolve_config(opt);
    run.config_json = Json::parse(run.config);
    check(hieum_set_threads(run.config_json["threads"].get<int>()));
    const char* cfg = run.config.c_str();
    fs::path manifest;

    if (*synth) {
      Json scene = Json::object();
      if (!synth_file.empty()) scene = Json::parse(read_file(synth_file));
      char* defaults = nullptr;
      check(hieum_synth_config_normalize(nullptr, &defaults));
      const auto like = Json::parse(take(defaults));
      for (const auto& [key, text] : synth_flags) {
        if (!text.empty()) scene[key] = convert(flag_name(key), text, like[key]);
      }
      if (!synth_id.empty()) {
        scene["video_id"] = synth_id;
      } else if (!scene.contains("video_id")) {
        scene["video_id"] = fs::path(synth_out).lexically_normal().filename().string().empty()
                                ? fs::path(synth_out).lexically_normal().parent_path().filename().string()
                                : fs::path(synth_out).lexically_normal().filename().string();
      }
      if (!scene.contains("seed")) scene["seed"] = run.config_json["seed"];
      char* normal = nullptr;
      check(hieum_synth_config_normalize(scene.dump().c_str(), &normal));
      const auto scene_text = take(normal);
      hieum_clip* c = nullptr;
      hieum_labels* l = nullptr;
      check(hieum_synth(scene_text.c_str(), &c, &l));
      Clip clip(c);
      Labels truth(l);
      if (synth_labels.empty()) synth_labels = (fs::path(synth_out) / "labels.csv").string();
      check(hieum_clip_save(clip.get(), synth_out.c_str()));
      check(hieum_labels_save(truth.get(), synth_labels.c_str()));
      run.inputs["scene"] = Json::parse(scene_text);
      run.outputs["frames"] = synth_out;
      run.outputs["labels"] = synth_labels;
      run.result["labels"] = hieum_labels_count(truth.get());
      manifest = default_manifest(run, synth_out, true);
    } else if (*pseudo) {
      hieum_labels* all = nullptr;
      check(hieum_labels_new(&all));
      Labels store(all);
      for (auto& clip : load_videos(pseudo_videos, run)) {
        hieum_labels* l = nullptr;
        check(hieum_pseudo_label(clip.get(), cfg, &l));
        Labels one(l);
        check(hieum_labels_union(store.get(), one.get()));
      }
      const auto path = (fs::path(pseudo_out) / "labels_round0.csv").string();
      check(hieum_labels_save(store.get(), path.c_str()));
      run.outputs["labels"] = path;
      run.result["labels"] = hieum_labels_count(store.get());
      manifest = default_manifest(run, pseudo_out, true);
    } else if (*train || *evolve) {
      auto clips = load_videos(train_videos, run);
      std::vector<const hieum_clip*> ptrs;
      for (const auto& c : clips) ptrs.push_back(c.get());
      Labels initial;
      if (!train_labels.empty()) {
        initial = load_labels(train_labels);
        run.inputs["labels"] = train_labels;
      }
      hieum_model* m = nullptr;
      hieum_labels* l = nullptr;
      char* summary = nullptr;
      check(hieum_train(ptrs.data(), ptrs.size(), initial.get(), cfg, train_out.c_str(), &m, &l, &summary));
      Model model(m);
      Labels labels(l);
      run.result = Json::parse(take(summary));
      run.outputs["model"] = (fs::path(train_out) / "model.ckpt").string();
      run.outputs["labels"] = (fs::path(train_out) / "labels_final.csv").string();
      check(hieum_labels_save(labels.get(), run.outputs["labels"].get<std::string>().c_str()));
      manifest = default_manifest(run, train_out, true);
    } else if (*infer) {
      hieum_model* m = nullptr;
      check(hieum_model_load(infer_model.c_str(), &m));
      Model model(m);
      run.inputs["model"] = infer_model;
      hieum_detections* all = nullptr;
      check(hieum_detections_new(&all));
      Dets dets(all);
      for (auto& clip : load_videos(infer_videos, run)) {
        hieum_detections* d = nullptr;
        check(hieum_infer(model.get(), clip.get(), cfg, &d));
        Dets one(d);
        check(hieum_detections_union(dets.get(), one.get()));
      }
      check(hieum_detections_save(dets.get(), infer_out.c_str()));
      run.outputs["detections"] = infer_out;
      run.result["detections"] = hieum_detections_count(dets.get());
      manifest = default_manifest(run, infer_out, false);
    } else if (*track) {
      auto dets = load_dets(track_dets);
      run.inputs["detections"] = track_dets;
      hieum_tracks* t = nullptr;
      check(hieum_track(dets.get(), cfg, track_filter ? 1 : 0, &t));
      Tracks tracks(t);
      check(hieum_tracks_save(tracks.get(), track_out.c_str()));
      run.outputs["tracks"] = track_out;
      if (!track_labels.empty()) {
        hieum_labels* l = nullptr;
        check(hieum_tracks_to_labels(tracks.get(), &l));
        Labels labels(l);
        check(hieum_labels_save(labels.get(), track_labels.c_str()));
        run.outputs["labels"] = track_labels;
      }
      run.result["tracks"] = hieum_tracks_count(tracks.get());
      run.result["filtered"] = track_filter;
      manifest = default_manifest(run, track_out, false);
    } else if (*eval) {
      auto labels = load_labels(eval_labels);
      auto dets = load_dets(eval_dets);
      run.inputs["labels"] = eval_labels;
      run.inputs["detections"] = eval_dets;
      char* json = nullptr;
      char* table = nullptr;
      check(hieum_eval(dets.get(), labels.get(), cfg, &json, &table));
      const auto report = take(json);
      std::cout << report << '\n';
      std::cerr << take(table);
      if (!eval_report.empty()) {
        write_file(eval_report, report);
        run.outputs["report"] = eval_report;
      }
      if (!eval_overlays.empty()) {
        if (eval_videos.empty()) throw Failure{HIEUM_ERR_INVALID_ARGUMENT, "--dump-overlays needs --video"};
        for (auto& clip : load_videos(eval_videos, run)) {
          const auto dir = (fs::path(eval_overlays) / hieum_clip_video_id(clip.get())).string();
          check(hieum_write_overlays(clip.get(), dets.get(), labels.get(), cfg, dir.c_str()));
        }
        run.outputs["overlays"] = eval_overlays;
      }
      run.result = Json::parse(report);
      manifest = default_manifest(run, eval_report, false);
    } else if (*bench) {
      auto clip = load_video(bench_video);
      run.inputs["video"] = bench_video;
      hieum_model* m = nullptr;
      if (bench_model.empty()) {
        check(hieum_model_new(cfg, &m));
      } else {
        check(hieum_model_load(bench_model.c_str(), &m));
        run.inputs["model"] = bench_model;
      }
      Model model(m);
      char* json = nullptr;
      check(hieum_bench(model.get(), clip.get(), cfg, &json));
      const auto report = take(json);
      std::cout << report << '\n';
      if (!bench_out.empty()) {
        write_file(bench_out, report);
        run.outputs["report"] = bench_out;
      }
      run.result = Json::parse(report);
      manifest = default_manifest(run, bench_out, false);
    }

    if (!opt.manifest.empty()) manifest = opt.manifest;
    write_manifest(run, manifest);
  } catch (const Failure& f) {
    std::fprintf(stderr, "hieum %s: %s\n", run.command.c_str(), f.message.c_str());
    return static_cast<int>(f.status);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "hieum %s: %s\n", run.command.c_str(), e.what());
    return static_cast<int>(HIEUM_ERR_INTERNAL);
  }
  return 0;
}
