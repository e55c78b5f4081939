#include "hieum/synth.hpp"

#include "hieum/error.hpp"
#include "hieum/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace hieum {
namespace {

// Maps an unbounded coordinate into [lo, hi] by mirror reflection.
double reflect(double x, double lo, double hi) {
  const double span = hi - lo;
  if (span <= 0.0) return lo;
  double u = std::fmod(x - lo, 2.0 * span);
  if (u < 0.0) u += 2.0 * span;
  if (u > span) u = 2.0 * span - u;
  return lo + u;
}

// Overlap of pixel cell [p - 0.5, p + 0.5] with interval [a, b].
double cover(int p, double a, double b) {
  return std::max(0.0, std::min(b, p + 0.5) - std::max(a, p - 0.5));
}

std::vector<float> make_background(const SynthConfig& cfg, Rng& rng) {
  const auto n = static_cast<std::size_t>(cfg.height) * cfg.width;
  std::vector<float> bg(n, 110.0f);
  if (!cfg.textured_background) return bg;
  struct Wave {
    double fx, fy, phase, amp;
  };
  std::vector<Wave> waves;
  for (int i = 0; i < 6; ++i) {
    waves.push_back({rng.uniform(0.005, 0.06), rng.uniform(0.005, 0.06), rng.uniform(0.0, 2.0 * std::numbers::pi),
                     rng.uniform(5.0, 14.0)});
  }
  for (int y = 0; y < cfg.height; ++y) {
    for (int x = 0; x < cfg.width; ++x) {
      double v = 110.0;
      for (const auto& w : waves) v += w.amp * std::sin(2.0 * std::numbers::pi * (w.fx * x + w.fy * y) + w.phase);
      v += rng.uniform(-6.0, 6.0);  // static fine texture
      bg[static_cast<std::size_t>(y) * cfg.width + x] = static_cast<float>(v);
    }
  }
  return bg;
}

void validate(const SynthConfig& cfg) {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidConfig, "synth: " + what); };
  if (cfg.height < 1 || cfg.width < 1) fail("height and width must be >= 1");
  if (cfg.frames < 2) fail("frames must be >= 2");
  if (cfg.n_targets < 0 || cfg.n_clutter_blinks < 0) fail("counts must be non-negative");
  if (cfg.size_min < 1 || cfg.size_max < cfg.size_min) fail("invalid target size range");
  if (cfg.speed_min < 0.0 || cfg.speed_max < cfg.speed_min) fail("invalid speed range");
  if (cfg.delta_min < 0.0 || cfg.delta_max < cfg.delta_min) fail("invalid intensity delta range");
  if (cfg.noise_sigma < 0.0) fail("noise_sigma must be >= 0");
  const int largest = cfg.targets.empty()
                          ? (cfg.n_targets > 0 ? cfg.size_max : 0)
                          : std::max_element(cfg.targets.begin(), cfg.targets.end(), [](auto& a, auto& b) {
                              return a.size < b.size;
                            })->size;
  if (largest > std::min(cfg.height, cfg.width)) fail("targets cannot fit in the image");
  for (const auto& t : cfg.targets) {
    if (t.size < 1) fail("explicit target size must be >= 1");
  }
}

}  // namespace

std::pair<double, double> target_center(const TargetSpec& target, int t, int height, int width) {
  const double half = target.size / 2.0;
  const double x = reflect(target.cx + target.vx * t, half - 0.5, width - 0.5 - half);
  const double y = reflect(target.cy + target.vy * t, half - 0.5, height - 0.5 - half);
  return {x, y};
}

SynthVideo synth_video(const SynthConfig& cfg) {
  validate(cfg);
  Rng scene = Rng::stream(cfg.seed, "synth.scene");
  Rng noise = Rng::stream(cfg.seed, "synth.noise");

  const auto background = make_background(cfg, scene);

  std::vector<TargetSpec> targets = cfg.targets;
  if (targets.empty()) {
    for (int i = 0; i < cfg.n_targets; ++i) {
      TargetSpec t;
      t.size = scene.uniform_int(cfg.size_min, cfg.size_max);
      const double half = t.size / 2.0;
      t.cx = scene.uniform(half - 0.5, cfg.width - 0.5 - half);
      t.cy = scene.uniform(half - 0.5, cfg.height - 0.5 - half);
      const double speed = scene.uniform(cfg.speed_min, cfg.speed_max);
      const double angle = scene.uniform(0.0, 2.0 * std::numbers::pi);
      t.vx = speed * std::cos(angle);
      t.vy = speed * std::sin(angle);
      const double mag = scene.uniform(cfg.delta_min, cfg.delta_max);
      t.delta = scene.uniform() < cfg.dark_fraction ? -mag : mag;
      targets.push_back(t);
    }
  }

  struct Blink {
    int frame, y, x, size;
    double delta;
  };
  std::vector<Blink> blinks;
  for (int i = 0; i < cfg.n_clutter_blinks; ++i) {
    Blink b;
    b.frame = scene.uniform_int(0, cfg.frames - 1);
    b.size = scene.uniform_int(std::max(1, std::min(2, cfg.height)), std::max(1, std::min({3, cfg.height, cfg.width})));
    b.y = scene.uniform_int(0, cfg.height - b.size);
    b.x = scene.uniform_int(0, cfg.width - b.size);
    const double mag = scene.uniform(std::max(cfg.delta_min, 1.0), std::max(cfg.delta_max, 1.0));
    b.delta = scene.uniform() < 0.5 ? -mag : mag;
    blinks.push_back(b);
  }

  const auto frame_size = static_cast<std::size_t>(cfg.height) * cfg.width;
  std::vector<double> canvas(frame_size);
  std::vector<float> data(frame_size * cfg.frames);
  LabelStore truth;

  for (int t = 0; t < cfg.frames; ++t) {
    std::copy(background.begin(), background.end(), canvas.begin());
    for (std::size_t id = 0; id < targets.size(); ++id) {
      const auto& target = targets[id];
      const auto [cx, cy] = target_center(target, t, cfg.height, cfg.width);
      const double half = target.size / 2.0;
      const double x0 = cx - half, x1 = cx + half, y0 = cy - half, y1 = cy + half;
      for (int y = std::max(0, static_cast<int>(std::floor(y0))); y <= std::min(cfg.height - 1, static_cast<int>(std::ceil(y1))); ++y) {
        const double cy_cover = cover(y, y0, y1);
        if (cy_cover <= 0.0) continue;
        for (int x = std::max(0, static_cast<int>(std::floor(x0))); x <= std::min(cfg.width - 1, static_cast<int>(std::ceil(x1))); ++x) {
          const double c = cy_cover * cover(x, x0, x1);
          if (c > 0.0) canvas[static_cast<std::size_t>(y) * cfg.width + x] += c * target.delta;
        }
      }
      BoxLabel label;
      label.frame = t;
      label.cx = cx;
      label.cy = cy;
      label.w = target.size;
      label.h = target.size;
      label.track_id = static_cast<int>(id);
      label.provenance = Provenance::Manual;
      truth.add(cfg.video_id, label);
    }
    for (const auto& b : blinks) {
      if (b.frame != t) continue;
      for (int y = b.y; y < b.y + b.size; ++y) {
        for (int x = b.x; x < b.x + b.size; ++x) canvas[static_cast<std::size_t>(y) * cfg.width + x] += b.delta;
      }
    }
    float* out = data.data() + frame_size * t;
    for (std::size_t i = 0; i < frame_size; ++i) {
      double v = canvas[i];
      if (cfg.noise_sigma > 0.0) v += cfg.noise_sigma * noise.normal();
      out[i] = static_cast<float>(std::clamp(std::round(v), 0.0, 255.0));
    }
  }
  return {FrameClip(cfg.video_id, 0, cfg.frames, cfg.height, cfg.width, std::move(data)), std::move(truth)};
}

}  // namespace hieum
