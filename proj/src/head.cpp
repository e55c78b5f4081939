#include "hieum/detector.hpp"

#include "hieum/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace hieum {

double gaussian_radius(double w, double h, double min_overlap) {
  const double b1 = h + w;
  const double c1 = w * h * (1.0 - min_overlap) / (1.0 + min_overlap);
  const double r1 = (b1 + std::sqrt(b1 * b1 - 4.0 * c1)) / 2.0;
  const double b2 = 2.0 * (h + w);
  const double c2 = (1.0 - min_overlap) * w * h;
  const double r2 = (b2 + std::sqrt(b2 * b2 - 16.0 * c2)) / 2.0;
  const double a3 = 4.0 * min_overlap;
  const double b3 = -2.0 * min_overlap * (h + w);
  const double c3 = (min_overlap - 1.0) * w * h;
  const double r3 = (b3 + std::sqrt(b3 * b3 - 4.0 * a3 * c3)) / 2.0;
  return std::max(1.0, std::min({r1, r2, r3}));
}

TrainTargets render_targets(const std::vector<std::vector<BoxLabel>>& boxes, const sparse::CoordSet& coords) {
  const std::size_t N = coords.size();
  TrainTargets tg;
  tg.heatmap.assign(N, 0.0);
  tg.positive.assign(N, 0);
  tg.size.assign(2 * N, 0.0);
  tg.offset.assign(2 * N, 0.0);

  for (std::size_t t = 0; t < boxes.size(); ++t) {
    const auto [lo, hi] = coords.frame_range(static_cast<int>(t));
    struct Assigned {
      std::size_t row;
      double sigma;
    };
    std::vector<Assigned> assigned;
    for (const auto& b : boxes[t]) {
      const double reach = std::max(3.0, std::max(b.w, b.h));
      std::size_t best = N;
      double best_d2 = std::numeric_limits<double>::infinity();
      for (std::size_t i = lo; i < hi; ++i) {
        if (tg.positive[i]) continue;
        const double dx = coords[i].x - b.cx;
        const double dy = coords[i].y - b.cy;
        const double d2 = dx * dx + dy * dy;
        if (d2 <= reach * reach && d2 < best_d2) {
          best_d2 = d2;
          best = i;
        }
      }
      if (best == N) {
        ++tg.coverage_misses;
        continue;
      }
      tg.positive[best] = 1;
      tg.heatmap[best] = 1.0;
      tg.size[2 * best] = b.w;
      tg.size[2 * best + 1] = b.h;
      tg.offset[2 * best] = b.cx - coords[best].x;
      tg.offset[2 * best + 1] = b.cy - coords[best].y;
      ++tg.num_positive;
      assigned.push_back({best, std::max(1.0, gaussian_radius(b.w, b.h) / 3.0)});
    }
    for (std::size_t i = lo; i < hi; ++i) {
      if (tg.positive[i]) continue;
      for (const auto& a : assigned) {
        const double dx = coords[i].x - coords[a.row].x;
        const double dy = coords[i].y - coords[a.row].y;
        tg.heatmap[i] = std::max(tg.heatmap[i], std::exp(-(dx * dx + dy * dy) / (2.0 * a.sigma * a.sigma)));
      }
    }
  }
  return tg;
}

std::vector<std::vector<BoxLabel>> window_labels(const LabelStore& store, const std::string& video_id, int start,
                                                 int frames, int y0, int x0, int height, int width) {
  std::vector<std::vector<BoxLabel>> out(static_cast<std::size_t>(frames));
  if (!store.contains(video_id)) return out;
  for (int t = 0; t < frames; ++t) {
    for (auto b : store.frame(video_id, start + t)) {
      b.cx -= x0;
      b.cy -= y0;
      b.frame = t;
      // Centers are pixel positions, so a crop of width W covers [-0.5, W - 0.5).
      if (b.cx < -0.5 || b.cy < -0.5 || b.cx >= width - 0.5 || b.cy >= height - 0.5) continue;
      out[static_cast<std::size_t>(t)].push_back(b);
    }
  }
  return out;
}

namespace {

// log(1 + e^x) without overflow.
double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

}  // namespace

template <typename S>
LossResult<S> detection_loss(std::span<const S> logits, std::span<const S> sizes, std::span<const S> offsets,
                             const TrainTargets& tg, const LossWeights& weights) {
  const std::size_t N = logits.size();
  if (tg.heatmap.size() != N || sizes.size() != 2 * N || offsets.size() != 2 * N) {
    throw Error(ErrorCode::ShapeMismatch, "head outputs and targets disagree");
  }
  LossResult<S> r;
  r.grad_center.assign(N, S(0));
  r.grad_size.assign(2 * N, S(0));
  r.grad_offset.assign(2 * N, S(0));

  const double norm = std::max<double>(1.0, static_cast<double>(tg.num_positive));
  double center = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    const double x = logits[i];
    const double p = 1.0 / (1.0 + std::exp(-x));
    const double log_p = -softplus(-x);
    const double log_q = -softplus(x);  // log(1 - p)
    double loss = 0.0;
    double grad = 0.0;
    if (tg.positive[i]) {
      const double q = 1.0 - p;
      loss = -q * q * log_p;
      grad = 2.0 * p * q * q * log_p - q * q * q;
    } else {
      const double w = std::pow(1.0 - tg.heatmap[i], 4);
      loss = -w * p * p * log_q;
      grad = -w * (2.0 * p * p * (1.0 - p) * log_q - p * p * p);
    }
    center += loss;
    r.grad_center[i] = static_cast<S>(grad / norm);
  }
  r.center = center / norm;

  if (tg.num_positive > 0) {
    const double denom = 2.0 * static_cast<double>(tg.num_positive);
    double size_sum = 0.0;
    double off_sum = 0.0;
    auto sign = [](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); };
    for (std::size_t i = 0; i < N; ++i) {
      if (!tg.positive[i]) continue;
      for (std::size_t c = 0; c < 2; ++c) {
        const double ds = sizes[2 * i + c] - tg.size[2 * i + c];
        const double dof = offsets[2 * i + c] - tg.offset[2 * i + c];
        size_sum += std::fabs(ds);
        off_sum += std::fabs(dof);
        r.grad_size[2 * i + c] = static_cast<S>(weights.size * sign(ds) / denom);
        r.grad_offset[2 * i + c] = static_cast<S>(weights.offset * sign(dof) / denom);
      }
    }
    r.size = size_sum / denom;
    r.offset = off_sum / denom;
  }
  r.total = r.center + weights.size * r.size + weights.offset * r.offset;
  return r;
}

template <typename S>
std::vector<std::vector<Detection>> decode(const HeadOutput<S>& out, const DecodeParams& params, int height,
                                           int width) {
  if (!out.coords) return {};
  const auto& coords = *out.coords;
  const int T = coords.shape().t;
  std::vector<std::vector<Detection>> frames(static_cast<std::size_t>(std::max(T, 0)));
  if (out.size() == 0) return frames;
  if (out.size() != coords.size()) throw Error(ErrorCode::ShapeMismatch, "head output does not match its coordinates");

  std::vector<double> score(out.size());
  for (std::size_t i = 0; i < out.size(); ++i) score[i] = 1.0 / (1.0 + std::exp(-static_cast<double>(out.center_logits[i])));

  for (int t = 0; t < T; ++t) {
    const auto [lo, hi] = coords.frame_range(t);
    auto& dets = frames[static_cast<std::size_t>(t)];
    for (std::size_t i = lo; i < hi; ++i) {
      if (score[i] < params.score_thresh) continue;
      const auto& c = coords[i];
      bool peak = true;
      for (int dy = -1; dy <= 1 && peak; ++dy) {
        for (int dx = -1; dx <= 1 && peak; ++dx) {
          if (dy == 0 && dx == 0) continue;
          const auto j = coords.find({c.t, c.y + dy, c.x + dx});
          if (j < 0) continue;
          const double sj = score[static_cast<std::size_t>(j)];
          // Equal scores go to the lexicographically smaller site, which has the lower row.
          if (sj > score[i] || (sj == score[i] && static_cast<std::size_t>(j) < i)) peak = false;
        }
      }
      if (!peak) continue;
      Detection d;
      d.frame = t;
      d.w = std::max(1.0, static_cast<double>(out.sizes[2 * i]));
      d.h = std::max(1.0, static_cast<double>(out.sizes[2 * i + 1]));
      double ox = out.offsets[2 * i];
      double oy = out.offsets[2 * i + 1];
      const double reach = std::max(3.0, std::max(d.w, d.h));
      const double norm = std::hypot(ox, oy);
      if (norm > reach) {
        ox *= reach / norm;
        oy *= reach / norm;
      }
      d.cx = std::clamp(c.x + ox, 0.0, static_cast<double>(width - 1));
      d.cy = std::clamp(c.y + oy, 0.0, static_cast<double>(height - 1));
      d.score = score[i];
      dets.push_back(d);
    }
    std::stable_sort(dets.begin(), dets.end(), [](const Detection& a, const Detection& b) { return a.score > b.score; });
    if (params.max_per_frame >= 0 && dets.size() > static_cast<std::size_t>(params.max_per_frame)) {
      dets.resize(static_cast<std::size_t>(params.max_per_frame));
    }
  }
  return frames;
}

template LossResult<float> detection_loss(std::span<const float>, std::span<const float>, std::span<const float>,
                                          const TrainTargets&, const LossWeights&);
template LossResult<double> detection_loss(std::span<const double>, std::span<const double>, std::span<const double>,
                                           const TrainTargets&, const LossWeights&);
template std::vector<std::vector<Detection>> decode(const HeadOutput<float>&, const DecodeParams&, int, int);
template std::vector<std::vector<Detection>> decode(const HeadOutput<double>&, const DecodeParams&, int, int);

}  // namespace hieum
