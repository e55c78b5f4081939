#pragma once

#include "hieum/dataset.hpp"
#include "hieum/detections.hpp"
#include "hieum/sampling.hpp"
#include "hieum/sparse/checkpoint.hpp"
#include "hieum/sparse/adam.hpp"
#include "hieum/sparse/graph.hpp"

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

namespace hieum {

struct NetworkConfig {
  int depth = 3;
  // One width per level; empty means 16 * 2^level.
  std::vector<int> channels;

  std::vector<int> widths() const;
};

// Coordinate sets and rulebooks of every level for one input cloud. Built once
// and shared by forward, backward and repeated evaluations of the same cloud.
struct ForwardPlan {
  std::vector<sparse::CoordSetPtr> coords;       // [level]
  std::vector<sparse::RulebookPtr> submanifold;  // [level], 3x3x3
  std::vector<sparse::RulebookPtr> down;         // [level - 1] -> level
  std::vector<sparse::RulebookPtr> up;           // level -> [level - 1]
  sparse::RulebookPtr pointwise;                 // 1x1x1 on level 0
};

ForwardPlan make_plan(const sparse::CoordSetPtr& input, int depth);

sparse::CoordSetPtr cloud_coords(const PointCloud& cloud);

template <typename S>
struct HeadOutput {
  sparse::CoordSetPtr coords;
  std::vector<S> center_logits;  // N
  std::vector<S> sizes;          // N x 2, (w, h) in pixels
  std::vector<S> offsets;        // N x 2, (dx, dy) in pixels

  std::size_t size() const { return center_logits.size(); }
};

struct HeadNodes {
  sparse::NodeId embedding;
  sparse::NodeId center;
  sparse::NodeId size;
  sparse::NodeId offset;
};

// Sparse U-Net with a three-branch anchor-free head. Every level downsamples
// by (1, 2, 2) so the temporal axis keeps full resolution.
template <typename S>
class Detector {
 public:
  explicit Detector(NetworkConfig cfg, std::uint64_t seed = 0);

  const NetworkConfig& config() const { return cfg_; }

  // Records the network on `graph`. `input` must be a one-channel tensor on plan.coords[0].
  HeadNodes forward(sparse::Graph<S>& graph, sparse::NodeId input, const ForwardPlan& plan, bool training);

  // Inference: eval-mode normalization, nothing recorded.
  HeadOutput<S> predict(const PointCloud& cloud);
  HeadOutput<S> predict(const PointCloud& cloud, const ForwardPlan& plan);

  std::vector<sparse::Parameter<S>*> parameters();

  sparse::Checkpoint to_checkpoint() const;
  static Detector from_checkpoint(const sparse::Checkpoint& ckpt);

  // Same network evaluated densely over every voxel of a (T, H, W) grid with
  // one input channel, channel-last. Accumulates in float whatever S is; used as
  // the cost reference in benchmarks. `macs` receives the multiply-accumulates.
  HeadOutput<S> dense_predict(std::span<const float> input, sparse::Dims3 shape, std::uint64_t* macs = nullptr) const;

 private:
  struct Level {
    sparse::ConvLayer<S> down;
    sparse::BatchNormLayer<S> down_bn;
    sparse::ConvLayer<S> conv;
    sparse::BatchNormLayer<S> bn;
    sparse::ConvLayer<S> up;
    sparse::BatchNormLayer<S> up_bn;
    sparse::ConvLayer<S> fuse;
    sparse::BatchNormLayer<S> fuse_bn;
  };
  struct Branch {
    sparse::ConvLayer<S> conv;
    sparse::ConvLayer<S> out;
  };

  template <typename F>
  void for_each_conv(F&& f);
  template <typename F>
  void for_each_bn(F&& f);

  NetworkConfig cfg_;
  sparse::ConvLayer<S> stem_;
  sparse::BatchNormLayer<S> stem_bn_;
  std::vector<Level> levels_;  // levels_[0] unused except for symmetry; levels 1..depth-1
  Branch center_;
  Branch size_;
  Branch offset_;
};

// Multiply-accumulates of the dense evaluation on a (T, H, W) grid.
std::uint64_t dense_macs(const NetworkConfig& cfg, sparse::Dims3 shape);

// ---- training targets and loss ----

struct LossWeights {
  double size = 0.1;    // lambda1
  double offset = 1.0;  // lambda2
};

struct TrainTargets {
  std::vector<double> heatmap;          // N, in [0, 1]
  std::vector<std::uint8_t> positive;   // N
  std::vector<double> size;             // N x 2, set at positives
  std::vector<double> offset;           // N x 2, set at positives
  std::size_t num_positive = 0;
  std::size_t coverage_misses = 0;      // boxes with no active site in range
};

// Gaussian radius for which a box shifted by it still overlaps the original
// by at least min_overlap; at least 1.
double gaussian_radius(double w, double h, double min_overlap = 0.7);

// boxes[t] holds the labels of clip frame t in clip pixel coordinates.
TrainTargets render_targets(const std::vector<std::vector<BoxLabel>>& boxes, const sparse::CoordSet& coords);

// Labels of a video restricted to a window [start, start + frames) and a crop,
// shifted into window coordinates.
std::vector<std::vector<BoxLabel>> window_labels(const LabelStore& store, const std::string& video_id, int start,
                                                 int frames, int y0, int x0, int height, int width);

template <typename S>
struct LossResult {
  double total = 0.0;
  double center = 0.0;
  double size = 0.0;
  double offset = 0.0;
  std::vector<S> grad_center;  // d total / d logits
  std::vector<S> grad_size;
  std::vector<S> grad_offset;
};

template <typename S>
LossResult<S> detection_loss(std::span<const S> center_logits, std::span<const S> sizes, std::span<const S> offsets,
                             const TrainTargets& targets, const LossWeights& weights);

// ---- decoding ----

struct DecodeParams {
  double score_thresh = 0.3;
  int max_per_frame = 500;
};

// Per-frame 3x3 peak picking over active sites. Frames are clip-local; callers
// shift them. width/height bound the clipped centers.
template <typename S>
std::vector<std::vector<Detection>> decode(const HeadOutput<S>& out, const DecodeParams& params, int height, int width);

}  // namespace hieum
