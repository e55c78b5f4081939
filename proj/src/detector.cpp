#include "hieum/detector.hpp"

#include "hieum/error.hpp"
#include "hieum/rng.hpp"

#include <cmath>
#include <json.hpp>

namespace hieum {

using sparse::BatchNormLayer;
using sparse::ConvLayer;
using sparse::ConvMode;
using sparse::Dims3;
using sparse::Graph;
using sparse::NodeId;

namespace {

constexpr Dims3 kCube{3, 3, 3};
constexpr Dims3 kPoint{1, 1, 1};
constexpr Dims3 kPool{1, 2, 2};
constexpr double kCenterPrior = -2.19;

}  // namespace

std::vector<int> NetworkConfig::widths() const {
  if (depth < 1) throw Error(ErrorCode::InvalidConfig, "depth must be >= 1");
  if (channels.empty()) {
    std::vector<int> w;
    for (int l = 0; l < depth; ++l) w.push_back(16 << l);
    return w;
  }
  if (static_cast<int>(channels.size()) != depth) {
    throw Error(ErrorCode::InvalidConfig, "channels needs one width per level");
  }
  for (int c : channels) {
    if (c < 1) throw Error(ErrorCode::InvalidConfig, "channel widths must be positive");
  }
  return channels;
}

sparse::CoordSetPtr cloud_coords(const PointCloud& cloud) {
  return std::make_shared<sparse::CoordSet>(cloud.coords, Dims3{cloud.frames, cloud.height, cloud.width});
}

ForwardPlan make_plan(const sparse::CoordSetPtr& input, int depth) {
  ForwardPlan plan;
  plan.coords.push_back(input);
  plan.submanifold.push_back(sparse::build_rulebook(input, kCube, kPoint, ConvMode::Submanifold).rulebook);
  plan.pointwise = sparse::build_rulebook(input, kPoint, kPoint, ConvMode::Submanifold).rulebook;
  for (int l = 1; l < depth; ++l) {
    auto down = sparse::build_rulebook(plan.coords.back(), kPool, kPool, ConvMode::Strided);
    plan.up.push_back(
        sparse::build_rulebook(down.output, kPool, kPool, ConvMode::Transposed, plan.coords.back()).rulebook);
    plan.down.push_back(down.rulebook);
    plan.coords.push_back(down.output);
    plan.submanifold.push_back(sparse::build_rulebook(down.output, kCube, kPoint, ConvMode::Submanifold).rulebook);
  }
  return plan;
}

template <typename S>
Detector<S>::Detector(NetworkConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
  const auto w = cfg_.widths();
  const int c0 = w[0];
  stem_ = ConvLayer<S>("stem", ConvMode::Submanifold, kCube, kPoint, 1, c0, false);
  stem_bn_ = BatchNormLayer<S>("stem_bn", c0);
  levels_.resize(static_cast<std::size_t>(cfg_.depth));
  for (int l = 1; l < cfg_.depth; ++l) {
    const std::string p = "level" + std::to_string(l) + ".";
    auto& L = levels_[static_cast<std::size_t>(l)];
    const int ci = w[static_cast<std::size_t>(l - 1)];
    const int co = w[static_cast<std::size_t>(l)];
    L.down = ConvLayer<S>(p + "down", ConvMode::Strided, kPool, kPool, ci, co, false);
    L.down_bn = BatchNormLayer<S>(p + "down_bn", co);
    L.conv = ConvLayer<S>(p + "conv", ConvMode::Submanifold, kCube, kPoint, co, co, false);
    L.bn = BatchNormLayer<S>(p + "bn", co);
    L.up = ConvLayer<S>(p + "up", ConvMode::Transposed, kPool, kPool, co, ci, false);
    L.up_bn = BatchNormLayer<S>(p + "up_bn", ci);
    L.fuse = ConvLayer<S>(p + "fuse", ConvMode::Submanifold, kCube, kPoint, 2 * ci, ci, false);
    L.fuse_bn = BatchNormLayer<S>(p + "fuse_bn", ci);
  }
  auto branch = [&](const std::string& name, int out) {
    return Branch{ConvLayer<S>(name + ".conv", ConvMode::Submanifold, kCube, kPoint, c0, c0, true),
                  ConvLayer<S>(name + ".out", ConvMode::Submanifold, kPoint, kPoint, c0, out, true)};
  };
  center_ = branch("center", 1);
  size_ = branch("size", 2);
  offset_ = branch("offset", 2);

  // He-uniform over the fan-in of each offset-stacked weight.
  auto rng = Rng::stream(seed, "init");
  for_each_conv([&](ConvLayer<S>& layer) {
    const double fan_in = static_cast<double>(layer.kernel.volume()) * layer.in_channels;
    const double bound = std::sqrt(6.0 / fan_in);
    for (auto& v : layer.weight.value) v = static_cast<S>(rng.uniform(-bound, bound));
  });
  center_.out.bias.value[0] = static_cast<S>(kCenterPrior);
}

template <typename S>
template <typename F>
void Detector<S>::for_each_conv(F&& f) {
  f(stem_);
  for (int l = 1; l < cfg_.depth; ++l) {
    auto& L = levels_[static_cast<std::size_t>(l)];
    f(L.down);
    f(L.conv);
    f(L.up);
    f(L.fuse);
  }
  for (Branch* b : {&center_, &size_, &offset_}) {
    f(b->conv);
    f(b->out);
  }
}

template <typename S>
template <typename F>
void Detector<S>::for_each_bn(F&& f) {
  f(stem_bn_);
  for (int l = 1; l < cfg_.depth; ++l) {
    auto& L = levels_[static_cast<std::size_t>(l)];
    f(L.down_bn);
    f(L.bn);
    f(L.up_bn);
    f(L.fuse_bn);
  }
}

template <typename S>
std::vector<sparse::Parameter<S>*> Detector<S>::parameters() {
  std::vector<sparse::Parameter<S>*> params;
  for_each_conv([&](ConvLayer<S>& layer) {
    params.push_back(&layer.weight);
    if (!layer.bias.value.empty()) params.push_back(&layer.bias);
  });
  for_each_bn([&](BatchNormLayer<S>& bn) {
    params.push_back(&bn.gamma);
    params.push_back(&bn.beta);
  });
  return params;
}

template <typename S>
HeadNodes Detector<S>::forward(Graph<S>& g, NodeId input, const ForwardPlan& plan, bool training) {
  if (static_cast<int>(plan.coords.size()) != cfg_.depth) {
    throw Error(ErrorCode::ShapeMismatch, "plan depth does not match the network");
  }
  const auto& co = plan.coords;
  NodeId x = g.relu(g.batchnorm(g.conv(input, stem_, plan.submanifold[0], co[0]), stem_bn_, training));

  std::vector<NodeId> skips{x};
  for (int l = 1; l < cfg_.depth; ++l) {
    auto& L = levels_[static_cast<std::size_t>(l)];
    const auto ul = static_cast<std::size_t>(l);
    x = g.relu(g.batchnorm(g.conv(x, L.down, plan.down[ul - 1], co[ul]), L.down_bn, training));
    x = g.relu(g.batchnorm(g.conv(x, L.conv, plan.submanifold[ul], co[ul]), L.bn, training));
    skips.push_back(x);
  }
  for (int l = cfg_.depth - 1; l >= 1; --l) {
    auto& L = levels_[static_cast<std::size_t>(l)];
    const auto ul = static_cast<std::size_t>(l);
    x = g.relu(g.batchnorm(g.conv(x, L.up, plan.up[ul - 1], co[ul - 1]), L.up_bn, training));
    x = g.concat(skips[ul - 1], x);
    x = g.relu(g.batchnorm(g.conv(x, L.fuse, plan.submanifold[ul - 1], co[ul - 1]), L.fuse_bn, training));
  }

  auto run_branch = [&](Branch& b) {
    const NodeId h = g.relu(g.conv(x, b.conv, plan.submanifold[0], co[0]));
    return g.conv(h, b.out, plan.pointwise, co[0]);
  };
  HeadNodes nodes;
  nodes.embedding = x;
  nodes.center = run_branch(center_);
  nodes.size = run_branch(size_);
  nodes.offset = run_branch(offset_);
  return nodes;
}

template <typename S>
HeadOutput<S> Detector<S>::predict(const PointCloud& cloud) {
  HeadOutput<S> out;
  out.coords = cloud_coords(cloud);
  if (cloud.empty()) return out;
  return predict(cloud, make_plan(out.coords, cfg_.depth));
}

template <typename S>
HeadOutput<S> Detector<S>::predict(const PointCloud& cloud, const ForwardPlan& plan) {
  HeadOutput<S> out;
  out.coords = plan.coords.at(0);
  if (cloud.empty()) return out;
  Graph<S> g(false);
  std::vector<S> feats(cloud.feats.begin(), cloud.feats.end());
  const NodeId in = g.input(sparse::SparseTensor<S>(out.coords, 1, std::move(feats)));
  const auto nodes = forward(g, in, plan, false);
  auto copy = [&](NodeId id) {
    const auto f = g.value(id).feats();
    return std::vector<S>(f.begin(), f.end());
  };
  out.center_logits = copy(nodes.center);
  out.sizes = copy(nodes.size);
  out.offsets = copy(nodes.offset);
  return out;
}

template <typename S>
sparse::Checkpoint Detector<S>::to_checkpoint() const {
  sparse::Checkpoint ckpt;
  auto* self = const_cast<Detector*>(this);
  auto put = [&](const std::string& name, const std::vector<std::size_t>& shape, const std::vector<S>& v) {
    ckpt.tensors.push_back({name, shape, std::vector<float>(v.begin(), v.end())});
  };
  self->for_each_conv([&](ConvLayer<S>& layer) {
    put(layer.weight.name, layer.weight.shape, layer.weight.value);
    if (!layer.bias.value.empty()) put(layer.bias.name, layer.bias.shape, layer.bias.value);
  });
  self->for_each_bn([&](BatchNormLayer<S>& bn) {
    const std::string base = bn.gamma.name.substr(0, bn.gamma.name.size() - 6);
    const std::vector<std::size_t> shape{static_cast<std::size_t>(bn.channels)};
    put(bn.gamma.name, shape, bn.gamma.value);
    put(bn.beta.name, shape, bn.beta.value);
    put(base + ".running_mean", shape, bn.running_mean);
    put(base + ".running_var", shape, bn.running_var);
  });
  nlohmann::ordered_json meta;
  meta["depth"] = cfg_.depth;
  meta["channels"] = cfg_.widths();
  ckpt.metadata_json = meta.dump();
  return ckpt;
}

template <typename S>
Detector<S> Detector<S>::from_checkpoint(const sparse::Checkpoint& ckpt) {
  NetworkConfig cfg;
  try {
    const auto meta = nlohmann::json::parse(ckpt.metadata_json);
    cfg.depth = meta.at("depth").get<int>();
    cfg.channels = meta.at("channels").get<std::vector<int>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Io, std::string("checkpoint metadata: ") + e.what());
  }
  Detector det(cfg, 0);
  auto get = [&](const std::string& name, std::vector<S>& dst) {
    const auto* t = ckpt.find(name);
    if (!t) throw Error(ErrorCode::Io, "checkpoint lacks tensor " + name);
    if (t->data.size() != dst.size()) throw Error(ErrorCode::ShapeMismatch, "checkpoint tensor " + name + " has the wrong size");
    std::copy(t->data.begin(), t->data.end(), dst.begin());
  };
  det.for_each_conv([&](ConvLayer<S>& layer) {
    get(layer.weight.name, layer.weight.value);
    if (!layer.bias.value.empty()) get(layer.bias.name, layer.bias.value);
  });
  det.for_each_bn([&](BatchNormLayer<S>& bn) {
    const std::string base = bn.gamma.name.substr(0, bn.gamma.name.size() - 6);
    get(bn.gamma.name, bn.gamma.value);
    get(bn.beta.name, bn.beta.value);
    get(base + ".running_mean", bn.running_mean);
    get(base + ".running_var", bn.running_var);
  });
  return det;
}

template class Detector<float>;
template class Detector<double>;

}  // namespace hieum
