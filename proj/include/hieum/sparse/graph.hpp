#pragma once

#include "hieum/sparse/rulebook.hpp"
#include "hieum/sparse/tensor.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace hieum::sparse {

// Trainable array. `version` increases on every mutation so a recorded graph
// can detect that the values it saw have changed.
template <typename S>
struct Parameter {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<S> value;
  std::vector<S> grad;
  std::uint64_t version = 0;

  Parameter() = default;
  Parameter(std::string n, std::vector<std::size_t> s, S fill = S(0));

  std::size_t size() const { return value.size(); }
  void zero_grad() { std::fill(grad.begin(), grad.end(), S(0)); }
  void touch() { ++version; }
};

template <typename S>
struct ConvLayer {
  ConvMode mode = ConvMode::Submanifold;
  Dims3 kernel;
  Dims3 stride;
  int in_channels = 0;
  int out_channels = 0;
  Parameter<S> weight;  // [offset][c_in][c_out]
  Parameter<S> bias;    // empty when the layer has no bias

  ConvLayer() = default;
  ConvLayer(std::string name, ConvMode mode, Dims3 kernel, Dims3 stride, int in_channels, int out_channels,
            bool with_bias);
};

template <typename S>
struct BatchNormLayer {
  int channels = 0;
  Parameter<S> gamma;
  Parameter<S> beta;
  std::vector<S> running_mean;
  std::vector<S> running_var;
  double momentum = 0.1;
  double eps = 1e-5;

  BatchNormLayer() = default;
  BatchNormLayer(std::string name, int channels);
};

struct NodeId {
  int index = -1;
  bool valid() const { return index >= 0; }
};

// Eager tape: every op computes its output immediately and records a
// backward closure. backward() replays the closures in reverse order.
template <typename S>
class Graph {
 public:
  explicit Graph(bool record = true) : record_(record) {}
  // Recorded closures refer back to the graph and to the layers they ran.
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  NodeId input(SparseTensor<S> value, bool requires_grad = false);

  NodeId conv(NodeId x, ConvLayer<S>& layer, const RulebookPtr& rulebook, const CoordSetPtr& out_coords);
  NodeId batchnorm(NodeId x, BatchNormLayer<S>& layer, bool training);
  NodeId relu(NodeId x);
  NodeId sigmoid(NodeId x);
  NodeId concat(NodeId a, NodeId b);

  const SparseTensor<S>& value(NodeId id) const { return nodes_.at(static_cast<std::size_t>(id.index)).value; }
  // Gradient of a node after backward(); empty if none flowed into it.
  std::span<const S> grad(NodeId id) const { return nodes_.at(static_cast<std::size_t>(id.index)).grad; }
  std::size_t size() const { return nodes_.size(); }

  struct Seed {
    NodeId node;
    std::span<const S> grad;
  };
  // Reverse pass seeded with d(loss)/d(node) for one or more nodes. Parameter
  // gradients accumulate into Parameter::grad.
  void backward(std::span<const Seed> seeds);
  void backward(NodeId node, std::span<const S> grad) {
    const Seed seed{node, grad};
    backward(std::span<const Seed>(&seed, 1));
  }

 private:
  struct Node {
    SparseTensor<S> value;
    std::vector<S> grad;
    bool requires_grad = false;
    std::function<void()> backward;
  };

  NodeId push(SparseTensor<S> value, bool requires_grad);
  std::vector<S>& grad_buffer(NodeId id);
  void watch(const Parameter<S>& p);

  bool record_;
  std::vector<Node> nodes_;
  std::vector<std::pair<const Parameter<S>*, std::uint64_t>> watched_;
  bool consumed_ = false;
};

}  // namespace hieum::sparse
