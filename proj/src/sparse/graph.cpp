#include "hieum/sparse/graph.hpp"

#include "hieum/error.hpp"

#include <cmath>
#include <numeric>

namespace hieum::sparse {

template <typename S>
Parameter<S>::Parameter(std::string n, std::vector<std::size_t> s, S fill) : name(std::move(n)), shape(std::move(s)) {
  const auto count = std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
  value.assign(count, fill);
  grad.assign(count, S(0));
}

template <typename S>
ConvLayer<S>::ConvLayer(std::string name, ConvMode m, Dims3 k, Dims3 s, int cin, int cout, bool with_bias)
    : mode(m),
      kernel(k),
      stride(s),
      in_channels(cin),
      out_channels(cout),
      weight(name + ".weight", {static_cast<std::size_t>(k.volume()), static_cast<std::size_t>(cin), static_cast<std::size_t>(cout)}) {
  if (with_bias) bias = Parameter<S>(name + ".bias", {static_cast<std::size_t>(cout)});
}

template <typename S>
BatchNormLayer<S>::BatchNormLayer(std::string name, int c)
    : channels(c),
      gamma(name + ".gamma", {static_cast<std::size_t>(c)}, S(1)),
      beta(name + ".beta", {static_cast<std::size_t>(c)}, S(0)),
      running_mean(static_cast<std::size_t>(c), S(0)),
      running_var(static_cast<std::size_t>(c), S(1)) {}

template <typename S>
NodeId Graph<S>::push(SparseTensor<S> value, bool requires_grad) {
  nodes_.push_back(Node{std::move(value), {}, requires_grad && record_, {}});
  return NodeId{static_cast<int>(nodes_.size() - 1)};
}

template <typename S>
std::vector<S>& Graph<S>::grad_buffer(NodeId id) {
  auto& node = nodes_[static_cast<std::size_t>(id.index)];
  if (node.grad.empty()) node.grad.assign(node.value.feats().size(), S(0));
  return node.grad;
}

template <typename S>
void Graph<S>::watch(const Parameter<S>& p) {
  if (record_) watched_.emplace_back(&p, p.version);
}

template <typename S>
NodeId Graph<S>::input(SparseTensor<S> value, bool requires_grad) {
  return push(std::move(value), requires_grad);
}

template <typename S>
NodeId Graph<S>::conv(NodeId x, ConvLayer<S>& layer, const RulebookPtr& rb, const CoordSetPtr& out_coords) {
  const auto& in = value(x);
  if (in.channels() != layer.in_channels) throw Error(ErrorCode::ShapeMismatch, layer.weight.name + ": channel mismatch");
  if (rb->num_inputs != in.size() || rb->num_outputs != out_coords->size() || rb->kernel != layer.kernel) {
    throw Error(ErrorCode::ShapeMismatch, layer.weight.name + ": rulebook does not match tensors");
  }
  auto feats = conv_forward<S>(in.feats(), layer.in_channels, *rb, layer.weight.value, layer.bias.value,
                               layer.out_channels);
  const NodeId out = push(SparseTensor<S>(out_coords, layer.out_channels, std::move(feats)), true);
  if (!record_) return out;
  watch(layer.weight);
  if (!layer.bias.value.empty()) watch(layer.bias);
  const bool input_grad = nodes_[static_cast<std::size_t>(x.index)].requires_grad;
  nodes_[static_cast<std::size_t>(out.index)].backward = [this, x, out, &layer, rb, input_grad] {
    const auto& g = nodes_[static_cast<std::size_t>(out.index)].grad;
    std::span<S> gx;
    if (input_grad) gx = grad_buffer(x);
    conv_backward<S>(value(x).feats(), layer.in_channels, *rb, layer.weight.value, layer.out_channels, g, gx,
                     layer.weight.grad, layer.bias.grad);
  };
  return out;
}

template <typename S>
NodeId Graph<S>::batchnorm(NodeId x, BatchNormLayer<S>& layer, bool training) {
  const auto& in = value(x);
  const auto C = static_cast<std::size_t>(layer.channels);
  if (static_cast<std::size_t>(in.channels()) != C) throw Error(ErrorCode::ShapeMismatch, layer.gamma.name + ": channel mismatch");
  const std::size_t N = in.size();
  const auto xs = in.feats();
  std::vector<S> out(xs.size());
  if (N == 0) {
    const NodeId id = push(SparseTensor<S>(in.coord_ptr(), in.channels(), std::move(out)), true);
    if (record_) {
      nodes_[static_cast<std::size_t>(id.index)].backward = [] {};
    }
    return id;
  }

  std::vector<S> mean(C, S(0)), inv_std(C, S(0));
  if (training) {
    std::vector<double> m(C, 0.0), v(C, 0.0);
    for (std::size_t i = 0; i < N; ++i) {
      for (std::size_t c = 0; c < C; ++c) m[c] += xs[i * C + c];
    }
    for (std::size_t c = 0; c < C; ++c) m[c] /= static_cast<double>(N);
    for (std::size_t i = 0; i < N; ++i) {
      for (std::size_t c = 0; c < C; ++c) {
        const double d = xs[i * C + c] - m[c];
        v[c] += d * d;
      }
    }
    for (std::size_t c = 0; c < C; ++c) {
      v[c] /= static_cast<double>(N);
      mean[c] = static_cast<S>(m[c]);
      inv_std[c] = static_cast<S>(1.0 / std::sqrt(v[c] + layer.eps));
      const double unbiased = N > 1 ? v[c] * static_cast<double>(N) / static_cast<double>(N - 1) : v[c];
      layer.running_mean[c] = static_cast<S>((1.0 - layer.momentum) * layer.running_mean[c] + layer.momentum * m[c]);
      layer.running_var[c] = static_cast<S>((1.0 - layer.momentum) * layer.running_var[c] + layer.momentum * unbiased);
    }
  } else {
    for (std::size_t c = 0; c < C; ++c) {
      mean[c] = layer.running_mean[c];
      inv_std[c] = static_cast<S>(1.0 / std::sqrt(static_cast<double>(layer.running_var[c]) + layer.eps));
    }
  }
  std::vector<S> xhat(xs.size());
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t c = 0; c < C; ++c) {
      const S h = (xs[i * C + c] - mean[c]) * inv_std[c];
      xhat[i * C + c] = h;
      out[i * C + c] = layer.gamma.value[c] * h + layer.beta.value[c];
    }
  }
  const NodeId id = push(SparseTensor<S>(in.coord_ptr(), in.channels(), std::move(out)), true);
  if (!record_) return id;
  watch(layer.gamma);
  watch(layer.beta);
  const bool input_grad = nodes_[static_cast<std::size_t>(x.index)].requires_grad;
  nodes_[static_cast<std::size_t>(id.index)].backward = [this, x, id, &layer, training, input_grad, C, N,
                                                          xhat = std::move(xhat), inv_std = std::move(inv_std)] {
    const auto& g = nodes_[static_cast<std::size_t>(id.index)].grad;
    std::vector<S> sum_g(C, S(0)), sum_gh(C, S(0));
    for (std::size_t i = 0; i < N; ++i) {
      for (std::size_t c = 0; c < C; ++c) {
        sum_g[c] += g[i * C + c];
        sum_gh[c] += g[i * C + c] * xhat[i * C + c];
      }
    }
    for (std::size_t c = 0; c < C; ++c) {
      layer.gamma.grad[c] += sum_gh[c];
      layer.beta.grad[c] += sum_g[c];
    }
    if (!input_grad) return;
    auto& gx = grad_buffer(x);
    const S n = static_cast<S>(N);
    for (std::size_t i = 0; i < N; ++i) {
      for (std::size_t c = 0; c < C; ++c) {
        const S scale = layer.gamma.value[c] * inv_std[c];
        if (training) {
          gx[i * C + c] += scale * (g[i * C + c] - sum_g[c] / n - xhat[i * C + c] * sum_gh[c] / n);
        } else {
          gx[i * C + c] += scale * g[i * C + c];
        }
      }
    }
  };
  return id;
}

template <typename S>
NodeId Graph<S>::relu(NodeId x) {
  const auto& in = value(x);
  std::vector<S> out(in.feats().begin(), in.feats().end());
  for (auto& v : out) v = v > S(0) ? v : S(0);
  const bool input_grad = nodes_[static_cast<std::size_t>(x.index)].requires_grad;
  const NodeId id = push(SparseTensor<S>(in.coord_ptr(), in.channels(), std::move(out)), input_grad);
  if (record_ && input_grad) {
    nodes_[static_cast<std::size_t>(id.index)].backward = [this, x, id] {
      const auto& g = nodes_[static_cast<std::size_t>(id.index)].grad;
      const auto xs = value(x).feats();
      auto& gx = grad_buffer(x);
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (xs[i] > S(0)) gx[i] += g[i];
      }
    };
  }
  return id;
}

template <typename S>
NodeId Graph<S>::sigmoid(NodeId x) {
  const auto& in = value(x);
  std::vector<S> out(in.feats().size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = S(1) / (S(1) + std::exp(-in.feats()[i]));
  const bool input_grad = nodes_[static_cast<std::size_t>(x.index)].requires_grad;
  const NodeId id = push(SparseTensor<S>(in.coord_ptr(), in.channels(), std::move(out)), input_grad);
  if (record_ && input_grad) {
    nodes_[static_cast<std::size_t>(id.index)].backward = [this, x, id] {
      const auto& g = nodes_[static_cast<std::size_t>(id.index)].grad;
      const auto ys = value(id).feats();
      auto& gx = grad_buffer(x);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * ys[i] * (S(1) - ys[i]);
    };
  }
  return id;
}

template <typename S>
NodeId Graph<S>::concat(NodeId a, NodeId b) {
  const auto& ta = value(a);
  const auto& tb = value(b);
  if (!(ta.coords() == tb.coords())) throw Error(ErrorCode::ShapeMismatch, "concat needs identical coordinates");
  const auto Ca = static_cast<std::size_t>(ta.channels());
  const auto Cb = static_cast<std::size_t>(tb.channels());
  const std::size_t N = ta.size();
  std::vector<S> out(N * (Ca + Cb));
  for (std::size_t i = 0; i < N; ++i) {
    std::copy_n(ta.feats().begin() + static_cast<std::ptrdiff_t>(i * Ca), Ca, out.begin() + static_cast<std::ptrdiff_t>(i * (Ca + Cb)));
    std::copy_n(tb.feats().begin() + static_cast<std::ptrdiff_t>(i * Cb), Cb, out.begin() + static_cast<std::ptrdiff_t>(i * (Ca + Cb) + Ca));
  }
  const bool ga = nodes_[static_cast<std::size_t>(a.index)].requires_grad;
  const bool gb = nodes_[static_cast<std::size_t>(b.index)].requires_grad;
  const NodeId id = push(SparseTensor<S>(ta.coord_ptr(), static_cast<int>(Ca + Cb), std::move(out)), ga || gb);
  if (record_ && (ga || gb)) {
    nodes_[static_cast<std::size_t>(id.index)].backward = [this, a, b, id, ga, gb, Ca, Cb, N] {
      const auto& g = nodes_[static_cast<std::size_t>(id.index)].grad;
      if (ga) {
        auto& gxa = grad_buffer(a);
        for (std::size_t i = 0; i < N; ++i) {
          for (std::size_t c = 0; c < Ca; ++c) gxa[i * Ca + c] += g[i * (Ca + Cb) + c];
        }
      }
      if (gb) {
        auto& gxb = grad_buffer(b);
        for (std::size_t i = 0; i < N; ++i) {
          for (std::size_t c = 0; c < Cb; ++c) gxb[i * Cb + c] += g[i * (Ca + Cb) + Ca + c];
        }
      }
    };
  }
  return id;
}

template <typename S>
void Graph<S>::backward(std::span<const Seed> seeds) {
  if (!record_) throw Error(ErrorCode::InvalidArgument, "graph was built without recording");
  if (consumed_) throw Error(ErrorCode::GraphStale, "graph already replayed; run a new forward pass");
  for (const auto& [param, version] : watched_) {
    if (param->version != version) {
      throw Error(ErrorCode::GraphStale, "parameter " + param->name + " changed after the forward pass was recorded");
    }
  }
  for (const auto& seed : seeds) {
    auto& g = grad_buffer(seed.node);
    if (seed.grad.size() != g.size()) throw Error(ErrorCode::ShapeMismatch, "seed gradient does not match node");
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += seed.grad[i];
  }
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    if (it->backward && !it->grad.empty()) it->backward();
  }
  consumed_ = true;
}

template struct Parameter<float>;
template struct Parameter<double>;
template struct ConvLayer<float>;
template struct ConvLayer<double>;
template struct BatchNormLayer<float>;
template struct BatchNormLayer<double>;
template class Graph<float>;
template class Graph<double>;

}  // namespace hieum::sparse
