#include "hieum/sparse/tensor.hpp"

#include "hieum/error.hpp"
#include "hieum/parallel.hpp"
#include "hieum/sparse/flops.hpp"

#include <algorithm>
#include <atomic>
#include <numeric>

namespace hieum::sparse {

namespace {
std::atomic<std::uint64_t> g_macs{0};
}

void add_macs(std::uint64_t macs) { g_macs.fetch_add(macs, std::memory_order_relaxed); }
std::uint64_t mac_count() { return g_macs.load(std::memory_order_relaxed); }
void reset_macs() { g_macs.store(0); }

template <typename S>
SparseTensor<S>::SparseTensor(CoordSetPtr coords, int channels, std::vector<S> feats)
    : coords_(std::move(coords)), channels_(channels), feats_(std::move(feats)) {
  if (!coords_) throw Error(ErrorCode::InvalidArgument, "tensor needs a coordinate set");
  if (channels_ < 1) throw Error(ErrorCode::InvalidArgument, "tensor needs at least one channel");
  if (feats_.size() != coords_->size() * static_cast<std::size_t>(channels_)) {
    throw Error(ErrorCode::ShapeMismatch, "feature matrix does not match N x C");
  }
}

template <typename S>
SparseTensor<S> SparseTensor<S>::from_points(std::vector<Coord> coords, Dims3 shape, int channels,
                                             std::vector<S> feats) {
  if (channels < 1 || feats.size() != coords.size() * static_cast<std::size_t>(channels)) {
    throw Error(ErrorCode::ShapeMismatch, "feature matrix does not match N x C");
  }
  std::vector<std::size_t> order(coords.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return coords[a] < coords[b]; });
  std::vector<Coord> sorted(coords.size());
  std::vector<S> sorted_feats(feats.size());
  const auto C = static_cast<std::size_t>(channels);
  for (std::size_t r = 0; r < order.size(); ++r) {
    sorted[r] = coords[order[r]];
    std::copy_n(feats.begin() + static_cast<std::ptrdiff_t>(order[r] * C), C,
                sorted_feats.begin() + static_cast<std::ptrdiff_t>(r * C));
  }
  return SparseTensor(std::make_shared<CoordSet>(std::move(sorted), shape), channels, std::move(sorted_feats));
}

template <typename S>
std::vector<S> conv_forward(std::span<const S> input, int in_channels, const Rulebook& rb,
                            std::span<const S> weights, std::span<const S> bias, int out_channels) {
  const auto Ci = static_cast<std::size_t>(in_channels);
  const auto Co = static_cast<std::size_t>(out_channels);
  if (input.size() != rb.num_inputs * Ci) throw Error(ErrorCode::ShapeMismatch, "conv input does not match rulebook");
  if (weights.size() != rb.offsets() * Ci * Co) throw Error(ErrorCode::ShapeMismatch, "conv weights do not match layer");
  if (!bias.empty() && bias.size() != Co) throw Error(ErrorCode::ShapeMismatch, "conv bias does not match layer");

  std::vector<S> out(rb.num_outputs * Co, S(0));
  if (!bias.empty()) {
    for (std::size_t j = 0; j < rb.num_outputs; ++j) std::copy(bias.begin(), bias.end(), out.begin() + static_cast<std::ptrdiff_t>(j * Co));
  }
  add_macs(static_cast<std::uint64_t>(rb.pair_count()) * Ci * Co);

  // Each worker owns a contiguous range of output rows; pairs per offset are
  // sorted by output row so the range maps to a contiguous pair slice.
  parallel_for(rb.num_outputs, 2048, [&](std::size_t row_begin, std::size_t row_end) {
    for (std::size_t d = 0; d < rb.offsets(); ++d) {
      const auto& outs = rb.out_rows[d];
      const auto& ins = rb.in_rows[d];
      const auto lo = std::lower_bound(outs.begin(), outs.end(), static_cast<std::int32_t>(row_begin)) - outs.begin();
      const auto hi = std::lower_bound(outs.begin(), outs.end(), static_cast<std::int32_t>(row_end)) - outs.begin();
      const S* w = weights.data() + d * Ci * Co;
      for (auto p = lo; p < hi; ++p) {
        const S* x = input.data() + static_cast<std::size_t>(ins[p]) * Ci;
        S* y = out.data() + static_cast<std::size_t>(outs[p]) * Co;
        for (std::size_t ci = 0; ci < Ci; ++ci) {
          const S xv = x[ci];
          const S* wr = w + ci * Co;
          for (std::size_t co = 0; co < Co; ++co) y[co] += xv * wr[co];
        }
      }
    }
  });
  return out;
}

template <typename S>
void conv_backward(std::span<const S> input, int in_channels, const Rulebook& rb, std::span<const S> weights,
                   int out_channels, std::span<const S> grad_output, std::span<S> grad_input,
                   std::span<S> grad_weights, std::span<S> grad_bias) {
  const auto Ci = static_cast<std::size_t>(in_channels);
  const auto Co = static_cast<std::size_t>(out_channels);
  if (grad_output.size() != rb.num_outputs * Co) throw Error(ErrorCode::ShapeMismatch, "conv grad does not match output");

  if (!grad_bias.empty()) {
    for (std::size_t j = 0; j < rb.num_outputs; ++j) {
      for (std::size_t co = 0; co < Co; ++co) grad_bias[co] += grad_output[j * Co + co];
    }
  }
  if (!grad_weights.empty()) {
    // Offsets own disjoint weight slices.
    parallel_for(rb.offsets(), 1, [&](std::size_t d_begin, std::size_t d_end) {
      for (std::size_t d = d_begin; d < d_end; ++d) {
        S* gw = grad_weights.data() + d * Ci * Co;
        const auto& ins = rb.in_rows[d];
        const auto& outs = rb.out_rows[d];
        for (std::size_t p = 0; p < ins.size(); ++p) {
          const S* x = input.data() + static_cast<std::size_t>(ins[p]) * Ci;
          const S* g = grad_output.data() + static_cast<std::size_t>(outs[p]) * Co;
          for (std::size_t ci = 0; ci < Ci; ++ci) {
            const S xv = x[ci];
            S* gr = gw + ci * Co;
            for (std::size_t co = 0; co < Co; ++co) gr[co] += xv * g[co];
          }
        }
      }
    });
  }
  if (!grad_input.empty()) {
    for (std::size_t d = 0; d < rb.offsets(); ++d) {
      const S* w = weights.data() + d * Ci * Co;
      const auto& ins = rb.in_rows[d];
      const auto& outs = rb.out_rows[d];
      for (std::size_t p = 0; p < ins.size(); ++p) {
        S* gx = grad_input.data() + static_cast<std::size_t>(ins[p]) * Ci;
        const S* g = grad_output.data() + static_cast<std::size_t>(outs[p]) * Co;
        for (std::size_t ci = 0; ci < Ci; ++ci) {
          const S* wr = w + ci * Co;
          S acc = 0;
          for (std::size_t co = 0; co < Co; ++co) acc += wr[co] * g[co];
          gx[ci] += acc;
        }
      }
    }
  }
}

template class SparseTensor<float>;
template class SparseTensor<double>;
template std::vector<float> conv_forward<float>(std::span<const float>, int, const Rulebook&, std::span<const float>,
                                                std::span<const float>, int);
template std::vector<double> conv_forward<double>(std::span<const double>, int, const Rulebook&,
                                                  std::span<const double>, std::span<const double>, int);
template void conv_backward<float>(std::span<const float>, int, const Rulebook&, std::span<const float>, int,
                                   std::span<const float>, std::span<float>, std::span<float>, std::span<float>);
template void conv_backward<double>(std::span<const double>, int, const Rulebook&, std::span<const double>, int,
                                    std::span<const double>, std::span<double>, std::span<double>, std::span<double>);

}  // namespace hieum::sparse
