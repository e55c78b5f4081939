#pragma once

#include "hieum/sparse/coords.hpp"
#include "hieum/sparse/rulebook.hpp"

#include <span>
#include <vector>

namespace hieum::sparse {

// Active coordinates plus an N x C feature matrix. Immutable once built.
template <typename S>
class SparseTensor {
 public:
  SparseTensor() = default;
  SparseTensor(CoordSetPtr coords, int channels, std::vector<S> feats);

  // Sorts arbitrary-order points into canonical coordinate order.
  static SparseTensor from_points(std::vector<Coord> coords, Dims3 shape, int channels, std::vector<S> feats);

  const CoordSet& coords() const { return *coords_; }
  const CoordSetPtr& coord_ptr() const { return coords_; }
  Dims3 shape() const { return coords_->shape(); }
  int channels() const { return channels_; }
  std::size_t size() const { return coords_ ? coords_->size() : 0; }
  std::span<const S> feats() const { return feats_; }
  std::span<const S> row(std::size_t i) const {
    return std::span<const S>(feats_).subspan(i * static_cast<std::size_t>(channels_), static_cast<std::size_t>(channels_));
  }

 private:
  CoordSetPtr coords_;
  int channels_ = 0;
  std::vector<S> feats_;
};

// out[j] = bias + sum over pairs (i, j) of offset d: W[d]^T in[i].
// weights are laid out [offset][c_in][c_out]; bias may be empty.
template <typename S>
std::vector<S> conv_forward(std::span<const S> input, int in_channels, const Rulebook& rulebook,
                            std::span<const S> weights, std::span<const S> bias, int out_channels);

// Accumulates (+=) into grad_input, grad_weights and grad_bias; any may be empty to skip.
template <typename S>
void conv_backward(std::span<const S> input, int in_channels, const Rulebook& rulebook, std::span<const S> weights,
                   int out_channels, std::span<const S> grad_output, std::span<S> grad_input,
                   std::span<S> grad_weights, std::span<S> grad_bias);

}  // namespace hieum::sparse
