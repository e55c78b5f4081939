#pragma once

#include "hieum/sparse/coords.hpp"

#include <cstdint>
#include <memory>
#include <vector>

namespace hieum::sparse {

enum class ConvMode { Submanifold, Strided, Transposed };

// Gather/scatter plan of one convolution: for each kernel offset, the
// (input row, output row) pairs it connects. Offsets are indexed
// (dt * ky + dy) * kx + dx and map output o to input o * stride + offset - pad.
struct Rulebook {
  ConvMode mode = ConvMode::Submanifold;
  Dims3 kernel;
  Dims3 stride;
  std::size_t num_inputs = 0;
  std::size_t num_outputs = 0;
  std::vector<std::vector<std::int32_t>> in_rows;   // [offset][pair]
  std::vector<std::vector<std::int32_t>> out_rows;  // [offset][pair], sorted per offset

  std::size_t offsets() const { return in_rows.size(); }
  std::size_t pair_count() const;
};

using RulebookPtr = std::shared_ptr<const Rulebook>;

struct RulebookResult {
  RulebookPtr rulebook;
  CoordSetPtr output;
};

// Submanifold: output coordinates equal the input's; kernel must be odd, stride 1.
// Strided: output coordinates are the unique floor-divisions of the inputs by the
//   stride; requires kernel >= stride with (kernel - stride) even per dimension.
// Transposed: maps `input` (a coarse set) back onto `target`, the fine set a
//   strided layer with the same kernel and stride was built from.
RulebookResult build_rulebook(const CoordSetPtr& input, Dims3 kernel, Dims3 stride, ConvMode mode,
                              const CoordSetPtr& target = nullptr);

inline Dims3 padding(Dims3 kernel, Dims3 stride) {
  return {(kernel.t - stride.t) / 2, (kernel.y - stride.y) / 2, (kernel.x - stride.x) / 2};
}

}  // namespace hieum::sparse
