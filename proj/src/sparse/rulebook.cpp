#include "hieum/sparse/rulebook.hpp"

#include "hieum/error.hpp"

#include <algorithm>
#include <numeric>

namespace hieum::sparse {

std::size_t Rulebook::pair_count() const {
  std::size_t n = 0;
  for (const auto& rows : in_rows) n += rows.size();
  return n;
}

namespace {

void check_kernel(Dims3 kernel, Dims3 stride, ConvMode mode) {
  if (kernel.t < 1 || kernel.y < 1 || kernel.x < 1) throw Error(ErrorCode::InvalidKernel, "kernel dims must be >= 1");
  if (stride.t < 1 || stride.y < 1 || stride.x < 1) throw Error(ErrorCode::InvalidKernel, "strides must be >= 1");
  if (mode == ConvMode::Submanifold) {
    if (kernel.t % 2 == 0 || kernel.y % 2 == 0 || kernel.x % 2 == 0) {
      throw Error(ErrorCode::InvalidKernel, "submanifold kernels must be odd");
    }
    if (stride != Dims3{1, 1, 1}) throw Error(ErrorCode::InvalidKernel, "submanifold convolution has stride 1");
    return;
  }
  const int kd[3] = {kernel.t, kernel.y, kernel.x};
  const int sd[3] = {stride.t, stride.y, stride.x};
  for (int d = 0; d < 3; ++d) {
    if (kd[d] < sd[d] || (kd[d] - sd[d]) % 2 != 0) {
      throw Error(ErrorCode::InvalidKernel, "strided kernel must cover the stride with even overhang");
    }
  }
}

int floor_div(int a, int b) { return a >= 0 ? a / b : -((-a + b - 1) / b); }

// Pairs for every (output o, offset d) whose input o * stride + d - pad is active.
void gather_pairs(const CoordSet& outputs, const CoordSet& inputs, Dims3 kernel, Dims3 stride, Rulebook& rb) {
  const Dims3 pad = padding(kernel, stride);
  const auto K = static_cast<std::size_t>(kernel.volume());
  rb.in_rows.assign(K, {});
  rb.out_rows.assign(K, {});
  for (std::size_t j = 0; j < outputs.size(); ++j) {
    const Coord& o = outputs[j];
    std::size_t d = 0;
    for (int dt = 0; dt < kernel.t; ++dt) {
      for (int dy = 0; dy < kernel.y; ++dy) {
        for (int dx = 0; dx < kernel.x; ++dx, ++d) {
          const Coord c{o.t * stride.t + dt - pad.t, o.y * stride.y + dy - pad.y, o.x * stride.x + dx - pad.x};
          const auto i = inputs.find(c);
          if (i >= 0) {
            rb.in_rows[d].push_back(i);
            rb.out_rows[d].push_back(static_cast<std::int32_t>(j));
          }
        }
      }
    }
  }
}

}  // namespace

RulebookResult build_rulebook(const CoordSetPtr& input_ptr, Dims3 kernel, Dims3 stride, ConvMode mode,
                              const CoordSetPtr& target) {
  check_kernel(kernel, stride, mode);
  if (!input_ptr) throw Error(ErrorCode::InvalidArgument, "rulebook needs input coordinates");
  const CoordSet& input = *input_ptr;
  auto rb = std::make_shared<Rulebook>();
  rb->mode = mode;
  rb->kernel = kernel;
  rb->stride = stride;
  rb->num_inputs = input.size();

  if (mode == ConvMode::Submanifold) {
    gather_pairs(input, input, kernel, stride, *rb);
    rb->num_outputs = input.size();
    return {rb, input_ptr};
  }

  if (mode == ConvMode::Strided) {
    std::vector<Coord> down;
    down.reserve(input.size());
    for (const auto& c : input.coords()) {
      down.push_back({floor_div(c.t, stride.t), floor_div(c.y, stride.y), floor_div(c.x, stride.x)});
    }
    std::sort(down.begin(), down.end());
    down.erase(std::unique(down.begin(), down.end()), down.end());
    const Dims3 shape{(input.shape().t + stride.t - 1) / stride.t, (input.shape().y + stride.y - 1) / stride.y,
                      (input.shape().x + stride.x - 1) / stride.x};
    auto out = std::make_shared<CoordSet>(std::move(down), shape);
    gather_pairs(*out, input, kernel, stride, *rb);
    rb->num_outputs = out->size();
    return {rb, out};
  }

  // Transposed: pairs of the strided map target -> input, with roles swapped.
  if (!target) throw Error(ErrorCode::InvalidArgument, "transposed rulebook needs the recorded fine coordinates");
  Rulebook forward;
  gather_pairs(input, *target, kernel, stride, forward);
  rb->num_outputs = target->size();
  rb->in_rows.resize(forward.in_rows.size());
  rb->out_rows.resize(forward.in_rows.size());
  for (std::size_t d = 0; d < forward.in_rows.size(); ++d) {
    // Swap and re-sort by output row so forward passes can partition by output.
    std::vector<std::size_t> order(forward.in_rows[d].size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return forward.in_rows[d][a] < forward.in_rows[d][b];
    });
    for (auto p : order) {
      rb->in_rows[d].push_back(forward.out_rows[d][p]);
      rb->out_rows[d].push_back(forward.in_rows[d][p]);
    }
  }
  return {rb, target};
}

}  // namespace hieum::sparse
