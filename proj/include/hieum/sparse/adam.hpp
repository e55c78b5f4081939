#pragma once

#include "hieum/sparse/graph.hpp"

#include <cstdint>
#include <vector>

namespace hieum::sparse {

struct AdamConfig {
  double lr = 1.25e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam over a fixed list of parameters. Moment buffers are
// keyed by position in the list, so the list must not change between steps.
template <typename S>
class Adam {
 public:
  Adam(std::vector<Parameter<S>*> params, AdamConfig cfg);

  void step();
  void zero_grad();

  void set_lr(double lr) { cfg_.lr = lr; }
  double lr() const { return cfg_.lr; }
  std::int64_t steps() const { return step_; }

 private:
  std::vector<Parameter<S>*> params_;
  AdamConfig cfg_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  std::int64_t step_ = 0;
};

}  // namespace hieum::sparse
