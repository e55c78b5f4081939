#include "hieum/sparse/adam.hpp"

#include <cmath>

namespace hieum::sparse {

template <typename S>
Adam<S>::Adam(std::vector<Parameter<S>*> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
  for (const auto* p : params_) {
    m_.emplace_back(p->size(), 0.0);
    v_.emplace_back(p->size(), 0.0);
  }
}

template <typename S>
void Adam<S>::step() {
  ++step_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    auto& p = *params_[k];
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double g = p.grad[i];
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      p.value[i] = static_cast<S>(p.value[i] - cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps));
    }
    p.touch();
  }
}

template <typename S>
void Adam<S>::zero_grad() {
  for (auto* p : params_) p->zero_grad();
}

template class Adam<float>;
template class Adam<double>;

}  // namespace hieum::sparse
