#include "csdg/optim.hpp"

#include <cmath>

#include "csdg/error.hpp"

namespace csdg {

AdamState::AdamState(std::span<Tensor2* const> params) {
  first.reserve(params.size());
  second.reserve(params.size());
  for (const Tensor2* p : params) {
    first.emplace_back(p->rows(), p->cols());
    second.emplace_back(p->rows(), p->cols());
  }
}

void adam_step(std::span<Tensor2* const> params, std::span<const Tensor2> grads,
               AdamState& state, const AdamConfig& config) {
  if (!(config.lr > 0.0) || config.beta1 < 0.0 || config.beta1 >= 1.0 || config.beta2 < 0.0 ||
      config.beta2 >= 1.0 || !(config.epsilon > 0.0)) {
    throw ContractError("adam_step: invalid hyperparameters");
  }
  if (params.size() != grads.size() || params.size() != state.first.size() ||
      params.size() != state.second.size()) {
    throw ShapeError("adam_step: " + std::to_string(params.size()) + " params, " +
                     std::to_string(grads.size()) + " grads, " +
                     std::to_string(state.first.size()) + " state slots");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i]->same_shape(grads[i]) || !params[i]->same_shape(state.first[i])) {
      throw ShapeError("adam_step: parameter " + std::to_string(i) + " is " +
                       params[i]->shape_string() + " but gradient is " +
                       grads[i].shape_string());
    }
  }

  ++state.step;
  const auto t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);

  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i]->values();
    auto g = grads[i].values();
    auto m = state.first[i].values();
    auto v = state.second[i].values();
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = config.beta1 * m[j] + (1.0 - config.beta1) * g[j];
      v[j] = config.beta2 * v[j] + (1.0 - config.beta2) * g[j] * g[j];
      const double m_hat = m[j] / c1;
      const double v_hat = v[j] / c2;
      p[j] -= config.lr * m_hat / (std::sqrt(v_hat) + config.epsilon);
    }
  }
}

}  // namespace csdg
