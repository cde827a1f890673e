#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "csdg/tensor.hpp"

namespace csdg {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// First/second moment accumulators, one pair per parameter tensor.
struct AdamState {
  AdamState() = default;
  explicit AdamState(std::span<Tensor2* const> params);

  std::vector<Tensor2> first;
  std::vector<Tensor2> second;
  std::uint64_t step = 0;
};

// One bias-corrected Adam update, in place.
void adam_step(std::span<Tensor2* const> params, std::span<const Tensor2> grads,
               AdamState& state, const AdamConfig& config);

}  // namespace csdg
