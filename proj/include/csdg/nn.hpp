#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "csdg/autodiff.hpp"
#include "csdg/random.hpp"
#include "csdg/tensor.hpp"

namespace csdg {

// Fully-connected layer computing x * weight + bias for row-major batches.
struct Dense {
  Tensor2 weight;  // in x out
  Tensor2 bias;    // 1 x out

  std::size_t in() const { return weight.rows(); }
  std::size_t out() const { return weight.cols(); }
};

// Glorot-uniform weights in +/- sqrt(6 / (fan_in + fan_out)), zero bias.
Dense glorot_dense(std::size_t in, std::size_t out, Rng& rng);

// Stack of dense layers with tanh between them. The output layer is linear
// unless activate_output is set.
struct Mlp {
  std::vector<Dense> layers;
  bool activate_output = false;

  std::size_t in() const { return layers.front().in(); }
  std::size_t out() const { return layers.back().out(); }

  Tensor2 forward(const Tensor2& x) const;

  std::vector<Tensor2*> parameters();
  std::vector<const Tensor2*> parameters() const;
};

// widths = {in, hidden..., out}.
Mlp make_mlp(const std::vector<std::size_t>& widths, bool activate_output, Rng& rng);

// Parameter nodes of an Mlp registered on one graph.
struct BoundMlp {
  std::vector<NodeId> weights;
  std::vector<NodeId> biases;
  bool activate_output = false;

  NodeId forward(Graph& graph, NodeId x) const;
};

BoundMlp bind(Graph& graph, const Mlp& mlp);

}  // namespace csdg
