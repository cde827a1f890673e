#include "csdg/nn.hpp"

#include <cmath>

#include "csdg/error.hpp"

namespace csdg {

Dense glorot_dense(std::size_t in, std::size_t out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  Dense layer{Tensor2(in, out), Tensor2(1, out)};
  for (double& w : layer.weight.values()) w = rng.uniform(-limit, limit);
  return layer;
}

Mlp make_mlp(const std::vector<std::size_t>& widths, bool activate_output, Rng& rng) {
  if (widths.size() < 2) throw ContractError("make_mlp: need at least input and output widths");
  Mlp mlp;
  mlp.activate_output = activate_output;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    if (widths[i] == 0 || widths[i + 1] == 0) throw ContractError("make_mlp: zero-width layer");
    mlp.layers.push_back(glorot_dense(widths[i], widths[i + 1], rng));
  }
  return mlp;
}

Tensor2 Mlp::forward(const Tensor2& x) const {
  Tensor2 h = x;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    h = add_row(matmul(h, layers[i].weight), layers[i].bias);
    if (i + 1 < layers.size() || activate_output) h = apply_unary(h, Unary::tanh);
  }
  return h;
}

std::vector<Tensor2*> Mlp::parameters() {
  std::vector<Tensor2*> out;
  for (Dense& l : layers) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  return out;
}

std::vector<const Tensor2*> Mlp::parameters() const {
  std::vector<const Tensor2*> out;
  for (const Dense& l : layers) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  return out;
}

BoundMlp bind(Graph& graph, const Mlp& mlp) {
  BoundMlp bound;
  bound.activate_output = mlp.activate_output;
  for (const Dense& l : mlp.layers) {
    bound.weights.push_back(graph.parameter(l.weight));
    bound.biases.push_back(graph.parameter(l.bias));
  }
  return bound;
}

NodeId BoundMlp::forward(Graph& graph, NodeId x) const {
  NodeId h = x;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    h = graph.add_row(graph.matmul(h, weights[i]), biases[i]);
    if (i + 1 < weights.size() || activate_output) h = graph.unary(h, Unary::tanh);
  }
  return h;
}

}  // namespace csdg
