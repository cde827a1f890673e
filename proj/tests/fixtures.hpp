#pragma once

// Model builders shared by the unit and acceptance tests.

#include <cmath>
#include <cstdint>
#include <vector>

#include "csdg/autodiff.hpp"
#include "csdg/classifier.hpp"
#include "csdg/condflow.hpp"
#include "csdg/random.hpp"

namespace csdg::fixture {

// Overwrites every flow parameter with N(0, scale^2) draws, so the zeroed
// output layers of a fresh flow no longer hide the scale/shift paths.
inline void randomize(CondFlowModel& model, std::uint64_t seed, double scale) {
  Rng rng(seed);
  for (Tensor2* p : model.parameters())
    for (double& v : p->values()) v = scale * rng.normal();
}

// Default-initialized flow whose zeroed output layers are replaced by
// N(0, 1/fan_in) weights and N(0, 0.1^2) biases, so every coupling layer
// has input-dependent scales and shifts.
inline CondFlowModel random_flow(std::size_t dim, std::size_t cond_dim, const FlowArch& arch,
                                 std::uint64_t seed) {
  CondFlowModel model = init_flow(dim, cond_dim, arch, seed);
  Rng rng(seed ^ 0x5EEDULL);
  for (CouplingLayer& layer : model.layers)
    for (Mlp* net : {&layer.scale_net, &layer.shift_net}) {
      Dense& out = net->layers.back();
      const double sd = 1.0 / std::sqrt(static_cast<double>(out.in()));
      for (double& v : out.weight.values()) v = sd * rng.normal();
      for (double& v : out.bias.values()) v = 0.1 * rng.normal();
    }
  return model;
}

inline Tensor2 normal_tensor(std::size_t rows, std::size_t cols, Rng& rng) {
  Tensor2 t(rows, cols);
  for (double& v : t.values()) v = rng.normal();
  return t;
}

// D = 4, two coupling layers with one hidden layer of width 8.
inline CondFlowModel toy_flow(std::size_t cond_dim, std::uint64_t seed) {
  FlowArch arch;
  arch.layers = 2;
  arch.hidden = 8;
  arch.hidden_layers = 1;
  CondFlowModel model = init_flow(4, cond_dim, arch, seed);
  randomize(model, seed + 1, 0.5);
  return model;
}

// D = 4 input, one hidden layer of width 6, z of width 2, three classes.
inline ClassifierModel toy_classifier(std::uint64_t seed) {
  ClassifierModel model = init_classifier(4, 2, 3, {6}, seed);
  Rng rng(seed + 1);
  for (Tensor2* p : model.parameters())
    for (double& v : p->values()) v += 0.1 * rng.normal();
  return model;
}

// Cross-entropy of C(x) built on a graph, parameters registered in
// ClassifierModel::parameters() order. Returns the gradients.
inline std::vector<Tensor2> classifier_loss_gradients(const ClassifierModel& model, const Tensor2& x,
                                                      std::span<const int> labels) {
  Graph g;
  const BoundMlp ext = bind(g, model.extractor);
  const NodeId w = g.parameter(model.head.weight);
  const NodeId b = g.parameter(model.head.bias);
  const NodeId z = ext.forward(g, g.input(x));
  return g.backward(g.cross_entropy(g.softmax_rows(g.add_row(g.matmul(z, w), b)), labels));
}

}  // namespace csdg::fixture
