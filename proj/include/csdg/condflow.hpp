#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "csdg/autodiff.hpp"
#include "csdg/classifier.hpp"
#include "csdg/data.hpp"
#include "csdg/nn.hpp"
#include "csdg/optim.hpp"

namespace csdg {

// Conditional affine coupling layer on D features with split d = floor(D/2):
//
//   y[:d]  = x[:d]
//   y[d:]  = s(x[:d], z) * x[d:] + b(x[:d], z)
//   s      = exp(alpha * tanh(scale_net([x[:d], z])))
//   b      = shift_net([x[:d], z])
//
// so log|det J| = sum(alpha * tanh(scale_net(...))) and s > 0 always.
struct CouplingLayer {
  std::size_t dim = 0;
  std::size_t split = 0;
  std::size_t cond_dim = 0;
  double alpha = 2.0;
  Mlp scale_net;
  Mlp shift_net;
};

struct FlowArch {
  std::size_t layers = 8;
  std::size_t hidden = 64;
  std::size_t hidden_layers = 2;
  double alpha = 2.0;
};

// Coupling layers interleaved with fixed column permutations:
// x -> coupling[0] -> permutation[0] -> coupling[1] -> ... -> latent.
struct CondFlowModel {
  std::size_t dim = 0;
  std::size_t cond_dim = 0;
  std::vector<CouplingLayer> layers;
  std::vector<std::vector<std::size_t>> permutations;

  std::vector<Tensor2*> parameters();
  std::vector<const Tensor2*> parameters() const;
  void validate() const;
};

struct FlowHyper {
  FlowArch arch;
  std::size_t epochs = 40;
  std::size_t batch = 128;
  AdamConfig adam;
  // Width of the uniform noise added to one-hot columns during training.
  double dequantization = 0.05;
};

// Result of pushing a batch through a coupling layer or the whole flow.
// logdet holds one entry per row.
struct FlowOutput {
  Tensor2 y;
  std::vector<double> logdet;
};

// Every s/b network has its final layer zeroed, so the initial flow is the
// composition of the permutations alone. Permutations reverse the feature
// order.
CondFlowModel init_flow(std::size_t dim, std::size_t cond_dim, const FlowArch& arch,
                        std::uint64_t seed);

FlowOutput coupling_forward(const CouplingLayer& layer, const Tensor2& x, const Tensor2& z);
Tensor2 coupling_inverse(const CouplingLayer& layer, const Tensor2& y, const Tensor2& z);

FlowOutput flow_forward(const CondFlowModel& model, const Tensor2& x, const Tensor2& z);
Tensor2 flow_inverse(const CondFlowModel& model, const Tensor2& latent, const Tensor2& z);

// Mean over rows of -(log N(v; 0, I) + logdet).
double nll(const CondFlowModel& model, const Tensor2& x, const Tensor2& z);

// Differentiable NLL on a graph; the flow parameters are registered on the
// graph in CondFlowModel::parameters() order.
NodeId nll_node(Graph& graph, const CondFlowModel& model, const Tensor2& x, const Tensor2& z);

struct FlowHistory {
  std::vector<double> epoch_nll;
};

// Maximum likelihood on (x, g(x)) pairs from a frozen classifier.
FlowHistory train_flow(CondFlowModel& model, const Dataset& train,
                       const ClassifierModel& classifier, const FlowHyper& hyper,
                       std::uint64_t seed);

// Maps latent rows back to data space conditioned on g(source_x).
Tensor2 conditional_sample(const CondFlowModel& model, const ClassifierModel& classifier,
                           const Tensor2& source_x, const Tensor2& latent);

// For every class c, per_class_counts[c] samples are conditioned on the
// class's source rows in round-robin order, each with a fresh N(0, I)
// latent. One-hot blocks of the output are re-discretized.
Dataset generate(const CondFlowModel& model, const ClassifierModel& classifier,
                 const Dataset& source, std::span<const std::size_t> per_class_counts,
                 std::uint64_t seed);

// max(histogram) - histogram[c] for every class.
std::vector<std::size_t> rebalance_counts(std::span<const std::size_t> histogram);

}  // namespace csdg
