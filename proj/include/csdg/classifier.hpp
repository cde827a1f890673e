#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "csdg/data.hpp"
#include "csdg/nn.hpp"
#include "csdg/optim.hpp"

namespace csdg {

// C(x) = h(g(x)). The extractor g is a tanh MLP whose last layer is also
// tanh-activated and produces the conditioning vector z; the head h is a
// single dense layer followed by softmax.
struct ClassifierModel {
  Mlp extractor;
  Dense head;
  bool frozen = false;

  std::size_t input_dim() const { return extractor.in(); }
  std::size_t feature_dim() const { return extractor.out(); }
  std::size_t num_classes() const { return head.out(); }

  std::vector<Tensor2*> parameters();
  std::vector<const Tensor2*> parameters() const;
};

struct ClassifierHyper {
  std::vector<std::size_t> hidden{64, 32};
  std::size_t dim_z = 8;
  std::size_t epochs = 30;
  std::size_t batch = 64;
  AdamConfig adam;
};

struct TrainHistory {
  std::vector<double> train_loss;
  std::vector<double> valid_loss;
  std::vector<double> valid_accuracy;
  std::size_t clamped_logs = 0;
};

struct Prediction {
  Tensor2 probs;
  std::vector<int> labels;
};

// Requires dim_z < d_in and k >= 2.
ClassifierModel init_classifier(std::size_t d_in, std::size_t dim_z, std::size_t k,
                                const std::vector<std::size_t>& hidden, std::uint64_t seed);

// Mean negative log-probability of the true labels, log clamped at 1e-12.
// The number of clamped rows is added to *clamped when given.
double cross_entropy(const Tensor2& probs, std::span<const int> labels,
                     std::size_t* clamped = nullptr);

// Minibatch Adam on cross-entropy. The model is left unfrozen. valid is
// only used for reporting per-epoch loss and accuracy.
TrainHistory train_classifier(ClassifierModel& model, const Dataset& train, const Dataset& valid,
                              const ClassifierHyper& hyper, std::uint64_t seed);

void freeze(ClassifierModel& model);

Tensor2 extract_features(const ClassifierModel& model, const Tensor2& x);
Tensor2 logits(const ClassifierModel& model, const Tensor2& x);
// Ties resolve to the lowest class index.
Prediction predict(const ClassifierModel& model, const Tensor2& x);
std::vector<int> argmax_rows(const Tensor2& scores);

}  // namespace csdg
