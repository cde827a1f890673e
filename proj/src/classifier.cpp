#include "csdg/classifier.hpp"

#include <cmath>
#include <numeric>

#include "csdg/autodiff.hpp"
#include "csdg/error.hpp"

namespace csdg {

namespace {

void require_input_width(const ClassifierModel& model, const Tensor2& x, const char* op) {
  if (x.cols() != model.input_dim()) {
    throw ShapeError(std::string(op) + ": classifier expects " +
                     std::to_string(model.input_dim()) + " columns, got " + x.shape_string());
  }
}

}  // namespace

std::vector<Tensor2*> ClassifierModel::parameters() {
  auto out = extractor.parameters();
  out.push_back(&head.weight);
  out.push_back(&head.bias);
  return out;
}

std::vector<const Tensor2*> ClassifierModel::parameters() const {
  auto out = extractor.parameters();
  out.push_back(&head.weight);
  out.push_back(&head.bias);
  return out;
}

ClassifierModel init_classifier(std::size_t d_in, std::size_t dim_z, std::size_t k,
                                const std::vector<std::size_t>& hidden, std::uint64_t seed) {
  if (dim_z == 0 || dim_z >= d_in) {
    throw ContractError("init_classifier: feature dimension " + std::to_string(dim_z) +
                        " must be positive and smaller than input dimension " +
                        std::to_string(d_in));
  }
  if (k < 2) throw ContractError("init_classifier: need at least 2 classes");
  Rng rng(seed);
  std::vector<std::size_t> widths{d_in};
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(dim_z);
  ClassifierModel model;
  model.extractor = make_mlp(widths, /*activate_output=*/true, rng);
  model.head = glorot_dense(dim_z, k, rng);
  return model;
}

double cross_entropy(const Tensor2& probs, std::span<const int> labels, std::size_t* clamped) {
  Graph g;
  const NodeId loss = g.cross_entropy(g.input(probs), labels);
  if (clamped != nullptr) *clamped += g.clamped_log_count();
  return g.value(loss)(0, 0);
}

Tensor2 extract_features(const ClassifierModel& model, const Tensor2& x) {
  require_input_width(model, x, "extract_features");
  if (x.rows() == 0) return Tensor2(0, model.feature_dim());
  return model.extractor.forward(x);
}

Tensor2 logits(const ClassifierModel& model, const Tensor2& x) {
  const Tensor2 z = extract_features(model, x);
  if (z.rows() == 0) return Tensor2(0, model.num_classes());
  return add_row(matmul(z, model.head.weight), model.head.bias);
}

std::vector<int> argmax_rows(const Tensor2& scores) {
  std::vector<int> labels(scores.rows(), 0);
  for (std::size_t i = 0; i < scores.rows(); ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < scores.cols(); ++j)
      if (scores(i, j) > scores(i, best)) best = j;
    labels[i] = static_cast<int>(best);
  }
  return labels;
}

Prediction predict(const ClassifierModel& model, const Tensor2& x) {
  Prediction p;
  p.probs = softmax_rows(logits(model, x));
  p.labels = argmax_rows(p.probs);
  return p;
}

void freeze(ClassifierModel& model) { model.frozen = true; }

TrainHistory train_classifier(ClassifierModel& model, const Dataset& train, const Dataset& valid,
                              const ClassifierHyper& hyper, std::uint64_t seed) {
  if (model.frozen) throw ContractError("train_classifier: model is frozen");
  if (!(train.schema == valid.schema)) {
    throw ContractError("train_classifier: training and validation schemas differ");
  }
  TrainHistory history;
  if (hyper.epochs == 0) return history;
  if (train.size() == 0) throw ContractError("train_classifier: empty training set");
  if (valid.size() == 0) throw ContractError("train_classifier: empty validation set");
  if (hyper.batch == 0) throw ContractError("train_classifier: batch size must be positive");
  require_input_width(model, train.x, "train_classifier");
  require_input_width(model, valid.x, "train_classifier");

  Rng rng(seed);
  auto params = model.parameters();
  AdamState state(params);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
    rng.shuffle(order.begin(), order.end());
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += hyper.batch) {
      const std::size_t stop = std::min(order.size(), start + hyper.batch);
      const std::vector<std::size_t> rows(order.begin() + static_cast<long>(start),
                                          order.begin() + static_cast<long>(stop));
      std::vector<int> labels;
      labels.reserve(rows.size());
      for (std::size_t r : rows) labels.push_back(train.y[r]);

      Graph g;
      const BoundMlp extractor = bind(g, model.extractor);
      const NodeId head_w = g.parameter(model.head.weight);
      const NodeId head_b = g.parameter(model.head.bias);
      const NodeId z = extractor.forward(g, g.input(select_rows(train.x, rows)));
      const NodeId probs = g.softmax_rows(g.add_row(g.matmul(z, head_w), head_b));
      const NodeId loss = g.cross_entropy(probs, labels);
      const auto grads = g.backward(loss);
      adam_step(params, grads, state, hyper.adam);
      history.clamped_logs += g.clamped_log_count();
      loss_sum += g.value(loss)(0, 0) * static_cast<double>(rows.size());
    }
    history.train_loss.push_back(loss_sum / static_cast<double>(train.size()));

    const Prediction p = predict(model, valid.x);
    history.valid_loss.push_back(cross_entropy(p.probs, valid.y, &history.clamped_logs));
    std::size_t correct = 0;
    for (std::size_t i = 0; i < valid.size(); ++i) correct += p.labels[i] == valid.y[i];
    history.valid_accuracy.push_back(static_cast<double>(correct) /
                                     static_cast<double>(valid.size()));
  }
  return history;
}

}  // namespace csdg
