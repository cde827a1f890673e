#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "csdg/classifier.hpp"
#include "csdg/data.hpp"

namespace csdg {

// counts(i, j) = samples of true class i predicted as class j.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t k) : k_(k), counts_(k * k, 0) {}

  std::size_t classes() const { return k_; }
  std::size_t operator()(std::size_t truth, std::size_t pred) const {
    return counts_[truth * k_ + pred];
  }
  std::size_t& operator()(std::size_t truth, std::size_t pred) {
    return counts_[truth * k_ + pred];
  }
  std::size_t total() const;
  std::size_t row_sum(std::size_t truth) const;
  std::size_t col_sum(std::size_t pred) const;

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  std::size_t k_;
  std::vector<std::size_t> counts_;
};

ConfusionMatrix confusion(std::span<const int> predicted, std::span<const int> truth,
                          std::size_t k);

double accuracy(const ConfusionMatrix& cm);
// Returns 0 when chance agreement is 1.
double cohens_kappa(const ConfusionMatrix& cm);

struct AucResult {
  double value = 0.0;
  // Classes absent from the truth labels, excluded from the macro average.
  std::vector<std::size_t> skipped;
};

// Binary Mann-Whitney AUC with midranks for ties.
double binary_auc(std::span<const double> scores, std::span<const bool> positive);
// Macro average of one-vs-rest binary AUCs over classes present in truth.
AucResult auc_macro_ovr(const Tensor2& probs, std::span<const int> truth);

struct MetricPair {
  double real = 0.0;
  double synthetic = 0.0;
};

struct EvalReport {
  MetricPair kappa;
  MetricPair accuracy;
  MetricPair auc;
  std::uint64_t seed = 0;
  std::vector<std::string> classes;
  std::vector<std::size_t> real_counts;
  std::vector<std::size_t> synthetic_counts;
  std::vector<std::size_t> holdout_counts;
  std::vector<std::size_t> auc_skipped_real;
  std::vector<std::size_t> auc_skipped_synthetic;
};

// Trains two classifiers with identical architecture, hyperparameters and
// seed, one on real_train and one on synth_train, and scores both on the
// hold-out set.
EvalReport run_tstr(const Dataset& real_train, const Dataset& synth_train,
                    const Dataset& holdout, const ClassifierHyper& hyper, std::uint64_t seed);

// Human-readable table: kappa and accuracy as percentages, AUC with two
// decimals.
std::string format_report(const EvalReport& report);
// Three lines "<metric> <real> <synthetic>" with full precision.
std::string format_metrics(const EvalReport& report);

}  // namespace csdg
