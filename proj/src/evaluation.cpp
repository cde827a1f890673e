#include "csdg/evaluation.hpp"

#include <algorithm>
#include <cstdio>
#include <memory>
#include <numeric>
#include <set>
#include <sstream>

#include "csdg/error.hpp"

namespace csdg {

namespace {

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

std::string full(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string join_counts(const std::vector<std::size_t>& counts) {
  std::string out;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    out += (i ? " " : "") + std::to_string(counts[i]);
  }
  return out;
}

void check_disjoint(const Dataset& real_train, const Dataset& holdout) {
  const auto& a = real_train.provenance;
  const auto& b = holdout.provenance;
  if (a.split_id.empty() || b.split_id.empty()) return;
  if (a.split_id != b.split_id) {
    throw ContractError("run_tstr: training split " + a.split_id + " and hold-out split " +
                        b.split_id + " come from different splits");
  }
  if (a.role != "train" || b.role != "test") {
    throw ContractError("run_tstr: expected train/test roles, got " + a.role + "/" + b.role);
  }
  const std::set<std::size_t> train_rows(a.source_rows.begin(), a.source_rows.end());
  for (std::size_t r : b.source_rows) {
    if (train_rows.contains(r)) {
      throw ContractError("run_tstr: source row " + std::to_string(r) +
                          " is in both the training and hold-out sets");
    }
  }
}

}  // namespace

std::size_t ConfusionMatrix::total() const {
  return std::accumulate(counts_.begin(), counts_.end(), std::size_t{0});
}

std::size_t ConfusionMatrix::row_sum(std::size_t truth) const {
  std::size_t s = 0;
  for (std::size_t j = 0; j < k_; ++j) s += (*this)(truth, j);
  return s;
}

std::size_t ConfusionMatrix::col_sum(std::size_t pred) const {
  std::size_t s = 0;
  for (std::size_t i = 0; i < k_; ++i) s += (*this)(i, pred);
  return s;
}

ConfusionMatrix confusion(std::span<const int> predicted, std::span<const int> truth,
                          std::size_t k) {
  if (predicted.size() != truth.size()) {
    throw ContractError("confusion: " + std::to_string(predicted.size()) + " predictions for " +
                        std::to_string(truth.size()) + " labels");
  }
  ConfusionMatrix cm(k);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (predicted[i] < 0 || truth[i] < 0 || static_cast<std::size_t>(predicted[i]) >= k ||
        static_cast<std::size_t>(truth[i]) >= k) {
      throw ContractError("confusion: label out of range at index " + std::to_string(i));
    }
    ++cm(static_cast<std::size_t>(truth[i]), static_cast<std::size_t>(predicted[i]));
  }
  return cm;
}

double accuracy(const ConfusionMatrix& cm) {
  const std::size_t total = cm.total();
  if (total == 0) throw MetricError("accuracy: undefined for an empty confusion matrix");
  std::size_t trace = 0;
  for (std::size_t c = 0; c < cm.classes(); ++c) trace += cm(c, c);
  return static_cast<double>(trace) / static_cast<double>(total);
}

double cohens_kappa(const ConfusionMatrix& cm) {
  const std::size_t total = cm.total();
  if (total == 0) throw MetricError("cohens_kappa: undefined for an empty confusion matrix");
  std::size_t trace = 0;
  std::size_t chance = 0;
  for (std::size_t c = 0; c < cm.classes(); ++c) {
    trace += cm(c, c);
    chance += cm.row_sum(c) * cm.col_sum(c);
  }
  const auto n = static_cast<double>(total);
  const double p_o = static_cast<double>(trace) / n;
  const double p_e = static_cast<double>(chance) / (n * n);
  if (chance == total * total) return 0.0;
  return (p_o - p_e) / (1.0 - p_e);
}

double binary_auc(std::span<const double> scores, std::span<const bool> positive) {
  if (scores.size() != positive.size()) throw ContractError("binary_auc: length mismatch");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    // Ranks i+1 .. j share their average.
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t t = i; t < j; ++t) {
      if (positive[order[t]]) {
        rank_sum += midrank;
        ++n_pos;
      }
    }
    i = j;
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) {
    throw MetricError("binary_auc: need both positive and negative samples");
  }
  const double p = static_cast<double>(n_pos);
  const double u = rank_sum - p * (p + 1.0) / 2.0;
  return u / (p * static_cast<double>(n_neg));
}

AucResult auc_macro_ovr(const Tensor2& probs, std::span<const int> truth) {
  if (probs.rows() != truth.size()) {
    throw ShapeError("auc_macro_ovr: " + std::to_string(truth.size()) + " labels for scores " +
                     probs.shape_string());
  }
  if (truth.empty()) throw MetricError("auc_macro_ovr: no samples");
  const std::size_t k = probs.cols();
  std::vector<std::size_t> counts(k, 0);
  for (int y : truth) {
    if (y < 0 || static_cast<std::size_t>(y) >= k) {
      throw ContractError("auc_macro_ovr: label " + std::to_string(y) + " out of range");
    }
    ++counts[static_cast<std::size_t>(y)];
  }
  const auto present = std::count_if(counts.begin(), counts.end(), [](auto c) { return c > 0; });
  if (present < 2) throw MetricError("auc_macro_ovr: only one class present in the labels");

  AucResult result;
  double total = 0.0;
  std::vector<double> scores(truth.size());
  std::unique_ptr<bool[]> positive(new bool[truth.size()]);
  for (std::size_t c = 0; c < k; ++c) {
    if (counts[c] == 0) {
      result.skipped.push_back(c);
      continue;
    }
    for (std::size_t i = 0; i < truth.size(); ++i) {
      scores[i] = probs(i, c);
      positive[i] = static_cast<std::size_t>(truth[i]) == c;
    }
    total += binary_auc(scores, std::span<const bool>(positive.get(), truth.size()));
  }
  result.value = total / static_cast<double>(present);
  return result;
}

EvalReport run_tstr(const Dataset& real_train, const Dataset& synth_train,
                    const Dataset& holdout, const ClassifierHyper& hyper, std::uint64_t seed) {
  if (!(real_train.schema == synth_train.schema) || !(real_train.schema == holdout.schema)) {
    throw ContractError("run_tstr: real, synthetic and hold-out schemas differ");
  }
  check_disjoint(real_train, holdout);
  const std::size_t k = holdout.schema.num_classes();

  EvalReport report;
  report.seed = seed;
  report.classes = holdout.schema.classes;
  report.real_counts = class_histogram(real_train);
  report.synthetic_counts = class_histogram(synth_train);
  report.holdout_counts = class_histogram(holdout);

  auto score = [&](const Dataset& train, MetricPair& kappa_slot, MetricPair& acc_slot,
                   MetricPair& auc_slot, double MetricPair::*side,
                   std::vector<std::size_t>& skipped) {
    ClassifierModel model =
        init_classifier(train.width(), hyper.dim_z, k, hyper.hidden, seed);
    train_classifier(model, train, holdout, hyper, seed);
    freeze(model);
    const Prediction p = predict(model, holdout.x);
    const ConfusionMatrix cm = confusion(p.labels, holdout.y, k);
    kappa_slot.*side = cohens_kappa(cm);
    acc_slot.*side = accuracy(cm);
    const AucResult auc = auc_macro_ovr(p.probs, holdout.y);
    auc_slot.*side = auc.value;
    skipped = auc.skipped;
  };
  score(real_train, report.kappa, report.accuracy, report.auc, &MetricPair::real,
        report.auc_skipped_real);
  score(synth_train, report.kappa, report.accuracy, report.auc, &MetricPair::synthetic,
        report.auc_skipped_synthetic);
  return report;
}

std::string format_report(const EvalReport& report) {
  std::ostringstream out;
  out << "Train-on-synthetic, test-on-real evaluation\n";
  out << "seed: " << report.seed << "\n";
  out << "classes: ";
  for (std::size_t i = 0; i < report.classes.size(); ++i)
    out << (i ? ", " : "") << report.classes[i];
  out << "\n";
  out << "real training counts:      " << join_counts(report.real_counts) << "\n";
  out << "synthetic training counts: " << join_counts(report.synthetic_counts) << "\n";
  out << "hold-out counts:           " << join_counts(report.holdout_counts) << "\n";
  out << "AUC: macro-averaged one-vs-rest, midrank ties\n\n";
  out << "metric          real / synthetic\n";
  out << "Cohen's kappa   " << fixed(100.0 * report.kappa.real, 2) << "% / "
      << fixed(100.0 * report.kappa.synthetic, 2) << "%\n";
  out << "Accuracy        " << fixed(100.0 * report.accuracy.real, 2) << "% / "
      << fixed(100.0 * report.accuracy.synthetic, 2) << "%\n";
  out << "AUC             " << fixed(report.auc.real, 2) << " / " << fixed(report.auc.synthetic, 2)
      << "\n";
  auto skipped = [&](const char* who, const std::vector<std::size_t>& classes) {
    for (std::size_t c : classes) {
      out << "warning: class " << report.classes.at(c) << " absent from hold-out, skipped in "
          << who << " AUC\n";
    }
  };
  skipped("real", report.auc_skipped_real);
  skipped("synthetic", report.auc_skipped_synthetic);
  return out.str();
}

std::string format_metrics(const EvalReport& report) {
  return "kappa " + full(report.kappa.real) + " " + full(report.kappa.synthetic) + "\n" +
         "accuracy " + full(report.accuracy.real) + " " + full(report.accuracy.synthetic) + "\n" +
         "auc " + full(report.auc.real) + " " + full(report.auc.synthetic) + "\n";
}

}  // namespace csdg
