#include <algorithm>
#include <cmath>
#include <memory>
#include <random>

#include "csdg/data.hpp"
#include "csdg/error.hpp"
#include "csdg/evaluation.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace csdg;

namespace {

ConfusionMatrix from_counts(std::initializer_list<std::initializer_list<std::size_t>> rows) {
  ConfusionMatrix cm(rows.size());
  std::size_t i = 0;
  for (const auto& r : rows) {
    std::size_t j = 0;
    for (std::size_t v : r) cm(i, j++) = v;
    ++i;
  }
  return cm;
}

double auc_of(std::vector<double> scores, std::vector<int> positive) {
  auto flags = std::make_unique<bool[]>(positive.size());
  for (std::size_t i = 0; i < positive.size(); ++i) flags[i] = positive[i] != 0;
  return binary_auc(scores, std::span<const bool>(flags.get(), positive.size()));
}

}  // namespace

TEST_CASE("confusion") {
  const std::vector<int> pred{0, 1, 1}, truth{0, 1, 2};
  const ConfusionMatrix cm = confusion(pred, truth, 3);
  CHECK(cm(0, 0) == 1);
  CHECK(cm(1, 1) == 1);
  CHECK(cm(2, 1) == 1);
  CHECK(cm.total() == 3);
  CHECK(cm.row_sum(2) == 1);
  CHECK(cm.col_sum(1) == 2);

  const ConfusionMatrix diag = confusion(truth, truth, 3);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) CHECK(diag(i, j) == (i == j ? 1u : 0u));

  CHECK(confusion({}, {}, 3) == ConfusionMatrix(3));
  CHECK_THROWS_AS(confusion(pred, std::vector<int>{0, 1}, 3), ContractError);
  CHECK_THROWS_AS(confusion(std::vector<int>{3}, std::vector<int>{0}, 3), ContractError);
}

TEST_CASE("accuracy and kappa") {
  CHECK(accuracy(from_counts({{4, 0}, {0, 6}})) == 1.0);
  CHECK(accuracy(from_counts({{0, 4}, {6, 0}})) == 0.0);
  const ConfusionMatrix cm = from_counts({{50, 10}, {15, 25}});
  CHECK(accuracy(cm) == 0.75);
  // p_e = (60 * 65 + 40 * 35) / 100^2 = 0.53
  CHECK(cohens_kappa(cm) == doctest::Approx((0.75 - 0.53) / 0.47).epsilon(1e-14));
  CHECK(cohens_kappa(cm) == doctest::Approx(0.4681).epsilon(1e-4));

  CHECK(cohens_kappa(from_counts({{3, 0, 0}, {0, 5, 0}, {0, 0, 2}})) == 1.0);
  // Outer product of marginals (0.4, 0.6) x (0.3, 0.7), scaled by 100.
  CHECK(std::abs(cohens_kappa(from_counts({{12, 28}, {18, 42}}))) < 1e-15);
  // Chance agreement of 1: everything in a single cell.
  CHECK(cohens_kappa(from_counts({{7, 0}, {0, 0}})) == 0.0);

  CHECK_THROWS_AS(accuracy(ConfusionMatrix(3)), MetricError);
  CHECK_THROWS_AS(cohens_kappa(ConfusionMatrix(3)), MetricError);
}

TEST_CASE("auc") {
  CHECK(auc_of({0.1, 0.2, 0.8, 0.9}, {0, 0, 1, 1}) == 1.0);
  CHECK(auc_of({0.1, 0.2, 0.8, 0.9}, {1, 1, 0, 0}) == 0.0);
  CHECK(auc_of({0.5, 0.5, 0.5, 0.5, 0.5}, {0, 1, 0, 1, 1}) == 0.5);
  // Pairs (0.7, 0.3), (0.7, 0.7), (0.9, 0.3), (0.9, 0.7): (1 + 0.5 + 1 + 1) / 4.
  CHECK(auc_of({0.3, 0.7, 0.7, 0.9}, {0, 1, 0, 1}) == 0.875);
  CHECK_THROWS_AS(auc_of({0.1, 0.2}, {1, 1}), MetricError);

  const Tensor2 separating = Tensor2::from_rows({{0.8, 0.1, 0.1}, {0.1, 0.7, 0.2}, {0.2, 0.2, 0.6}});
  CHECK(auc_macro_ovr(separating, std::vector<int>{0, 1, 2}).value == 1.0);
  CHECK(auc_macro_ovr(Tensor2(4, 3, 1.0 / 3), std::vector<int>{0, 1, 2, 2}).value == 0.5);

  const AucResult partial = auc_macro_ovr(separating, std::vector<int>{0, 1, 1});
  CHECK(partial.skipped == std::vector<std::size_t>{2});
  CHECK_THROWS_AS(auc_macro_ovr(separating, std::vector<int>{1, 1, 1}), MetricError);
  CHECK_THROWS_AS(auc_macro_ovr(separating, std::vector<int>{1, 1}), ShapeError);
}

TEST_CASE("metrics agree with brute-force oracles on random small instances") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t k = 2 + rng() % 3;
    const std::size_t n = 2 + rng() % 19;
    std::vector<int> truth(n), pred(n);
    for (std::size_t i = 0; i < n; ++i) {
      truth[i] = static_cast<int>(rng() % k);
      pred[i] = static_cast<int>(rng() % k);
    }
    truth[0] = 0;
    truth[1] = 1;
    Tensor2 probs(n, k);
    for (double& v : probs.values()) v = static_cast<double>(rng() % 5) / 4.0;

    const oracle::Tabulation t = oracle::tabulate(pred, truth, k);
    const ConfusionMatrix cm = confusion(pred, truth, k);
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < k; ++j) CHECK(cm(i, j) == t.counts[i][j]);
    CHECK(accuracy(cm) == t.accuracy);
    CHECK(std::abs(cohens_kappa(cm) - t.kappa) < 1e-15);
    CHECK(cohens_kappa(cm) <= accuracy(cm) + 1e-15);
    CHECK(std::abs(auc_macro_ovr(probs, truth).value - oracle::macro_pairwise_auc(probs, truth)) < 1e-12);

    // Strictly increasing transforms of the scores leave AUC unchanged.
    Tensor2 warped = probs;
    for (double& v : warped.values()) v = std::exp(3 * v) - 7;
    CHECK(auc_macro_ovr(warped, truth).value == auc_macro_ovr(probs, truth).value);
  }
}

TEST_CASE("run_tstr") {
  BenchmarkSpec spec;
  spec.n = 600;
  spec.d = 4;
  const Split split = split_stratified(make_benchmark(spec), 0.2, 3);
  ClassifierHyper hyper;
  hyper.hidden = {8};
  hyper.dim_z = 2;
  hyper.epochs = 3;

  SUBCASE("identical training sets give identical columns") {
    const EvalReport r = run_tstr(split.train, split.train, split.test, hyper, 4);
    CHECK(r.kappa.real == r.kappa.synthetic);
    CHECK(r.accuracy.real == r.accuracy.synthetic);
    CHECK(r.auc.real == r.auc.synthetic);
    CHECK(r.holdout_counts == class_histogram(split.test));
    CHECK(r.kappa.real <= r.accuracy.real);

    const std::string report = format_report(r);
    CHECK(report.find("Cohen's kappa") != std::string::npos);
    const std::string metrics = format_metrics(r);
    CHECK(std::count(metrics.begin(), metrics.end(), '\n') == 3);
    CHECK(metrics.rfind("kappa ", 0) == 0);
    CHECK(format_metrics(run_tstr(split.train, split.train, split.test, hyper, 4)) == metrics);
  }
  SUBCASE("schema mismatch") {
    Dataset other = split.train;
    other.schema.classes[0] = "Other";
    CHECK_THROWS_AS(run_tstr(split.train, other, split.test, hyper, 4), ContractError);
  }
  SUBCASE("hold-out rows may not overlap the real training rows") {
    Dataset leaky = split.test;
    leaky.provenance.source_rows[0] = split.train.provenance.source_rows[0];
    CHECK_THROWS_AS(run_tstr(split.train, split.train, leaky, hyper, 4), ContractError);
  }
}
