#include <cmath>

#include "csdg/autodiff.hpp"
#include "csdg/classifier.hpp"
#include "csdg/data.hpp"
#include "csdg/error.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace csdg;

namespace {

Dataset small_benchmark(std::uint64_t seed, std::size_t n = 600) {
  BenchmarkSpec spec;
  spec.n = n;
  spec.d = 6;
  spec.seed = seed;
  return make_benchmark(spec);
}

ClassifierHyper quick_hyper(std::size_t epochs) {
  ClassifierHyper h;
  h.hidden = {16};
  h.dim_z = 4;
  h.epochs = epochs;
  h.batch = 32;
  return h;
}

}  // namespace

TEST_CASE("init_classifier") {
  const ClassifierModel m = init_classifier(16, 4, 3, {64, 32}, 1);
  CHECK(m.input_dim() == 16);
  CHECK(m.feature_dim() == 4);
  CHECK(m.num_classes() == 3);
  CHECK_FALSE(m.frozen);
  const Prediction p = predict(m, Tensor2(5, 16, 0.5));
  CHECK(p.probs.rows() == 5);
  CHECK(p.probs.cols() == 3);

  CHECK_THROWS_AS(init_classifier(16, 16, 3, {64, 32}, 1), ContractError);
  CHECK_THROWS_AS(init_classifier(16, 4, 1, {64, 32}, 1), ContractError);

  const ClassifierModel ma = init_classifier(16, 4, 3, {64, 32}, 7);
  const ClassifierModel mb = init_classifier(16, 4, 3, {64, 32}, 7);
  const ClassifierModel mc = init_classifier(16, 4, 3, {64, 32}, 8);
  const auto a = ma.parameters();
  const auto b = mb.parameters();
  const auto c = mc.parameters();
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(*a[i] == *b[i]);
  CHECK(*a[0] != *c[0]);
}

TEST_CASE("cross_entropy") {
  const std::vector<int> labels{0, 1, 2};
  CHECK(cross_entropy(Tensor2(3, 3, 1.0 / 3), labels) == doctest::Approx(std::log(3.0)).epsilon(1e-15));
  CHECK(cross_entropy(Tensor2::identity(3), labels) == 0.0);
  // -ln 0.7
  CHECK(cross_entropy(Tensor2::from_rows({{0.7, 0.2, 0.1}}), std::vector<int>{0}) ==
        doctest::Approx(0.35667494393873245).epsilon(1e-15));

  std::size_t clamped = 0;
  const double loss = cross_entropy(Tensor2::from_rows({{0, 1}, {1, 0}}), std::vector<int>{0, 0},
                                    &clamped);
  CHECK(clamped == 1);
  CHECK(loss == doctest::Approx(-std::log(1e-12) / 2));
}

TEST_CASE("cross-entropy gradient matches central differences") {
  const Dataset ds = small_benchmark(3, 60);
  ClassifierModel model = init_classifier(6, 2, 3, {5}, 11);
  const Tensor2 x = select_rows(ds.x, std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6, 7});
  const std::vector<int> y(ds.y.begin(), ds.y.begin() + 8);

  Graph g;
  const BoundMlp ext = bind(g, model.extractor);
  const NodeId w = g.parameter(model.head.weight);
  const NodeId b = g.parameter(model.head.bias);
  const NodeId z = ext.forward(g, g.input(x));
  const NodeId loss = g.cross_entropy(g.softmax_rows(g.add_row(g.matmul(z, w), b)), y);
  CHECK(g.value(loss)(0, 0) == doctest::Approx(cross_entropy(predict(model, x).probs, y)).epsilon(1e-14));
  const auto grads = g.backward(loss);
  const auto fd = oracle::finite_difference(
      model.parameters(), [&] { return cross_entropy(predict(model, x).probs, y); });
  REQUIRE(grads.size() == fd.size());
  for (std::size_t i = 0; i < grads.size(); ++i) CHECK(oracle::relative_error(grads[i], fd[i]) < 1e-4);
}

TEST_CASE("train_classifier") {
  const Dataset train = small_benchmark(1);
  const Dataset valid = small_benchmark(2, 300);

  SUBCASE("epochs = 0 leaves the model untouched") {
    ClassifierModel m = init_classifier(6, 4, 3, {16}, 5);
    const ClassifierModel before = m;
    const TrainHistory h = train_classifier(m, train, valid, quick_hyper(0), 9);
    CHECK(h.train_loss.empty());
    for (std::size_t i = 0; i < m.parameters().size(); ++i)
      CHECK(*m.parameters()[i] == *before.parameters()[i]);
  }
  SUBCASE("same seed gives identical histories and weights") {
    ClassifierModel a = init_classifier(6, 4, 3, {16}, 5);
    ClassifierModel b = init_classifier(6, 4, 3, {16}, 5);
    const TrainHistory ha = train_classifier(a, train, valid, quick_hyper(3), 9);
    const TrainHistory hb = train_classifier(b, train, valid, quick_hyper(3), 9);
    CHECK(ha.train_loss == hb.train_loss);
    CHECK(ha.valid_accuracy == hb.valid_accuracy);
    CHECK(a.head.weight == b.head.weight);
  }
  SUBCASE("learns better than the majority class") {
    ClassifierModel m = init_classifier(6, 4, 3, {16}, 5);
    const TrainHistory h = train_classifier(m, train, valid, quick_hyper(15), 9);
    REQUIRE(h.train_loss.size() == 15);
    CHECK(h.train_loss.back() < h.train_loss.front());
    CHECK(h.valid_accuracy.back() > 0.65);
  }
  SUBCASE("contracts") {
    ClassifierModel m = init_classifier(6, 4, 3, {16}, 5);
    Dataset empty = subset(train, {});
    CHECK_THROWS_AS(train_classifier(m, empty, valid, quick_hyper(1), 1), ContractError);
    freeze(m);
    CHECK(m.frozen);
    CHECK_THROWS_AS(train_classifier(m, train, valid, quick_hyper(1), 1), ContractError);
  }
}

TEST_CASE("trained benchmark classifier puts the class-0 mean in class 0") {
  BenchmarkSpec spec;
  spec.n = 2000;
  const Dataset train = make_benchmark(spec);
  ClassifierHyper hyper;
  hyper.epochs = 10;
  ClassifierModel m = init_classifier(spec.d, hyper.dim_z, 3, hyper.hidden, 1);
  (void)train_classifier(m, train, train, hyper, 2);
  const Tensor2 means = benchmark_means(spec);
  const Prediction p = predict(m, select_rows(means, std::vector<std::size_t>{0}));
  CHECK(p.labels[0] == 0);
  CHECK(p.probs(0, 0) > 1.0 / 3);
}

TEST_CASE("feature extraction and prediction") {
  const ClassifierModel m = init_classifier(6, 3, 3, {8}, 4);

  CHECK(extract_features(m, Tensor2(0, 6)).rows() == 0);
  CHECK(extract_features(m, Tensor2(0, 6)).cols() == 3);
  CHECK_THROWS_AS(extract_features(m, Tensor2(2, 5)), ShapeError);
  CHECK_THROWS_AS(predict(m, Tensor2(2, 7)), ShapeError);

  const Dataset ds = small_benchmark(8, 60);
  const Tensor2 x = select_rows(ds.x, std::vector<std::size_t>{3, 3, 9});
  const Tensor2 z = extract_features(m, x);
  CHECK(z.row(0)[0] == z.row(1)[0]);
  for (double v : z.values()) CHECK(std::abs(v) <= 1.0);

  const Prediction p = predict(m, ds.x);
  for (std::size_t i = 0; i < p.probs.rows(); ++i) {
    double s = 0;
    for (double v : p.probs.row(i)) s += v;
    CHECK(std::abs(s - 1) < 1e-12);
  }
  const Tensor2 shifted = add(logits(m, ds.x), Tensor2(ds.size(), 3, 5.0));
  CHECK(argmax_rows(shifted) == p.labels);
  CHECK(argmax_rows(Tensor2::from_rows({{1, 1, 0}, {0, 2, 2}})) == std::vector<int>{0, 1});
}
