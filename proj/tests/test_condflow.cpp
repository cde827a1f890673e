#include <cmath>
#include <numbers>

#include "csdg/autodiff.hpp"
#include "csdg/condflow.hpp"
#include "csdg/data.hpp"
#include "csdg/error.hpp"
#include "doctest.h"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace csdg;

namespace {

const double kLog2Pi = std::log(2 * std::numbers::pi);

// One dense layer with zero weights: the network outputs its bias.
Mlp constant_net(std::size_t in, double value) {
  Mlp net;
  net.layers.push_back(Dense{Tensor2(in, 1), Tensor2(1, 1, value)});
  return net;
}

// D = 2, d = 1 with s = 2 and b = 1 regardless of input.
CouplingLayer constant_layer(double alpha = 2.0) {
  CouplingLayer layer;
  layer.dim = 2;
  layer.split = 1;
  layer.cond_dim = 1;
  layer.alpha = alpha;
  layer.scale_net = constant_net(2, std::atanh(std::log(2.0) / alpha));
  layer.shift_net = constant_net(2, 1.0);
  return layer;
}

ClassifierModel frozen_classifier(std::size_t d, std::size_t dim_z, std::uint64_t seed) {
  ClassifierModel c = init_classifier(d, dim_z, 3, {8}, seed);
  freeze(c);
  return c;
}

FlowHyper quick_flow(std::size_t epochs) {
  FlowHyper h;
  h.arch.layers = 2;
  h.arch.hidden = 16;
  h.epochs = epochs;
  h.batch = 64;
  return h;
}

}  // namespace

TEST_CASE("coupling layer") {
  SUBCASE("zeroed output layers give the identity") {
    const CondFlowModel fresh = init_flow(5, 3, FlowArch{}, 1);
    Rng rng(2);
    const Tensor2 x = fixture::normal_tensor(4, 5, rng);
    const Tensor2 z = fixture::normal_tensor(4, 3, rng);
    const FlowOutput out = coupling_forward(fresh.layers[0], x, z);
    CHECK(out.y == x);
    for (double l : out.logdet) CHECK(l == 0.0);
    CHECK(coupling_inverse(fresh.layers[0], x, z) == x);
  }
  SUBCASE("constant networks s = 2, b = 1 on x = (3, 4)") {
    const CouplingLayer layer = constant_layer();
    const Tensor2 x = Tensor2::from_rows({{3, 4}});
    const Tensor2 z = Tensor2::from_rows({{0.25}});
    const FlowOutput out = coupling_forward(layer, x, z);
    CHECK(out.y(0, 0) == 3.0);
    CHECK(out.y(0, 1) == doctest::Approx(9.0).epsilon(1e-14));
    CHECK(out.logdet[0] == doctest::Approx(std::log(2.0)).epsilon(1e-14));
    const Tensor2 back = coupling_inverse(layer, Tensor2::from_rows({{3, 9}}), z);
    CHECK(back(0, 0) == 3.0);
    CHECK(back(0, 1) == doctest::Approx(4.0).epsilon(1e-14));
  }
  SUBCASE("scale stays within exp(+/- alpha)") {
    CouplingLayer layer = constant_layer();
    layer.scale_net = constant_net(2, 1e6);
    const FlowOutput out = coupling_forward(layer, Tensor2::from_rows({{0, 1}}), Tensor2(1, 1));
    CHECK(out.logdet[0] <= 2.0);
    CHECK(out.y(0, 1) == doctest::Approx(std::exp(2.0) + 1));
  }
  SUBCASE("shape errors") {
    const CouplingLayer layer = constant_layer();
    CHECK_THROWS_AS(coupling_forward(layer, Tensor2(1, 3), Tensor2(1, 1)), ShapeError);
    CHECK_THROWS_AS(coupling_forward(layer, Tensor2(1, 2), Tensor2(1, 2)), ShapeError);
    CHECK_THROWS_AS(coupling_inverse(layer, Tensor2(2, 2), Tensor2(1, 1)), ShapeError);
  }
}

TEST_CASE("flow forward and inverse") {
  SUBCASE("fresh flow is the composition of reversals") {
    const CondFlowModel fresh = init_flow(5, 2, FlowArch{}, 3);
    const Tensor2 x = Tensor2::from_rows({{1, 2, 3, 4, 5}});
    const FlowOutput out = flow_forward(fresh, x, Tensor2(1, 2));
    // Eight reversals cancel out.
    CHECK(out.y == x);
    CHECK(out.logdet[0] == 0.0);

    FlowArch odd;
    odd.layers = 3;
    const FlowOutput three = flow_forward(init_flow(5, 2, odd, 3), x, Tensor2(1, 2));
    CHECK(three.y == Tensor2::from_rows({{5, 4, 3, 2, 1}}));
  }
  SUBCASE("round trip of a randomized 8-layer flow") {
    CondFlowModel model = init_flow(6, 3, FlowArch{}, 4);
    fixture::randomize(model, 5, 0.2);
    Rng rng(6);
    const Tensor2 x = fixture::normal_tensor(50, 6, rng);
    const Tensor2 z = fixture::normal_tensor(50, 3, rng);
    const FlowOutput out = flow_forward(model, x, z);
    CHECK(out.y != x);
    const Tensor2 back = flow_inverse(model, out.y, z);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(back.values()[i] - x.values()[i]) < 1e-8);
  }
  SUBCASE("total log-det equals numerical Jacobian log|det|, D = 4, 2 layers") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const CondFlowModel model = fixture::toy_flow(2, seed);
      Rng rng(seed + 100);
      const Tensor2 x = fixture::normal_tensor(1, 4, rng);
      const Tensor2 z = fixture::normal_tensor(1, 2, rng);
      auto f = [&](std::vector<double> v) {
        const FlowOutput out = flow_forward(model, Tensor2(1, 4, v), z);
        return std::vector<double>(out.y.values().begin(), out.y.values().end());
      };
      const double numeric = oracle::log_abs_det(
          oracle::numerical_jacobian(f, std::vector<double>(x.values().begin(), x.values().end())));
      CHECK(std::abs(flow_forward(model, x, z).logdet[0] - numeric) < 1e-4);
    }
  }
  SUBCASE("shape errors") {
    const CondFlowModel model = init_flow(4, 2, FlowArch{}, 1);
    CHECK_THROWS_AS(flow_forward(model, Tensor2(1, 5), Tensor2(1, 2)), ShapeError);
    CHECK_THROWS_AS(flow_inverse(model, Tensor2(1, 4), Tensor2(2, 2)), ShapeError);
  }
  SUBCASE("invalid permutations are rejected") {
    CondFlowModel model = init_flow(4, 2, FlowArch{}, 1);
    model.permutations[2] = {0, 0, 1, 2};
    CHECK_THROWS_AS(model.validate(), ContractError);
    CHECK_THROWS_AS(init_flow(1, 2, FlowArch{}, 1), ContractError);
  }
}

TEST_CASE("nll") {
  SUBCASE("fresh flow on the zero vector is (D/2) ln 2 pi") {
    CHECK(nll(init_flow(2, 3, FlowArch{}, 1), Tensor2(1, 2), Tensor2(1, 3)) ==
          doctest::Approx(kLog2Pi).epsilon(1e-15));
    CHECK(std::abs(nll(init_flow(16, 8, FlowArch{}, 1), Tensor2(3, 16), Tensor2(3, 8)) - 8 * kLog2Pi) <
          1e-9);
  }
  SUBCASE("graph and plain evaluations agree") {
    const CondFlowModel model = fixture::toy_flow(3, 7);
    Rng rng(8);
    const Tensor2 x = fixture::normal_tensor(10, 4, rng);
    const Tensor2 z = fixture::normal_tensor(10, 3, rng);
    Graph g;
    const NodeId loss = nll_node(g, model, x, z);
    CHECK(g.value(loss)(0, 0) == doctest::Approx(nll(model, x, z)).epsilon(1e-13));
  }
  SUBCASE("gradient matches central differences on the D = 4 toy flow") {
    CondFlowModel model = fixture::toy_flow(3, 9);
    Rng rng(10);
    const Tensor2 x = fixture::normal_tensor(6, 4, rng);
    const Tensor2 z = fixture::normal_tensor(6, 3, rng);
    Graph g;
    const auto grads = g.backward(nll_node(g, model, x, z));
    const auto fd = oracle::finite_difference(model.parameters(), [&] { return nll(model, x, z); });
    REQUIRE(grads.size() == fd.size());
    for (std::size_t i = 0; i < grads.size(); ++i) CHECK(oracle::relative_error(grads[i], fd[i]) < 1e-4);
  }
  SUBCASE("empty batch") {
    CHECK_THROWS_AS(nll(init_flow(2, 1, FlowArch{}, 1), Tensor2(0, 2), Tensor2(0, 1)), ContractError);
  }
}

TEST_CASE("train_flow") {
  BenchmarkSpec spec;
  spec.n = 400;
  spec.d = 4;
  const Dataset train = make_benchmark(spec);
  const ClassifierModel classifier = frozen_classifier(4, 2, 1);

  SUBCASE("lowers the NLL and is deterministic") {
    CondFlowModel a = init_flow(4, 2, quick_flow(5).arch, 2);
    CondFlowModel b = init_flow(4, 2, quick_flow(5).arch, 2);
    const FlowHistory ha = train_flow(a, train, classifier, quick_flow(5), 3);
    const FlowHistory hb = train_flow(b, train, classifier, quick_flow(5), 3);
    REQUIRE(ha.epoch_nll.size() == 5);
    CHECK(ha.epoch_nll.back() < ha.epoch_nll.front());
    CHECK(ha.epoch_nll == hb.epoch_nll);
  }
  SUBCASE("epochs = 0 leaves the model unchanged") {
    CondFlowModel m = init_flow(4, 2, quick_flow(0).arch, 2);
    fixture::randomize(m, 4, 0.1);
    const CondFlowModel before = m;
    CHECK(train_flow(m, train, classifier, quick_flow(0), 3).epoch_nll.empty());
    for (std::size_t i = 0; i < m.parameters().size(); ++i)
      CHECK(*m.parameters()[i] == *before.parameters()[i]);
  }
  SUBCASE("contracts") {
    CondFlowModel m = init_flow(4, 2, quick_flow(1).arch, 2);
    ClassifierModel unfrozen = init_classifier(4, 2, 3, {8}, 1);
    CHECK_THROWS_AS(train_flow(m, train, unfrozen, quick_flow(1), 3), ContractError);
    CondFlowModel wide = init_flow(5, 2, quick_flow(1).arch, 2);
    CHECK_THROWS_AS(train_flow(wide, train, classifier, quick_flow(1), 3), ShapeError);
  }
}

TEST_CASE("generate") {
  BenchmarkSpec spec;
  spec.n = 200;
  spec.d = 4;
  const Dataset source = make_benchmark(spec);
  const ClassifierModel classifier = frozen_classifier(4, 2, 1);
  CondFlowModel flow = init_flow(4, 2, quick_flow(1).arch, 2);
  fixture::randomize(flow, 3, 0.2);

  SUBCASE("zero counts give an empty dataset") {
    const std::vector<std::size_t> zeros{0, 0, 0};
    const Dataset out = generate(flow, classifier, source, zeros, 1);
    CHECK(out.size() == 0);
    CHECK(out.width() == 4);
  }
  SUBCASE("requested histogram is produced exactly and deterministically") {
    const std::vector<std::size_t> counts{5, 40, 7};
    const Dataset a = generate(flow, classifier, source, counts, 1);
    const Dataset b = generate(flow, classifier, source, counts, 1);
    CHECK(class_histogram(a) == counts);
    CHECK(a.x == b.x);
    CHECK(a.provenance.role == "synthetic");
    CHECK(generate(flow, classifier, source, counts, 2).x != a.x);
  }
  SUBCASE("latent of the source row reconstructs the source row") {
    const Tensor2 x = select_rows(source.x, std::vector<std::size_t>{0, 1, 2});
    const Tensor2 z = extract_features(classifier, x);
    const Tensor2 latent = flow_forward(flow, x, z).y;
    const Tensor2 back = conditional_sample(flow, classifier, x, latent);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(back.values()[i] - x.values()[i]) < 1e-8);
  }
  SUBCASE("absent class is named") {
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < source.size(); ++i)
      if (source.y[i] != 2) keep.push_back(i);
    const Dataset no_cooler = subset(source, keep);
    const std::vector<std::size_t> counts{1, 1, 1};
    try {
      (void)generate(flow, classifier, no_cooler, counts, 1);
      FAIL("expected a contract error");
    } catch (const ContractError& e) {
      CHECK(std::string(e.what()).find("Cooler") != std::string::npos);
    }
  }
}

TEST_CASE("rebalance_counts") {
  const std::vector<std::size_t> imbalanced{3250, 875, 875};
  CHECK(rebalance_counts(imbalanced) == std::vector<std::size_t>{0, 2375, 2375});
  const std::vector<std::size_t> balanced{10, 10, 10};
  CHECK(rebalance_counts(balanced) == std::vector<std::size_t>{0, 0, 0});
  const std::vector<std::size_t> single{42};
  CHECK(rebalance_counts(single) == std::vector<std::size_t>{0});
}
