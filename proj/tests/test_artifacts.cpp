#include <cstring>
#include <filesystem>

#include "csdg/artifacts.hpp"
#include "csdg/config.hpp"
#include "csdg/error.hpp"
#include "csdg/hash.hpp"
#include "csdg/random.hpp"
#include "doctest.h"
#include "fixtures.hpp"

using namespace csdg;

namespace {

std::string le32(std::uint32_t v) {
  std::string s(4, '\0');
  for (int i = 0; i < 4; ++i) s[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  return s;
}

std::string le64(std::uint64_t v) {
  std::string s(8, '\0');
  for (int i = 0; i < 8; ++i) s[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  return s;
}

std::string f64(double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  return le64(bits);
}

}  // namespace

TEST_CASE("checkpoint container") {
  Checkpoint ckpt;
  ckpt.metadata = {{"stage", "test"}, {"alpha", "2"}};
  ckpt.tensors = {{"w", Tensor2::from_rows({{0.1, -0.0, 1e-310}, {3.5, -7, 1.0 / 3}})},
                  {"b", Tensor2(1, 1, 2.0)}};

  SUBCASE("byte layout") {
    // Hand-assembled: magic, version, sorted metadata, then both tensors.
    const std::string meta = "alpha=2\nstage=test\n";
    std::string want = "CSDG" + le32(1) + le32(static_cast<std::uint32_t>(meta.size())) + meta;
    want += le32(1) + "w" + le32(2) + le64(2) + le64(3);
    for (double v : ckpt.tensors[0].value.values()) want += f64(v);
    want += le32(1) + "b" + le32(2) + le64(1) + le64(1) + f64(2.0);
    CHECK(serialize_checkpoint(ckpt) == want);
  }
  SUBCASE("round trip is bit-exact") {
    const std::string bytes = serialize_checkpoint(ckpt);
    const Checkpoint back = parse_checkpoint(bytes);
    CHECK(back.metadata == ckpt.metadata);
    REQUIRE(back.tensors.size() == 2);
    CHECK(std::memcmp(back.tensor("w").values().data(), ckpt.tensors[0].value.values().data(),
                      6 * sizeof(double)) == 0);
    CHECK(serialize_checkpoint(back) == bytes);
  }
  SUBCASE("rank-1 tensors are accepted") {
    const std::string bytes = "CSDG" + le32(1) + le32(0) + le32(1) + "v" + le32(1) + le64(2) +
                              f64(1.5) + f64(-2.5);
    const Checkpoint back = parse_checkpoint(bytes);
    CHECK(back.tensor("v") == Tensor2::from_rows({{1.5, -2.5}}));
  }
  SUBCASE("corrupt input is rejected") {
    std::string bytes = serialize_checkpoint(ckpt);
    std::string bad_magic = bytes;
    bad_magic[0] = 'X';
    CHECK_THROWS_AS(parse_checkpoint(bad_magic), CheckpointError);
    std::string bad_version = bytes;
    bad_version[4] = 2;
    CHECK_THROWS_AS(parse_checkpoint(bad_version), CheckpointError);
    CHECK_THROWS_AS(parse_checkpoint(bytes.substr(0, bytes.size() - 3)), CheckpointError);
    CHECK_THROWS_AS(parse_checkpoint("CS"), CheckpointError);
    CHECK_THROWS_AS(ckpt.tensor("missing"), CheckpointError);
    CHECK_THROWS_AS(ckpt.meta("missing"), CheckpointError);
  }
}

TEST_CASE("norm stats text") {
  const NormStats stats{{0.1, 3.0000000000000004}, {-1e-300, 1}};
  CHECK(parse_norm_stats(format_norm_stats(stats)) == stats);
  CHECK_THROWS_AS(parse_norm_stats("1;2"), CheckpointError);
}

TEST_CASE("classifier and flow checkpoints") {
  BenchmarkSpec spec;
  spec.d = 4;
  const Schema schema = benchmark_schema(spec);
  const NormStats stats = identity_stats(schema);
  ClassifierHyper hyper;
  hyper.hidden = {6};
  hyper.dim_z = 2;
  const ClassifierModel clf = fixture::toy_classifier(3);

  const Checkpoint c = classifier_checkpoint(clf, schema, stats, hyper, 17);
  CHECK(c.meta("stage") == "classifier");
  CHECK(c.meta("schema_hash") == hex64(schema_hash(schema)));
  const ClassifierModel back = classifier_from_checkpoint(parse_checkpoint(serialize_checkpoint(c)));
  CHECK(back.frozen);
  Rng rng(1);
  const Tensor2 probe = fixture::normal_tensor(20, 4, rng);
  CHECK(predict(back, probe).probs == predict(clf, probe).probs);

  FlowHyper fh;
  fh.arch.layers = 2;
  fh.arch.hidden = 8;
  fh.arch.hidden_layers = 1;
  const CondFlowModel flow = fixture::toy_flow(2, 5);
  const std::uint64_t chash = fnv1a64(serialize_checkpoint(c));
  const Checkpoint f = flow_checkpoint(flow, schema, stats, fh, 18, chash);
  CHECK(f.meta("classifier_hash") == hex64(chash));
  const CondFlowModel flow_back = flow_from_checkpoint(parse_checkpoint(serialize_checkpoint(f)));
  const Tensor2 z = fixture::normal_tensor(20, 2, rng);
  CHECK(flow_forward(flow_back, probe, z).y == flow_forward(flow, probe, z).y);
  CHECK(flow_back.permutations == flow.permutations);

  CHECK_THROWS_AS(classifier_from_checkpoint(f), CheckpointError);
  CHECK_THROWS_AS(flow_from_checkpoint(c), CheckpointError);
}

TEST_CASE("seed derivation") {
  // First output of the reference splitmix64 generator seeded with 0.
  CHECK(mix64(0) == 0xE220A8397B1DCDAFULL);
  CHECK(derive_seed(42, 3) == mix64(42 ^ mix64(3)));
  RunConfig config;
  config.seed = 42;
  CHECK(stage_seed(config, Stage::train_flow) == derive_seed(42, 3));
  CHECK(stage_seed(config, Stage::prepare) != stage_seed(config, Stage::generate));
}

TEST_CASE("config parsing") {
  SUBCASE("keys and relative paths") {
    const RunConfig c = parse_config(
        "# run settings\n"
        "data = raw/comfort.csv\n"
        "schema = /abs/schema.txt\n"
        "seed = 7   # trailing comment\n"
        "test_frac = 0.25\n"
        "classifier.hidden = 32, 16\n"
        "classifier.dim_z = 4\n"
        "flow.layers = 6\n"
        "flow.lr = 5e-4\n"
        "generate.mode = explicit\n"
        "generate.counts = Warmer:10, Cooler:20\n"
        "benchmark.priors = 0.5, 0.25, 0.25\n",
        "/base");
    CHECK(c.data == std::filesystem::path("/base/raw/comfort.csv"));
    CHECK(c.schema == std::filesystem::path("/abs/schema.txt"));
    CHECK(c.master_seed() == 7);
    CHECK(c.test_frac == 0.25);
    CHECK(c.classifier.hidden == std::vector<std::size_t>{32, 16});
    CHECK(c.classifier.dim_z == 4);
    CHECK(c.flow.arch.layers == 6);
    CHECK(c.flow.adam.lr == 5e-4);
    CHECK(c.counts_mode == CountsMode::explicit_map);
    REQUIRE(c.explicit_counts.size() == 2);
    CHECK(c.explicit_counts[1] == std::pair<std::string, std::size_t>{"Cooler", 20});
    CHECK(c.benchmark.priors == std::vector<double>{0.5, 0.25, 0.25});
  }
  SUBCASE("defaults") {
    const RunConfig c = parse_config("");
    CHECK_FALSE(c.seed.has_value());
    CHECK_THROWS_AS(c.master_seed(), UsageError);
    CHECK(c.classifier.dim_z == 8);
    CHECK(c.flow.arch.layers == 8);
    CHECK(c.counts_mode == CountsMode::match_train);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(parse_config("colour = blue\n"), UsageError);
    CHECK_THROWS_AS(parse_config("seed = -1\n"), UsageError);
    CHECK_THROWS_AS(parse_config("test_frac = much\n"), UsageError);
    CHECK_THROWS_AS(parse_config("just words\n"), UsageError);
    CHECK_THROWS_AS(parse_config("generate.mode = oversample\n"), UsageError);
    CHECK_THROWS_AS(parse_config("generate.counts = Warmer=3\n"), UsageError);
    CHECK_THROWS_AS(load_config("/nonexistent/run.cfg"), UsageError);
  }
}
