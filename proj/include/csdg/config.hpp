#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "csdg/classifier.hpp"
#include "csdg/condflow.hpp"
#include "csdg/data.hpp"

namespace csdg {

enum class CountsMode { match_train, rebalance, explicit_map };

// Pipeline configuration. Config files hold one "key = value" per line;
// '#' starts a comment. Recognized keys:
//
//   data, schema, out, seed, test_frac
//   classifier.hidden (comma list), classifier.dim_z, classifier.epochs,
//   classifier.batch, classifier.lr
//   flow.layers, flow.hidden, flow.hidden_layers, flow.alpha, flow.epochs,
//   flow.batch, flow.lr, flow.dequantization
//   generate.mode (match-train | rebalance | explicit),
//   generate.counts (Class:count, ...)
//   benchmark.n, benchmark.d, benchmark.priors (comma list),
//   benchmark.classes (comma list), benchmark.separation, benchmark.sigma
//
// Unknown keys are rejected. There is no default seed.
struct RunConfig {
  std::filesystem::path data;
  std::filesystem::path schema;
  std::filesystem::path out = "out";
  std::optional<std::uint64_t> seed;
  double test_frac = 0.2;
  ClassifierHyper classifier;
  FlowHyper flow;
  CountsMode counts_mode = CountsMode::match_train;
  std::vector<std::pair<std::string, std::size_t>> explicit_counts;
  BenchmarkSpec benchmark;

  std::uint64_t master_seed() const;  // throws UsageError when unset
};

RunConfig parse_config(std::string_view text, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);
void apply_setting(RunConfig& config, std::string_view key, std::string_view value);

// Stage indices mixed into the master seed by derive_seed().
enum class Stage : std::uint64_t {
  benchmark_data = 0,
  prepare = 1,
  train_classifier = 2,
  train_flow = 3,
  generate = 4,
  evaluate = 5,
};

std::uint64_t stage_seed(const RunConfig& config, Stage stage);

}  // namespace csdg
