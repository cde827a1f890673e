#pragma once

#include <iosfwd>

#include "csdg/config.hpp"
#include "csdg/data.hpp"

namespace csdg {

// File names written under RunConfig::out.
namespace files {
inline constexpr const char* kSchema = "schema.txt";
inline constexpr const char* kTrain = "train.csv";
inline constexpr const char* kTest = "test.csv";
inline constexpr const char* kSplit = "split.txt";
inline constexpr const char* kNormStats = "norm_stats.txt";
inline constexpr const char* kClassifier = "classifier.ckpt";
inline constexpr const char* kFlow = "flow.ckpt";
inline constexpr const char* kSynthetic = "synthetic.csv";
inline constexpr const char* kReport = "report.txt";
inline constexpr const char* kMetrics = "metrics.txt";
inline constexpr const char* kBenchmarkData = "benchmark.csv";
inline constexpr const char* kBenchmarkSchema = "benchmark_schema.txt";
}  // namespace files

// Train and test splits as written by cmd_prepare, encoded with statistics
// fitted on the training split and tagged with the split provenance.
struct PreparedData {
  Schema schema;
  Dataset train;
  Dataset test;
};

PreparedData load_prepared(const RunConfig& config);

// Stratified split of config.data into train.csv / test.csv plus the
// schema, provenance (split.txt) and fitted statistics.
void cmd_prepare(const RunConfig& config, std::ostream& log);
// Trains, freezes and saves the classifier.
void cmd_train_classifier(const RunConfig& config, std::ostream& log);
// Trains the conditional flow against the saved classifier.
void cmd_train_flow(const RunConfig& config, std::ostream& log);
// Writes synthetic.csv in raw units according to config.counts_mode.
void cmd_generate(const RunConfig& config, std::ostream& log);
// Runs train-on-synthetic/test-on-real and writes report.txt and metrics.txt.
void cmd_evaluate(const RunConfig& config, std::ostream& log);
// make_benchmark followed by every stage above.
void cmd_benchmark(const RunConfig& config, std::ostream& log);

// Per-class generation counts for the configured mode.
std::vector<std::size_t> generation_counts(const RunConfig& config, const Dataset& train);

}  // namespace csdg
