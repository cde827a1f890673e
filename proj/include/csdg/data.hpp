#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "csdg/tensor.hpp"

namespace csdg {

enum class FeatureKind { numeric, categorical };

struct FeatureColumn {
  std::string name;
  FeatureKind kind = FeatureKind::numeric;
  std::vector<std::string> levels;  // categorical only

  // Width after encoding: 1 for numeric, one column per level otherwise.
  std::size_t encoded_width() const {
    return kind == FeatureKind::numeric ? 1 : levels.size();
  }
  friend bool operator==(const FeatureColumn&, const FeatureColumn&) = default;
};

// Column layout of a labeled table.
//
// Schema files are line-oriented text. Blank lines and lines starting with
// '#' are ignored; every other line is one of
//
//   label <name> = <class>, <class>, ...
//   numeric <name>
//   categorical <name> = <level>, <level>, ...
//
// Feature order in the file is the encoding order. Class order fixes the
// integer label assigned to each class name.
struct Schema {
  std::vector<FeatureColumn> features;
  std::string label;
  std::vector<std::string> classes;

  std::size_t num_classes() const { return classes.size(); }
  std::size_t encoded_width() const;
  int class_index(std::string_view name) const;  // -1 when unknown

  void validate() const;
  friend bool operator==(const Schema&, const Schema&) = default;
};

Schema parse_schema(std::string_view text);
Schema load_schema(const std::filesystem::path& path);
std::string format_schema(const Schema& schema);
// FNV-1a 64 over format_schema(); stable across runs and platforms.
std::uint64_t schema_hash(const Schema& schema);

// Parsed but unencoded rows. Numeric cells hold raw values, categorical
// cells hold the level index.
struct RawTable {
  Schema schema;
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;

  std::size_t size() const { return rows.size(); }
};

RawTable parse_csv(std::string_view text, const Schema& schema);
RawTable load_csv(const std::filesystem::path& path, const Schema& schema);
void write_csv(std::ostream& out, const RawTable& table);
void save_csv(const std::filesystem::path& path, const RawTable& table);

struct ColumnStats {
  double mean = 0.0;
  double stddev = 1.0;
  friend bool operator==(const ColumnStats&, const ColumnStats&) = default;
};

// One entry per feature column; categorical entries are unused (0, 1).
using NormStats = std::vector<ColumnStats>;

// Where a dataset's rows came from, so train/hold-out disjointness can be
// enforced downstream.
struct Provenance {
  std::string split_id;
  std::string role;                      // "train", "test" or empty
  std::vector<std::size_t> source_rows;  // row indices in the unsplit table
};

struct Dataset {
  Tensor2 x;
  std::vector<int> y;
  Schema schema;
  NormStats stats;
  Provenance provenance;

  std::size_t size() const { return y.size(); }
  std::size_t width() const { return x.cols(); }
};

// Numeric columns become z-scores, categorical columns become one-hot
// blocks. Statistics are fitted on the table when fit_stats is empty
// (population standard deviation) and reused otherwise.
Dataset encode(const RawTable& table, const std::optional<NormStats>& fit_stats = std::nullopt);
// Inverse of encode. One-hot blocks are mapped back by argmax.
RawTable decode(const Dataset& ds);

NormStats identity_stats(const Schema& schema);
// [begin, end) encoded column ranges of every categorical feature.
std::vector<std::pair<std::size_t, std::size_t>> one_hot_blocks(const Schema& schema);
// Replaces every one-hot block of each row by the indicator of its argmax.
void rediscretize(Tensor2& x, const Schema& schema);

Dataset subset(const Dataset& ds, const std::vector<std::size_t>& rows);

struct Split {
  Dataset train;
  Dataset test;
};

// Per class, round(count * test_frac) rows go to the test split. Rows keep
// their original relative order in both splits.
Split split_stratified(const Dataset& ds, double test_frac, std::uint64_t seed);

std::vector<std::size_t> class_histogram(const Dataset& ds);

struct BenchmarkSpec {
  std::size_t n = 5000;
  std::size_t d = 16;
  std::vector<double> priors{0.65, 0.175, 0.175};
  std::vector<std::string> class_names{"NoChange", "Warmer", "Cooler"};
  double sigma = 1.0;
  // Pairwise distance between class means, in units of sigma.
  double separation = 2.0;
  std::uint64_t seed = 42;

  void validate() const;
};

// Class c gets round(n * prior_c) rows for c >= 1 and class 0 the remainder.
// Class means sit on scaled coordinate axes so every pair is
// separation * sigma apart. Features are in raw units (identity stats).
Dataset make_benchmark(const BenchmarkSpec& spec);
std::vector<std::size_t> benchmark_counts(const BenchmarkSpec& spec);
Tensor2 benchmark_means(const BenchmarkSpec& spec);
Schema benchmark_schema(const BenchmarkSpec& spec);

}  // namespace csdg
