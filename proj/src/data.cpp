#include "csdg/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "csdg/error.hpp"
#include "csdg/hash.hpp"
#include "csdg/random.hpp"

namespace csdg {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = s.find(',', start);
    out.emplace_back(trim(s.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string read_file(const std::filesystem::path& path, const char* what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError(std::string("cannot open ") + what + " " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// RFC 4180 records. Each record remembers the line it started on.
struct CsvRecord {
  std::vector<std::string> fields;
  std::size_t line = 0;
};

std::vector<CsvRecord> parse_records(std::string_view text) {
  std::vector<CsvRecord> records;
  CsvRecord current;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  std::size_t line = 1;
  current.line = 1;

  auto end_field = [&] {
    current.fields.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    end_field();
    const bool blank = current.fields.size() == 1 && current.fields[0].empty();
    if (!blank) records.push_back(std::move(current));
    current = CsvRecord{};
    current.line = line;
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        if (field_started) {
          throw IngestionError("line " + std::to_string(line) + ": stray quote inside field");
        }
        in_quotes = true;
        field_started = true;
        break;
      case ',':
        end_field();
        break;
      case '\r':
        break;
      case '\n':
        ++line;
        end_record();
        break;
      default:
        field.push_back(c);
        field_started = true;
    }
  }
  if (in_quotes) throw IngestionError("unterminated quoted field at end of input");
  if (field_started || !current.fields.empty() || !field.empty()) end_record();
  return records;
}

std::string quote_if_needed(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::size_t Schema::encoded_width() const {
  std::size_t w = 0;
  for (const auto& f : features) w += f.encoded_width();
  return w;
}

int Schema::class_index(std::string_view name) const {
  for (std::size_t i = 0; i < classes.size(); ++i)
    if (classes[i] == name) return static_cast<int>(i);
  return -1;
}

void Schema::validate() const {
  if (features.empty()) throw IngestionError("schema: no feature columns");
  if (label.empty()) throw IngestionError("schema: missing label column");
  if (classes.size() < 2) throw IngestionError("schema: label needs at least 2 classes");
  std::set<std::string> names{label};
  for (const auto& f : features) {
    if (f.name.empty()) throw IngestionError("schema: empty column name");
    if (!names.insert(f.name).second) {
      throw IngestionError("schema: duplicate column \"" + f.name + "\"");
    }
    if (f.kind == FeatureKind::categorical) {
      if (f.levels.size() < 2) {
        throw IngestionError("schema: categorical column \"" + f.name + "\" needs >= 2 levels");
      }
      if (std::set<std::string>(f.levels.begin(), f.levels.end()).size() != f.levels.size()) {
        throw IngestionError("schema: duplicate level in column \"" + f.name + "\"");
      }
    }
  }
  if (std::set<std::string>(classes.begin(), classes.end()).size() != classes.size()) {
    throw IngestionError("schema: duplicate class name");
  }
}

Schema parse_schema(std::string_view text) {
  Schema schema;
  bool have_label = false;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto space = body.find_first_of(" \t");
    const auto keyword = body.substr(0, space);
    const auto rest = space == std::string_view::npos ? std::string_view{} : trim(body.substr(space));
    const auto eq = rest.find('=');
    const auto name = trim(rest.substr(0, eq));
    const auto list = eq == std::string_view::npos ? std::string_view{} : rest.substr(eq + 1);
    auto fail = [&](const std::string& why) {
      return IngestionError("schema line " + std::to_string(line_no) + ": " + why);
    };
    if (name.empty()) throw fail("missing column name");

    if (keyword == "label") {
      if (have_label) throw fail("second label line");
      if (eq == std::string_view::npos) throw fail("label needs '= class, class, ...'");
      schema.label = std::string(name);
      schema.classes = split_list(list);
      have_label = true;
    } else if (keyword == "numeric") {
      if (eq != std::string_view::npos) throw fail("numeric column takes no levels");
      schema.features.push_back({std::string(name), FeatureKind::numeric, {}});
    } else if (keyword == "categorical") {
      if (eq == std::string_view::npos) throw fail("categorical needs '= level, level, ...'");
      schema.features.push_back({std::string(name), FeatureKind::categorical, split_list(list)});
    } else {
      throw fail("unknown keyword \"" + std::string(keyword) + "\"");
    }
  }
  schema.validate();
  return schema;
}

Schema load_schema(const std::filesystem::path& path) {
  return parse_schema(read_file(path, "schema file"));
}

std::string format_schema(const Schema& schema) {
  std::string out = "label " + schema.label + " =";
  for (std::size_t i = 0; i < schema.classes.size(); ++i) {
    out += (i == 0 ? " " : ", ") + schema.classes[i];
  }
  out += "\n";
  for (const auto& f : schema.features) {
    if (f.kind == FeatureKind::numeric) {
      out += "numeric " + f.name + "\n";
    } else {
      out += "categorical " + f.name + " =";
      for (std::size_t i = 0; i < f.levels.size(); ++i) {
        out += (i == 0 ? " " : ", ") + f.levels[i];
      }
      out += "\n";
    }
  }
  return out;
}

std::uint64_t schema_hash(const Schema& schema) { return fnv1a64(format_schema(schema)); }

RawTable parse_csv(std::string_view text, const Schema& schema) {
  schema.validate();
  const auto records = parse_records(text);
  if (records.empty()) throw IngestionError("csv: missing header row");

  const auto& header = records.front().fields;
  std::map<std::string, std::size_t> position;
  for (std::size_t i = 0; i < header.size(); ++i) {
    const std::string name(trim(header[i]));
    if (!position.emplace(name, i).second) {
      throw IngestionError("csv header: duplicate column \"" + name + "\"");
    }
  }
  auto locate = [&](const std::string& name) {
    auto it = position.find(name);
    if (it == position.end()) throw IngestionError("csv header: missing column \"" + name + "\"");
    return it->second;
  };
  std::vector<std::size_t> feature_pos;
  for (const auto& f : schema.features) feature_pos.push_back(locate(f.name));
  const std::size_t label_pos = locate(schema.label);
  if (header.size() != schema.features.size() + 1) {
    for (const auto& [name, _] : position) {
      bool known = name == schema.label;
      for (const auto& f : schema.features) known = known || f.name == name;
      if (!known) throw IngestionError("csv header: unexpected column \"" + name + "\"");
    }
  }

  RawTable table;
  table.schema = schema;
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    auto fail = [&](const std::string& column, const std::string& why) {
      return IngestionError("row " + std::to_string(r) + " (line " + std::to_string(rec.line) +
                            "), column \"" + column + "\": " + why);
    };
    if (rec.fields.size() != header.size()) {
      throw IngestionError("row " + std::to_string(r) + " (line " + std::to_string(rec.line) +
                           "): expected " + std::to_string(header.size()) + " cells, got " +
                           std::to_string(rec.fields.size()));
    }
    std::vector<double> row;
    row.reserve(schema.features.size());
    for (std::size_t j = 0; j < schema.features.size(); ++j) {
      const auto& col = schema.features[j];
      const auto cell = trim(rec.fields[feature_pos[j]]);
      if (cell.empty()) throw fail(col.name, "missing value");
      if (col.kind == FeatureKind::numeric) {
        double v = 0.0;
        const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
        if (ec != std::errc{} || ptr != cell.data() + cell.size() || !std::isfinite(v)) {
          throw fail(col.name, "cannot parse \"" + std::string(cell) + "\" as a finite number");
        }
        row.push_back(v);
      } else {
        const auto it = std::find(col.levels.begin(), col.levels.end(), cell);
        if (it == col.levels.end()) {
          throw fail(col.name, "unknown level \"" + std::string(cell) + "\"");
        }
        row.push_back(static_cast<double>(it - col.levels.begin()));
      }
    }
    const auto label_cell = trim(rec.fields[label_pos]);
    if (label_cell.empty()) throw fail(schema.label, "missing value");
    const int label = schema.class_index(label_cell);
    if (label < 0) throw fail(schema.label, "unknown class \"" + std::string(label_cell) + "\"");
    table.rows.push_back(std::move(row));
    table.labels.push_back(label);
  }
  return table;
}

RawTable load_csv(const std::filesystem::path& path, const Schema& schema) {
  try {
    return parse_csv(read_file(path, "csv file"), schema);
  } catch (const IngestionError& e) {
    throw IngestionError(path.string() + ": " + e.what());
  }
}

void write_csv(std::ostream& out, const RawTable& table) {
  const Schema& s = table.schema;
  for (const auto& f : s.features) out << quote_if_needed(f.name) << ',';
  out << quote_if_needed(s.label) << '\n';
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    for (std::size_t j = 0; j < s.features.size(); ++j) {
      const auto& f = s.features[j];
      if (f.kind == FeatureKind::numeric) {
        out << format_double(row[j]);
      } else {
        out << quote_if_needed(f.levels.at(static_cast<std::size_t>(row[j])));
      }
      out << ',';
    }
    out << quote_if_needed(s.classes.at(static_cast<std::size_t>(table.labels[r]))) << '\n';
  }
}

void save_csv(const std::filesystem::path& path, const RawTable& table) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IngestionError("cannot write " + path.string());
  write_csv(out, table);
  if (!out) throw IngestionError("write failed: " + path.string());
}

NormStats identity_stats(const Schema& schema) { return NormStats(schema.features.size()); }

std::vector<std::pair<std::size_t, std::size_t>> one_hot_blocks(const Schema& schema) {
  std::vector<std::pair<std::size_t, std::size_t>> blocks;
  std::size_t offset = 0;
  for (const auto& f : schema.features) {
    if (f.kind == FeatureKind::categorical) blocks.emplace_back(offset, offset + f.levels.size());
    offset += f.encoded_width();
  }
  return blocks;
}

void rediscretize(Tensor2& x, const Schema& schema) {
  for (const auto& [begin, end] : one_hot_blocks(schema)) {
    for (std::size_t i = 0; i < x.rows(); ++i) {
      std::size_t best = begin;
      for (std::size_t j = begin + 1; j < end; ++j)
        if (x(i, j) > x(i, best)) best = j;
      for (std::size_t j = begin; j < end; ++j) x(i, j) = j == best ? 1.0 : 0.0;
    }
  }
}

Dataset encode(const RawTable& table, const std::optional<NormStats>& fit_stats) {
  const Schema& schema = table.schema;
  const std::size_t n = table.size();
  NormStats stats;
  if (fit_stats) {
    if (fit_stats->size() != schema.features.size()) {
      throw ShapeError("encode: " + std::to_string(fit_stats->size()) + " stats for " +
                       std::to_string(schema.features.size()) + " feature columns");
    }
    stats = *fit_stats;
  } else {
    stats = identity_stats(schema);
    for (std::size_t j = 0; j < schema.features.size(); ++j) {
      if (schema.features[j].kind != FeatureKind::numeric) continue;
      if (n == 0) throw IngestionError("encode: cannot fit statistics on an empty table");
      double mean = 0.0;
      for (const auto& row : table.rows) mean += row[j];
      mean /= static_cast<double>(n);
      double var = 0.0;
      for (const auto& row : table.rows) var += (row[j] - mean) * (row[j] - mean);
      var /= static_cast<double>(n);
      if (!(var > 0.0)) {
        throw IngestionError("encode: column \"" + schema.features[j].name +
                             "\" has zero variance");
      }
      stats[j] = {mean, std::sqrt(var)};
    }
  }

  Dataset ds;
  ds.schema = schema;
  ds.stats = stats;
  ds.y = table.labels;
  ds.x = Tensor2(n, schema.encoded_width());
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t col = 0;
    for (std::size_t j = 0; j < schema.features.size(); ++j) {
      const auto& f = schema.features[j];
      if (f.kind == FeatureKind::numeric) {
        ds.x(i, col++) = (table.rows[i][j] - stats[j].mean) / stats[j].stddev;
      } else {
        ds.x(i, col + static_cast<std::size_t>(table.rows[i][j])) = 1.0;
        col += f.levels.size();
      }
    }
  }
  require_finite(ds.x, "encode");
  return ds;
}

RawTable decode(const Dataset& ds) {
  const Schema& schema = ds.schema;
  RawTable table;
  table.schema = schema;
  table.labels = ds.y;
  table.rows.reserve(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    std::vector<double> row;
    std::size_t col = 0;
    for (std::size_t j = 0; j < schema.features.size(); ++j) {
      const auto& f = schema.features[j];
      if (f.kind == FeatureKind::numeric) {
        row.push_back(ds.x(i, col++) * ds.stats[j].stddev + ds.stats[j].mean);
      } else {
        std::size_t best = 0;
        for (std::size_t l = 1; l < f.levels.size(); ++l)
          if (ds.x(i, col + l) > ds.x(i, col + best)) best = l;
        row.push_back(static_cast<double>(best));
        col += f.levels.size();
      }
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

Dataset subset(const Dataset& ds, const std::vector<std::size_t>& rows) {
  Dataset out;
  out.schema = ds.schema;
  out.stats = ds.stats;
  out.x = select_rows(ds.x, rows);
  out.y.reserve(rows.size());
  for (std::size_t r : rows) out.y.push_back(ds.y[r]);
  out.provenance.split_id = ds.provenance.split_id;
  out.provenance.role = ds.provenance.role;
  for (std::size_t r : rows) {
    out.provenance.source_rows.push_back(
        ds.provenance.source_rows.empty() ? r : ds.provenance.source_rows[r]);
  }
  return out;
}

std::vector<std::size_t> class_histogram(const Dataset& ds) {
  std::vector<std::size_t> counts(ds.schema.num_classes(), 0);
  for (int y : ds.y) {
    if (y < 0 || static_cast<std::size_t>(y) >= counts.size()) {
      throw ContractError("class_histogram: label " + std::to_string(y) + " out of range");
    }
    ++counts[static_cast<std::size_t>(y)];
  }
  return counts;
}

Split split_stratified(const Dataset& ds, double test_frac, std::uint64_t seed) {
  if (!(test_frac > 0.0 && test_frac < 0.5)) {
    throw ContractError("split_stratified: test_frac must lie in (0, 0.5)");
  }
  const std::size_t k = ds.schema.num_classes();
  std::vector<std::vector<std::size_t>> by_class(k);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    by_class.at(static_cast<std::size_t>(ds.y[i])).push_back(i);
  }
  for (std::size_t c = 0; c < k; ++c) {
    if (by_class[c].size() < 2) {
      throw ContractError("split_stratified: class \"" + ds.schema.classes[c] + "\" has " +
                          std::to_string(by_class[c].size()) + " samples, need at least 2");
    }
  }

  Rng rng(seed);
  std::vector<bool> is_test(ds.size(), false);
  for (auto& rows : by_class) {
    rng.shuffle(rows.begin(), rows.end());
    const auto take =
        static_cast<std::size_t>(std::llround(static_cast<double>(rows.size()) * test_frac));
    for (std::size_t i = 0; i < take; ++i) is_test[rows[i]] = true;
  }
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> test_rows;
  for (std::size_t i = 0; i < ds.size(); ++i) (is_test[i] ? test_rows : train_rows).push_back(i);

  std::uint64_t tag = mix64(seed ^ mix64(ds.size()));
  std::uint64_t frac_bits = 0;
  static_assert(sizeof frac_bits == sizeof test_frac);
  std::memcpy(&frac_bits, &test_frac, sizeof frac_bits);
  tag = mix64(tag ^ frac_bits);
  Split split{subset(ds, train_rows), subset(ds, test_rows)};
  split.train.provenance.split_id = split.test.provenance.split_id = hex64(tag);
  split.train.provenance.role = "train";
  split.test.provenance.role = "test";
  return split;
}

void BenchmarkSpec::validate() const {
  const std::size_t k = priors.size();
  if (k < 2) throw ContractError("benchmark: need at least 2 classes");
  if (class_names.size() != k) throw ContractError("benchmark: class_names/priors length differ");
  double total = 0.0;
  for (double p : priors) {
    if (!(p >= 0.0)) throw ContractError("benchmark: negative prior");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-12) throw ContractError("benchmark: priors must sum to 1");
  if (n < 10 * k) throw ContractError("benchmark: n must be at least 10 * classes");
  if (d < 2) throw ContractError("benchmark: d must be at least 2");
  if (d < k) throw ContractError("benchmark: d must be at least the number of classes");
  if (!(sigma > 0.0) || !(separation >= 0.0)) {
    throw ContractError("benchmark: sigma must be positive and separation non-negative");
  }
}

std::vector<std::size_t> benchmark_counts(const BenchmarkSpec& spec) {
  spec.validate();
  std::vector<std::size_t> counts(spec.priors.size(), 0);
  std::size_t assigned = 0;
  for (std::size_t c = 1; c < counts.size(); ++c) {
    counts[c] = static_cast<std::size_t>(std::llround(static_cast<double>(spec.n) * spec.priors[c]));
    assigned += counts[c];
  }
  if (assigned > spec.n) throw ContractError("benchmark: rounded class counts exceed n");
  counts[0] = spec.n - assigned;
  return counts;
}

Tensor2 benchmark_means(const BenchmarkSpec& spec) {
  spec.validate();
  Tensor2 means(spec.priors.size(), spec.d);
  const double offset = spec.separation * spec.sigma / std::sqrt(2.0);
  for (std::size_t c = 0; c < spec.priors.size(); ++c) means(c, c) = offset;
  return means;
}

Schema benchmark_schema(const BenchmarkSpec& spec) {
  Schema schema;
  for (std::size_t j = 0; j < spec.d; ++j) {
    char name[16];
    std::snprintf(name, sizeof name, "f%02zu", j);
    schema.features.push_back({name, FeatureKind::numeric, {}});
  }
  schema.label = "preference";
  schema.classes = spec.class_names;
  schema.validate();
  return schema;
}

Dataset make_benchmark(const BenchmarkSpec& spec) {
  const auto counts = benchmark_counts(spec);
  const Tensor2 means = benchmark_means(spec);
  Rng rng(spec.seed);

  std::vector<std::size_t> order(spec.n);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order.begin(), order.end());

  Dataset ds;
  ds.schema = benchmark_schema(spec);
  ds.stats = identity_stats(ds.schema);
  ds.x = Tensor2(spec.n, spec.d);
  ds.y.assign(spec.n, 0);
  std::size_t next = 0;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    for (std::size_t i = 0; i < counts[c]; ++i) {
      const std::size_t row = order[next++];
      ds.y[row] = static_cast<int>(c);
      for (std::size_t j = 0; j < spec.d; ++j) {
        ds.x(row, j) = means(c, j) + spec.sigma * rng.normal();
      }
    }
  }
  return ds;
}

}  // namespace csdg
