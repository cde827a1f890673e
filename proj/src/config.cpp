#include "csdg/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "csdg/error.hpp"
#include "csdg/random.hpp"

namespace csdg {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::uint64_t to_uint(std::string_view key, std::string_view s) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw UsageError("config " + std::string(key) + ": expected a non-negative integer, got \"" +
                     std::string(s) + "\"");
  }
  return v;
}

double to_double(std::string_view key, std::string_view s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw UsageError("config " + std::string(key) + ": expected a number, got \"" +
                     std::string(s) + "\"");
  }
  return v;
}

std::vector<std::size_t> to_sizes(std::string_view key, std::string_view s) {
  std::vector<std::size_t> out;
  for (auto item : split(s, ',')) out.push_back(to_uint(key, item));
  return out;
}

}  // namespace

std::uint64_t RunConfig::master_seed() const {
  if (!seed) throw UsageError("no seed given: set 'seed' in the config or pass --seed");
  return *seed;
}

std::uint64_t stage_seed(const RunConfig& config, Stage stage) {
  return derive_seed(config.master_seed(), static_cast<std::uint64_t>(stage));
}

void apply_setting(RunConfig& c, std::string_view key, std::string_view value) {
  if (key == "data") {
    c.data = std::string(value);
  } else if (key == "schema") {
    c.schema = std::string(value);
  } else if (key == "out") {
    c.out = std::string(value);
  } else if (key == "seed") {
    c.seed = to_uint(key, value);
  } else if (key == "test_frac") {
    c.test_frac = to_double(key, value);
  } else if (key == "classifier.hidden") {
    c.classifier.hidden = to_sizes(key, value);
  } else if (key == "classifier.dim_z") {
    c.classifier.dim_z = to_uint(key, value);
  } else if (key == "classifier.epochs") {
    c.classifier.epochs = to_uint(key, value);
  } else if (key == "classifier.batch") {
    c.classifier.batch = to_uint(key, value);
  } else if (key == "classifier.lr") {
    c.classifier.adam.lr = to_double(key, value);
  } else if (key == "flow.layers") {
    c.flow.arch.layers = to_uint(key, value);
  } else if (key == "flow.hidden") {
    c.flow.arch.hidden = to_uint(key, value);
  } else if (key == "flow.hidden_layers") {
    c.flow.arch.hidden_layers = to_uint(key, value);
  } else if (key == "flow.alpha") {
    c.flow.arch.alpha = to_double(key, value);
  } else if (key == "flow.epochs") {
    c.flow.epochs = to_uint(key, value);
  } else if (key == "flow.batch") {
    c.flow.batch = to_uint(key, value);
  } else if (key == "flow.lr") {
    c.flow.adam.lr = to_double(key, value);
  } else if (key == "flow.dequantization") {
    c.flow.dequantization = to_double(key, value);
  } else if (key == "generate.mode") {
    if (value == "match-train") {
      c.counts_mode = CountsMode::match_train;
    } else if (value == "rebalance") {
      c.counts_mode = CountsMode::rebalance;
    } else if (value == "explicit") {
      c.counts_mode = CountsMode::explicit_map;
    } else {
      throw UsageError("config generate.mode: expected match-train, rebalance or explicit");
    }
  } else if (key == "generate.counts") {
    c.explicit_counts.clear();
    for (auto item : split(value, ',')) {
      const auto colon = item.find(':');
      if (colon == std::string_view::npos) {
        throw UsageError("config generate.counts: expected Class:count, got \"" +
                         std::string(item) + "\"");
      }
      c.explicit_counts.emplace_back(std::string(trim(item.substr(0, colon))),
                                     to_uint(key, trim(item.substr(colon + 1))));
    }
  } else if (key == "benchmark.n") {
    c.benchmark.n = to_uint(key, value);
  } else if (key == "benchmark.d") {
    c.benchmark.d = to_uint(key, value);
  } else if (key == "benchmark.priors") {
    c.benchmark.priors.clear();
    for (auto item : split(value, ',')) c.benchmark.priors.push_back(to_double(key, item));
  } else if (key == "benchmark.classes") {
    c.benchmark.class_names.clear();
    for (auto item : split(value, ',')) c.benchmark.class_names.emplace_back(item);
  } else if (key == "benchmark.separation") {
    c.benchmark.separation = to_double(key, value);
  } else if (key == "benchmark.sigma") {
    c.benchmark.sigma = to_double(key, value);
  } else {
    throw UsageError("config: unknown key \"" + std::string(key) + "\"");
  }
}

RunConfig parse_config(std::string_view text, const std::filesystem::path& base_dir) {
  RunConfig config;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view body = line;
    if (const auto hash = body.find('#'); hash != std::string_view::npos) {
      body = body.substr(0, hash);
    }
    body = trim(body);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) {
      throw UsageError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    apply_setting(config, trim(body.substr(0, eq)), trim(body.substr(eq + 1)));
  }
  // Relative paths in a config file are relative to the file.
  for (auto* p : {&config.data, &config.schema, &config.out}) {
    if (!p->empty() && p->is_relative() && !base_dir.empty()) *p = base_dir / *p;
  }
  return config;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.parent_path());
}

}  // namespace csdg
