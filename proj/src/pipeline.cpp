#include "csdg/pipeline.hpp"

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <ostream>
#include <sstream>

#include "csdg/artifacts.hpp"
#include "csdg/classifier.hpp"
#include "csdg/condflow.hpp"
#include "csdg/error.hpp"
#include "csdg/evaluation.hpp"

namespace csdg {

namespace fs = std::filesystem;

namespace {

fs::path out_file(const RunConfig& config, const char* name) { return config.out / name; }

void require_file(const fs::path& path, const char* what) {
  if (path.empty()) throw UsageError(std::string("no ") + what + " path configured");
  if (!fs::is_regular_file(path)) {
    throw UsageError(std::string(what) + " not found: " + path.string());
  }
}

std::string join_rows(const std::vector<std::size_t>& rows) {
  std::string out;
  for (std::size_t i = 0; i < rows.size(); ++i) out += (i ? "," : "") + std::to_string(rows[i]);
  return out;
}

std::vector<std::size_t> parse_rows(std::string_view s) {
  std::vector<std::size_t> out;
  if (s.empty()) return out;
  std::size_t start = 0;
  while (true) {
    const auto comma = s.find(',', start);
    const auto item = s.substr(start, comma - start);
    std::size_t v = 0;
    const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (ec != std::errc{} || ptr != item.data() + item.size()) {
      throw Error("split.txt: bad row index \"" + std::string(item) + "\"");
    }
    out.push_back(v);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::map<std::string, std::string> read_key_values(const fs::path& path) {
  std::istringstream in(read_file_bytes(path));
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

std::string histogram_line(const Schema& schema, const std::vector<std::size_t>& counts) {
  std::string out;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    out += (c ? ", " : "") + schema.classes[c] + "=" + std::to_string(counts[c]);
  }
  return out;
}

std::string format_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

ClassifierModel load_classifier(const RunConfig& config, const Schema& schema,
                                const NormStats& stats, std::string* bytes_out = nullptr) {
  const fs::path path = out_file(config, files::kClassifier);
  require_file(path, "classifier checkpoint");
  std::string bytes = read_file_bytes(path);
  const Checkpoint ckpt = parse_checkpoint(bytes);
  const std::string expected = hex64(schema_hash(schema));
  if (ckpt.meta("stage") == "classifier" && ckpt.meta("schema_hash") != expected) {
    throw CheckpointError("classifier checkpoint schema hash " + ckpt.meta("schema_hash") +
                          " does not match data schema hash " + expected);
  }
  ClassifierModel model = classifier_from_checkpoint(ckpt);
  if (parse_norm_stats(ckpt.meta("norm_stats")) != stats) {
    throw CheckpointError("classifier checkpoint was fitted on different training statistics");
  }
  if (bytes_out != nullptr) *bytes_out = std::move(bytes);
  return model;
}

// Runs one benchmark stage, prefixing failures with the stage name while
// keeping the error category (and so the exit code).
template <typename F>
void run_stage(const char* name, std::ostream& log, F&& stage) {
  log << "== " << name << "\n";
  try {
    stage();
  } catch (const UsageError& e) {
    throw UsageError(std::string("stage ") + name + ": " + e.what());
  } catch (const Error& e) {
    throw Error(std::string("stage ") + name + ": " + e.what());
  }
}

}  // namespace

PreparedData load_prepared(const RunConfig& config) {
  const fs::path schema_path = out_file(config, files::kSchema);
  const fs::path train_path = out_file(config, files::kTrain);
  const fs::path test_path = out_file(config, files::kTest);
  const fs::path split_path = out_file(config, files::kSplit);
  for (const auto& [p, what] : {std::pair{schema_path, "prepared schema"},
                                {train_path, "training split"},
                                {test_path, "test split"},
                                {split_path, "split provenance"}}) {
    require_file(p, what);
  }
  PreparedData prepared;
  prepared.schema = load_schema(schema_path);
  prepared.train = encode(load_csv(train_path, prepared.schema));
  prepared.test = encode(load_csv(test_path, prepared.schema), prepared.train.stats);

  auto kv = read_key_values(split_path);
  for (auto& [ds, role, key] : {std::tuple{&prepared.train, "train", "train_rows"},
                                {&prepared.test, "test", "test_rows"}}) {
    ds->provenance.split_id = kv["split_id"];
    ds->provenance.role = role;
    ds->provenance.source_rows = parse_rows(kv[key]);
    if (ds->provenance.source_rows.size() != ds->size()) {
      throw Error("split.txt row count does not match " + std::string(role) + ".csv");
    }
  }
  return prepared;
}

void cmd_prepare(const RunConfig& config, std::ostream& log) {
  require_file(config.schema, "schema file");
  require_file(config.data, "data file");
  const std::uint64_t seed = stage_seed(config, Stage::prepare);
  const Schema schema = load_schema(config.schema);
  const RawTable table = load_csv(config.data, schema);
  Dataset all = encode(table, identity_stats(schema));
  const Split split = split_stratified(all, config.test_frac, seed);

  auto rows_of = [&](const Dataset& part) {
    RawTable t;
    t.schema = schema;
    for (std::size_t r : part.provenance.source_rows) {
      t.rows.push_back(table.rows[r]);
      t.labels.push_back(table.labels[r]);
    }
    return t;
  };
  const RawTable train_raw = rows_of(split.train);
  const RawTable test_raw = rows_of(split.test);
  const Dataset train_encoded = encode(train_raw);

  fs::create_directories(config.out);
  write_file(out_file(config, files::kSchema), format_schema(schema));
  save_csv(out_file(config, files::kTrain), train_raw);
  save_csv(out_file(config, files::kTest), test_raw);
  write_file(out_file(config, files::kNormStats), format_norm_stats(train_encoded.stats) + "\n");

  std::ostringstream meta;
  char frac[32];
  std::snprintf(frac, sizeof frac, "%.17g", config.test_frac);
  meta << "split_id=" << split.train.provenance.split_id << "\n"
       << "seed=" << seed << "\n"
       << "test_frac=" << frac << "\n"
       << "source=" << config.data.filename().string() << "\n"
       << "train_rows=" << join_rows(split.train.provenance.source_rows) << "\n"
       << "test_rows=" << join_rows(split.test.provenance.source_rows) << "\n";
  write_file(out_file(config, files::kSplit), meta.str());

  log << "split " << split.train.provenance.split_id << ": " << split.train.size() << " train / "
      << split.test.size() << " test rows\n";
  log << "train classes: " << histogram_line(schema, class_histogram(split.train)) << "\n";
  log << "test classes:  " << histogram_line(schema, class_histogram(split.test)) << "\n";
}

void cmd_train_classifier(const RunConfig& config, std::ostream& log) {
  const std::uint64_t seed = stage_seed(config, Stage::train_classifier);
  const PreparedData data = load_prepared(config);
  ClassifierModel model = init_classifier(data.train.width(), config.classifier.dim_z,
                                          data.schema.num_classes(), config.classifier.hidden,
                                          seed);
  const TrainHistory history = train_classifier(model, data.train, data.test, config.classifier,
                                                seed);
  freeze(model);
  for (std::size_t e = 0; e < history.train_loss.size(); ++e) {
    log << "epoch " << e + 1 << " train_loss " << format_value(history.train_loss[e])
        << " valid_loss " << format_value(history.valid_loss[e]) << " valid_accuracy "
        << format_value(history.valid_accuracy[e]) << "\n";
  }
  if (history.clamped_logs > 0) {
    log << "warning: " << history.clamped_logs << " log-probabilities clamped at 1e-12\n";
  }
  if (!history.valid_accuracy.empty()) {
    log << "final validation loss " << format_value(history.valid_loss.back()) << ", accuracy "
        << format_value(history.valid_accuracy.back()) << "\n";
  }
  const Checkpoint ckpt =
      classifier_checkpoint(model, data.schema, data.train.stats, config.classifier, seed);
  write_file(out_file(config, files::kClassifier), serialize_checkpoint(ckpt));
  log << "wrote " << out_file(config, files::kClassifier).string() << "\n";
}

void cmd_train_flow(const RunConfig& config, std::ostream& log) {
  const std::uint64_t seed = stage_seed(config, Stage::train_flow);
  const PreparedData data = load_prepared(config);
  std::string classifier_bytes;
  const ClassifierModel classifier =
      load_classifier(config, data.schema, data.train.stats, &classifier_bytes);

  CondFlowModel flow = init_flow(data.train.width(), classifier.feature_dim(), config.flow.arch,
                                 seed);
  const FlowHistory history = train_flow(flow, data.train, classifier, config.flow, seed);
  for (std::size_t e = 0; e < history.epoch_nll.size(); ++e) {
    log << "epoch " << e + 1 << " nll " << format_value(history.epoch_nll[e]) << "\n";
  }
  const Checkpoint ckpt = flow_checkpoint(flow, data.schema, data.train.stats, config.flow, seed,
                                          fnv1a64(classifier_bytes));
  write_file(out_file(config, files::kFlow), serialize_checkpoint(ckpt));
  log << "wrote " << out_file(config, files::kFlow).string() << "\n";
}

std::vector<std::size_t> generation_counts(const RunConfig& config, const Dataset& train) {
  const auto hist = class_histogram(train);
  switch (config.counts_mode) {
    case CountsMode::match_train:
      return hist;
    case CountsMode::rebalance:
      return rebalance_counts(hist);
    case CountsMode::explicit_map: {
      std::vector<std::size_t> counts(hist.size(), 0);
      for (const auto& [name, count] : config.explicit_counts) {
        const int c = train.schema.class_index(name);
        if (c < 0) throw UsageError("generate.counts: unknown class \"" + name + "\"");
        counts[static_cast<std::size_t>(c)] = count;
      }
      return counts;
    }
  }
  return hist;
}

void cmd_generate(const RunConfig& config, std::ostream& log) {
  const std::uint64_t seed = stage_seed(config, Stage::generate);
  const PreparedData data = load_prepared(config);
  std::string classifier_bytes;
  const ClassifierModel classifier =
      load_classifier(config, data.schema, data.train.stats, &classifier_bytes);

  const fs::path flow_path = out_file(config, files::kFlow);
  require_file(flow_path, "flow checkpoint");
  const Checkpoint ckpt = parse_checkpoint(read_file_bytes(flow_path));
  const CondFlowModel flow = flow_from_checkpoint(ckpt);
  const std::string actual = hex64(fnv1a64(classifier_bytes));
  if (ckpt.meta("classifier_hash") != actual) {
    throw CheckpointError("flow checkpoint was trained against classifier " +
                          ckpt.meta("classifier_hash") + " but " + files::kClassifier + " is " +
                          actual);
  }
  if (ckpt.meta("schema_hash") != hex64(schema_hash(data.schema))) {
    throw CheckpointError("flow checkpoint schema hash " + ckpt.meta("schema_hash") +
                          " does not match data schema hash " +
                          hex64(schema_hash(data.schema)));
  }

  const auto counts = generation_counts(config, data.train);
  const Dataset synthetic = generate(flow, classifier, data.train, counts, seed);
  save_csv(out_file(config, files::kSynthetic), decode(synthetic));
  log << "generated " << synthetic.size() << " rows: "
      << histogram_line(data.schema, class_histogram(synthetic)) << "\n";
  log << "wrote " << out_file(config, files::kSynthetic).string() << "\n";
}

void cmd_evaluate(const RunConfig& config, std::ostream& log) {
  const std::uint64_t seed = stage_seed(config, Stage::evaluate);
  const PreparedData data = load_prepared(config);
  const fs::path synth_path = out_file(config, files::kSynthetic);
  require_file(synth_path, "synthetic data");
  const Dataset synthetic = encode(load_csv(synth_path, data.schema), data.train.stats);

  const EvalReport report = run_tstr(data.train, synthetic, data.test, config.classifier, seed);
  const std::string text = format_report(report);
  write_file(out_file(config, files::kReport), text);
  write_file(out_file(config, files::kMetrics), format_metrics(report));
  log << text;
}

void cmd_benchmark(const RunConfig& config, std::ostream& log) {
  RunConfig run = config;
  run_stage("benchmark-data", log, [&] {
    BenchmarkSpec spec = config.benchmark;
    spec.seed = stage_seed(config, Stage::benchmark_data);
    const Dataset ds = make_benchmark(spec);
    fs::create_directories(config.out);
    run.data = out_file(config, files::kBenchmarkData);
    run.schema = out_file(config, files::kBenchmarkSchema);
    save_csv(run.data, decode(ds));
    write_file(run.schema, format_schema(ds.schema));
    log << "benchmark: " << ds.size() << " rows, " << ds.width() << " features, classes "
        << histogram_line(ds.schema, class_histogram(ds)) << "\n";
  });
  run_stage("prepare", log, [&] { cmd_prepare(run, log); });
  run_stage("train-classifier", log, [&] { cmd_train_classifier(run, log); });
  run_stage("train-flow", log, [&] { cmd_train_flow(run, log); });
  run_stage("generate", log, [&] { cmd_generate(run, log); });
  run_stage("evaluate", log, [&] { cmd_evaluate(run, log); });
}

}  // namespace csdg
