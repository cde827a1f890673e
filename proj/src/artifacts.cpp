#include "csdg/artifacts.hpp"

#include <bit>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "csdg/error.hpp"

namespace csdg {

namespace {

constexpr std::string_view kMagic = "CSDG";

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  bool done() const { return pos_ == bytes_.size(); }

  std::string_view take(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) {
      throw CheckpointError(std::string("checkpoint truncated while reading ") + what);
    }
    auto out = bytes_.substr(pos_, n);
    pos_ += n;
    return out;
  }
  std::uint64_t uint(int width, const char* what) {
    const auto raw = take(static_cast<std::size_t>(width), what);
    std::uint64_t v = 0;
    for (int i = width; i-- > 0;) v = (v << 8) | static_cast<unsigned char>(raw[static_cast<std::size_t>(i)]);
    return v;
  }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(std::string_view s, const std::string& key) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw CheckpointError("checkpoint metadata \"" + key + "\": bad number \"" + std::string(s) +
                          "\"");
  }
  return v;
}

std::uint64_t parse_uint(std::string_view s, const std::string& key, int base = 10) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v, base);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw CheckpointError("checkpoint metadata \"" + key + "\": bad integer \"" + std::string(s) +
                          "\"");
  }
  return v;
}

std::vector<std::size_t> parse_sizes(std::string_view s, const std::string& key) {
  std::vector<std::size_t> out;
  if (s.empty()) return out;
  std::size_t start = 0;
  while (true) {
    const auto comma = s.find(',', start);
    out.push_back(parse_uint(s.substr(start, comma - start), key));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string join_sizes(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

void put_adam(Checkpoint& ckpt, const std::string& prefix, const AdamConfig& adam) {
  ckpt.metadata[prefix + ".lr"] = format_double(adam.lr);
  ckpt.metadata[prefix + ".beta1"] = format_double(adam.beta1);
  ckpt.metadata[prefix + ".beta2"] = format_double(adam.beta2);
  ckpt.metadata[prefix + ".epsilon"] = format_double(adam.epsilon);
}

void require_stage(const Checkpoint& ckpt, const std::string& stage) {
  const std::string& got = ckpt.meta("stage");
  if (got != stage) {
    throw CheckpointError("expected a " + stage + " checkpoint, got stage \"" + got + "\"");
  }
}

void add_mlp(Checkpoint& ckpt, const std::string& prefix, const Mlp& mlp) {
  for (std::size_t i = 0; i < mlp.layers.size(); ++i) {
    const std::string base = prefix + "." + std::to_string(i);
    ckpt.tensors.push_back({base + ".weight", mlp.layers[i].weight});
    ckpt.tensors.push_back({base + ".bias", mlp.layers[i].bias});
  }
}

Dense read_dense(const Checkpoint& ckpt, const std::string& base, std::size_t in,
                 std::size_t out) {
  Dense d{ckpt.tensor(base + ".weight"), ckpt.tensor(base + ".bias")};
  if (d.weight.rows() != in || d.weight.cols() != out || d.bias.rows() != 1 ||
      d.bias.cols() != out) {
    throw CheckpointError("checkpoint tensor " + base + " has unexpected shape " +
                          d.weight.shape_string());
  }
  return d;
}

Mlp read_mlp(const Checkpoint& ckpt, const std::string& prefix,
             const std::vector<std::size_t>& widths, bool activate_output) {
  Mlp mlp;
  mlp.activate_output = activate_output;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    mlp.layers.push_back(
        read_dense(ckpt, prefix + "." + std::to_string(i), widths[i], widths[i + 1]));
  }
  return mlp;
}

}  // namespace

const std::string& Checkpoint::meta(const std::string& key) const {
  const auto it = metadata.find(key);
  if (it == metadata.end()) throw CheckpointError("checkpoint metadata lacks \"" + key + "\"");
  return it->second;
}

const Tensor2& Checkpoint::tensor(std::string_view name) const {
  for (const auto& t : tensors)
    if (t.name == name) return t.value;
  throw CheckpointError("checkpoint lacks tensor \"" + std::string(name) + "\"");
}

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  std::string meta;
  for (const auto& [key, value] : ckpt.metadata) {
    if (key.find_first_of("=\n") != std::string::npos || value.find('\n') != std::string::npos) {
      throw CheckpointError("checkpoint metadata entry \"" + key + "\" is not a single line");
    }
    meta += key + "=" + value + "\n";
  }
  std::string out(kMagic);
  put_u32(out, ckpt.version);
  put_u32(out, static_cast<std::uint32_t>(meta.size()));
  out += meta;
  for (const auto& t : ckpt.tensors) {
    put_u32(out, static_cast<std::uint32_t>(t.name.size()));
    out += t.name;
    put_u32(out, 2);
    put_u64(out, t.value.rows());
    put_u64(out, t.value.cols());
    for (double v : t.value.values()) put_u64(out, std::bit_cast<std::uint64_t>(v));
  }
  return out;
}

Checkpoint parse_checkpoint(std::string_view bytes) {
  Reader in(bytes);
  if (bytes.size() < kMagic.size() || in.take(kMagic.size(), "magic") != kMagic) {
    throw CheckpointError("not a checkpoint: bad magic bytes");
  }
  Checkpoint ckpt;
  ckpt.version = static_cast<std::uint32_t>(in.uint(4, "version"));
  if (ckpt.version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(ckpt.version) +
                          " (expected " + std::to_string(kCheckpointVersion) + ")");
  }
  const auto meta_len = in.uint(4, "metadata length");
  std::istringstream meta{std::string(in.take(meta_len, "metadata"))};
  std::string line;
  while (std::getline(meta, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw CheckpointError("malformed metadata line \"" + line + "\"");
    ckpt.metadata[line.substr(0, eq)] = line.substr(eq + 1);
  }
  while (!in.done()) {
    NamedTensor t;
    t.name = std::string(in.take(in.uint(4, "tensor name length"), "tensor name"));
    const auto rank = in.uint(4, "tensor rank");
    if (rank != 1 && rank != 2) {
      throw CheckpointError("tensor " + t.name + ": unsupported rank " + std::to_string(rank));
    }
    const std::uint64_t rows = rank == 2 ? in.uint(8, "tensor dims") : 1;
    const std::uint64_t cols = in.uint(8, "tensor dims");
    if (cols != 0 && rows > (bytes.size() / 8) / cols) {
      throw CheckpointError("tensor " + t.name + ": dimensions exceed file size");
    }
    std::vector<double> values(rows * cols);
    for (double& v : values) v = std::bit_cast<double>(in.uint(8, "tensor values"));
    t.value = Tensor2(rows, cols, std::move(values));
    ckpt.tensors.push_back(std::move(t));
  }
  return ckpt;
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed: " + path.string());
}

std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string format_norm_stats(const NormStats& stats) {
  std::string out;
  for (std::size_t i = 0; i < stats.size(); ++i) {
    out += (i ? ";" : "") + format_double(stats[i].mean) + ":" + format_double(stats[i].stddev);
  }
  return out;
}

NormStats parse_norm_stats(std::string_view text) {
  NormStats stats;
  if (text.empty()) return stats;
  std::size_t start = 0;
  while (true) {
    const auto semi = text.find(';', start);
    const auto item = text.substr(start, semi - start);
    const auto colon = item.find(':');
    if (colon == std::string_view::npos) throw CheckpointError("malformed norm_stats entry");
    stats.push_back({parse_double(item.substr(0, colon), "norm_stats"),
                     parse_double(item.substr(colon + 1), "norm_stats")});
    if (semi == std::string_view::npos) break;
    start = semi + 1;
  }
  return stats;
}

Checkpoint classifier_checkpoint(const ClassifierModel& model, const Schema& schema,
                                 const NormStats& stats, const ClassifierHyper& hyper,
                                 std::uint64_t seed) {
  Checkpoint ckpt;
  auto& m = ckpt.metadata;
  m["stage"] = "classifier";
  m["schema_hash"] = hex64(schema_hash(schema));
  m["norm_stats"] = format_norm_stats(stats);
  m["seed"] = std::to_string(seed);
  m["input_dim"] = std::to_string(model.input_dim());
  m["feature_dim"] = std::to_string(model.feature_dim());
  m["classes"] = std::to_string(model.num_classes());
  std::vector<std::size_t> hidden;
  for (std::size_t i = 0; i + 1 < model.extractor.layers.size(); ++i)
    hidden.push_back(model.extractor.layers[i].out());
  m["hidden"] = join_sizes(hidden);
  m["epochs"] = std::to_string(hyper.epochs);
  m["batch"] = std::to_string(hyper.batch);
  m["frozen"] = model.frozen ? "1" : "0";
  put_adam(ckpt, "adam", hyper.adam);
  add_mlp(ckpt, "extractor", model.extractor);
  ckpt.tensors.push_back({"head.weight", model.head.weight});
  ckpt.tensors.push_back({"head.bias", model.head.bias});
  return ckpt;
}

ClassifierModel classifier_from_checkpoint(const Checkpoint& ckpt) {
  require_stage(ckpt, "classifier");
  const auto d_in = parse_uint(ckpt.meta("input_dim"), "input_dim");
  const auto dim_z = parse_uint(ckpt.meta("feature_dim"), "feature_dim");
  const auto k = parse_uint(ckpt.meta("classes"), "classes");
  std::vector<std::size_t> widths{d_in};
  for (std::size_t h : parse_sizes(ckpt.meta("hidden"), "hidden")) widths.push_back(h);
  widths.push_back(dim_z);
  ClassifierModel model;
  model.extractor = read_mlp(ckpt, "extractor", widths, true);
  model.head = read_dense(ckpt, "head", dim_z, k);
  model.frozen = true;
  return model;
}

Checkpoint flow_checkpoint(const CondFlowModel& model, const Schema& schema,
                           const NormStats& stats, const FlowHyper& hyper, std::uint64_t seed,
                           std::uint64_t classifier_hash) {
  Checkpoint ckpt;
  auto& m = ckpt.metadata;
  m["stage"] = "flow";
  m["schema_hash"] = hex64(schema_hash(schema));
  m["classifier_hash"] = hex64(classifier_hash);
  m["norm_stats"] = format_norm_stats(stats);
  m["seed"] = std::to_string(seed);
  m["dim"] = std::to_string(model.dim);
  m["cond_dim"] = std::to_string(model.cond_dim);
  m["layers"] = std::to_string(model.layers.size());
  m["hidden"] = std::to_string(hyper.arch.hidden);
  m["hidden_layers"] = std::to_string(hyper.arch.hidden_layers);
  m["alpha"] = format_double(hyper.arch.alpha);
  m["epochs"] = std::to_string(hyper.epochs);
  m["batch"] = std::to_string(hyper.batch);
  m["dequantization"] = format_double(hyper.dequantization);
  put_adam(ckpt, "adam", hyper.adam);
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const std::string base = "layer." + std::to_string(l);
    m[base + ".permutation"] = join_sizes(model.permutations[l]);
    add_mlp(ckpt, base + ".scale", model.layers[l].scale_net);
    add_mlp(ckpt, base + ".shift", model.layers[l].shift_net);
  }
  return ckpt;
}

CondFlowModel flow_from_checkpoint(const Checkpoint& ckpt) {
  require_stage(ckpt, "flow");
  CondFlowModel model;
  model.dim = parse_uint(ckpt.meta("dim"), "dim");
  model.cond_dim = parse_uint(ckpt.meta("cond_dim"), "cond_dim");
  const auto layers = parse_uint(ckpt.meta("layers"), "layers");
  const auto hidden = parse_uint(ckpt.meta("hidden"), "hidden");
  const auto hidden_layers = parse_uint(ckpt.meta("hidden_layers"), "hidden_layers");
  const double alpha = parse_double(ckpt.meta("alpha"), "alpha");
  const std::size_t split = model.dim / 2;
  std::vector<std::size_t> widths{split + model.cond_dim};
  for (std::size_t i = 0; i < hidden_layers; ++i) widths.push_back(hidden);
  widths.push_back(model.dim - split);
  for (std::size_t l = 0; l < layers; ++l) {
    const std::string base = "layer." + std::to_string(l);
    CouplingLayer layer;
    layer.dim = model.dim;
    layer.split = split;
    layer.cond_dim = model.cond_dim;
    layer.alpha = alpha;
    layer.scale_net = read_mlp(ckpt, base + ".scale", widths, false);
    layer.shift_net = read_mlp(ckpt, base + ".shift", widths, false);
    model.layers.push_back(std::move(layer));
    model.permutations.push_back(parse_sizes(ckpt.meta(base + ".permutation"), "permutation"));
  }
  try {
    model.validate();
  } catch (const ContractError& e) {
    throw CheckpointError(std::string("invalid flow checkpoint: ") + e.what());
  }
  return model;
}

}  // namespace csdg
