#include "csdg/condflow.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "csdg/error.hpp"

namespace csdg {

namespace {

const double kLog2Pi = std::log(2.0 * std::numbers::pi);

void require_batch(const CondFlowModel& model, const Tensor2& x, const Tensor2& z,
                   const char* op) {
  if (x.cols() != model.dim || z.cols() != model.cond_dim || x.rows() != z.rows()) {
    throw ShapeError(std::string(op) + ": flow expects " + std::to_string(model.dim) + " + " +
                     std::to_string(model.cond_dim) + " columns, got data " + x.shape_string() +
                     " and conditioning " + z.shape_string());
  }
}

void require_layer_batch(const CouplingLayer& layer, const Tensor2& x, const Tensor2& z,
                         const char* op) {
  if (x.cols() != layer.dim || z.cols() != layer.cond_dim || x.rows() != z.rows()) {
    throw ShapeError(std::string(op) + ": layer expects " + std::to_string(layer.dim) + " + " +
                     std::to_string(layer.cond_dim) + " columns, got data " + x.shape_string() +
                     " and conditioning " + z.shape_string());
  }
}

std::vector<std::size_t> inverse_permutation(std::span<const std::size_t> perm) {
  std::vector<std::size_t> inv(perm.size());
  for (std::size_t j = 0; j < perm.size(); ++j) inv[perm[j]] = j;
  return inv;
}

// Log-scales alpha * tanh(raw) and shifts for the passive half `head`.
std::pair<Tensor2, Tensor2> scale_shift(const CouplingLayer& layer, const Tensor2& head,
                                        const Tensor2& z) {
  const Tensor2 input = concat_cols(head, z);
  Tensor2 log_scale = scale(apply_unary(layer.scale_net.forward(input), Unary::tanh), layer.alpha);
  return {std::move(log_scale), layer.shift_net.forward(input)};
}

CouplingLayer make_layer(std::size_t dim, std::size_t cond_dim, const FlowArch& arch, Rng& rng) {
  CouplingLayer layer;
  layer.dim = dim;
  layer.split = dim / 2;
  layer.cond_dim = cond_dim;
  layer.alpha = arch.alpha;
  std::vector<std::size_t> widths{layer.split + cond_dim};
  for (std::size_t i = 0; i < arch.hidden_layers; ++i) widths.push_back(arch.hidden);
  widths.push_back(dim - layer.split);
  layer.scale_net = make_mlp(widths, false, rng);
  layer.shift_net = make_mlp(widths, false, rng);
  for (Mlp* net : {&layer.scale_net, &layer.shift_net}) {
    Dense& last = net->layers.back();
    last.weight = Tensor2(last.in(), last.out());
    last.bias = Tensor2(1, last.out());
  }
  return layer;
}

}  // namespace

std::vector<Tensor2*> CondFlowModel::parameters() {
  std::vector<Tensor2*> out;
  for (CouplingLayer& layer : layers) {
    for (Tensor2* p : layer.scale_net.parameters()) out.push_back(p);
    for (Tensor2* p : layer.shift_net.parameters()) out.push_back(p);
  }
  return out;
}

std::vector<const Tensor2*> CondFlowModel::parameters() const {
  std::vector<const Tensor2*> out;
  for (const CouplingLayer& layer : layers) {
    for (const Tensor2* p : layer.scale_net.parameters()) out.push_back(p);
    for (const Tensor2* p : layer.shift_net.parameters()) out.push_back(p);
  }
  return out;
}

void CondFlowModel::validate() const {
  if (dim < 2) throw ContractError("flow: data dimension must be at least 2");
  if (layers.size() < 2) throw ContractError("flow: need at least 2 coupling layers");
  if (permutations.size() != layers.size()) {
    throw ContractError("flow: one permutation per coupling layer required");
  }
  for (const auto& perm : permutations) {
    std::vector<bool> seen(dim, false);
    if (perm.size() != dim) throw ContractError("flow: permutation has wrong length");
    for (std::size_t p : perm) {
      if (p >= dim || seen[p]) throw ContractError("flow: permutation is not a bijection");
      seen[p] = true;
    }
  }
  for (const auto& layer : layers) {
    const std::size_t in = layer.split + layer.cond_dim;
    const std::size_t out = layer.dim - layer.split;
    if (layer.dim != dim || layer.cond_dim != cond_dim || layer.split != dim / 2 ||
        !(layer.alpha > 0.0)) {
      throw ContractError("flow: coupling layer does not match the model dimensions");
    }
    for (const Mlp* net : {&layer.scale_net, &layer.shift_net}) {
      if (net->layers.empty() || net->in() != in || net->out() != out || net->activate_output) {
        throw ContractError("flow: scale/shift network has the wrong shape");
      }
    }
  }
}

CondFlowModel init_flow(std::size_t dim, std::size_t cond_dim, const FlowArch& arch,
                        std::uint64_t seed) {
  if (arch.hidden == 0) throw ContractError("init_flow: hidden width must be positive");
  Rng rng(seed);
  CondFlowModel model;
  model.dim = dim;
  model.cond_dim = cond_dim;
  std::vector<std::size_t> reversal(dim);
  for (std::size_t j = 0; j < dim; ++j) reversal[j] = dim - 1 - j;
  for (std::size_t l = 0; l < arch.layers; ++l) {
    if (dim < 2) break;
    model.layers.push_back(make_layer(dim, cond_dim, arch, rng));
    model.permutations.push_back(reversal);
  }
  model.validate();
  return model;
}

FlowOutput coupling_forward(const CouplingLayer& layer, const Tensor2& x, const Tensor2& z) {
  require_layer_batch(layer, x, z, "coupling_forward");
  const Tensor2 head = slice_cols(x, 0, layer.split);
  const Tensor2 tail = slice_cols(x, layer.split, layer.dim);
  const auto [log_scale, shift] = scale_shift(layer, head, z);
  const Tensor2 s = apply_unary(log_scale, Unary::exp);
  FlowOutput out;
  out.y = concat_cols(head, add(hadamard(s, tail), shift));
  require_finite(out.y, "coupling_forward");
  const Tensor2 ld = row_sums(log_scale);
  out.logdet.assign(ld.values().begin(), ld.values().end());
  return out;
}

Tensor2 coupling_inverse(const CouplingLayer& layer, const Tensor2& y, const Tensor2& z) {
  require_layer_batch(layer, y, z, "coupling_inverse");
  const Tensor2 head = slice_cols(y, 0, layer.split);
  const Tensor2 tail = slice_cols(y, layer.split, layer.dim);
  const auto [log_scale, shift] = scale_shift(layer, head, z);
  const Tensor2 s = apply_unary(log_scale, Unary::exp);
  Tensor2 x = concat_cols(head, divide(sub(tail, shift), s));
  require_finite(x, "coupling_inverse");
  return x;
}

FlowOutput flow_forward(const CondFlowModel& model, const Tensor2& x, const Tensor2& z) {
  require_batch(model, x, z, "flow_forward");
  FlowOutput out;
  out.y = x;
  out.logdet.assign(x.rows(), 0.0);
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    FlowOutput step = coupling_forward(model.layers[l], out.y, z);
    for (std::size_t i = 0; i < x.rows(); ++i) out.logdet[i] += step.logdet[i];
    out.y = permute_cols(step.y, model.permutations[l]);
  }
  return out;
}

Tensor2 flow_inverse(const CondFlowModel& model, const Tensor2& latent, const Tensor2& z) {
  require_batch(model, latent, z, "flow_inverse");
  Tensor2 x = latent;
  for (std::size_t l = model.layers.size(); l-- > 0;) {
    x = permute_cols(x, inverse_permutation(model.permutations[l]));
    x = coupling_inverse(model.layers[l], x, z);
  }
  return x;
}

double nll(const CondFlowModel& model, const Tensor2& x, const Tensor2& z) {
  if (x.rows() == 0) throw ContractError("nll: empty batch");
  const FlowOutput out = flow_forward(model, x, z);
  double total = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double sq = 0.0;
    for (double v : out.y.row(i)) sq += v * v;
    total += 0.5 * sq + 0.5 * static_cast<double>(model.dim) * kLog2Pi - out.logdet[i];
  }
  return total / static_cast<double>(x.rows());
}

NodeId nll_node(Graph& graph, const CondFlowModel& model, const Tensor2& x, const Tensor2& z) {
  require_batch(model, x, z, "nll_node");
  if (x.rows() == 0) throw ContractError("nll: empty batch");
  const NodeId cond = graph.input(z);
  NodeId h = graph.input(x);
  NodeId logdet{};
  bool have_logdet = false;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const CouplingLayer& layer = model.layers[l];
    const BoundMlp scale_net = bind(graph, layer.scale_net);
    const BoundMlp shift_net = bind(graph, layer.shift_net);
    const NodeId head = graph.slice_cols(h, 0, layer.split);
    const NodeId tail = graph.slice_cols(h, layer.split, layer.dim);
    const NodeId input = graph.concat_cols(head, cond);
    const NodeId log_scale =
        graph.scale(graph.unary(scale_net.forward(graph, input), Unary::tanh), layer.alpha);
    const NodeId shifted = graph.add(graph.mul(graph.unary(log_scale, Unary::exp), tail),
                                     shift_net.forward(graph, input));
    const NodeId layer_logdet = graph.row_sum(log_scale);
    logdet = have_logdet ? graph.add(logdet, layer_logdet) : layer_logdet;
    have_logdet = true;
    h = graph.permute_cols(graph.concat_cols(head, shifted), model.permutations[l]);
  }
  const NodeId half_sq = graph.scale(graph.row_sum(graph.unary(h, Unary::square)), 0.5);
  const NodeId per_row = have_logdet ? graph.sub(half_sq, logdet) : half_sq;
  return graph.add_scalar(graph.mean(per_row), 0.5 * static_cast<double>(model.dim) * kLog2Pi);
}

FlowHistory train_flow(CondFlowModel& model, const Dataset& train,
                       const ClassifierModel& classifier, const FlowHyper& hyper,
                       std::uint64_t seed) {
  if (!classifier.frozen) throw ContractError("train_flow: classifier must be frozen first");
  if (classifier.input_dim() != train.width() || model.dim != train.width() ||
      model.cond_dim != classifier.feature_dim()) {
    throw ShapeError("train_flow: flow (" + std::to_string(model.dim) + ", " +
                     std::to_string(model.cond_dim) + "), classifier (" +
                     std::to_string(classifier.input_dim()) + " -> " +
                     std::to_string(classifier.feature_dim()) + ") and data width " +
                     std::to_string(train.width()) + " disagree");
  }
  FlowHistory history;
  if (hyper.epochs == 0) return history;
  if (train.size() == 0) throw ContractError("train_flow: empty training set");
  if (hyper.batch == 0) throw ContractError("train_flow: batch size must be positive");

  const Tensor2 features = extract_features(classifier, train.x);
  const auto blocks = one_hot_blocks(train.schema);
  Rng rng(seed);
  auto params = model.parameters();
  AdamState state(params);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
    rng.shuffle(order.begin(), order.end());
    double loss_sum = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += hyper.batch, ++batch_index) {
      const std::size_t stop = std::min(order.size(), start + hyper.batch);
      const std::vector<std::size_t> rows(order.begin() + static_cast<long>(start),
                                          order.begin() + static_cast<long>(stop));
      Tensor2 x = select_rows(train.x, rows);
      for (const auto& [begin, end] : blocks)
        for (std::size_t i = 0; i < x.rows(); ++i)
          for (std::size_t j = begin; j < end; ++j) x(i, j) += rng.uniform(0.0, hyper.dequantization);
      const Tensor2 z = select_rows(features, rows);

      try {
        Graph g;
        const NodeId loss = nll_node(g, model, x, z);
        const auto grads = g.backward(loss);
        for (const Tensor2& grad : grads) require_finite(grad, "nll gradient");
        adam_step(params, grads, state, hyper.adam);
        loss_sum += g.value(loss)(0, 0) * static_cast<double>(rows.size());
      } catch (const DomainError& e) {
        throw TrainingError("train_flow: epoch " + std::to_string(epoch) + ", batch " +
                            std::to_string(batch_index) + ": " + e.what());
      }
    }
    history.epoch_nll.push_back(loss_sum / static_cast<double>(train.size()));
  }
  return history;
}

Tensor2 conditional_sample(const CondFlowModel& model, const ClassifierModel& classifier,
                           const Tensor2& source_x, const Tensor2& latent) {
  return flow_inverse(model, latent, extract_features(classifier, source_x));
}

Dataset generate(const CondFlowModel& model, const ClassifierModel& classifier,
                 const Dataset& source, std::span<const std::size_t> per_class_counts,
                 std::uint64_t seed) {
  const std::size_t k = source.schema.num_classes();
  if (per_class_counts.size() != k) {
    throw ContractError("generate: " + std::to_string(per_class_counts.size()) +
                        " class counts for " + std::to_string(k) + " classes");
  }
  if (source.width() != model.dim || classifier.input_dim() != model.dim ||
      classifier.feature_dim() != model.cond_dim) {
    throw ShapeError("generate: flow, classifier and source dimensions disagree");
  }
  std::vector<std::vector<std::size_t>> by_class(k);
  for (std::size_t i = 0; i < source.size(); ++i)
    by_class[static_cast<std::size_t>(source.y[i])].push_back(i);

  std::vector<std::size_t> picks;
  std::vector<int> labels;
  for (std::size_t c = 0; c < k; ++c) {
    if (per_class_counts[c] == 0) continue;
    if (by_class[c].empty()) {
      throw ContractError("generate: class \"" + source.schema.classes[c] +
                          "\" has no source rows");
    }
    for (std::size_t i = 0; i < per_class_counts[c]; ++i) {
      picks.push_back(by_class[c][i % by_class[c].size()]);
      labels.push_back(static_cast<int>(c));
    }
  }

  Dataset out;
  out.schema = source.schema;
  out.stats = source.stats;
  out.provenance.role = "synthetic";
  out.y = labels;
  if (picks.empty()) {
    out.x = Tensor2(0, model.dim);
    return out;
  }
  Rng rng(seed);
  Tensor2 latent(picks.size(), model.dim);
  for (double& v : latent.values()) v = rng.normal();
  out.x = conditional_sample(model, classifier, select_rows(source.x, picks), latent);
  rediscretize(out.x, out.schema);
  return out;
}

std::vector<std::size_t> rebalance_counts(std::span<const std::size_t> histogram) {
  if (histogram.empty()) throw ContractError("rebalance_counts: empty histogram");
  const std::size_t top = *std::max_element(histogram.begin(), histogram.end());
  std::vector<std::size_t> counts;
  counts.reserve(histogram.size());
  for (std::size_t h : histogram) counts.push_back(top - h);
  return counts;
}

}  // namespace csdg
