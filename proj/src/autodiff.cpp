#include "csdg/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "csdg/error.hpp"

namespace csdg {

namespace {

void accumulate(Tensor2& slot, const Tensor2& delta) {
  if (slot.empty() && !delta.empty()) {
    slot = delta;
    return;
  }
  auto s = slot.values();
  auto d = delta.values();
  for (std::size_t i = 0; i < s.size(); ++i) s[i] += d[i];
}

}  // namespace

NodeId Graph::push(Node node) {
  require_finite(node.value, "graph");
  nodes_.push_back(std::move(node));
  return NodeId{nodes_.size() - 1};
}

const Graph::Node& Graph::at(NodeId id) const {
  if (id.index >= nodes_.size()) {
    throw ContractError("graph: node " + std::to_string(id.index) + " does not exist");
  }
  return nodes_[id.index];
}

NodeId Graph::input(Tensor2 value) {
  Node n;
  n.value = std::move(value);
  return push(std::move(n));
}

NodeId Graph::parameter(Tensor2 value) {
  NodeId id = input(std::move(value));
  param_nodes_.push_back(id.index);
  return id;
}

NodeId Graph::matmul(NodeId a, NodeId b) {
  Node n;
  n.op = Op::matmul;
  n.lhs = a.index;
  n.rhs = b.index;
  n.value = csdg::matmul(at(a).value, at(b).value);
  return push(std::move(n));
}

NodeId Graph::add(NodeId a, NodeId b) {
  Node n;
  n.op = Op::add;
  n.lhs = a.index;
  n.rhs = b.index;
  n.value = csdg::add(at(a).value, at(b).value);
  return push(std::move(n));
}

NodeId Graph::sub(NodeId a, NodeId b) {
  Node n;
  n.op = Op::sub;
  n.lhs = a.index;
  n.rhs = b.index;
  n.value = csdg::sub(at(a).value, at(b).value);
  return push(std::move(n));
}

NodeId Graph::mul(NodeId a, NodeId b) {
  Node n;
  n.op = Op::mul;
  n.lhs = a.index;
  n.rhs = b.index;
  n.value = hadamard(at(a).value, at(b).value);
  return push(std::move(n));
}

NodeId Graph::add_row(NodeId x, NodeId row) {
  Node n;
  n.op = Op::add_row;
  n.lhs = x.index;
  n.rhs = row.index;
  n.value = csdg::add_row(at(x).value, at(row).value);
  return push(std::move(n));
}

NodeId Graph::unary(NodeId x, Unary kind) {
  Node n;
  n.op = Op::unary;
  n.lhs = x.index;
  n.kind = kind;
  n.value = apply_unary(at(x).value, kind);
  return push(std::move(n));
}

NodeId Graph::scale(NodeId x, double factor) {
  Node n;
  n.op = Op::scale;
  n.lhs = x.index;
  n.factor = factor;
  n.value = csdg::scale(at(x).value, factor);
  return push(std::move(n));
}

NodeId Graph::add_scalar(NodeId x, double c) {
  Node n;
  n.op = Op::add_scalar;
  n.lhs = x.index;
  n.value = at(x).value;
  for (double& v : n.value.values()) v += c;
  return push(std::move(n));
}

NodeId Graph::slice_cols(NodeId x, std::size_t begin, std::size_t end) {
  Node n;
  n.op = Op::slice_cols;
  n.lhs = x.index;
  n.begin = begin;
  n.end = end;
  n.value = csdg::slice_cols(at(x).value, begin, end);
  return push(std::move(n));
}

NodeId Graph::concat_cols(NodeId a, NodeId b) {
  Node n;
  n.op = Op::concat_cols;
  n.lhs = a.index;
  n.rhs = b.index;
  n.value = csdg::concat_cols(at(a).value, at(b).value);
  return push(std::move(n));
}

NodeId Graph::permute_cols(NodeId x, std::span<const std::size_t> perm) {
  Node n;
  n.op = Op::permute_cols;
  n.lhs = x.index;
  n.perm.assign(perm.begin(), perm.end());
  n.value = csdg::permute_cols(at(x).value, perm);
  return push(std::move(n));
}

NodeId Graph::row_sum(NodeId x) {
  Node n;
  n.op = Op::row_sum;
  n.lhs = x.index;
  n.value = row_sums(at(x).value);
  return push(std::move(n));
}

NodeId Graph::sum(NodeId x) {
  Node n;
  n.op = Op::sum;
  n.lhs = x.index;
  n.value = Tensor2(1, 1, csdg::sum(at(x).value));
  return push(std::move(n));
}

NodeId Graph::mean(NodeId x) {
  const Tensor2& v = at(x).value;
  if (v.empty()) throw ContractError("graph mean: empty tensor");
  Node n;
  n.op = Op::mean;
  n.lhs = x.index;
  n.value = Tensor2(1, 1, csdg::sum(v) / static_cast<double>(v.size()));
  return push(std::move(n));
}

NodeId Graph::softmax_rows(NodeId x) {
  Node n;
  n.op = Op::softmax_rows;
  n.lhs = x.index;
  n.value = csdg::softmax_rows(at(x).value);
  return push(std::move(n));
}

NodeId Graph::cross_entropy(NodeId probs, std::span<const int> labels) {
  const Tensor2& p = at(probs).value;
  if (p.rows() != labels.size()) {
    throw ShapeError("cross_entropy: " + std::to_string(labels.size()) + " labels for probs " +
                     p.shape_string());
  }
  if (p.rows() == 0) throw ContractError("cross_entropy: empty batch");
  double total = 0.0;
  for (std::size_t i = 0; i < p.rows(); ++i) {
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= p.cols()) {
      throw ContractError("cross_entropy: label " + std::to_string(y) + " out of range at row " +
                          std::to_string(i));
    }
    double pi = p(i, static_cast<std::size_t>(y));
    if (pi < kLogClamp) {
      pi = kLogClamp;
      ++clamped_;
    }
    total -= std::log(pi);
  }
  Node n;
  n.op = Op::cross_entropy;
  n.lhs = probs.index;
  n.labels.assign(labels.begin(), labels.end());
  n.value = Tensor2(1, 1, total / static_cast<double>(p.rows()));
  return push(std::move(n));
}

std::vector<Tensor2> Graph::backward(NodeId output) const {
  const Node& out = at(output);
  if (out.value.rows() != 1 || out.value.cols() != 1) {
    throw ContractError("backward: output must be 1x1, got " + out.value.shape_string());
  }

  std::vector<Tensor2> grads(nodes_.size());
  grads[output.index] = Tensor2(1, 1, 1.0);

  for (std::size_t idx = output.index + 1; idx-- > 0;) {
    const Tensor2& g = grads[idx];
    if (g.empty()) continue;
    const Node& n = nodes_[idx];
    switch (n.op) {
      case Op::leaf:
        break;
      case Op::matmul:
        accumulate(grads[n.lhs], matmul_a_bt(g, nodes_[n.rhs].value));
        accumulate(grads[n.rhs], matmul_at_b(nodes_[n.lhs].value, g));
        break;
      case Op::add:
        accumulate(grads[n.lhs], g);
        accumulate(grads[n.rhs], g);
        break;
      case Op::sub:
        accumulate(grads[n.lhs], g);
        accumulate(grads[n.rhs], csdg::scale(g, -1.0));
        break;
      case Op::mul:
        accumulate(grads[n.lhs], hadamard(g, nodes_[n.rhs].value));
        accumulate(grads[n.rhs], hadamard(g, nodes_[n.lhs].value));
        break;
      case Op::add_row:
        accumulate(grads[n.lhs], g);
        accumulate(grads[n.rhs], col_sums(g));
        break;
      case Op::unary:
        accumulate(grads[n.lhs],
                   hadamard(g, unary_derivative(nodes_[n.lhs].value, n.value, n.kind)));
        break;
      case Op::scale:
        accumulate(grads[n.lhs], csdg::scale(g, n.factor));
        break;
      case Op::add_scalar:
        accumulate(grads[n.lhs], g);
        break;
      case Op::slice_cols: {
        const Tensor2& x = nodes_[n.lhs].value;
        Tensor2 d(x.rows(), x.cols());
        for (std::size_t i = 0; i < x.rows(); ++i)
          for (std::size_t j = n.begin; j < n.end; ++j) d(i, j) = g(i, j - n.begin);
        accumulate(grads[n.lhs], d);
        break;
      }
      case Op::concat_cols: {
        const std::size_t split = nodes_[n.lhs].value.cols();
        accumulate(grads[n.lhs], csdg::slice_cols(g, 0, split));
        accumulate(grads[n.rhs], csdg::slice_cols(g, split, g.cols()));
        break;
      }
      case Op::permute_cols: {
        Tensor2 d(g.rows(), g.cols());
        for (std::size_t i = 0; i < g.rows(); ++i)
          for (std::size_t j = 0; j < n.perm.size(); ++j) d(i, n.perm[j]) += g(i, j);
        accumulate(grads[n.lhs], d);
        break;
      }
      case Op::row_sum: {
        const Tensor2& x = nodes_[n.lhs].value;
        Tensor2 d(x.rows(), x.cols());
        for (std::size_t i = 0; i < x.rows(); ++i)
          for (std::size_t j = 0; j < x.cols(); ++j) d(i, j) = g(i, 0);
        accumulate(grads[n.lhs], d);
        break;
      }
      case Op::sum: {
        const Tensor2& x = nodes_[n.lhs].value;
        accumulate(grads[n.lhs], Tensor2(x.rows(), x.cols(), g(0, 0)));
        break;
      }
      case Op::mean: {
        const Tensor2& x = nodes_[n.lhs].value;
        accumulate(grads[n.lhs],
                   Tensor2(x.rows(), x.cols(), g(0, 0) / static_cast<double>(x.size())));
        break;
      }
      case Op::softmax_rows: {
        const Tensor2& y = n.value;
        Tensor2 d(y.rows(), y.cols());
        for (std::size_t i = 0; i < y.rows(); ++i) {
          double dot = 0.0;
          for (std::size_t j = 0; j < y.cols(); ++j) dot += g(i, j) * y(i, j);
          for (std::size_t j = 0; j < y.cols(); ++j) d(i, j) = y(i, j) * (g(i, j) - dot);
        }
        accumulate(grads[n.lhs], d);
        break;
      }
      case Op::cross_entropy: {
        const Tensor2& p = nodes_[n.lhs].value;
        Tensor2 d(p.rows(), p.cols());
        const double inv_n = g(0, 0) / static_cast<double>(p.rows());
        for (std::size_t i = 0; i < p.rows(); ++i) {
          const auto y = static_cast<std::size_t>(n.labels[i]);
          if (p(i, y) >= kLogClamp) d(i, y) = -inv_n / p(i, y);
        }
        accumulate(grads[n.lhs], d);
        break;
      }
    }
  }

  std::vector<Tensor2> result;
  result.reserve(param_nodes_.size());
  for (std::size_t idx : param_nodes_) {
    if (grads[idx].empty()) {
      const Tensor2& v = nodes_[idx].value;
      result.emplace_back(v.rows(), v.cols());
    } else {
      result.push_back(std::move(grads[idx]));
    }
  }
  return result;
}

}  // namespace csdg
