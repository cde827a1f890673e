#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "csdg/tensor.hpp"

namespace csdg {

struct NodeId {
  std::size_t index = 0;
};

// Tape-style reverse-mode autodiff. Nodes are appended in evaluation order,
// so parents always precede children and the tape is acyclic. A fresh graph
// is built per minibatch and thrown away after backward().
class Graph {
 public:
  // Constant input; receives no gradient.
  NodeId input(Tensor2 value);
  // Trainable leaf. backward() returns gradients in registration order.
  NodeId parameter(Tensor2 value);

  NodeId matmul(NodeId a, NodeId b);
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId add_row(NodeId x, NodeId row);
  NodeId unary(NodeId x, Unary kind);
  NodeId scale(NodeId x, double factor);
  NodeId add_scalar(NodeId x, double c);
  NodeId slice_cols(NodeId x, std::size_t begin, std::size_t end);
  NodeId concat_cols(NodeId a, NodeId b);
  NodeId permute_cols(NodeId x, std::span<const std::size_t> perm);
  NodeId row_sum(NodeId x);
  NodeId sum(NodeId x);
  NodeId mean(NodeId x);
  NodeId softmax_rows(NodeId x);
  // -(1/N) sum_i log max(p[i, y_i], kLogClamp). Clamped entries get zero
  // gradient and are tallied in clamped_log_count().
  NodeId cross_entropy(NodeId probs, std::span<const int> labels);

  const Tensor2& value(NodeId id) const { return nodes_.at(id.index).value; }
  std::size_t size() const { return nodes_.size(); }
  std::size_t parameter_count() const { return param_nodes_.size(); }
  std::size_t clamped_log_count() const { return clamped_; }

  // Gradient of a 1x1 output with respect to every parameter, in the order
  // the parameters were registered. Unreachable parameters get zeros.
  std::vector<Tensor2> backward(NodeId output) const;

  static constexpr double kLogClamp = 1e-12;

 private:
  enum class Op {
    leaf, matmul, add, sub, mul, add_row, unary, scale, add_scalar, slice_cols,
    concat_cols, permute_cols, row_sum, sum, mean, softmax_rows, cross_entropy
  };

  struct Node {
    Op op = Op::leaf;
    std::size_t lhs = 0;
    std::size_t rhs = 0;
    Tensor2 value;
    Unary kind = Unary::neg;
    double factor = 0.0;
    std::size_t begin = 0;
    std::size_t end = 0;
    std::vector<std::size_t> perm;
    std::vector<int> labels;
  };

  NodeId push(Node node);
  const Node& at(NodeId id) const;

  std::vector<Node> nodes_;
  std::vector<std::size_t> param_nodes_;
  std::size_t clamped_ = 0;
};

}  // namespace csdg
