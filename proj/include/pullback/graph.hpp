#pragma once

#include "pullback/tensor.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace pullback::ad {

/// A trainable tensor with a gradient accumulator of the same shape.
struct Parameter {
  Parameter() = default;
  Parameter(std::string name, Tensor value);

  std::string name;
  Tensor value;
  Tensor grad;
  bool trainable = true;
  bool decay = true;  // subject to weight decay in the optimizer

  void zero_grad() { grad.fill(0.0); }
};

struct NodeId {
  std::uint32_t index = 0;
  friend bool operator==(NodeId, NodeId) = default;
};

enum class Op : std::uint8_t {
  constant,
  parameter,
  add,
  sub,
  mul,
  div,
  matmul,
  relu,
  relu_mask_stop_gradient,
  exp,
  log,
  sin,
  cos,
  tanh,
  square,
  sum,
  sum_rows,  // r x c -> r x 1
  mean,
  l2_norm_sq,
  concat_rows,
  concat_cols,
  slice_cols,
  scale_by_constant,
  gram,
};

const char* to_string(Op op) noexcept;

/// Extra attributes for ops that need them.
struct OpAttrs {
  double constant = 0.0;              // scale_by_constant
  std::vector<std::size_t> columns;   // slice_cols
  std::size_t blocks = 0;             // gram
};

/// Reverse-mode tape. Primal values are computed eagerly when an op is
/// recorded; node ids increase in execution order so the recorded graph is a
/// DAG whose inputs always precede their consumers.
///
/// Binary elementwise ops broadcast the second operand when it is 1x1, 1xc or
/// rx1. Nothing else broadcasts.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;
  Graph(Graph&&) = default;
  Graph& operator=(Graph&&) = default;

  NodeId constant(Tensor value);
  NodeId parameter(Parameter& param);

  NodeId record(Op op, std::span<const NodeId> inputs, OpAttrs attrs = {});

  NodeId add(NodeId a, NodeId b) { return binary(Op::add, a, b); }
  NodeId sub(NodeId a, NodeId b) { return binary(Op::sub, a, b); }
  NodeId mul(NodeId a, NodeId b) { return binary(Op::mul, a, b); }
  NodeId div(NodeId a, NodeId b) { return binary(Op::div, a, b); }
  NodeId matmul(NodeId a, NodeId b) { return binary(Op::matmul, a, b); }
  NodeId relu(NodeId a) { return unary(Op::relu, a); }
  NodeId relu_mask(NodeId a) { return unary(Op::relu_mask_stop_gradient, a); }
  NodeId exp(NodeId a) { return unary(Op::exp, a); }
  NodeId log(NodeId a) { return unary(Op::log, a); }
  NodeId sin(NodeId a) { return unary(Op::sin, a); }
  NodeId cos(NodeId a) { return unary(Op::cos, a); }
  NodeId tanh(NodeId a) { return unary(Op::tanh, a); }
  NodeId square(NodeId a) { return unary(Op::square, a); }
  NodeId sum(NodeId a) { return unary(Op::sum, a); }
  NodeId sum_rows(NodeId a) { return unary(Op::sum_rows, a); }
  NodeId mean(NodeId a) { return unary(Op::mean, a); }
  NodeId l2_norm_sq(NodeId a) { return unary(Op::l2_norm_sq, a); }
  NodeId concat_rows(std::span<const NodeId> parts) { return record(Op::concat_rows, parts); }
  NodeId concat_cols(std::span<const NodeId> parts) { return record(Op::concat_cols, parts); }
  NodeId slice_cols(NodeId a, std::vector<std::size_t> columns);
  NodeId scale(NodeId a, double factor);
  /// `stacked` holds `blocks` row blocks of equal height B. The result is
  /// B x blocks^2 with entry (b, i*blocks + j) = <row b of block i, row b of block j>.
  NodeId gram(NodeId stacked, std::size_t blocks);
  /// `copies` vertical copies of `a`.
  NodeId tile_rows(NodeId a, std::size_t copies);

  const Tensor& value(NodeId id) const;
  std::size_t size() const noexcept { return nodes_.size(); }
  Op op(NodeId id) const { return nodes_.at(id.index).op; }
  std::span<const NodeId> inputs(NodeId id) const { return nodes_.at(id.index).inputs; }

  /// Propagates d(root)/d(node) back through the tape and adds the result to
  /// the gradient accumulator of every reachable trainable parameter.
  void backward(NodeId root);

  /// Gradient of the most recent backward pass w.r.t. any node (empty if the
  /// node was unreachable or does not depend on a parameter).
  const Tensor& gradient(NodeId id) const;

 private:
  struct Node {
    Op op;
    std::vector<NodeId> inputs;
    Tensor value;
    Parameter* param = nullptr;
    OpAttrs attrs;
    bool needs_grad = false;
  };

  NodeId unary(Op op, NodeId a) { return record(op, std::span<const NodeId>(&a, 1)); }
  NodeId binary(Op op, NodeId a, NodeId b) {
    const NodeId in[2] = {a, b};
    return record(op, in);
  }
  NodeId push(Node node);
  void propagate(const Node& node, const Tensor& g);

  std::vector<Node> nodes_;
  std::vector<Tensor> grads_;
};

/// Max over all parameter entries of |autodiff - central difference| /
/// max(1, |central difference|). `loss` must rebuild its graph on every call
/// and return the scalar root.
double grad_check(const std::function<NodeId(Graph&)>& loss, std::span<Parameter* const> params,
                  double h);

}  // namespace pullback::ad
