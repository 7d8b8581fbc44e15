#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "lcc/tensor.hpp"

namespace lcc {

enum class OpKind {
  leaf,
  matmul,
  add,
  sub,
  mul_elementwise,
  div,
  scale,
  concat,
  slice,
  mean,
  max,
  sum,
  relu,
  conv1d_temporal,
  softmax,
  cosine_similarity,
  cosine_matrix,
  cosine_gram,
  bce_mean,
  mse_mean,
  cross_entropy,
  clamp,
  mask_zero,
  reshape,
  transpose,
};

std::string_view op_name(OpKind kind);

/// Every differentiable op in the catalog (everything except leaf).
const std::vector<OpKind>& differentiable_ops();

/// Attributes shared by the op catalog; each op reads only the fields it needs.
struct OpAttrs {
  std::optional<std::size_t> axis;  // reductions: absent reduces everything
  double temperature = 1.0;         // softmax
  double factor = 1.0;              // scale
  double lo = 0.0;                  // clamp
  double hi = 0.0;
  std::size_t stride = 1;  // conv1d_temporal
  std::size_t dilation = 1;
  std::size_t window = 1;
  std::size_t begin = 0;  // slice
  std::size_t end = 0;
  std::size_t label = 0;             // cross_entropy
  Shape shape;                       // reshape
  std::vector<std::size_t> perm;     // transpose
  std::vector<std::size_t> indices;  // mask_zero

  static OpAttrs along(std::size_t axis) {
    OpAttrs a;
    a.axis = axis;
    return a;
  }
  static OpAttrs softmax(std::size_t axis, double temperature) {
    OpAttrs a = along(axis);
    a.temperature = temperature;
    return a;
  }
  static OpAttrs scaled(double factor) {
    OpAttrs a;
    a.factor = factor;
    return a;
  }
  static OpAttrs conv(std::size_t window, std::size_t stride, std::size_t dilation) {
    OpAttrs a;
    a.window = window;
    a.stride = stride;
    a.dilation = dilation;
    return a;
  }
  static OpAttrs slicing(std::size_t axis, std::size_t begin, std::size_t end) {
    OpAttrs a = along(axis);
    a.begin = begin;
    a.end = end;
    return a;
  }
  static OpAttrs reshaping(Shape shape) {
    OpAttrs a;
    a.shape = std::move(shape);
    return a;
  }
  static OpAttrs permuting(std::vector<std::size_t> perm) {
    OpAttrs a;
    a.perm = std::move(perm);
    return a;
  }
  static OpAttrs masking(std::size_t axis, std::vector<std::size_t> indices) {
    OpAttrs a = along(axis);
    a.indices = std::move(indices);
    return a;
  }
  static OpAttrs clamping(double lo, double hi) {
    OpAttrs a;
    a.lo = lo;
    a.hi = hi;
    return a;
  }
  static OpAttrs class_label(std::size_t label) {
    OpAttrs a;
    a.label = label;
    return a;
  }
};

/// Output shape of `kind` for the given input shapes; throws ContractViolation
/// naming the op and the offending dimensions.
Shape infer_shape(OpKind kind, const std::vector<Shape>& inputs, const OpAttrs& attrs);

/// Gradients of a scalar loss with respect to the graph's parameter leaves.
class Gradients {
 public:
  const Tensor& at(NodeId id) const;
  bool contains(NodeId id) const { return grads_.count(id) != 0; }
  std::size_t size() const { return grads_.size(); }
  auto begin() const { return grads_.begin(); }
  auto end() const { return grads_.end(); }
  void set(NodeId id, Tensor t) { grads_.insert_or_assign(id, std::move(t)); }

  /// First node (in reverse order) whose backward turned a finite upstream
  /// gradient into a non-finite input gradient.
  std::optional<NodeId> first_non_finite;

 private:
  std::map<NodeId, Tensor> grads_;
};

/// Append-only computation graph. Inputs always precede outputs, so node order
/// is a topological order. One graph is built and differentiated by one thread.
class Graph {
 public:
  explicit Graph(std::uint64_t seed = 0) : rng_(seed) {}

  NodeId constant(Tensor value);
  NodeId parameter(Tensor value);
  NodeId apply(OpKind kind, std::vector<NodeId> inputs, OpAttrs attrs = {});

  const Tensor& value(NodeId id) const { return nodes_.at(id).value; }
  OpKind kind(NodeId id) const { return nodes_.at(id).kind; }
  const std::vector<NodeId>& inputs(NodeId id) const { return nodes_.at(id).inputs; }
  bool requires_grad(NodeId id) const { return nodes_.at(id).requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  /// Reverse-mode sweep from a scalar node. Every parameter leaf gets an
  /// entry; leaves the loss does not reach get zeros.
  Gradients backward(NodeId loss) const;

  /// First node whose value is non-finite although all of its inputs are finite.
  std::optional<NodeId> first_non_finite() const;

  /// Seeded stream for stochastic ops (drop masks).
  std::mt19937_64& rng() { return rng_; }

  NodeId matmul(NodeId a, NodeId b) { return apply(OpKind::matmul, {a, b}); }
  NodeId add(NodeId a, NodeId b) { return apply(OpKind::add, {a, b}); }
  NodeId sub(NodeId a, NodeId b) { return apply(OpKind::sub, {a, b}); }
  NodeId mul(NodeId a, NodeId b) { return apply(OpKind::mul_elementwise, {a, b}); }
  NodeId div(NodeId a, NodeId b) { return apply(OpKind::div, {a, b}); }
  NodeId scale(NodeId a, double f) { return apply(OpKind::scale, {a}, OpAttrs::scaled(f)); }
  NodeId relu(NodeId a) { return apply(OpKind::relu, {a}); }
  NodeId sum(NodeId a) { return apply(OpKind::sum, {a}); }
  NodeId sum(NodeId a, std::size_t axis) { return apply(OpKind::sum, {a}, OpAttrs::along(axis)); }
  NodeId mean(NodeId a) { return apply(OpKind::mean, {a}); }
  NodeId mean(NodeId a, std::size_t axis) { return apply(OpKind::mean, {a}, OpAttrs::along(axis)); }
  NodeId max(NodeId a, std::size_t axis) { return apply(OpKind::max, {a}, OpAttrs::along(axis)); }
  NodeId reshape(NodeId a, Shape s) { return apply(OpKind::reshape, {a}, OpAttrs::reshaping(std::move(s))); }
  NodeId transpose(NodeId a, std::vector<std::size_t> perm) {
    return apply(OpKind::transpose, {a}, OpAttrs::permuting(std::move(perm)));
  }
  NodeId slice(NodeId a, std::size_t axis, std::size_t begin, std::size_t end) {
    return apply(OpKind::slice, {a}, OpAttrs::slicing(axis, begin, end));
  }
  NodeId concat(std::vector<NodeId> parts, std::size_t axis) {
    return apply(OpKind::concat, std::move(parts), OpAttrs::along(axis));
  }

 private:
  struct Node {
    OpKind kind = OpKind::leaf;
    std::vector<NodeId> inputs;
    Tensor value;
    OpAttrs attrs;
    std::vector<std::size_t> saved_index;  // argmax positions
    std::vector<double> saved_aux;         // norms and similar
    bool requires_grad = false;
  };

  std::vector<Node> nodes_;
  std::mt19937_64 rng_;
};

/// Free-function form of Graph::apply over tensors. Inputs carrying a node id
/// refer to existing nodes; others are added as leaves (parameters when
/// requires_grad is set). The returned tensor carries its node id.
Tensor forward(Graph& graph, OpKind kind, const std::vector<Tensor>& inputs,
               const OpAttrs& attrs = {});

Gradients backward(const Graph& graph, NodeId loss);

namespace detail {
struct SavedContext {
  std::vector<std::size_t>& index;
  std::vector<double>& aux;
};
void forward_op(OpKind kind, const std::vector<const Tensor*>& in, const OpAttrs& attrs,
                Tensor& out, SavedContext ctx);
void backward_op(OpKind kind, const std::vector<const Tensor*>& in, const Tensor& out,
                 const Tensor& grad_out, const OpAttrs& attrs, const std::vector<std::size_t>& index,
                 const std::vector<double>& aux, const std::vector<Tensor*>& grad_in);
}  // namespace detail

}  // namespace lcc
