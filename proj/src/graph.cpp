#include "lcc/graph.hpp"

#include "lcc/errors.hpp"

namespace lcc {

const Tensor& Gradients::at(NodeId id) const {
  auto it = grads_.find(id);
  if (it == grads_.end())
    throw ContractViolation("gradients: node " + std::to_string(id) + " is not a parameter");
  return it->second;
}

NodeId Graph::constant(Tensor value) {
  Node n;
  n.kind = OpKind::leaf;
  value.requires_grad = false;
  value.node_id = nodes_.size();
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return nodes_.size() - 1;
}

NodeId Graph::parameter(Tensor value) {
  Node n;
  n.kind = OpKind::leaf;
  value.requires_grad = true;
  value.node_id = nodes_.size();
  n.value = std::move(value);
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  return nodes_.size() - 1;
}

NodeId Graph::apply(OpKind kind, std::vector<NodeId> inputs, OpAttrs attrs) {
  if (kind == OpKind::leaf) throw ContractViolation("graph: leaf is not an op; use constant/parameter");
  std::vector<Shape> shapes;
  std::vector<const Tensor*> in;
  bool needs_grad = false;
  for (NodeId id : inputs) {
    if (id >= nodes_.size())
      throw ContractViolation(std::string(op_name(kind)) + ": unknown input node " + std::to_string(id));
    shapes.push_back(nodes_[id].value.shape());
    in.push_back(&nodes_[id].value);
    needs_grad = needs_grad || nodes_[id].requires_grad;
  }
  Node n;
  n.kind = kind;
  n.value = Tensor(infer_shape(kind, shapes, attrs));
  detail::forward_op(kind, in, attrs, n.value, {n.saved_index, n.saved_aux});
  n.inputs = std::move(inputs);
  n.attrs = std::move(attrs);
  n.requires_grad = needs_grad;
  n.value.requires_grad = needs_grad;
  n.value.node_id = nodes_.size();
  nodes_.push_back(std::move(n));
  return nodes_.size() - 1;
}

Gradients Graph::backward(NodeId loss) const {
  if (loss >= nodes_.size()) throw ContractViolation("backward: unknown loss node");
  if (nodes_[loss].value.size() != 1)
    throw ContractViolation("backward: loss must be scalar, got shape " +
                            shape_str(nodes_[loss].value.shape()));
  std::vector<std::optional<Tensor>> grads(loss + 1);
  grads[loss] = Tensor(nodes_[loss].value.shape(), 1.0);
  Gradients out;

  for (std::size_t step = 0; step <= loss; ++step) {
    const NodeId id = loss - step;
    const Node& node = nodes_[id];
    if (!grads[id] || !node.requires_grad || node.kind == OpKind::leaf) continue;
    std::vector<const Tensor*> in;
    std::vector<Tensor*> gin(node.inputs.size(), nullptr);
    for (std::size_t i = 0; i < node.inputs.size(); ++i) {
      const NodeId src = node.inputs[i];
      in.push_back(&nodes_[src].value);
      if (!nodes_[src].requires_grad) continue;
      if (!grads[src]) grads[src] = Tensor(nodes_[src].value.shape(), 0.0);
      gin[i] = &*grads[src];
    }
    const bool upstream_finite = !out.first_non_finite && grads[id]->all_finite();
    detail::backward_op(node.kind, in, node.value, *grads[id], node.attrs, node.saved_index,
                        node.saved_aux, gin);
    if (upstream_finite)
      for (const Tensor* g : gin)
        if (g && !g->all_finite()) {
          out.first_non_finite = id;
          break;
        }
    if (node.kind != OpKind::leaf) grads[id].reset();
  }

  for (NodeId id = 0; id < nodes_.size(); ++id) {
    const Node& node = nodes_[id];
    if (node.kind != OpKind::leaf || !node.requires_grad) continue;
    if (id <= loss && grads[id])
      out.set(id, std::move(*grads[id]));
    else
      out.set(id, Tensor(node.value.shape(), 0.0));
  }
  return out;
}

std::optional<NodeId> Graph::first_non_finite() const {
  for (NodeId id = 0; id < nodes_.size(); ++id) {
    if (nodes_[id].value.all_finite()) continue;
    bool inputs_finite = true;
    for (NodeId src : nodes_[id].inputs) inputs_finite = inputs_finite && nodes_[src].value.all_finite();
    if (inputs_finite) return id;
  }
  return std::nullopt;
}

Tensor forward(Graph& graph, OpKind kind, const std::vector<Tensor>& inputs, const OpAttrs& attrs) {
  std::vector<NodeId> ids;
  for (const auto& t : inputs) {
    if (t.node_id && *t.node_id < graph.size())
      ids.push_back(*t.node_id);
    else
      ids.push_back(t.requires_grad ? graph.parameter(t) : graph.constant(t));
  }
  return graph.value(graph.apply(kind, std::move(ids), attrs));
}

Gradients backward(const Graph& graph, NodeId loss) { return graph.backward(loss); }

}  // namespace lcc
