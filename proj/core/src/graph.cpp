#include "pslab/graph.hpp"

namespace pslab {

Graph::Node& Graph::node(int i) {
  PSLAB_CHECK(i >= 0 && i < static_cast<int>(nodes_.size()), "invalid graph node index " << i);
  return nodes_[static_cast<size_t>(i)];
}

const Graph::Node& Graph::node(int i) const {
  PSLAB_CHECK(i >= 0 && i < static_cast<int>(nodes_.size()), "invalid graph node index " << i);
  return nodes_[static_cast<size_t>(i)];
}

Var Graph::constant(Tensor value) {
  if (debug_checks_enabled()) value.assert_finite("constant");
  Node n;
  n.op = "constant";
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Graph::parameter(Tensor& p) {
  if (debug_checks_enabled()) p.assert_finite("parameter");
  Node n;
  n.op = "parameter";
  n.value = p;  // value snapshot; grads flow to the external tensor
  n.param = &p;
  n.needs_grad = p.requires_grad();
  if (n.needs_grad) {
    Tensor* target = &p;
    n.backward = [target](Graph& g, int self) {
      const auto& gin = g.grad_buf(self);
      auto& acc = target->grad();
      for (size_t i = 0; i < gin.size(); ++i) acc[i] += gin[i];
    };
  }
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Graph::make_node(std::string op, std::vector<Var> inputs, Tensor value, BackwardFn backward) {
  if (debug_checks_enabled()) value.assert_finite(op.c_str());
  Node n;
  n.op = std::move(op);
  for (Var in : inputs) {
    PSLAB_CHECK(in.valid() && in.index < static_cast<int>(nodes_.size()),
                "op " << n.op << " got an invalid input var");
    if (node(in.index).needs_grad) n.needs_grad = true;
  }
  n.inputs = std::move(inputs);
  n.value = std::move(value);
  n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

double Graph::scalar(Var v) const {
  const Tensor& t = value(v);
  PSLAB_CHECK_SHAPE(t.numel() == 1, "expected scalar node, got " << shape_str(t.shape()));
  return t[0];
}

std::vector<double>& Graph::grad_buf(int index) {
  Node& n = node(index);
  if (n.grad.empty()) n.grad.assign(static_cast<size_t>(n.value.numel()), 0.0);
  return n.grad;
}

const std::vector<double>& Graph::grad_of(Var v) const {
  const Node& n = node(v.index);
  PSLAB_CHECK(!n.grad.empty(), "node " << n.op << " has no gradient");
  return n.grad;
}

void Graph::accumulate(Var input, const std::vector<double>& src) {
  Node& n = node(input.index);
  if (!n.needs_grad) return;
  auto& dst = grad_buf(input.index);
  PSLAB_CHECK(dst.size() == src.size(), "gradient size mismatch into " << n.op);
  for (size_t i = 0; i < src.size(); ++i) dst[i] += src[i];
}

void Graph::backward(Var loss) {
  const Node& ln = node(loss.index);
  PSLAB_CHECK_SHAPE(ln.value.numel() == 1,
                    "backward requires a scalar loss, got " << shape_str(ln.value.shape()));
  for (auto& n : nodes_) n.grad.clear();
  grad_buf(loss.index)[0] = 1.0;
  for (int i = loss.index; i >= 0; --i) {
    Node& n = nodes_[static_cast<size_t>(i)];
    if (n.grad.empty() || !n.needs_grad || !n.backward) continue;
    n.backward(*this, i);
  }
}

}  // namespace pslab
