#pragma once

#include <deque>
#include <functional>
#include <string>
#include <vector>

#include "pslab/tensor.hpp"

namespace pslab {

// Handle into a Graph's node list.
struct Var {
  int index = -1;
  bool valid() const { return index >= 0; }
};

// Define-by-run reverse-mode tape. Operators append nodes eagerly (forward
// values are computed at construction), so the node list is already in
// topological order and backward() is a single reverse sweep that visits
// each node exactly once.
//
// Parameter leaves keep a pointer to an external Tensor; backward()
// accumulates into that tensor's grad buffer, which callers (optimizers,
// gradient checks) zero between steps.
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, int self)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // Constant input; never receives gradients.
  Var constant(Tensor value);

  // Leaf backed by an external tensor. The tensor must outlive the graph.
  Var parameter(Tensor& p);

  // Extension point for operators: registers a node with its forward value
  // and a closure that routes the node's grad to its inputs.
  Var make_node(std::string op, std::vector<Var> inputs, Tensor value, BackwardFn backward);

  const Tensor& value(Var v) const { return node(v.index).value; }
  double scalar(Var v) const;

  bool needs_grad(Var v) const { return node(v.index).needs_grad; }

  // Gradient buffer of a node, allocated (zeroed) on first access.
  std::vector<double>& grad_buf(int index);
  const std::vector<double>& grad_of(Var v) const;
  bool has_grad(Var v) const { return !node(v.index).grad.empty(); }

  // Accumulate src into the grad of `input` if it participates in
  // differentiation; no-op otherwise.
  void accumulate(Var input, const std::vector<double>& src);

  // Reverse sweep from a scalar loss node. Populates node grads and the
  // grad buffers of every participating parameter tensor.
  void backward(Var loss);

  size_t node_count() const { return nodes_.size(); }
  const std::string& op_name(Var v) const { return node(v.index).op; }

 private:
  struct Node {
    std::string op;
    std::vector<Var> inputs;
    Tensor value;
    std::vector<double> grad;
    BackwardFn backward;
    Tensor* param = nullptr;
    bool needs_grad = false;
  };

  Node& node(int i);
  const Node& node(int i) const;

  // deque: node references stay valid while new nodes are appended
  std::deque<Node> nodes_;
};

}  // namespace pslab
