#include "ddgan/tensor.hpp"

#include "ddgan/errors.hpp"

#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace ddgan {

namespace {

thread_local bool g_grad_enabled = true;

template <typename Scalar>
using NodePtr = detail::Node<Scalar>*;

// Iterative post-order DFS; inputs precede consumers in the result.
template <typename Scalar>
std::vector<NodePtr<Scalar>> topological_order(detail::Node<Scalar>* root) {
  std::vector<NodePtr<Scalar>> order;
  std::unordered_map<NodePtr<Scalar>, bool> visited;
  std::vector<std::pair<NodePtr<Scalar>, std::size_t>> stack;
  stack.emplace_back(root, 0);
  visited[root] = true;
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      auto* child = node->inputs[next++].get();
      if (!visited[child]) {
        visited[child] = true;
        stack.emplace_back(child, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  return order;
}

}  // namespace

Index shape_size(const Shape& shape) {
  Index n = 1;
  for (const auto d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

template <typename Scalar>
Tensor<Scalar>::Tensor(Shape shape, BufferType data, bool requires_grad) : node_(std::make_shared<Node>()) {
  for (std::size_t axis = 0; axis < shape.size(); ++axis) {
    if (shape[axis] <= 0) throw DimensionError("Tensor", static_cast<int>(axis), "extents must be positive");
  }
  if (shape_size(shape) != data.size()) {
    throw DimensionError("Tensor", -1,
                         "shape " + shape_string(shape) + " does not hold " + std::to_string(data.size()) + " values");
  }
  node_->shape = std::move(shape);
  node_->data = std::move(data);
  node_->requires_grad = requires_grad;
}

template <typename Scalar>
Tensor<Scalar> Tensor<Scalar>::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), Scalar(0), requires_grad);
}

template <typename Scalar>
Tensor<Scalar> Tensor<Scalar>::full(Shape shape, Scalar value, bool requires_grad) {
  const Index n = shape_size(shape);
  return Tensor(std::move(shape), BufferType::Constant(n, value), requires_grad);
}

template <typename Scalar>
Tensor<Scalar> Tensor<Scalar>::from(Shape shape, std::initializer_list<Scalar> values, bool requires_grad) {
  BufferType data(static_cast<Index>(values.size()));
  Index i = 0;
  for (const auto v : values) data[i++] = v;
  return Tensor(std::move(shape), std::move(data), requires_grad);
}

template <typename Scalar>
Scalar Tensor<Scalar>::item() const {
  if (size() != 1) throw DimensionError("item", -1, "tensor of shape " + shape_string(shape()) + " is not a scalar");
  return node_->data[0];
}

template <typename Scalar>
const typename Tensor<Scalar>::BufferType& Tensor<Scalar>::grad() const {
  if (!node_->grad) throw std::logic_error("tensor has no gradient (op " + std::string(node_->op) + ")");
  return *node_->grad;
}

template <typename Scalar>
Tensor<Scalar> Tensor<Scalar>::detach() const {
  return Tensor(node_->shape, node_->data, false);
}

template <typename Scalar>
Tensor<Scalar> Tensor<Scalar>::clone() const {
  return Tensor(node_->shape, node_->data, node_->requires_grad);
}

template <typename Scalar>
void Tensor<Scalar>::backward() const {
  if (size() != 1) {
    throw DimensionError("backward", -1, "loss must be a scalar, got shape " + shape_string(shape()));
  }
  if (!node_->requires_grad) throw std::logic_error("backward: loss does not depend on any tensor requiring grad");

  const auto order = topological_order(node_.get());
  // Interior gradients are per-sweep; leaf gradients accumulate.
  for (auto* n : order) {
    if (!n->is_leaf()) n->grad.reset();
  }
  detail::accumulate(*node_, BufferType::Ones(1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    auto* n = *it;
    if (!n->is_leaf() && n->grad) n->backward_fn(*n);
  }
}

template <typename Scalar>
std::vector<GraphRecord> computation_graph(const Tensor<Scalar>& root) {
  const auto order = topological_order(root.node().get());
  std::unordered_map<const detail::Node<Scalar>*, std::size_t> ids;
  std::vector<GraphRecord> records;
  records.reserve(order.size());
  for (auto* n : order) {
    GraphRecord rec{n->op, records.size(), {}};
    for (const auto& in : n->inputs) rec.input_ids.push_back(ids.at(in.get()));
    ids[n] = rec.id;
    records.push_back(std::move(rec));
  }
  return records;
}

template class Tensor<float>;
template class Tensor<double>;
template std::vector<GraphRecord> computation_graph(const Tensor<float>&);
template std::vector<GraphRecord> computation_graph(const Tensor<double>&);

}  // namespace ddgan
