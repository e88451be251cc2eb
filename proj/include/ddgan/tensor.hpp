#ifndef DDGAN_TENSOR_HPP_
#define DDGAN_TENSOR_HPP_

#include <Eigen/Core>

#include <functional>
#include <initializer_list>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ddgan {

using Index = Eigen::Index;
using Shape = std::vector<Index>;

template <typename Scalar>
using Buffer = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

Index shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

namespace detail {

template <typename Scalar>
struct Node {
  Shape shape;
  Buffer<Scalar> data;
  bool requires_grad = false;
  std::optional<Buffer<Scalar>> grad;

  // Graph record: empty for leaves.
  std::string_view op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward_fn;

  bool is_leaf() const { return !backward_fn; }
};

}  // namespace detail

/// Gradient recording is enabled by default; a NoGradGuard disables it for
/// the current thread until it goes out of scope.
bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// A dense row-major array that records the operations producing it.
///
/// Tensors are shared handles: copying one aliases the same node, which is
/// what lets layers and parameter stores refer to the same weights. Values
/// produced by operations are never modified afterwards; only leaf data
/// (parameters) and grad buffers are mutable.
template <typename Scalar>
class Tensor {
 public:
  using Node = detail::Node<Scalar>;
  using BufferType = Buffer<Scalar>;

  Tensor() = default;
  Tensor(Shape shape, BufferType data, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, Scalar value, bool requires_grad = false);
  static Tensor from(Shape shape, std::initializer_list<Scalar> values, bool requires_grad = false);
  static Tensor scalar(Scalar value, bool requires_grad = false) { return from({}, {value}, requires_grad); }

  bool defined() const { return node_ != nullptr; }

  const Shape& shape() const { return node_->shape; }
  Index dim(int axis) const { return node_->shape.at(static_cast<std::size_t>(axis)); }
  int ndim() const { return static_cast<int>(node_->shape.size()); }
  Index size() const { return node_->data.size(); }

  const BufferType& data() const { return node_->data; }
  /// Writable access for initializers and optimizers. Only meaningful on leaves.
  BufferType& mutable_data() { return node_->data; }
  Scalar item() const;
  Scalar operator[](Index i) const { return node_->data[i]; }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool value) { node_->requires_grad = value; }
  bool has_grad() const { return node_->grad.has_value(); }
  const BufferType& grad() const;
  void zero_grad() { node_->grad.reset(); }

  bool is_leaf() const { return node_->is_leaf(); }
  std::string_view op() const { return node_->op; }

  /// A new leaf holding a copy of the values, cut from the graph.
  Tensor detach() const;
  /// Deep copy that keeps requires_grad but not history.
  Tensor clone() const;

  /// Reverse-mode sweep from this scalar. Leaf gradients accumulate across
  /// calls; intermediate gradients are recomputed each time.
  void backward() const;

  const std::shared_ptr<Node>& node() const { return node_; }
  static Tensor wrap(std::shared_ptr<Node> node) {
    Tensor t;
    t.node_ = std::move(node);
    return t;
  }

 private:
  std::shared_ptr<Node> node_;
};

using Tensorf = Tensor<float>;
using Tensord = Tensor<double>;

/// One operation record in the graph reachable from a root, in topological
/// order (inputs before consumers).
struct GraphRecord {
  std::string_view op;
  std::size_t id;
  std::vector<std::size_t> input_ids;
};

template <typename Scalar>
std::vector<GraphRecord> computation_graph(const Tensor<Scalar>& root);

namespace detail {

template <typename Scalar, typename Derived>
void accumulate(Node<Scalar>& node, const Eigen::ArrayBase<Derived>& contribution) {
  if (!node.requires_grad) return;
  if (node.grad) {
    *node.grad += contribution;
  } else {
    node.grad = contribution;
  }
}

/// Creates the output node of an operation. History is only recorded when
/// gradients are enabled and at least one input requires them.
template <typename Scalar>
Tensor<Scalar> make_result(std::string_view op, Shape shape, Buffer<Scalar> data,
                           std::vector<Tensor<Scalar>> inputs, std::function<void(Node<Scalar>&)> backward_fn) {
  auto node = std::make_shared<Node<Scalar>>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->op = op;
  bool needs_grad = false;
  if (grad_enabled()) {
    for (const auto& in : inputs) needs_grad = needs_grad || in.requires_grad();
  }
  if (needs_grad) {
    node->requires_grad = true;
    node->inputs.reserve(inputs.size());
    for (const auto& in : inputs) node->inputs.push_back(in.node());
    node->backward_fn = std::move(backward_fn);
  }
  return Tensor<Scalar>::wrap(std::move(node));
}

}  // namespace detail

/// Convert between scalar types (no gradient flows across the cast).
template <typename To, typename From>
Tensor<To> cast(const Tensor<From>& t) {
  return Tensor<To>(t.shape(), t.data().template cast<To>());
}

}  // namespace ddgan

#endif  // DDGAN_TENSOR_HPP_
