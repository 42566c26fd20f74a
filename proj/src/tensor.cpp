#include "msfin/tensor.hpp"

#include <sstream>
#include <unordered_set>

#include "msfin/errors.hpp"

namespace msfin {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

namespace {

thread_local bool g_grad_enabled = true;

detail::NodePtr new_node(Shape shape, std::vector<Scalar> values, bool requires_grad) {
  for (auto e : shape) {
    if (e == 0) fail(ErrorKind::Dimension, "tensor extents must be positive, got " + shape_str(shape));
  }
  if (shape_numel(shape) != values.size()) {
    fail(ErrorKind::Dimension, "tensor shape " + shape_str(shape) + " does not match " +
                                   std::to_string(values.size()) + " values");
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  return node;
}

const detail::Node& checked(const detail::NodePtr& node) {
  if (!node) fail(ErrorKind::Contract, "use of an undefined tensor");
  return *node;
}

}  // namespace

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() { return g_grad_enabled; }

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  auto n = shape_numel(shape);
  return Tensor(new_node(std::move(shape), std::vector<Scalar>(n, 0), requires_grad));
}

Tensor Tensor::full(Shape shape, Scalar value, bool requires_grad) {
  auto n = shape_numel(shape);
  return Tensor(new_node(std::move(shape), std::vector<Scalar>(n, value), requires_grad));
}

Tensor Tensor::from(Shape shape, std::vector<Scalar> values, bool requires_grad) {
  return Tensor(new_node(std::move(shape), std::move(values), requires_grad));
}

Tensor Tensor::scalar(Scalar value, bool requires_grad) {
  return Tensor(new_node({1}, {value}, requires_grad));
}

const Shape& Tensor::shape() const { return checked(node_).shape; }

std::size_t Tensor::numel() const { return checked(node_).value.size(); }

std::size_t Tensor::dim(int axis) const {
  const auto& s = shape();
  const int r = static_cast<int>(s.size());
  const int a = axis < 0 ? axis + r : axis;
  if (a < 0 || a >= r) {
    fail(ErrorKind::Index, "axis " + std::to_string(axis) + " out of range for " + shape_str(s));
  }
  return s[static_cast<std::size_t>(a)];
}

std::span<const Scalar> Tensor::data() const { return checked(node_).value; }

std::span<Scalar> Tensor::mutable_data() {
  checked(node_);
  return node_->value;
}

Scalar Tensor::item() const {
  const auto& n = checked(node_);
  if (n.value.size() != 1) {
    fail(ErrorKind::Contract, "item() on non-scalar tensor " + shape_str(n.shape));
  }
  return n.value[0];
}

bool Tensor::requires_grad() const { return checked(node_).requires_grad; }

bool Tensor::has_grad() const { return checked(node_).grad.size() == node_->value.size(); }

std::span<const Scalar> Tensor::grad() const {
  checked(node_);
  return node_->grad_buffer();
}

std::span<Scalar> Tensor::mutable_grad() {
  checked(node_);
  return node_->grad_buffer();
}

void Tensor::zero_grad() {
  checked(node_);
  node_->grad.assign(node_->value.size(), Scalar{0});
}

Tensor Tensor::detach() const {
  const auto& n = checked(node_);
  return Tensor(new_node(n.shape, n.value, false));
}

void backward(const Tensor& loss) {
  const auto& root = loss.node();
  checked(root);
  if (root->value.size() != 1) {
    fail(ErrorKind::Contract, "backward requires a scalar loss, got " + shape_str(root->shape));
  }
  if (!root->requires_grad) return;

  // Iterative post-order DFS gives a topological order (parents before children).
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> visited;
  std::vector<std::pair<detail::Node*, std::size_t>> stack{{root.get(), 0}};
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      detail::Node* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (auto* node : order) {
    if (node->backward) node->grad.assign(node->value.size(), Scalar{0});
  }
  root->grad_buffer()[0] = Scalar{1};
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backward) (*it)->backward(**it);
  }
}

namespace detail {

Tensor make_result(Shape shape, std::vector<Scalar> value, std::vector<Tensor> parents,
                   std::function<void(Node&)> backward) {
  auto node = new_node(std::move(shape), std::move(value), false);
  if (!g_grad_enabled) return Tensor(std::move(node));
  for (auto& p : parents) {
    if (p.defined() && p.requires_grad()) {
      node->requires_grad = true;
      node->parents.push_back(p.node());
    }
  }
  if (node->requires_grad) node->backward = std::move(backward);
  return Tensor(std::move(node));
}

}  // namespace detail

}  // namespace msfin
