#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace msfin {

/// All computation runs in double precision; see README for the rationale.
using Scalar = double;
using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct Node;
using NodePtr = std::shared_ptr<Node>;

// One vertex of the reverse-mode graph. `backward` reads `grad` of this node and
// accumulates into the grads of `parents`. Leaves have no backward function.
struct Node {
  Shape shape;
  std::vector<Scalar> value;
  std::vector<Scalar> grad;  // allocated on first accumulation
  bool requires_grad = false;
  std::vector<NodePtr> parents;
  std::function<void(Node&)> backward;

  std::vector<Scalar>& grad_buffer() {
    if (grad.size() != value.size()) grad.assign(value.size(), Scalar{0});
    return grad;
  }
};

}  // namespace detail

/// Dense row-major tensor handle. Copies share storage and graph position.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, Scalar value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<Scalar> values, bool requires_grad = false);
  static Tensor scalar(Scalar value, bool requires_grad = false);

  bool defined() const noexcept { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t numel() const;
  /// Extent of axis `axis`; negative values count from the back.
  std::size_t dim(int axis) const;

  std::span<const Scalar> data() const;
  /// Mutable view of the values. Used by optimizers and loaders on leaf tensors.
  std::span<Scalar> mutable_data();
  Scalar item() const;
  Scalar operator[](std::size_t flat_index) const { return data()[flat_index]; }

  bool requires_grad() const;
  bool has_grad() const;
  /// Gradient buffer; all zeros when backward never reached this tensor.
  std::span<const Scalar> grad() const;
  std::span<Scalar> mutable_grad();
  void zero_grad();

  /// Same values, no graph history.
  Tensor detach() const;

  // Internal graph access used by the op implementations.
  const detail::NodePtr& node() const { return node_; }
  explicit Tensor(detail::NodePtr node) : node_(std::move(node)) {}

 private:
  detail::NodePtr node_;
};

/// Reverse pass from a scalar loss. Intermediate gradients are recomputed on
/// every call; leaf gradients accumulate across calls until zero_grad().
void backward(const Tensor& loss);

namespace detail {

// Builds an op result. `parents` that do not require grad are dropped; the
// backward closure is only kept when at least one parent needs a gradient.
Tensor make_result(Shape shape, std::vector<Scalar> value,
                   std::vector<Tensor> parents,
                   std::function<void(Node&)> backward);

}  // namespace detail

}  // namespace msfin

namespace msfin {

/// While alive, ops on this thread record no graph (inference mode).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

}  // namespace msfin
