#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace cseg {

/// Extents of a dense row-major array. Extents may be zero (empty tensor).
using Shape = std::vector<int>;

std::int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);
bool same_shape(const Shape& a, const Shape& b);

struct TensorNode {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until first use
  bool requires_grad = false;

  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  }
};

/// Shared handle to a dense double-precision array with optional gradient.
/// Copies are shallow; two copies see the same values and gradient.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double v, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<double> data,
                          bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  int dim(int axis) const { return node_->shape[static_cast<size_t>(axis)]; }
  int rank() const { return static_cast<int>(node_->shape.size()); }
  std::int64_t numel() const {
    return static_cast<std::int64_t>(node_->value.size());
  }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool b) { node_->requires_grad = b; }

  std::span<double> values() { return node_->value; }
  std::span<const double> values() const { return node_->value; }

  /// Gradient storage, allocated (zero-filled) on first access.
  std::span<double> grad() {
    node_->ensure_grad();
    return node_->grad;
  }
  std::span<const double> grad() const {
    node_->ensure_grad();
    return node_->grad;
  }
  void zero_grad() {
    if (!node_->grad.empty()) node_->grad.assign(node_->value.size(), 0.0);
  }

  /// Value of a rank-0/one-element tensor. Throws otherwise.
  double item() const;

  /// True if every value (and gradient, when allocated) is finite.
  bool all_finite() const;

  const std::shared_ptr<TensorNode>& node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<TensorNode> node) : node_(std::move(node)) {}
  std::shared_ptr<TensorNode> node_;
};

}  // namespace cseg
