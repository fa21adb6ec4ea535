#pragma once

// Dense float tensors with tape-free reverse-mode differentiation.
//
// Every op that consumes a tensor requiring gradients records its inputs
// and a backward closure on the result. backward() walks that graph in
// reverse topological order and accumulates into each input's grad buffer.
// Tensor is a cheap shared handle; copies alias the same storage.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace retroroute::nn {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape) noexcept;
std::string shape_string(const Shape& shape);

namespace detail {

struct Node {
  Shape shape;
  std::vector<float> data;
  std::vector<float> grad;  // empty until first touched by backward
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  std::vector<float>& ensure_grad() {
    if (grad.empty()) grad.assign(data.size(), 0.0f);
    return grad;
  }
};

}  // namespace detail

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  /// Throws ShapeMismatch when data.size() != numel(shape).
  static Tensor from_data(Shape shape, std::vector<float> data,
                          bool requires_grad = false);

  bool defined() const noexcept { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t numel() const { return node_->data.size(); }
  /// First extent, and the product of the remaining ones.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<float> data() { return node_->data; }
  std::span<const float> data() const { return node_->data; }
  /// Gradient buffer, allocated (zeroed) on first access.
  std::span<float> grad() { return node_->ensure_grad(); }
  bool has_grad() const { return node_ && !node_->grad.empty(); }

  bool requires_grad() const { return node_ && node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }
  void zero_grad();

  float item() const;

  /// Seeds d(self)/d(self) = 1; self must hold a single element.
  void backward();
  /// Seeds the output gradient with `seed` (same numel as self).
  void backward(std::span<const float> seed);

  /// Same values, cut from the graph.
  Tensor detach() const;

  detail::Node* node() const noexcept { return node_.get(); }
  const std::shared_ptr<detail::Node>& node_ptr() const noexcept { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

/// Whether new ops record backward closures on this thread.
bool grad_enabled() noexcept;

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

}  // namespace retroroute::nn
