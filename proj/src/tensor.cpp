#include "retroroute/tensor.hpp"

#include <algorithm>
#include <functional>
#include <unordered_set>

#include "retroroute/errors.hpp"

namespace retroroute::nn {

namespace {

thread_local bool g_grad_enabled = true;

void run_backward(const std::shared_ptr<detail::Node>& root) {
  // Iterative post-order DFS gives a topological order (parents first).
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> visited;
  std::vector<std::pair<detail::Node*, std::size_t>> stack{{root.get(), 0}};
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      detail::Node* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) {
        stack.emplace_back(parent, 0);
      }
      continue;
    }
    order.push_back(node);
    stack.pop_back();
  }
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* node = *it;
    if (node->backward && !node->grad.empty()) node->backward(*node);
  }
}

}  // namespace

std::size_t shape_numel(const Shape& shape) noexcept {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + ")";
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  auto node = std::make_shared<detail::Node>();
  node->data.assign(shape_numel(shape), 0.0f);
  node->shape = std::move(shape);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::from_data(Shape shape, std::vector<float> data, bool requires_grad) {
  if (data.size() != shape_numel(shape)) {
    throw ShapeMismatch("data of " + std::to_string(data.size()) +
                        " elements for shape " + shape_string(shape));
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

std::size_t Tensor::rows() const {
  return node_->shape.empty() ? 1 : node_->shape.front();
}

std::size_t Tensor::cols() const {
  const auto r = rows();
  return r == 0 ? 0 : numel() / r;
}

void Tensor::zero_grad() {
  if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0f);
}

float Tensor::item() const {
  if (numel() != 1) throw ShapeMismatch("item() on " + shape_string(shape()));
  return node_->data.front();
}

void Tensor::backward() {
  const float one = 1.0f;
  if (numel() != 1) throw ShapeMismatch("backward() without seed on non-scalar");
  backward(std::span<const float>(&one, 1));
}

void Tensor::backward(std::span<const float> seed) {
  if (seed.size() != numel()) throw ShapeMismatch("backward seed size");
  auto& g = node_->ensure_grad();
  for (std::size_t i = 0; i < seed.size(); ++i) g[i] += seed[i];
  if (node_->requires_grad) run_backward(node_);
}

Tensor Tensor::detach() const {
  return from_data(shape(), node_->data, false);
}

bool grad_enabled() noexcept { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

}  // namespace retroroute::nn
