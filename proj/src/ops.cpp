#include "retroroute/ops.hpp"

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <numbers>
#include <string>

#include "retroroute/errors.hpp"

namespace retroroute::nn {

namespace {

bool g_deterministic = false;

using BackwardFn = std::function<void(detail::Node&)>;

Tensor make_output(Shape shape, std::vector<float> data,
                   std::initializer_list<const Tensor*> inputs, BackwardFn fn) {
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  bool needs = false;
  if (grad_enabled()) {
    for (const Tensor* t : inputs) needs = needs || t->requires_grad();
  }
  if (needs) {
    node->requires_grad = true;
    for (const Tensor* t : inputs) node->parents.push_back(t->node_ptr());
    node->backward = std::move(fn);
  }
  return Tensor(std::move(node));
}

// Gradient buffer of parent i, or nullptr when it does not want one.
float* parent_grad(detail::Node& out, std::size_t i) {
  auto& p = out.parents[i];
  return p->requires_grad ? p->ensure_grad().data() : nullptr;
}

void require_matrix(const Tensor& t, const char* op) {
  if (!t.defined() || t.shape().size() != 2) {
    throw ShapeMismatch(std::string(op) + " expects a matrix, got " +
                        (t.defined() ? shape_string(t.shape()) : "undefined"));
  }
}

void require_same(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeMismatch(std::string(op) + ": " + shape_string(a.shape()) + " vs " +
                        shape_string(b.shape()));
  }
}

constexpr float kInvSqrt2Pi = 0.3989422804014327f;

}  // namespace

void set_deterministic(bool on) noexcept { g_deterministic = on; }
bool deterministic() noexcept { return g_deterministic; }

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  if (b.shape()[0] != k) {
    throw ShapeMismatch("matmul: " + shape_string(a.shape()) + " x " +
                        shape_string(b.shape()));
  }
  std::vector<float> out(m * n);
  kernels::gemm(a.data(), b.data(), out, m, k, n);
  return make_output({m, n}, std::move(out), {&a, &b}, [m, k, n](detail::Node& o) {
    const auto& A = o.parents[0]->data;
    const auto& B = o.parents[1]->data;
    if (float* da = parent_grad(o, 0)) {
      kernels::gemm_a_bt(o.grad, B, std::span<float>(da, m * k), m, n, k, true);
    }
    if (float* db = parent_grad(o, 1)) {
      kernels::gemm_at_b(A, o.grad, std::span<float>(db, k * n), m, k, n, true);
    }
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same(a, b, "add");
  std::vector<float> out(a.numel());
  const auto x = a.data(), y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
  return make_output(a.shape(), std::move(out), {&a, &b}, [](detail::Node& o) {
    for (std::size_t p = 0; p < 2; ++p) {
      if (float* g = parent_grad(o, p)) {
        for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i];
      }
    }
  });
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  require_matrix(x, "add_bias");
  const std::size_t rows = x.rows(), cols = x.cols();
  if (bias.numel() != cols) {
    throw ShapeMismatch("add_bias: bias " + shape_string(bias.shape()) + " for " +
                        shape_string(x.shape()));
  }
  std::vector<float> out(x.data().begin(), x.data().end());
  const auto b = bias.data();
  for (std::size_t r = 0; r < rows; ++r) {
    float* row = out.data() + r * cols;
    for (std::size_t c = 0; c < cols; ++c) row[c] += b[c];
  }
  return make_output(x.shape(), std::move(out), {&x, &bias}, [rows, cols](detail::Node& o) {
    if (float* gx = parent_grad(o, 0)) {
      for (std::size_t i = 0; i < o.grad.size(); ++i) gx[i] += o.grad[i];
    }
    if (float* gb = parent_grad(o, 1)) {
      for (std::size_t r = 0; r < rows; ++r) {
        const float* g = o.grad.data() + r * cols;
        for (std::size_t c = 0; c < cols; ++c) gb[c] += g[c];
      }
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same(a, b, "mul");
  std::vector<float> out(a.numel());
  const auto x = a.data(), y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
  return make_output(a.shape(), std::move(out), {&a, &b}, [](detail::Node& o) {
    const auto& x = o.parents[0]->data;
    const auto& y = o.parents[1]->data;
    if (float* ga = parent_grad(o, 0)) {
      for (std::size_t i = 0; i < o.grad.size(); ++i) ga[i] += o.grad[i] * y[i];
    }
    if (float* gb = parent_grad(o, 1)) {
      for (std::size_t i = 0; i < o.grad.size(); ++i) gb[i] += o.grad[i] * x[i];
    }
  });
}

Tensor scale(const Tensor& x, float factor) {
  std::vector<float> out(x.data().begin(), x.data().end());
  for (float& v : out) v *= factor;
  return make_output(x.shape(), std::move(out), {&x}, [factor](detail::Node& o) {
    if (float* g = parent_grad(o, 0)) {
      for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i] * factor;
    }
  });
}

Tensor sum(const Tensor& x) {
  double acc = 0.0;
  for (float v : x.data()) acc += v;
  return make_output({1}, {static_cast<float>(acc)}, {&x}, [](detail::Node& o) {
    if (float* g = parent_grad(o, 0)) {
      const std::size_t n = o.parents[0]->data.size();
      for (std::size_t i = 0; i < n; ++i) g[i] += o.grad[0];
    }
  });
}

Tensor embedding_lookup(const Tensor& table, std::span<const int> ids) {
  require_matrix(table, "embedding_lookup");
  const std::size_t vocab = table.rows(), dim = table.cols();
  std::vector<float> out(ids.size() * dim);
  const auto t = table.data();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= vocab) {
      throw ShapeMismatch("embedding id " + std::to_string(ids[i]) +
                          " outside table of " + std::to_string(vocab));
    }
    std::copy_n(t.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(ids[i]) * dim),
                dim, out.begin() + static_cast<std::ptrdiff_t>(i * dim));
  }
  std::vector<int> saved(ids.begin(), ids.end());
  return make_output({ids.size(), dim}, std::move(out), {&table},
                     [saved = std::move(saved), dim](detail::Node& o) {
                       float* g = parent_grad(o, 0);
                       if (!g) return;
                       for (std::size_t i = 0; i < saved.size(); ++i) {
                         float* row = g + static_cast<std::size_t>(saved[i]) * dim;
                         const float* src = o.grad.data() + i * dim;
                         for (std::size_t d = 0; d < dim; ++d) row[d] += src[d];
                       }
                     });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, float eps) {
  require_matrix(x, "layer_norm");
  const std::size_t rows = x.rows(), cols = x.cols();
  if (gamma.numel() != cols || beta.numel() != cols) {
    throw ShapeMismatch("layer_norm: affine parameters do not match " +
                        shape_string(x.shape()));
  }
  std::vector<float> out(rows * cols), mean(rows), rstd(rows);
  kernels::layer_norm_forward(x.data(), gamma.data(), beta.data(), out, mean, rstd,
                              rows, cols, eps);
  return make_output(
      x.shape(), std::move(out), {&x, &gamma, &beta},
      [rows, cols, mean = std::move(mean), rstd = std::move(rstd)](detail::Node& o) {
        const auto& X = o.parents[0]->data;
        const auto& G = o.parents[1]->data;
        float* gx = parent_grad(o, 0);
        float* gg = parent_grad(o, 1);
        float* gb = parent_grad(o, 2);
        std::vector<float> xhat(cols), dxhat(cols);
        for (std::size_t r = 0; r < rows; ++r) {
          const float* xr = X.data() + r * cols;
          const float* dy = o.grad.data() + r * cols;
          double mean_d = 0.0, mean_dx = 0.0;
          for (std::size_t c = 0; c < cols; ++c) {
            xhat[c] = (xr[c] - mean[r]) * rstd[r];
            dxhat[c] = dy[c] * G[c];
            mean_d += dxhat[c];
            mean_dx += static_cast<double>(dxhat[c]) * xhat[c];
            if (gg) gg[c] += dy[c] * xhat[c];
            if (gb) gb[c] += dy[c];
          }
          if (!gx) continue;
          const auto md = static_cast<float>(mean_d / static_cast<double>(cols));
          const auto mdx = static_cast<float>(mean_dx / static_cast<double>(cols));
          float* gr = gx + r * cols;
          for (std::size_t c = 0; c < cols; ++c) {
            gr[c] += rstd[r] * (dxhat[c] - md - xhat[c] * mdx);
          }
        }
      });
}

Tensor softmax(const Tensor& x, int axis) {
  require_matrix(x, "softmax");
  if (axis != 0 && axis != 1) throw ShapeMismatch("softmax axis must be 0 or 1");
  const std::size_t rows = x.rows(), cols = x.cols();
  // Work on rows; axis 0 is handled through a transpose.
  const std::size_t n_vec = axis == 1 ? rows : cols;
  const std::size_t len = axis == 1 ? cols : rows;
  auto at = [=](std::size_t v, std::size_t i) {
    return axis == 1 ? v * cols + i : i * cols + v;
  };
  std::vector<float> buf(len), res(len);
  std::vector<float> out(rows * cols);
  const auto in = x.data();
  for (std::size_t v = 0; v < n_vec; ++v) {
    for (std::size_t i = 0; i < len; ++i) buf[i] = in[at(v, i)];
    kernels::softmax_rows(buf, res, 1, len);
    for (std::size_t i = 0; i < len; ++i) out[at(v, i)] = res[i];
  }
  return make_output(x.shape(), out, {&x}, [n_vec, len, at, out](detail::Node& o) {
    float* g = parent_grad(o, 0);
    if (!g) return;
    for (std::size_t v = 0; v < n_vec; ++v) {
      double dot = 0.0;
      for (std::size_t i = 0; i < len; ++i) {
        dot += static_cast<double>(out[at(v, i)]) * o.grad[at(v, i)];
      }
      const auto d = static_cast<float>(dot);
      for (std::size_t i = 0; i < len; ++i) {
        const std::size_t idx = at(v, i);
        g[idx] += out[idx] * (o.grad[idx] - d);
      }
    }
  });
}

Tensor gelu(const Tensor& x) {
  std::vector<float> out(x.numel());
  kernels::gelu_forward(x.data(), out);
  return make_output(x.shape(), std::move(out), {&x}, [](detail::Node& o) {
    float* g = parent_grad(o, 0);
    if (!g) return;
    const auto& X = o.parents[0]->data;
    for (std::size_t i = 0; i < X.size(); ++i) {
      const float v = X[i];
      const float cdf = 0.5f * (1.0f + std::erf(v * static_cast<float>(M_SQRT1_2)));
      const float pdf = kInvSqrt2Pi * std::exp(-0.5f * v * v);
      g[i] += o.grad[i] * (cdf + v * pdf);
    }
  });
}

Tensor dropout(const Tensor& x, float p, Rng& rng) {
  if (!(p >= 0.0f && p < 1.0f)) throw InputError("dropout probability outside [0, 1)");
  if (p == 0.0f) return x;
  const float keep_scale = 1.0f / (1.0f - p);
  std::vector<float> mask(x.numel());
  for (float& m : mask) m = rng.uniform() < p ? 0.0f : keep_scale;
  std::vector<float> out(x.numel());
  const auto in = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = in[i] * mask[i];
  return make_output(x.shape(), std::move(out), {&x},
                     [mask = std::move(mask)](detail::Node& o) {
                       float* g = parent_grad(o, 0);
                       if (!g) return;
                       for (std::size_t i = 0; i < mask.size(); ++i) g[i] += o.grad[i] * mask[i];
                     });
}

Tensor cross_entropy(const Tensor& logits, std::span<const int> targets, int ignore_id) {
  require_matrix(logits, "cross_entropy");
  const std::size_t rows = logits.rows(), vocab = logits.cols();
  if (targets.size() != rows) {
    throw ShapeMismatch("cross_entropy: " + std::to_string(targets.size()) +
                        " targets for " + std::to_string(rows) + " rows");
  }
  check_finite(logits, "cross_entropy logits");
  std::vector<float> probs(rows * vocab);
  kernels::softmax_rows(logits.data(), probs, rows, vocab);
  const auto L = logits.data();
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    const int t = targets[r];
    if (t == ignore_id) continue;
    if (t < 0 || static_cast<std::size_t>(t) >= vocab) {
      throw ShapeMismatch("cross_entropy target " + std::to_string(t) + " outside vocabulary");
    }
    const float* lr = L.data() + r * vocab;
    double mx = lr[0];
    for (std::size_t c = 1; c < vocab; ++c) mx = std::max(mx, static_cast<double>(lr[c]));
    double s = 0.0;
    for (std::size_t c = 0; c < vocab; ++c) s += std::exp(lr[c] - mx);
    total += (std::log(s) + mx) - lr[t];
    ++count;
  }
  const double loss = count ? total / static_cast<double>(count) : 0.0;
  std::vector<int> saved(targets.begin(), targets.end());
  return make_output(
      {1}, {static_cast<float>(loss)}, {&logits},
      [probs = std::move(probs), saved = std::move(saved), rows, vocab, count,
       ignore_id](detail::Node& o) {
        float* g = parent_grad(o, 0);
        if (!g || count == 0) return;
        const float w = o.grad[0] / static_cast<float>(count);
        for (std::size_t r = 0; r < rows; ++r) {
          if (saved[r] == ignore_id) continue;
          const float* pr = probs.data() + r * vocab;
          float* gr = g + r * vocab;
          for (std::size_t c = 0; c < vocab; ++c) gr[c] += w * pr[c];
          gr[saved[r]] -= w;
        }
      });
}

Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v,
                 const kernels::AttentionShape& shape,
                 std::span<const std::uint8_t> key_mask) {
  const std::size_t D = shape.model_dim;
  if (shape.heads == 0 || D % shape.heads != 0) {
    throw ShapeMismatch("attention: model_dim not divisible by heads");
  }
  if (q.numel() != shape.batch * shape.q_len * D ||
      k.numel() != shape.batch * shape.k_len * D || v.shape() != k.shape()) {
    throw ShapeMismatch("attention: q/k/v do not match the attention shape");
  }
  if (!key_mask.empty() && key_mask.size() != shape.batch * shape.k_len) {
    throw ShapeMismatch("attention: key mask size");
  }
  std::vector<float> out(q.numel());
  std::vector<float> probs(shape.prob_size());
  kernels::attention_forward(shape, q.data(), k.data(), v.data(), key_mask, out, probs);
  return make_output(q.shape(), std::move(out), {&q, &k, &v},
                     [shape, probs = std::move(probs)](detail::Node& o) {
                       auto& Q = o.parents[0];
                       auto& K = o.parents[1];
                       auto& V = o.parents[2];
                       // The kernel accumulates into all three; unused
                       // buffers are scratch.
                       std::vector<float> scratch_q, scratch_k, scratch_v;
                       auto buffer = [](detail::Node& n, std::vector<float>& scratch) {
                         if (n.requires_grad) return std::span<float>(n.ensure_grad());
                         scratch.assign(n.data.size(), 0.0f);
                         return std::span<float>(scratch);
                       };
                       kernels::attention_backward(shape, Q->data, K->data, V->data, probs,
                                                   o.grad, buffer(*Q, scratch_q),
                                                   buffer(*K, scratch_k),
                                                   buffer(*V, scratch_v));
                     });
}

void check_finite(const Tensor& x, const char* what) {
  for (float v : x.data()) {
    if (!std::isfinite(v)) throw NonFiniteInput(what);
  }
}

}  // namespace retroroute::nn
