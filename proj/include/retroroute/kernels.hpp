#pragma once

// Dense float kernels behind the tensor ops.
//
// `kernels::` functions are OpenMP-parallel. Work is partitioned over
// output elements only, so each output is summed by one thread in a fixed
// order and results do not depend on the thread count.
// `kernels::reference::` holds straightforward serial versions of the same
// contracts; tests and the benchmark compare the two.
//
// Matrices are row-major; M×K means M rows of K columns.

#include <cstddef>
#include <cstdint>
#include <span>

namespace retroroute::kernels {

/// C = A·B (or C += A·B when accumulate), A: M×K, B: K×N, C: M×N.
void gemm(std::span<const float> a, std::span<const float> b, std::span<float> c,
          std::size_t m, std::size_t k, std::size_t n, bool accumulate = false);

/// C (+)= Aᵀ·B with A: M×K, B: M×N, C: K×N.
void gemm_at_b(std::span<const float> a, std::span<const float> b,
               std::span<float> c, std::size_t m, std::size_t k, std::size_t n,
               bool accumulate = false);

/// C (+)= A·Bᵀ with A: M×N, B: K×N, C: M×K.
void gemm_a_bt(std::span<const float> a, std::span<const float> b,
               std::span<float> c, std::size_t m, std::size_t n, std::size_t k,
               bool accumulate = false);

/// Row-wise layer norm. `mean` and `rstd` (one per row) may be empty.
void layer_norm_forward(std::span<const float> x, std::span<const float> gamma,
                        std::span<const float> beta, std::span<float> out,
                        std::span<float> mean, std::span<float> rstd,
                        std::size_t rows, std::size_t cols, float eps);

/// Exact GeLU, x·Φ(x).
void gelu_forward(std::span<const float> x, std::span<float> out);

/// Numerically stable softmax over each row of a rows×cols matrix.
void softmax_rows(std::span<const float> x, std::span<float> out,
                  std::size_t rows, std::size_t cols);

/// Multi-head scaled dot-product attention with heads laid out as
/// contiguous column blocks of width model_dim / heads.
struct AttentionShape {
  std::size_t batch = 1;
  std::size_t heads = 1;
  std::size_t q_len = 1;
  std::size_t k_len = 1;
  std::size_t model_dim = 1;
  /// Query i may see key j only when j <= i + (k_len - q_len).
  bool causal = false;

  std::size_t head_dim() const noexcept { return model_dim / heads; }
  std::size_t prob_size() const noexcept { return batch * heads * q_len * k_len; }
};

/// q: (batch·q_len)×model_dim, k/v: (batch·k_len)×model_dim,
/// key_mask: batch·k_len flags (empty = all keys valid),
/// probs: batch·heads·q_len·k_len attention weights kept for backward.
/// A query with no visible key produces a zero row.
void attention_forward(const AttentionShape& shape, std::span<const float> q,
                       std::span<const float> k, std::span<const float> v,
                       std::span<const std::uint8_t> key_mask,
                       std::span<float> out, std::span<float> probs);

/// Accumulates into dq, dk, dv.
void attention_backward(const AttentionShape& shape, std::span<const float> q,
                        std::span<const float> k, std::span<const float> v,
                        std::span<const float> probs, std::span<const float> dout,
                        std::span<float> dq, std::span<float> dk,
                        std::span<float> dv);

namespace reference {

void gemm(std::span<const float> a, std::span<const float> b, std::span<float> c,
          std::size_t m, std::size_t k, std::size_t n, bool accumulate = false);
void gemm_at_b(std::span<const float> a, std::span<const float> b,
               std::span<float> c, std::size_t m, std::size_t k, std::size_t n,
               bool accumulate = false);
void gemm_a_bt(std::span<const float> a, std::span<const float> b,
               std::span<float> c, std::size_t m, std::size_t n, std::size_t k,
               bool accumulate = false);
void attention_forward(const AttentionShape& shape, std::span<const float> q,
                       std::span<const float> k, std::span<const float> v,
                       std::span<const std::uint8_t> key_mask,
                       std::span<float> out, std::span<float> probs);
void attention_backward(const AttentionShape& shape, std::span<const float> q,
                        std::span<const float> k, std::span<const float> v,
                        std::span<const float> probs, std::span<const float> dout,
                        std::span<float> dq, std::span<float> dk,
                        std::span<float> dv);

}  // namespace reference

/// Caps the OpenMP worker count; 0 restores the runtime default.
void set_num_threads(int threads);
int num_threads();

}  // namespace retroroute::kernels
