#pragma once

// Differentiable tensor ops. All matrices are 2-D (rows × cols); sequence
// batches are folded into rows.

#include <cstdint>
#include <span>

#include "retroroute/kernels.hpp"
#include "retroroute/random.hpp"
#include "retroroute/tensor.hpp"

namespace retroroute::nn {

/// (M×K)·(K×N).
Tensor matmul(const Tensor& a, const Tensor& b);

/// Elementwise sum of equal shapes.
Tensor add(const Tensor& a, const Tensor& b);

/// Adds a length-cols vector to every row.
Tensor add_bias(const Tensor& x, const Tensor& bias);

Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, float factor);
Tensor sum(const Tensor& x);

/// Gathers rows of `table` (V×D); the result is ids.size()×D.
Tensor embedding_lookup(const Tensor& table, std::span<const int> ids);

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  float eps = 1e-5f);

/// Softmax along axis 0 (columns) or 1 (rows) of a matrix.
Tensor softmax(const Tensor& x, int axis = 1);

/// x·Φ(x) with the exact Gaussian CDF.
Tensor gelu(const Tensor& x);

/// Inverted dropout: zeroes with probability p, scales survivors by 1/(1-p).
/// p = 0 returns x unchanged.
Tensor dropout(const Tensor& x, float p, Rng& rng);

/// Mean token cross-entropy over rows whose target != ignore_id. The value
/// is accumulated in double. Throws NonFiniteInput on non-finite logits.
Tensor cross_entropy(const Tensor& logits, std::span<const int> targets,
                     int ignore_id);

/// Fused multi-head attention; see kernels::AttentionShape for layout.
Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v,
                 const kernels::AttentionShape& shape,
                 std::span<const std::uint8_t> key_mask);

/// Training guard; throws NonFiniteInput naming `what`.
void check_finite(const Tensor& x, const char* what);

/// Controls whether reductions that could be split across threads run
/// serially in a fixed order.
void set_deterministic(bool on) noexcept;
bool deterministic() noexcept;

}  // namespace retroroute::nn
