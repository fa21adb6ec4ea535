#include "retroroute/kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace retroroute::kernels {

namespace {

// Below this many multiply-adds a parallel region costs more than it saves.
constexpr std::size_t kParallelWork = 1u << 15;

bool worth_parallel(std::size_t work) noexcept { return work >= kParallelWork; }

void transpose(std::span<const float> src, std::span<float> dst, std::size_t rows,
               std::size_t cols) {
  constexpr std::size_t kTile = 32;
  for (std::size_t r0 = 0; r0 < rows; r0 += kTile) {
    for (std::size_t c0 = 0; c0 < cols; c0 += kTile) {
      const std::size_t r1 = std::min(rows, r0 + kTile);
      const std::size_t c1 = std::min(cols, c0 + kTile);
      for (std::size_t r = r0; r < r1; ++r) {
        for (std::size_t c = c0; c < c1; ++c) dst[c * rows + r] = src[r * cols + c];
      }
    }
  }
}

inline float dot(const float* a, const float* b, std::size_t n) noexcept {
  float acc = 0.0f;
#pragma omp simd reduction(+ : acc)
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

inline void axpy(float alpha, const float* x, float* y, std::size_t n) noexcept {
#pragma omp simd
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

}  // namespace

void set_num_threads(int threads) {
  omp_set_num_threads(threads > 0 ? threads : omp_get_num_procs());
}

int num_threads() { return omp_get_max_threads(); }

void gemm(std::span<const float> a, std::span<const float> b, std::span<float> c,
          std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
  const float* A = a.data();
  const float* B = b.data();
  float* C = c.data();
  const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static) if (worth_parallel(m * k * n))
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    float* crow = C + static_cast<std::size_t>(i) * n;
    if (!accumulate) std::fill(crow, crow + n, 0.0f);
    const float* arow = A + static_cast<std::size_t>(i) * k;
    for (std::size_t p = 0; p < k; ++p) {
      const float aip = arow[p];
      if (aip == 0.0f) continue;
      axpy(aip, B + p * n, crow, n);
    }
  }
}

void gemm_at_b(std::span<const float> a, std::span<const float> b,
               std::span<float> c, std::size_t m, std::size_t k, std::size_t n,
               bool accumulate) {
  // Aᵀ is materialized so the reduction over m reads contiguous memory.
  std::vector<float> at(m * k);
  transpose(a, at, m, k);
  const float* AT = at.data();
  const float* B = b.data();
  float* C = c.data();
  if (!accumulate) std::fill(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(k * n), 0.0f);
  constexpr std::size_t kBlock = 64;
  const auto out_rows = static_cast<std::ptrdiff_t>(k);
#pragma omp parallel if (worth_parallel(m * k * n))
  for (std::size_t i0 = 0; i0 < m; i0 += kBlock) {
    const std::size_t i1 = std::min(m, i0 + kBlock);
#pragma omp for schedule(static)
    for (std::ptrdiff_t p = 0; p < out_rows; ++p) {
      float* crow = C + static_cast<std::size_t>(p) * n;
      const float* arow = AT + static_cast<std::size_t>(p) * m;
      for (std::size_t i = i0; i < i1; ++i) {
        const float api = arow[i];
        if (api == 0.0f) continue;
        axpy(api, B + i * n, crow, n);
      }
    }
  }
}

void gemm_a_bt(std::span<const float> a, std::span<const float> b,
               std::span<float> c, std::size_t m, std::size_t n, std::size_t k,
               bool accumulate) {
  std::vector<float> bt(k * n);
  transpose(b, bt, k, n);
  gemm(a, bt, c, m, n, k, accumulate);
}

void layer_norm_forward(std::span<const float> x, std::span<const float> gamma,
                        std::span<const float> beta, std::span<float> out,
                        std::span<float> mean, std::span<float> rstd,
                        std::size_t rows, std::size_t cols, float eps) {
  const auto nrows = static_cast<std::ptrdiff_t>(rows);
#pragma omp parallel for schedule(static) if (worth_parallel(rows * cols * 8))
  for (std::ptrdiff_t r = 0; r < nrows; ++r) {
    const float* xr = x.data() + static_cast<std::size_t>(r) * cols;
    float* yr = out.data() + static_cast<std::size_t>(r) * cols;
    double sum = 0.0;
    for (std::size_t c = 0; c < cols; ++c) sum += xr[c];
    const double mu = sum / static_cast<double>(cols);
    double var = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      const double d = xr[c] - mu;
      var += d * d;
    }
    var /= static_cast<double>(cols);
    const float inv = static_cast<float>(1.0 / std::sqrt(var + eps));
    const float muf = static_cast<float>(mu);
    for (std::size_t c = 0; c < cols; ++c) {
      yr[c] = (xr[c] - muf) * inv * gamma[c] + beta[c];
    }
    if (!mean.empty()) mean[static_cast<std::size_t>(r)] = muf;
    if (!rstd.empty()) rstd[static_cast<std::size_t>(r)] = inv;
  }
}

void gelu_forward(std::span<const float> x, std::span<float> out) {
  const auto n = static_cast<std::ptrdiff_t>(x.size());
#pragma omp parallel for schedule(static) if (worth_parallel(x.size() * 16))
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const float v = x[static_cast<std::size_t>(i)];
    out[static_cast<std::size_t>(i)] =
        0.5f * v * (1.0f + std::erf(v * static_cast<float>(M_SQRT1_2)));
  }
}

void softmax_rows(std::span<const float> x, std::span<float> out,
                  std::size_t rows, std::size_t cols) {
  const auto nrows = static_cast<std::ptrdiff_t>(rows);
#pragma omp parallel for schedule(static) if (worth_parallel(rows * cols * 8))
  for (std::ptrdiff_t r = 0; r < nrows; ++r) {
    const float* xr = x.data() + static_cast<std::size_t>(r) * cols;
    float* yr = out.data() + static_cast<std::size_t>(r) * cols;
    float mx = -std::numeric_limits<float>::infinity();
    for (std::size_t c = 0; c < cols; ++c) mx = std::max(mx, xr[c]);
    double sum = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      yr[c] = std::exp(xr[c] - mx);
      sum += yr[c];
    }
    const float inv = static_cast<float>(1.0 / sum);
    for (std::size_t c = 0; c < cols; ++c) yr[c] *= inv;
  }
}

void attention_forward(const AttentionShape& s, std::span<const float> q,
                       std::span<const float> k, std::span<const float> v,
                       std::span<const std::uint8_t> key_mask,
                       std::span<float> out, std::span<float> probs) {
  const std::size_t hd = s.head_dim();
  const std::size_t D = s.model_dim;
  const float scale = 1.0f / std::sqrt(static_cast<float>(hd));
  const std::size_t offset = s.k_len - s.q_len;
  const auto groups = static_cast<std::ptrdiff_t>(s.batch * s.heads);
#pragma omp parallel for schedule(static) \
    if (worth_parallel(s.prob_size() * hd * 2))
  for (std::ptrdiff_t g = 0; g < groups; ++g) {
    const std::size_t b = static_cast<std::size_t>(g) / s.heads;
    const std::size_t h = static_cast<std::size_t>(g) % s.heads;
    const std::uint8_t* mask = key_mask.empty() ? nullptr : key_mask.data() + b * s.k_len;
    for (std::size_t i = 0; i < s.q_len; ++i) {
      float* p = probs.data() + ((b * s.heads + h) * s.q_len + i) * s.k_len;
      const float* qi = q.data() + (b * s.q_len + i) * D + h * hd;
      float* oi = out.data() + (b * s.q_len + i) * D + h * hd;
      std::fill(oi, oi + hd, 0.0f);
      const std::size_t limit = s.causal ? std::min(s.k_len, i + offset + 1) : s.k_len;
      float mx = -std::numeric_limits<float>::infinity();
      for (std::size_t j = 0; j < s.k_len; ++j) {
        if (j >= limit || (mask && !mask[j])) {
          p[j] = -std::numeric_limits<float>::infinity();
          continue;
        }
        p[j] = dot(qi, k.data() + (b * s.k_len + j) * D + h * hd, hd) * scale;
        mx = std::max(mx, p[j]);
      }
      if (mx == -std::numeric_limits<float>::infinity()) {
        std::fill(p, p + s.k_len, 0.0f);
        continue;
      }
      double sum = 0.0;
      for (std::size_t j = 0; j < s.k_len; ++j) {
        p[j] = std::exp(p[j] - mx);
        sum += p[j];
      }
      const float inv = static_cast<float>(1.0 / sum);
      for (std::size_t j = 0; j < s.k_len; ++j) {
        p[j] *= inv;
        if (p[j] != 0.0f) axpy(p[j], v.data() + (b * s.k_len + j) * D + h * hd, oi, hd);
      }
    }
  }
}

void attention_backward(const AttentionShape& s, std::span<const float> q,
                        std::span<const float> k, std::span<const float> v,
                        std::span<const float> probs, std::span<const float> dout,
                        std::span<float> dq, std::span<float> dk,
                        std::span<float> dv) {
  const std::size_t hd = s.head_dim();
  const std::size_t D = s.model_dim;
  const float scale = 1.0f / std::sqrt(static_cast<float>(hd));
  const auto groups = static_cast<std::ptrdiff_t>(s.batch * s.heads);
#pragma omp parallel if (worth_parallel(s.prob_size() * hd * 4))
  {
    std::vector<float> dp(s.k_len);
#pragma omp for schedule(static)
    for (std::ptrdiff_t g = 0; g < groups; ++g) {
      const std::size_t b = static_cast<std::size_t>(g) / s.heads;
      const std::size_t h = static_cast<std::size_t>(g) % s.heads;
      for (std::size_t i = 0; i < s.q_len; ++i) {
        const float* p = probs.data() + ((b * s.heads + h) * s.q_len + i) * s.k_len;
        const float* doi = dout.data() + (b * s.q_len + i) * D + h * hd;
        const float* qi = q.data() + (b * s.q_len + i) * D + h * hd;
        float* dqi = dq.data() + (b * s.q_len + i) * D + h * hd;
        double weighted = 0.0;
        for (std::size_t j = 0; j < s.k_len; ++j) {
          if (p[j] == 0.0f) {
            dp[j] = 0.0f;
            continue;
          }
          dp[j] = dot(doi, v.data() + (b * s.k_len + j) * D + h * hd, hd);
          weighted += static_cast<double>(p[j]) * dp[j];
        }
        const float wsum = static_cast<float>(weighted);
        for (std::size_t j = 0; j < s.k_len; ++j) {
          if (p[j] == 0.0f) continue;
          const std::size_t row = (b * s.k_len + j) * D + h * hd;
          const float ds = p[j] * (dp[j] - wsum) * scale;
          axpy(ds, k.data() + row, dqi, hd);
          axpy(ds, qi, dk.data() + row, hd);
          axpy(p[j], doi, dv.data() + row, hd);
        }
      }
    }
  }
}

}  // namespace retroroute::kernels
