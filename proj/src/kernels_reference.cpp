#include <cmath>
#include <limits>
#include <vector>

#include "retroroute/kernels.hpp"

namespace retroroute::kernels::reference {

void gemm(std::span<const float> a, std::span<const float> b, std::span<float> c,
          std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      float acc = accumulate ? c[i * n + j] : 0.0f;
      for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[p * n + j];
      c[i * n + j] = acc;
    }
  }
}

void gemm_at_b(std::span<const float> a, std::span<const float> b,
               std::span<float> c, std::size_t m, std::size_t k, std::size_t n,
               bool accumulate) {
  for (std::size_t p = 0; p < k; ++p) {
    for (std::size_t j = 0; j < n; ++j) {
      float acc = accumulate ? c[p * n + j] : 0.0f;
      for (std::size_t i = 0; i < m; ++i) acc += a[i * k + p] * b[i * n + j];
      c[p * n + j] = acc;
    }
  }
}

void gemm_a_bt(std::span<const float> a, std::span<const float> b,
               std::span<float> c, std::size_t m, std::size_t n, std::size_t k,
               bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      float acc = accumulate ? c[i * k + p] : 0.0f;
      for (std::size_t j = 0; j < n; ++j) acc += a[i * n + j] * b[p * n + j];
      c[i * k + p] = acc;
    }
  }
}

void attention_forward(const AttentionShape& s, std::span<const float> q,
                       std::span<const float> k, std::span<const float> v,
                       std::span<const std::uint8_t> key_mask,
                       std::span<float> out, std::span<float> probs) {
  const std::size_t hd = s.head_dim();
  const std::size_t D = s.model_dim;
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
  std::vector<double> scores(s.k_len);
  for (std::size_t b = 0; b < s.batch; ++b) {
    for (std::size_t h = 0; h < s.heads; ++h) {
      for (std::size_t i = 0; i < s.q_len; ++i) {
        float* p = &probs[((b * s.heads + h) * s.q_len + i) * s.k_len];
        bool any = false;
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < s.k_len; ++j) {
          const bool visible =
              (key_mask.empty() || key_mask[b * s.k_len + j]) &&
              (!s.causal || j + s.q_len <= i + s.k_len);
          if (!visible) {
            scores[j] = -std::numeric_limits<double>::infinity();
            continue;
          }
          double acc = 0.0;
          for (std::size_t d = 0; d < hd; ++d) {
            acc += static_cast<double>(q[(b * s.q_len + i) * D + h * hd + d]) *
                   k[(b * s.k_len + j) * D + h * hd + d];
          }
          scores[j] = acc * scale;
          mx = std::max(mx, scores[j]);
          any = true;
        }
        double sum = 0.0;
        for (std::size_t j = 0; j < s.k_len; ++j) {
          scores[j] = any ? std::exp(scores[j] - mx) : 0.0;
          sum += scores[j];
        }
        for (std::size_t j = 0; j < s.k_len; ++j) {
          p[j] = any ? static_cast<float>(scores[j] / sum) : 0.0f;
        }
        for (std::size_t d = 0; d < hd; ++d) {
          double acc = 0.0;
          for (std::size_t j = 0; j < s.k_len; ++j) {
            acc += static_cast<double>(p[j]) * v[(b * s.k_len + j) * D + h * hd + d];
          }
          out[(b * s.q_len + i) * D + h * hd + d] = static_cast<float>(acc);
        }
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
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
  std::vector<double> dp(s.k_len);
  for (std::size_t b = 0; b < s.batch; ++b) {
    for (std::size_t h = 0; h < s.heads; ++h) {
      for (std::size_t i = 0; i < s.q_len; ++i) {
        const float* p = &probs[((b * s.heads + h) * s.q_len + i) * s.k_len];
        auto qi = [&](std::size_t d) { return q[(b * s.q_len + i) * D + h * hd + d]; };
        auto doi = [&](std::size_t d) { return dout[(b * s.q_len + i) * D + h * hd + d]; };
        double weighted = 0.0;
        for (std::size_t j = 0; j < s.k_len; ++j) {
          double acc = 0.0;
          for (std::size_t d = 0; d < hd; ++d) {
            acc += static_cast<double>(doi(d)) * v[(b * s.k_len + j) * D + h * hd + d];
          }
          dp[j] = acc;
          weighted += p[j] * acc;
        }
        for (std::size_t j = 0; j < s.k_len; ++j) {
          const double ds = p[j] * (dp[j] - weighted) * scale;
          for (std::size_t d = 0; d < hd; ++d) {
            const std::size_t kj = (b * s.k_len + j) * D + h * hd + d;
            dq[(b * s.q_len + i) * D + h * hd + d] += static_cast<float>(ds * k[kj]);
            dk[kj] += static_cast<float>(ds * qi(d));
            dv[kj] += static_cast<float>(p[j] * doi(d));
          }
        }
      }
    }
  }
}

}  // namespace retroroute::kernels::reference
