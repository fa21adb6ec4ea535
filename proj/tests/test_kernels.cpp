#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "retroroute/kernels.hpp"
#include "support/test_util.hpp"

using namespace retroroute;

namespace {

std::vector<float> random_vec(Rng& rng, std::size_t n) {
  std::vector<float> v(n);
  for (auto& x : v) x = 2.0f * rng.uniform() - 1.0f;
  return v;
}

void expect_close(const std::vector<float>& a, const std::vector<float>& b, double tol) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_NEAR(a[i], b[i], tol * std::max(1.0, std::abs(static_cast<double>(b[i])))) << i;
  }
}

struct ThreadCap {
  explicit ThreadCap(int n) { kernels::set_num_threads(n); }
  ~ThreadCap() { kernels::set_num_threads(0); }
};

}  // namespace

TEST(Kernels, GemmVariantsMatchReference) {
  Rng rng(1);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t m = 1 + rng.below(70), k = 1 + rng.below(70), n = 1 + rng.below(70);
    const bool acc = rng.bernoulli(0.5);
    const auto a = random_vec(rng, m * k), b = random_vec(rng, k * n);
    const auto init = random_vec(rng, m * n);
    auto c1 = init, c2 = init;
    kernels::gemm(a, b, c1, m, k, n, acc);
    kernels::reference::gemm(a, b, c2, m, k, n, acc);
    expect_close(c1, c2, 1e-5);

    const auto at = random_vec(rng, m * k), bt = random_vec(rng, m * n);
    std::vector<float> d1(k * n, 0.5f), d2(k * n, 0.5f);
    kernels::gemm_at_b(at, bt, d1, m, k, n, acc);
    kernels::reference::gemm_at_b(at, bt, d2, m, k, n, acc);
    expect_close(d1, d2, 1e-5);

    const auto x = random_vec(rng, m * n), y = random_vec(rng, k * n);
    std::vector<float> e1(m * k, -0.25f), e2(m * k, -0.25f);
    kernels::gemm_a_bt(x, y, e1, m, n, k, acc);
    kernels::reference::gemm_a_bt(x, y, e2, m, n, k, acc);
    expect_close(e1, e2, 1e-5);
  }
}

TEST(Kernels, AttentionMatchesReference) {
  Rng rng(2);
  for (int trial = 0; trial < 30; ++trial) {
    kernels::AttentionShape s;
    s.batch = 1 + rng.below(3);
    s.heads = 1 + rng.below(4);
    s.model_dim = s.heads * (1 + rng.below(8));
    s.k_len = 1 + rng.below(12);
    s.causal = rng.bernoulli(0.5);
    s.q_len = s.causal ? 1 + rng.below(s.k_len) : 1 + rng.below(12);
    const auto q = random_vec(rng, s.batch * s.q_len * s.model_dim);
    const auto k = random_vec(rng, s.batch * s.k_len * s.model_dim);
    const auto v = random_vec(rng, s.batch * s.k_len * s.model_dim);
    std::vector<std::uint8_t> mask(s.batch * s.k_len);
    for (auto& m : mask) m = rng.bernoulli(0.8) ? 1 : 0;
    std::vector<float> o1(q.size()), o2(q.size()), p1(s.prob_size()), p2(s.prob_size());
    kernels::attention_forward(s, q, k, v, mask, o1, p1);
    kernels::reference::attention_forward(s, q, k, v, mask, o2, p2);
    expect_close(o1, o2, 1e-5);
    expect_close(p1, p2, 1e-5);

    const auto dout = random_vec(rng, q.size());
    std::vector<float> dq1(q.size()), dk1(k.size()), dv1(v.size());
    std::vector<float> dq2(q.size()), dk2(k.size()), dv2(v.size());
    kernels::attention_backward(s, q, k, v, p1, dout, dq1, dk1, dv1);
    kernels::reference::attention_backward(s, q, k, v, p2, dout, dq2, dk2, dv2);
    expect_close(dq1, dq2, 1e-4);
    expect_close(dk1, dk2, 1e-4);
    expect_close(dv1, dv2, 1e-4);
  }
}

TEST(Kernels, FullyMaskedQueryGivesZeroRow) {
  kernels::AttentionShape s;
  s.model_dim = 2;
  s.q_len = 1;
  s.k_len = 2;
  const std::vector<float> q{1, 2}, k{1, 1, 2, 2}, v{3, 4, 5, 6};
  const std::vector<std::uint8_t> mask{0, 0};
  std::vector<float> out(2, 9.0f), probs(2, 9.0f);
  kernels::attention_forward(s, q, k, v, mask, out, probs);
  EXPECT_EQ(out, (std::vector<float>{0, 0}));
  EXPECT_EQ(probs, (std::vector<float>{0, 0}));
}

TEST(Kernels, ResultsDoNotDependOnThreadCount) {
  Rng rng(3);
  const std::size_t m = 300, k = 200, n = 150;
  const auto a = random_vec(rng, m * k), b = random_vec(rng, k * n);
  std::vector<float> one(m * n), many(m * n), t1(k * k), t2(k * k);
  {
    ThreadCap cap(1);
    kernels::gemm(a, b, one, m, k, n);
    kernels::gemm_at_b(a, a, t1, m, k, k);
  }
  {
    ThreadCap cap(4);
    kernels::gemm(a, b, many, m, k, n);
    kernels::gemm_at_b(a, a, t2, m, k, k);
  }
  EXPECT_EQ(one, many);
  EXPECT_EQ(t1, t2);
}

TEST(Kernels, LayerNormGeluSoftmax) {
  const std::vector<float> x{1, 2, 3, 4, -1, 0, 1, 2};
  const std::vector<float> g{1, 1, 1, 1}, b{0, 0, 0, 0};
  std::vector<float> out(8), mean(2), rstd(2);
  kernels::layer_norm_forward(x, g, b, out, mean, rstd, 2, 4, 1e-5f);
  EXPECT_NEAR(mean[0], 2.5, 1e-6);
  EXPECT_NEAR(rstd[0], 1.0 / std::sqrt(1.25 + 1e-5), 1e-5);
  EXPECT_NEAR(out[0], -1.5 / std::sqrt(1.25 + 1e-5), 1e-5);

  const std::vector<float> gx{-2.0f, 0.0f, 1.0f};
  std::vector<float> gy(3);
  kernels::gelu_forward(gx, gy);
  for (std::size_t i = 0; i < 3; ++i) {
    const double v = gx[i];
    EXPECT_NEAR(gy[i], 0.5 * v * (1.0 + std::erf(v / std::sqrt(2.0))), 1e-6);
  }

  const std::vector<float> sx{1000.0f, 1000.0f, 0.0f, std::log(3.0f)};
  std::vector<float> sy(4);
  kernels::softmax_rows(sx, sy, 2, 2);
  EXPECT_NEAR(sy[0], 0.5, 1e-6);
  EXPECT_NEAR(sy[3], 0.75, 1e-6);
}
