// Parallel kernels against the serial reference versions.

#include <benchmark/benchmark.h>

#include <vector>

#include "retroroute/kernels.hpp"
#include "retroroute/random.hpp"

namespace kr = retroroute::kernels;

namespace {

std::vector<float> filled(std::size_t n, std::uint64_t seed) {
  retroroute::Rng rng(seed);
  std::vector<float> v(n);
  for (auto& x : v) x = rng.uniform() - 0.5f;
  return v;
}

template <auto Gemm>
void bm_gemm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = filled(n * n, 1), b = filled(n * n, 2);
  std::vector<float> c(n * n);
  for (auto _ : state) {
    Gemm(a, b, c, n, n, n, false);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * 2 * n * n * n));
}

template <auto Forward>
void bm_attention(benchmark::State& state) {
  kr::AttentionShape s;
  s.batch = 8;
  s.heads = 4;
  s.q_len = static_cast<std::size_t>(state.range(0));
  s.k_len = s.q_len;
  s.model_dim = 64;
  s.causal = true;
  const auto q = filled(s.batch * s.q_len * s.model_dim, 3);
  const auto k = filled(s.batch * s.k_len * s.model_dim, 4);
  const auto v = filled(s.batch * s.k_len * s.model_dim, 5);
  std::vector<float> out(q.size()), probs(s.prob_size());
  for (auto _ : state) {
    Forward(s, q, k, v, {}, out, probs);
    benchmark::DoNotOptimize(out.data());
  }
}

void gemm_parallel(std::span<const float> a, std::span<const float> b, std::span<float> c,
                   std::size_t m, std::size_t k, std::size_t n, bool acc) {
  kr::gemm(a, b, c, m, k, n, acc);
}
void gemm_serial(std::span<const float> a, std::span<const float> b, std::span<float> c,
                 std::size_t m, std::size_t k, std::size_t n, bool acc) {
  kr::reference::gemm(a, b, c, m, k, n, acc);
}
void gemm_at_b_parallel(std::span<const float> a, std::span<const float> b, std::span<float> c,
                        std::size_t m, std::size_t k, std::size_t n, bool acc) {
  kr::gemm_at_b(a, b, c, m, k, n, acc);
}
void gemm_at_b_serial(std::span<const float> a, std::span<const float> b, std::span<float> c,
                      std::size_t m, std::size_t k, std::size_t n, bool acc) {
  kr::reference::gemm_at_b(a, b, c, m, k, n, acc);
}
void attention_parallel(const kr::AttentionShape& s, std::span<const float> q,
                        std::span<const float> k, std::span<const float> v,
                        std::span<const std::uint8_t> mask, std::span<float> out,
                        std::span<float> probs) {
  kr::attention_forward(s, q, k, v, mask, out, probs);
}
void attention_serial(const kr::AttentionShape& s, std::span<const float> q,
                      std::span<const float> k, std::span<const float> v,
                      std::span<const std::uint8_t> mask, std::span<float> out,
                      std::span<float> probs) {
  kr::reference::attention_forward(s, q, k, v, mask, out, probs);
}

}  // namespace

BENCHMARK(bm_gemm<gemm_parallel>)->Name("gemm/parallel")->RangeMultiplier(2)->Range(64, 512);
BENCHMARK(bm_gemm<gemm_serial>)->Name("gemm/reference")->RangeMultiplier(2)->Range(64, 512);
BENCHMARK(bm_gemm<gemm_at_b_parallel>)->Name("gemm_at_b/parallel")->RangeMultiplier(2)->Range(64, 512);
BENCHMARK(bm_gemm<gemm_at_b_serial>)->Name("gemm_at_b/reference")->RangeMultiplier(2)->Range(64, 512);
BENCHMARK(bm_attention<attention_parallel>)->Name("attention/parallel")->Arg(32)->Arg(128);
BENCHMARK(bm_attention<attention_serial>)->Name("attention/reference")->Arg(32)->Arg(128);

BENCHMARK_MAIN();
