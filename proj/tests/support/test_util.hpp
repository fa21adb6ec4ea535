#pragma once

// Generators and oracles shared by the unit tests and the acceptance binary.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "retroroute/decoder_session.hpp"
#include "retroroute/ops.hpp"
#include "retroroute/random.hpp"
#include "retroroute/route.hpp"
#include "retroroute/tensor.hpp"

namespace testutil {

using retroroute::RouteNode;
using retroroute::Rng;

// --- routes ------------------------------------------------------------------

inline const std::vector<std::string>& molecule_pool() {
  static const std::vector<std::string> pool{
      "C",        "CC",          "O",       "N",          "c1ccccc1", "C(=O)O",
      "CC(C)N",   "Br",          "CCO",     "C#N",        "OC(=O)C1CC1", "ClCCl",
      "C/C=C/C",  "c1ccc2ccccc2c1", "S(=O)(=O)N", "O.N", "F/C=C\\F", "N1CCCCC1"};
  return pool;
}

/// Random tree with 1..max_nodes nodes; each new node hangs off a uniformly
/// chosen earlier node. Molecules come from a small pool so that equal
/// siblings are common.
inline RouteNode random_route(Rng& rng, std::size_t max_nodes,
                              std::size_t pool_size = 0) {
  const auto& pool = molecule_pool();
  const std::size_t k = pool_size ? std::min(pool_size, pool.size()) : pool.size();
  const std::size_t n = 1 + rng.below(max_nodes);
  std::vector<std::size_t> parent(n, 0);
  std::vector<std::string> smiles(n);
  for (std::size_t i = 0; i < n; ++i) {
    smiles[i] = pool[rng.below(k)];
    if (i > 0) parent[i] = rng.below(i);
  }
  std::function<RouteNode(std::size_t)> build = [&](std::size_t i) {
    RouteNode node{smiles[i], {}};
    for (std::size_t j = i + 1; j < n; ++j) {
      if (parent[j] == i) node.children.push_back(build(j));
    }
    return node;
  };
  return build(0);
}

/// Random reordering of every child list.
inline RouteNode shuffle_children(const RouteNode& node, Rng& rng) {
  RouteNode out{node.smiles, {}};
  for (const auto& c : node.children) out.children.push_back(shuffle_children(c, rng));
  for (std::size_t i = out.children.size(); i > 1; --i) {
    std::swap(out.children[i - 1], out.children[rng.below(i)]);
  }
  return out;
}

/// Every tree reachable by reordering child lists, with repetitions.
inline std::vector<RouteNode> all_orderings(const RouteNode& node) {
  if (node.children.empty()) return {node};
  std::vector<std::vector<RouteNode>> options;
  for (const auto& c : node.children) options.push_back(all_orderings(c));
  std::vector<std::size_t> perm(node.children.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::vector<RouteNode> out;
  do {
    // Cartesian product over the children's own orderings, in perm order.
    std::vector<std::size_t> pick(perm.size(), 0);
    for (;;) {
      RouteNode t{node.smiles, {}};
      for (std::size_t i = 0; i < perm.size(); ++i) {
        t.children.push_back(options[perm[i]][pick[i]]);
      }
      out.push_back(std::move(t));
      bool advanced = false;
      for (std::size_t d = perm.size(); d-- > 0;) {
        if (++pick[d] < options[perm[d]].size()) {
          advanced = true;
          break;
        }
        pick[d] = 0;
      }
      if (!advanced) break;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return out;
}

/// Brute-force permutation equivalence.
inline bool same_up_to_order(const RouteNode& a, const RouteNode& b) {
  for (const auto& t : all_orderings(a)) {
    if (t == b) return true;
  }
  return false;
}

// --- gradient checking ---------------------------------------------------------

struct GradCheck {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
};

/// Compares backprop against central differences for every element of every
/// input. The scalar under test is L = Σ w·f(inputs) with fixed random
/// weights w, accumulated in double; the difference quotient divides by the
/// step actually realized in float. Relative error is
/// |analytic − numeric| / max(|analytic|, |numeric|, scale), where scale is
/// the largest analytic magnitude in the same tensor (at least `floor`).
/// Measuring against the tensor's own scale keeps float32 rounding in the
/// difference quotient from dominating elements whose gradient is near zero.
inline GradCheck grad_check(
    std::vector<retroroute::nn::Tensor>& inputs,
    const std::function<retroroute::nn::Tensor(std::vector<retroroute::nn::Tensor>&)>& f,
    std::uint64_t seed, double h = 1e-3, double floor = 1e-2) {
  using retroroute::nn::Tensor;
  for (auto& t : inputs) {
    t.set_requires_grad(true);
    t.zero_grad();
  }
  auto y = f(inputs);
  Rng rng(seed);
  std::vector<float> w(y.numel());
  for (auto& v : w) v = 2.0f * rng.uniform() - 1.0f;
  y.backward(w);

  auto objective = [&]() {
    retroroute::nn::NoGradGuard guard;
    const auto out = f(inputs);
    double s = 0.0;
    const auto d = out.data();
    for (std::size_t i = 0; i < d.size(); ++i) s += static_cast<double>(w[i]) * d[i];
    return s;
  };

  GradCheck result;
  for (auto& t : inputs) {
    if (!t.has_grad()) t.grad();
    const std::vector<float> analytic(t.grad().begin(), t.grad().end());
    double scale = floor;
    for (float g : analytic) scale = std::max(scale, static_cast<double>(std::abs(g)));
    auto data = t.data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const float x0 = data[i];
      const float xp = static_cast<float>(x0 + h);
      const float xm = static_cast<float>(x0 - h);
      data[i] = xp;
      const double lp = objective();
      data[i] = xm;
      const double lm = objective();
      data[i] = x0;
      const double numeric = (lp - lm) / (static_cast<double>(xp) - static_cast<double>(xm));
      const double a = analytic[i];
      const double denom = std::max({std::abs(a), std::abs(numeric), scale});
      result.max_rel_error = std::max(result.max_rel_error, std::abs(a - numeric) / denom);
      ++result.checked;
    }
  }
  return result;
}

inline retroroute::nn::Tensor random_tensor(Rng& rng, retroroute::nn::Shape shape,
                                            float lo = -1.0f, float hi = 1.0f) {
  std::vector<float> v(retroroute::nn::shape_numel(shape));
  for (auto& x : v) x = lo + (hi - lo) * rng.uniform();
  return retroroute::nn::Tensor::from_data(std::move(shape), std::move(v));
}

// --- decoding oracles ----------------------------------------------------------

/// Next-token distribution fixed by a seeded table keyed on the prefix. With
/// `uniform` every continuation is equally likely, which exercises ties.
class TableSession : public retroroute::DecoderSession {
 public:
  TableSession(std::size_t vocab, std::uint64_t seed, bool uniform = false)
      : vocab_(vocab), seed_(seed), uniform_(uniform), rows_(1) {}

  std::size_t vocab_size() const override { return vocab_; }

  std::vector<double> step(std::span<const int> tokens) override {
    std::vector<double> out;
    for (std::size_t r = 0; r < rows_.size(); ++r) {
      rows_[r].push_back(tokens[r]);
      const auto lp = distribution(rows_[r]);
      out.insert(out.end(), lp.begin(), lp.end());
    }
    return out;
  }

  void select(std::span<const std::size_t> parents) override {
    std::vector<std::vector<int>> next;
    for (auto p : parents) next.push_back(rows_.at(p));
    rows_ = std::move(next);
  }

  /// Log-probabilities after consuming `prefix` (which starts with <bos>).
  std::vector<double> distribution(const std::vector<int>& prefix) const {
    std::vector<double> lp(vocab_);
    if (uniform_) {
      std::fill(lp.begin(), lp.end(), -std::log(static_cast<double>(vocab_)));
      return lp;
    }
    std::uint64_t key = seed_;
    for (int t : prefix) key = retroroute::mix_seed(key, static_cast<std::uint64_t>(t) + 7);
    Rng rng(key);
    double mx = -1e300;
    for (auto& v : lp) {
      v = 3.0 * (rng.uniform_double() - 0.5);
      mx = std::max(mx, v);
    }
    double s = 0.0;
    for (double v : lp) s += std::exp(v - mx);
    const double lse = mx + std::log(s);
    for (auto& v : lp) v -= lse;
    return lp;
  }

 private:
  std::size_t vocab_;
  std::uint64_t seed_;
  bool uniform_;
  std::vector<std::vector<int>> rows_;
};

struct ScoredSequence {
  std::vector<int> ids;
  double logprob = 0.0;
  bool finished = false;
};

/// Every sequence a beam could end with: those ending at the first <eos>
/// within max_len tokens, and the <eos>-free ones of exactly max_len
/// tokens. Scores are summed left to right like the decoder does; the
/// result is sorted by (logprob desc, ids asc).
inline std::vector<ScoredSequence> exhaustive_sequences(const TableSession& model,
                                                        std::size_t max_len, int bos, int eos) {
  std::vector<ScoredSequence> out;
  std::function<void(std::vector<int>&, double)> walk = [&](std::vector<int>& ids, double lp) {
    std::vector<int> prefix{bos};
    prefix.insert(prefix.end(), ids.begin(), ids.end());
    const auto dist = model.distribution(prefix);
    for (std::size_t v = 0; v < dist.size(); ++v) {
      ids.push_back(static_cast<int>(v));
      const double score = lp + dist[v];
      if (static_cast<int>(v) == eos) {
        out.push_back({ids, score, true});
      } else if (ids.size() == max_len) {
        out.push_back({ids, score, false});
      } else {
        walk(ids, score);
      }
      ids.pop_back();
    }
  };
  std::vector<int> ids;
  walk(ids, 0.0);
  std::sort(out.begin(), out.end(), [](const ScoredSequence& a, const ScoredSequence& b) {
    return std::make_tuple(-a.logprob, a.ids) < std::make_tuple(-b.logprob, b.ids);
  });
  return out;
}

}  // namespace testutil
