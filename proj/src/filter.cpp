#include "retroroute/filter.hpp"

#include <algorithm>
#include <numeric>
#include <unordered_set>

#include "retroroute/errors.hpp"
#include "retroroute/route_json.hpp"
#include "retroroute/smiles_lint.hpp"

namespace retroroute {

namespace {

bool repeats_below(const RouteNode& node, std::vector<const std::string*>& chain) {
  for (const auto* anc : chain) {
    if (*anc == node.smiles) return true;
  }
  chain.push_back(&node.smiles);
  for (const auto& child : node.children) {
    if (repeats_below(child, chain)) return true;
  }
  chain.pop_back();
  return false;
}

struct Checked {
  std::optional<RouteNode> route;
  std::vector<Verdict> verdicts;
  std::string first_failure;
};

Checked check_candidate(const BeamCandidate& cand, const Vocab& vocab, std::string_view target,
                        const StockSet* stock) {
  Checked out;
  auto record = [&](const char* rule, bool ok, const char* reason) {
    out.verdicts.push_back({rule, ok, ok ? "" : reason});
    if (!ok && out.first_failure.empty()) out.first_failure = reason;
  };
  try {
    out.route = parse_route(vocab.decode(cand.ids));
  } catch (const RouteSyntaxError&) {
    record("syntax", false, "syntax_error");
    return out;
  } catch (const DelimiterInSmiles&) {
    record("syntax", false, "syntax_error");
    return out;
  }
  record("syntax", true, "");
  const RouteNode& route = *out.route;
  record("smiles_validity", lint_route(route).valid, "invalid_smiles");
  record("target", route.smiles == target, "target_mismatch");
  if (stock) {
    bool all_in = true;
    for (const auto& leaf : leaves(route)) all_in = all_in && stock->contains(leaf.smiles);
    record("stock", all_in, "stock_miss");
  }
  record("ancestor_repeat", !has_ancestor_repeat(route), "ancestor_repeat");
  return out;
}

}  // namespace

bool has_ancestor_repeat(const RouteNode& root) {
  std::vector<const std::string*> chain;
  return repeats_below(root, chain);
}

FilterResult filter_candidates(std::span<const BeamCandidate> candidates, const Vocab& vocab,
                               std::string_view target, const StockSet* stock) {
  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return beam_before(candidates[a], candidates[b]);
  });

  // The per-candidate rules are independent; only deduplication depends on
  // rank order, so it runs afterwards in sequence.
  std::vector<Checked> checked(order.size());
  const auto n = static_cast<std::ptrdiff_t>(order.size());
#pragma omp parallel for schedule(dynamic) if (n >= 16)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto& cand = candidates[order[static_cast<std::size_t>(i)]];
    if (cand.finished) checked[static_cast<std::size_t>(i)] = check_candidate(cand, vocab, target, stock);
  }

  FilterResult result;
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto& cand = candidates[order[i]];
    if (!cand.finished) continue;
    auto& c = checked[i];
    if (c.first_failure.empty()) {
      const bool fresh = seen.insert(canonical_string(*c.route)).second;
      c.verdicts.push_back({"duplicate", fresh, fresh ? "" : "duplicate"});
      if (!fresh) c.first_failure = "duplicate";
    }
    if (c.first_failure.empty()) {
      FilteredRoute fr;
      fr.route = std::move(*c.route);
      fr.logprob = cand.logprob;
      fr.rank = static_cast<int>(result.survivors.size()) + 1;
      fr.verdicts = std::move(c.verdicts);
      fr.ids = cand.ids;
      result.survivors.push_back(std::move(fr));
    } else {
      ++result.rejection_counts[c.first_failure];
      result.rejected.push_back(
          {order[i], cand.logprob, c.first_failure, std::move(c.verdicts)});
    }
  }
  return result;
}

nlohmann::json prediction_to_json(const FilteredRoute& route) {
  nlohmann::json verdicts = nlohmann::json::object();
  for (const auto& v : route.verdicts) verdicts[v.rule] = v.passed ? "pass" : v.reason;
  return {{"rank", route.rank},
          {"logprob", route.logprob},
          {"route", route_to_json(route.route)},
          {"verdicts", verdicts}};
}

nlohmann::json predictions_to_json(std::span<const FilteredRoute> routes) {
  auto arr = nlohmann::json::array();
  for (const auto& r : routes) arr.push_back(prediction_to_json(r));
  return arr;
}

}  // namespace retroroute
