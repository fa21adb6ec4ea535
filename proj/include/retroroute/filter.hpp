#pragma once

// Validity filter applied to finished beam candidates, in this order:
//
//   syntax           decoded text parses as a route string
//   smiles_validity  every molecule passes the SMILES linter
//   target           root molecule equals the requested target exactly
//   stock            every leaf is in the stock set (only when one is given)
//   ancestor_repeat  no molecule equals one of its ancestors
//   duplicate        canonical form differs from every higher-ranked survivor
//
// Unfinished candidates are skipped: they cannot parse.

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "retroroute/beam_search.hpp"
#include "retroroute/route.hpp"
#include "retroroute/tokenizer.hpp"

namespace retroroute {

struct Verdict {
  std::string rule;
  bool passed = true;
  std::string reason;  // empty when passed
};

struct FilteredRoute {
  RouteNode route;
  double logprob = 0.0;
  int rank = 0;  // 1-based among survivors
  std::vector<Verdict> verdicts;
  std::vector<int> ids;
};

struct RejectedCandidate {
  std::size_t candidate_index = 0;
  double logprob = 0.0;
  std::string reason;  // reason of the first failing rule
  std::vector<Verdict> verdicts;
};

struct FilterResult {
  std::vector<FilteredRoute> survivors;
  std::vector<RejectedCandidate> rejected;
  std::map<std::string, std::size_t> rejection_counts;
};

/// Candidates are considered in beam_before order regardless of input order.
FilterResult filter_candidates(std::span<const BeamCandidate> candidates, const Vocab& vocab,
                               std::string_view target, const StockSet* stock = nullptr);

/// True when some molecule in the tree equals one of its ancestors.
bool has_ancestor_repeat(const RouteNode& root);

nlohmann::json prediction_to_json(const FilteredRoute& route);
nlohmann::json predictions_to_json(std::span<const FilteredRoute> routes);

}  // namespace retroroute
