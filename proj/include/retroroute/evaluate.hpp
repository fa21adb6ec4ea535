#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "retroroute/decoder_session.hpp"
#include "retroroute/filter.hpp"
#include "retroroute/route.hpp"
#include "retroroute/stats.hpp"
#include "retroroute/tokenizer.hpp"

namespace retroroute {

struct EvalOptions {
  bool sm_mode = false;  // feed the deepest leaf of the reference as the SM
  std::size_t width = 50;
  std::vector<int> ks{1, 2, 3, 4, 5, 10};
  std::size_t max_len = 0;  // 0 = the session's own limit
  const StockSet* stock = nullptr;
};

struct RouteOutcome {
  int hit_rank = 0;  // 1-based rank of the first matching survivor, 0 = miss
  int steps = 0;
  std::size_t survivors = 0;
  std::size_t finished = 0;  // finished beams before filtering
  bool encodable = true;
  std::string error;  // why the route could not be attempted
};

struct EvalReport {
  std::size_t n_routes = 0;
  std::map<int, double> topk;                       // K -> accuracy
  std::map<int, std::map<int, double>> per_length;  // steps -> K -> accuracy
  std::map<int, std::size_t> per_length_count;
  std::map<std::string, std::size_t> rejection_counts;
  Histogram route_length;
  Histogram leaves_at_root;
  std::size_t no_finished_beam = 0;
  std::size_t unencodable = 0;
  std::vector<RouteOutcome> outcomes;  // in input order

  nlohmann::json to_json() const;
  std::string topk_csv() const;
  std::string per_length_csv() const;
};

/// A prediction matches when its canonical form equals the reference's.
bool routes_match(const RouteNode& prediction, const RouteNode& reference);

/// Beam search + filter for each reference route; routes are processed in
/// parallel and merged in input order.
EvalReport evaluate(const SessionFactory& factory, const Vocab& vocab,
                    std::span<const RouteNode> references, const EvalOptions& options);

/// Encoder input for predicting a route: target, optional SM, step count.
std::vector<int> encoder_ids_for(const RouteNode& reference, bool sm_mode, const Vocab& vocab);

}  // namespace retroroute
