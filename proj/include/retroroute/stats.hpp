#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>

#include <nlohmann/json.hpp>

#include "retroroute/route.hpp"

namespace retroroute {

/// Count histogram with relative frequencies on output.
struct Histogram {
  std::map<int, std::size_t> counts;
  std::size_t total = 0;

  void add(int key, std::size_t n = 1) {
    counts[key] += n;
    total += n;
  }
  double fraction(int key) const;
  /// Fraction of samples with key <= bound.
  double fraction_at_most(int bound) const;
  double fraction_at_least(int bound) const;

  nlohmann::json to_json() const;
  /// "key,count,fraction" rows under a header naming the key column.
  std::string to_csv(const std::string& key_name) const;
};

struct CorpusStats {
  Histogram route_length;    // step_count per route
  Histogram leaves_at_root;  // leaf children of the root per route

  nlohmann::json to_json() const;
};

CorpusStats corpus_stats(std::span<const RouteNode> routes);

int leaves_at_root(const RouteNode& root) noexcept;

}  // namespace retroroute
