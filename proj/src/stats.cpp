#include "retroroute/stats.hpp"

#include <sstream>

namespace retroroute {

double Histogram::fraction(int key) const {
  if (total == 0) return 0.0;
  const auto it = counts.find(key);
  return it == counts.end() ? 0.0 : static_cast<double>(it->second) / static_cast<double>(total);
}

double Histogram::fraction_at_most(int bound) const {
  if (total == 0) return 0.0;
  std::size_t n = 0;
  for (const auto& [k, c] : counts) {
    if (k <= bound) n += c;
  }
  return static_cast<double>(n) / static_cast<double>(total);
}

double Histogram::fraction_at_least(int bound) const {
  if (total == 0) return 0.0;
  std::size_t n = 0;
  for (const auto& [k, c] : counts) {
    if (k >= bound) n += c;
  }
  return static_cast<double>(n) / static_cast<double>(total);
}

nlohmann::json Histogram::to_json() const {
  nlohmann::json counts_j = nlohmann::json::object();
  nlohmann::json fractions_j = nlohmann::json::object();
  for (const auto& [k, c] : counts) {
    counts_j[std::to_string(k)] = c;
    fractions_j[std::to_string(k)] = fraction(k);
  }
  return {{"total", total}, {"counts", counts_j}, {"fractions", fractions_j}};
}

std::string Histogram::to_csv(const std::string& key_name) const {
  std::ostringstream out;
  out << key_name << ",count,fraction\n";
  for (const auto& [k, c] : counts) out << k << ',' << c << ',' << fraction(k) << '\n';
  return out.str();
}

int leaves_at_root(const RouteNode& root) noexcept {
  int n = 0;
  for (const auto& child : root.children) n += child.is_leaf() ? 1 : 0;
  return n;
}

CorpusStats corpus_stats(std::span<const RouteNode> routes) {
  CorpusStats s;
  for (const auto& r : routes) {
    s.route_length.add(step_count(r));
    s.leaves_at_root.add(leaves_at_root(r));
  }
  return s;
}

nlohmann::json CorpusStats::to_json() const {
  return {{"routes", route_length.total},
          {"route_length", route_length.to_json()},
          {"leaves_at_root", leaves_at_root.to_json()},
          {"fraction_at_most_4_steps", route_length.fraction_at_most(4)},
          {"fraction_roots_with_leaf", leaves_at_root.fraction_at_least(1)}};
}

}  // namespace retroroute
