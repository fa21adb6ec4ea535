#pragma once

// Route corpora: test-set separation, permutation augmentation, dataset
// entries, and a synthetic corpus generator for desk-scale runs.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "retroroute/route.hpp"

namespace retroroute {

struct CurateResult {
  std::vector<RouteNode> routes;
  std::size_t removed = 0;
};

/// Drops every route whose canonical form matches that of any test route.
/// Input order is preserved.
CurateResult curate(std::span<const RouteNode> full,
                    std::span<const std::vector<RouteNode>> test_sets);

/// Each route followed by up to k distinct reorderings of it.
std::vector<RouteNode> augment(std::span<const RouteNode> corpus, std::size_t k);

struct DatasetEntry {
  std::string target;
  std::optional<std::string> sm;
  int steps = 0;
  std::string route;

  nlohmann::json to_json() const;
  /// Throws InputError when the entry's fields are inconsistent with its
  /// route.
  static DatasetEntry from_json(const nlohmann::json& j);
  friend bool operator==(const DatasetEntry&, const DatasetEntry&) = default;
};

/// with_sm: one entry per (route, leaf occurrence); otherwise one per route.
std::vector<DatasetEntry> make_entries(std::span<const RouteNode> corpus, bool with_sm);

/// Line-delimited JSON.
void save_entries(const std::string& path, std::span<const DatasetEntry> entries);
std::vector<DatasetEntry> load_entries(const std::string& path);

struct ToyCorpus {
  std::vector<RouteNode> routes;
  StockSet stock;
};

/// Synthetic routes over pseudo-molecules.
///
/// A pseudo-molecule is a chain of one- or two-atom blocks joined by bonds
/// ranked '-' < '=' < '#'. It splits at the first occurrence of its
/// highest-ranked bond into a left and a right fragment; a single block is
/// a starting material. Every route is the full decomposition of its target
/// under this rule, so the route is a deterministic function of the target.
/// Step counts follow a geometric law with ratio 1/2 truncated at
/// max_steps. Targets are distinct. The stock holds every leaf.
ToyCorpus gen_toy_corpus(std::uint64_t seed, std::size_t n_routes, int max_steps);

/// The decomposition used by gen_toy_corpus, applied to any chain string.
RouteNode toy_decompose(const std::string& molecule);

}  // namespace retroroute
