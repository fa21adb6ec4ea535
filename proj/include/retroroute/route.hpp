#pragma once

// Synthesis-route trees and their compact string form.
//
// A route is a tree of molecule strings: the root is the target compound,
// leaves are starting materials, and each parent with its children forms
// one reaction. The string form is
//
//   {'smiles':'<mol>','children':[<node>,<node>,...]}
//
// with the children key omitted for leaves and no whitespace anywhere.

#include <cstddef>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace retroroute {

struct RouteNode {
  std::string smiles;
  std::vector<RouteNode> children;

  bool is_leaf() const noexcept { return children.empty(); }

  friend bool operator==(const RouteNode&, const RouteNode&) = default;
};

/// True if `c` is one of the characters reserved by the route grammar.
bool is_route_delimiter(char c) noexcept;

/// Throws DelimiterInSmiles for an empty or delimiter-bearing molecule.
void check_molecule(std::string_view smiles);

std::string serialize(const RouteNode& root);

/// Throws RouteSyntaxError on any deviation from the serialized grammar,
/// including an explicit empty children list.
RouteNode parse_route(std::string_view text);

/// Tree height in edges: 0 for a single molecule.
int step_count(const RouteNode& root) noexcept;

std::size_t node_count(const RouteNode& root) noexcept;

struct LeafInfo {
  std::string smiles;
  int depth = 0;

  friend bool operator==(const LeafInfo&, const LeafInfo&) = default;
};

/// Starting materials in pre-order with their edge depth from the root.
std::vector<LeafInfo> leaves(const RouteNode& root);

/// Leaf of maximal depth; ties go to the lexicographically smallest string.
std::string deepest_leaf(const RouteNode& root);

/// Children sorted recursively by the serialization of their canonical
/// subtrees. Two routes are permutations of each other iff their canonical
/// forms are equal.
RouteNode canonicalize(const RouteNode& root);

/// Serialization of the canonical form.
std::string canonical_string(const RouteNode& root);

/// Up to `limit` child reorderings of `root`, each distinct from the input
/// and from each other. Orderings are enumerated like an odometer over the
/// internal nodes in pre-order, the first node being the most significant
/// digit and each digit stepping through its lexicographic permutations.
std::vector<RouteNode> permutations(const RouteNode& root, std::size_t limit);

/// Set of purchasable molecules, compared after whitespace trimming.
class StockSet {
 public:
  StockSet() = default;

  void insert(std::string_view smiles);
  bool contains(std::string_view smiles) const;
  std::size_t size() const noexcept { return molecules_.size(); }

  /// Newline-delimited molecule file; blank lines are skipped.
  static StockSet load(const std::string& path);
  void save(const std::string& path) const;

 private:
  std::unordered_set<std::string> molecules_;
};

}  // namespace retroroute
