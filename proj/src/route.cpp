#include "retroroute/route.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>
#include <utility>

#include "retroroute/errors.hpp"

namespace retroroute {

namespace {

constexpr std::string_view kOpenNode = "{'smiles':'";
constexpr std::string_view kChildrenKey = "','children':[";

bool is_space(char c) noexcept {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

std::string_view trim(std::string_view s) noexcept {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

void serialize_into(const RouteNode& node, std::string& out) {
  check_molecule(node.smiles);
  out += kOpenNode;
  out += node.smiles;
  if (node.children.empty()) {
    out += "'}";
    return;
  }
  out += kChildrenKey;
  for (std::size_t i = 0; i < node.children.size(); ++i) {
    if (i > 0) out += ',';
    serialize_into(node.children[i], out);
  }
  out += "]}";
}

class RouteParser {
 public:
  explicit RouteParser(std::string_view text) : text_(text) {}

  RouteNode parse() {
    RouteNode root = parse_node(0);
    if (pos_ != text_.size()) throw RouteSyntaxError(pos_, "end of input");
    return root;
  }

 private:
  // Deeper nesting than this is certainly not a synthesis route and would
  // otherwise risk exhausting the stack on adversarial input.
  static constexpr int kMaxDepth = 512;

  void expect(std::string_view literal) {
    for (char c : literal) {
      if (pos_ >= text_.size() || text_[pos_] != c) {
        throw RouteSyntaxError(pos_, std::string("'") + c + "'");
      }
      ++pos_;
    }
  }

  RouteNode parse_node(int depth) {
    if (depth > kMaxDepth) throw RouteSyntaxError(pos_, "shallower nesting");
    RouteNode node;
    expect(kOpenNode);
    const std::size_t start = pos_;
    while (pos_ < text_.size() && !is_route_delimiter(text_[pos_])) ++pos_;
    if (pos_ == start) throw RouteSyntaxError(pos_, "molecule string");
    node.smiles.assign(text_.substr(start, pos_ - start));
    expect("'");
    if (pos_ < text_.size() && text_[pos_] == '}') {
      ++pos_;
      return node;
    }
    expect(kChildrenKey.substr(1));
    // An explicit empty list is not part of the grammar; leaves omit the key.
    node.children.push_back(parse_node(depth + 1));
    while (pos_ < text_.size() && text_[pos_] == ',') {
      ++pos_;
      node.children.push_back(parse_node(depth + 1));
    }
    expect("]}");
    return node;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

void collect_leaves(const RouteNode& node, int depth,
                    std::vector<LeafInfo>& out) {
  if (node.is_leaf()) {
    out.push_back({node.smiles, depth});
    return;
  }
  for (const auto& child : node.children) collect_leaves(child, depth + 1, out);
}

// Canonicalizes in place and returns the canonical serialization.
std::string canonicalize_in_place(RouteNode& node) {
  if (node.children.empty()) return serialize(node);
  std::vector<std::pair<std::string, RouteNode>> keyed;
  keyed.reserve(node.children.size());
  for (auto& child : node.children) {
    std::string key = canonicalize_in_place(child);
    keyed.emplace_back(std::move(key), std::move(child));
  }
  std::stable_sort(keyed.begin(), keyed.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  std::string out;
  out += kOpenNode;
  out += node.smiles;
  out += kChildrenKey;
  node.children.clear();
  for (std::size_t i = 0; i < keyed.size(); ++i) {
    if (i > 0) out += ',';
    out += keyed[i].first;
    node.children.push_back(std::move(keyed[i].second));
  }
  out += "]}";
  return out;
}

void collect_internal(const RouteNode& node,
                      std::vector<const RouteNode*>& out) {
  if (node.is_leaf()) return;
  out.push_back(&node);
  for (const auto& child : node.children) collect_internal(child, out);
}

// Rebuilds `node` applying the per-node orderings; `cursor` walks the
// pre-order list of internal nodes of the original tree.
RouteNode apply_orderings(const RouteNode& node,
                          const std::vector<std::vector<std::size_t>>& orders,
                          std::size_t& cursor) {
  RouteNode out{node.smiles, {}};
  if (node.is_leaf()) return out;
  const auto& order = orders[cursor++];
  // Children must be rebuilt in original order so that the pre-order
  // cursor stays aligned with the original tree, then placed.
  std::vector<RouteNode> rebuilt;
  rebuilt.reserve(node.children.size());
  for (const auto& child : node.children) {
    rebuilt.push_back(apply_orderings(child, orders, cursor));
  }
  out.children.reserve(rebuilt.size());
  for (std::size_t idx : order) out.children.push_back(std::move(rebuilt[idx]));
  return out;
}

}  // namespace

bool is_route_delimiter(char c) noexcept {
  switch (c) {
    case '{':
    case '}':
    case '[':
    case ']':
    case '\'':
    case ':':
    case ',':
      return true;
    default:
      return is_space(c);
  }
}

void check_molecule(std::string_view smiles) {
  if (smiles.empty()) throw DelimiterInSmiles(std::string(smiles));
  for (char c : smiles) {
    if (is_route_delimiter(c)) throw DelimiterInSmiles(std::string(smiles));
  }
}

std::string serialize(const RouteNode& root) {
  std::string out;
  serialize_into(root, out);
  return out;
}

RouteNode parse_route(std::string_view text) {
  return RouteParser(text).parse();
}

int step_count(const RouteNode& root) noexcept {
  int best = -1;
  for (const auto& child : root.children) best = std::max(best, step_count(child));
  return best + 1;
}

std::size_t node_count(const RouteNode& root) noexcept {
  std::size_t n = 1;
  for (const auto& child : root.children) n += node_count(child);
  return n;
}

std::vector<LeafInfo> leaves(const RouteNode& root) {
  std::vector<LeafInfo> out;
  collect_leaves(root, 0, out);
  return out;
}

std::string deepest_leaf(const RouteNode& root) {
  const auto all = leaves(root);
  const LeafInfo* best = &all.front();
  for (const auto& leaf : all) {
    if (leaf.depth > best->depth ||
        (leaf.depth == best->depth && leaf.smiles < best->smiles)) {
      best = &leaf;
    }
  }
  return best->smiles;
}

RouteNode canonicalize(const RouteNode& root) {
  RouteNode copy = root;
  canonicalize_in_place(copy);
  return copy;
}

std::string canonical_string(const RouteNode& root) {
  RouteNode copy = root;
  return canonicalize_in_place(copy);
}

std::vector<RouteNode> permutations(const RouteNode& root, std::size_t limit) {
  std::vector<RouteNode> out;
  if (limit == 0) return out;

  std::vector<const RouteNode*> internal;
  collect_internal(root, internal);
  if (internal.empty()) return out;

  std::vector<std::vector<std::size_t>> orders;
  orders.reserve(internal.size());
  for (const RouteNode* node : internal) {
    std::vector<std::size_t> order(node->children.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    orders.push_back(std::move(order));
  }

  std::set<std::string> seen{serialize(root)};
  // Odometer step: the last internal node in pre-order is the least
  // significant digit. next_permutation wraps a digit back to identity and
  // returns false, which carries into the next more significant digit.
  auto advance = [&orders]() {
    for (std::size_t i = orders.size(); i-- > 0;) {
      if (std::next_permutation(orders[i].begin(), orders[i].end())) return true;
    }
    return false;
  };

  while (out.size() < limit && advance()) {
    std::size_t cursor = 0;
    RouteNode candidate = apply_orderings(root, orders, cursor);
    if (seen.insert(serialize(candidate)).second) {
      out.push_back(std::move(candidate));
    }
  }
  return out;
}

void StockSet::insert(std::string_view smiles) {
  const auto trimmed = trim(smiles);
  if (!trimmed.empty()) molecules_.emplace(trimmed);
}

bool StockSet::contains(std::string_view smiles) const {
  return molecules_.count(std::string(trim(smiles))) > 0;
}

StockSet StockSet::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open stock file " + path);
  StockSet stock;
  std::string line;
  while (std::getline(in, line)) stock.insert(line);
  return stock;
}

void StockSet::save(const std::string& path) const {
  std::vector<std::string> sorted(molecules_.begin(), molecules_.end());
  std::sort(sorted.begin(), sorted.end());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write stock file " + path);
  for (const auto& m : sorted) out << m << '\n';
}

}  // namespace retroroute
