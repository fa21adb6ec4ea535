#include "retroroute/corpus.hpp"

#include <array>
#include <fstream>
#include <unordered_set>

#include "retroroute/errors.hpp"
#include "retroroute/random.hpp"

namespace retroroute {

CurateResult curate(std::span<const RouteNode> full,
                    std::span<const std::vector<RouteNode>> test_sets) {
  std::unordered_set<std::string> banned;
  for (const auto& set : test_sets) {
    for (const auto& r : set) banned.insert(canonical_string(r));
  }
  std::vector<std::uint8_t> keep(full.size());
  const auto n = static_cast<std::ptrdiff_t>(full.size());
#pragma omp parallel for schedule(static) if (n > 1024)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    keep[idx] = banned.count(canonical_string(full[idx])) == 0 ? 1 : 0;
  }
  CurateResult out;
  for (std::size_t i = 0; i < full.size(); ++i) {
    if (keep[i]) {
      out.routes.push_back(full[i]);
    } else {
      ++out.removed;
    }
  }
  return out;
}

std::vector<RouteNode> augment(std::span<const RouteNode> corpus, std::size_t k) {
  std::vector<std::vector<RouteNode>> extra(corpus.size());
  if (k > 0) {
    const auto n = static_cast<std::ptrdiff_t>(corpus.size());
#pragma omp parallel for schedule(dynamic, 64) if (n > 1024)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      const auto idx = static_cast<std::size_t>(i);
      extra[idx] = permutations(corpus[idx], k);
    }
  }
  std::vector<RouteNode> out;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    out.push_back(corpus[i]);
    for (auto& p : extra[i]) out.push_back(std::move(p));
  }
  return out;
}

nlohmann::json DatasetEntry::to_json() const {
  return {{"target", target},
          {"sm", sm ? nlohmann::json(*sm) : nlohmann::json(nullptr)},
          {"steps", steps},
          {"route", route}};
}

DatasetEntry DatasetEntry::from_json(const nlohmann::json& j) {
  DatasetEntry e;
  try {
    e.target = j.at("target").get<std::string>();
    if (j.contains("sm") && !j.at("sm").is_null()) e.sm = j.at("sm").get<std::string>();
    e.steps = j.at("steps").get<int>();
    e.route = j.at("route").get<std::string>();
  } catch (const nlohmann::json::exception& ex) {
    throw InputError(std::string("dataset entry: ") + ex.what());
  }
  const auto root = parse_route(e.route);
  if (root.smiles != e.target) throw InputError("dataset entry: target is not the route root");
  if (step_count(root) != e.steps) throw InputError("dataset entry: steps disagree with route");
  if (e.sm) {
    bool found = false;
    for (const auto& leaf : leaves(root)) found = found || leaf.smiles == *e.sm;
    if (!found) throw InputError("dataset entry: sm is not a leaf of the route");
  }
  return e;
}

std::vector<DatasetEntry> make_entries(std::span<const RouteNode> corpus, bool with_sm) {
  std::vector<DatasetEntry> out;
  for (const auto& route : corpus) {
    const std::string text = serialize(route);
    const int steps = step_count(route);
    if (with_sm) {
      for (auto& leaf : leaves(route)) {
        out.push_back({route.smiles, std::move(leaf.smiles), steps, text});
      }
    } else {
      out.push_back({route.smiles, std::nullopt, steps, text});
    }
  }
  return out;
}

void save_entries(const std::string& path, std::span<const DatasetEntry> entries) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + path);
  for (const auto& e : entries) out << e.to_json().dump() << '\n';
}

std::vector<DatasetEntry> load_entries(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  std::vector<DatasetEntry> out;
  std::string line;
  std::size_t index = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      out.push_back(DatasetEntry::from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(index, e.what());
    } catch (const InputError& e) {
      throw ParseError(index, e.what());
    }
    ++index;
  }
  return out;
}

// --- toy corpus -------------------------------------------------------------

namespace {

constexpr std::array<const char*, 8> kAtoms{"C", "N", "O", "S", "P", "F", "Cl", "Br"};
constexpr std::array<char, 3> kBonds{'-', '=', '#'};

int bond_level(char c) {
  for (std::size_t i = 0; i < kBonds.size(); ++i) {
    if (kBonds[i] == c) return static_cast<int>(i) + 1;
  }
  return 0;
}

class ToyGenerator {
 public:
  explicit ToyGenerator(std::uint64_t seed) : rng_(seed) {}

  int sample_depth(int max_steps) {
    int d = 1;
    while (d < max_steps && rng_.bernoulli(0.5)) ++d;
    return d;
  }

  // A node with step count exactly `depth` whose string uses bond levels
  // no higher than `max_level`.
  RouteNode node(int depth, int max_level) {
    if (depth == 0) return {block(), {}};
    const int level = 1 + static_cast<int>(rng_.below(static_cast<std::uint64_t>(max_level)));
    const bool left_carries = level >= 2 && rng_.bernoulli(0.3);
    auto side_depth = [&](bool can_split) {
      if (!can_split || depth == 1 || !rng_.bernoulli(0.35)) return 0;
      return 1 + static_cast<int>(rng_.below(static_cast<std::uint64_t>(depth - 1)));
    };
    RouteNode left, right;
    if (left_carries) {
      left = node(depth - 1, level - 1);
      right = node(side_depth(true), level);
    } else {
      left = node(side_depth(level >= 2), level - 1);
      right = node(depth - 1, level);
    }
    RouteNode parent;
    parent.smiles = left.smiles + kBonds[static_cast<std::size_t>(level - 1)] + right.smiles;
    parent.children.push_back(std::move(left));
    parent.children.push_back(std::move(right));
    return parent;
  }

 private:
  std::string block() {
    std::string b = kAtoms[rng_.below(kAtoms.size())];
    if (rng_.bernoulli(0.5)) b += kAtoms[rng_.below(kAtoms.size())];
    return b;
  }

  Rng rng_;
};

}  // namespace

RouteNode toy_decompose(const std::string& molecule) {
  int best = 0;
  std::size_t at = 0;
  for (std::size_t i = 0; i < molecule.size(); ++i) {
    const int level = bond_level(molecule[i]);
    if (level > best) {
      best = level;
      at = i;
    }
  }
  RouteNode node{molecule, {}};
  if (best == 0) return node;
  node.children.push_back(toy_decompose(molecule.substr(0, at)));
  node.children.push_back(toy_decompose(molecule.substr(at + 1)));
  return node;
}

ToyCorpus gen_toy_corpus(std::uint64_t seed, std::size_t n_routes, int max_steps) {
  if (n_routes == 0) throw InputError("gen_toy_corpus: n_routes must be >= 1");
  if (max_steps < 1) throw InputError("gen_toy_corpus: max_steps must be >= 1");
  ToyGenerator gen(seed);
  ToyCorpus out;
  std::unordered_set<std::string> targets;
  // Short routes have few distinct targets; give up on a depth after
  // repeated collisions instead of looping forever.
  std::size_t attempts = 0;
  while (out.routes.size() < n_routes) {
    if (++attempts > 1000 * n_routes) {
      throw InputError("gen_toy_corpus: cannot find enough distinct targets");
    }
    auto route = gen.node(gen.sample_depth(max_steps), static_cast<int>(kBonds.size()));
    if (!targets.insert(route.smiles).second) continue;
    for (const auto& leaf : leaves(route)) out.stock.insert(leaf.smiles);
    out.routes.push_back(std::move(route));
  }
  return out;
}

}  // namespace retroroute
