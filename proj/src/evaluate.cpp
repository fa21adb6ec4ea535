#include "retroroute/evaluate.hpp"

#include <algorithm>
#include <limits>
#include <sstream>

#include "retroroute/beam_search.hpp"
#include "retroroute/errors.hpp"

namespace retroroute {

bool routes_match(const RouteNode& prediction, const RouteNode& reference) {
  return canonical_string(prediction) == canonical_string(reference);
}

std::vector<int> encoder_ids_for(const RouteNode& reference, bool sm_mode, const Vocab& vocab) {
  std::optional<std::string> sm;
  if (sm_mode) sm = deepest_leaf(reference);
  return encode_encoder_input(reference.smiles, sm, step_count(reference), vocab).ids;
}

namespace {

struct RouteResult {
  RouteOutcome outcome;
  std::map<std::string, std::size_t> rejections;
};

RouteResult run_one(const SessionFactory& factory, const Vocab& vocab, const RouteNode& ref,
                    const EvalOptions& options) {
  RouteResult r;
  r.outcome.steps = step_count(ref);
  std::vector<int> enc;
  try {
    enc = encoder_ids_for(ref, options.sm_mode, vocab);
  } catch (const InputError& e) {
    r.outcome.encodable = false;
    r.outcome.error = e.what();
    return r;
  }
  auto session = factory(enc);
  std::size_t max_len = options.max_len ? options.max_len : session->max_tokens();
  if (max_len == std::numeric_limits<std::size_t>::max()) {
    throw InputError("evaluate: max_len must be set for an unbounded decoder");
  }
  const auto beams = beam_search(*session, options.width, max_len);
  r.outcome.finished = static_cast<std::size_t>(
      std::count_if(beams.begin(), beams.end(), [](const auto& b) { return b.finished; }));
  auto filtered = filter_candidates(beams, vocab, ref.smiles, options.stock);
  r.outcome.survivors = filtered.survivors.size();
  r.rejections = std::move(filtered.rejection_counts);
  const auto canon = canonical_string(ref);
  for (const auto& s : filtered.survivors) {
    if (canonical_string(s.route) == canon) {
      r.outcome.hit_rank = s.rank;
      break;
    }
  }
  return r;
}

}  // namespace

EvalReport evaluate(const SessionFactory& factory, const Vocab& vocab,
                    std::span<const RouteNode> references, const EvalOptions& options) {
  if (options.width == 0) throw InputError("evaluate: beam width must be >= 1");
  for (int k : options.ks) {
    if (k < 1) throw InputError("evaluate: top-k values must be >= 1");
  }
  std::vector<RouteResult> results(references.size());
  std::vector<std::string> errors(references.size());
  const auto n = static_cast<std::ptrdiff_t>(references.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    try {
      results[idx] = run_one(factory, vocab, references[idx], options);
    } catch (const std::exception& e) {
      errors[idx] = e.what();
    }
  }
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (!errors[i].empty()) throw InputError("evaluate: route " + std::to_string(i) + ": " + errors[i]);
  }

  EvalReport report;
  report.n_routes = references.size();
  std::vector<int> ks = options.ks;
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  std::map<int, std::size_t> hits;
  std::map<int, std::map<int, std::size_t>> length_hits;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& o = results[i].outcome;
    for (const auto& [reason, c] : results[i].rejections) report.rejection_counts[reason] += c;
    report.route_length.add(o.steps);
    report.leaves_at_root.add(leaves_at_root(references[i]));
    ++report.per_length_count[o.steps];
    if (!o.encodable) ++report.unencodable;
    if (o.encodable && o.finished == 0) ++report.no_finished_beam;
    for (int k : ks) {
      const bool hit = o.hit_rank >= 1 && o.hit_rank <= k;
      hits[k] += hit ? 1 : 0;
      length_hits[o.steps][k] += hit ? 1 : 0;
    }
    report.outcomes.push_back(o);
  }
  const auto total = static_cast<double>(std::max<std::size_t>(report.n_routes, 1));
  for (int k : ks) report.topk[k] = static_cast<double>(hits[k]) / total;
  for (const auto& [steps, count] : report.per_length_count) {
    for (int k : ks) {
      report.per_length[steps][k] =
          static_cast<double>(length_hits[steps][k]) / static_cast<double>(count);
    }
  }
  return report;
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json topk_j = nlohmann::json::object();
  for (const auto& [k, acc] : topk) topk_j[std::to_string(k)] = acc;
  nlohmann::json per_len = nlohmann::json::object();
  for (const auto& [steps, accs] : per_length) {
    nlohmann::json row = {{"count", per_length_count.at(steps)}};
    for (const auto& [k, acc] : accs) row["top" + std::to_string(k)] = acc;
    per_len[std::to_string(steps)] = row;
  }
  return {{"routes", n_routes},
          {"topk_accuracy", topk_j},
          {"per_length_accuracy", per_len},
          {"filter_rejections", rejection_counts},
          {"no_finished_beam", no_finished_beam},
          {"unencodable", unencodable},
          {"route_length", route_length.to_json()},
          {"leaves_at_root", leaves_at_root.to_json()}};
}

std::string EvalReport::topk_csv() const {
  std::ostringstream out;
  out << "k,accuracy\n";
  for (const auto& [k, acc] : topk) out << k << ',' << acc << '\n';
  return out.str();
}

std::string EvalReport::per_length_csv() const {
  std::ostringstream out;
  out << "steps,count";
  std::vector<int> ks;
  for (const auto& [k, _] : topk) ks.push_back(k);
  for (int k : ks) out << ",top" << k;
  out << '\n';
  for (const auto& [steps, accs] : per_length) {
    out << steps << ',' << per_length_count.at(steps);
    for (int k : ks) out << ',' << accs.at(k);
    out << '\n';
  }
  return out.str();
}

}  // namespace retroroute
