#include "retroroute/beam_search.hpp"

#include <algorithm>
#include <string>

#include "retroroute/errors.hpp"

namespace retroroute {

bool beam_before(const BeamCandidate& a, const BeamCandidate& b) {
  if (a.logprob != b.logprob) return a.logprob > b.logprob;
  return a.ids < b.ids;
}

namespace {

struct Extension {
  double logprob;
  std::size_t parent;
  int token;
};

}  // namespace

std::vector<BeamCandidate> beam_search(DecoderSession& session, std::size_t width,
                                       std::size_t max_len, int bos, int eos) {
  if (width == 0) throw InputError("beam width must be at least 1");
  if (max_len == 0) throw InputError("max_len must be at least 1");
  if (max_len > session.max_tokens()) {
    throw LengthExceeded("max_len " + std::to_string(max_len) + " exceeds the decoder limit " +
                         std::to_string(session.max_tokens()));
  }
  const std::size_t vocab = session.vocab_size();
  std::vector<BeamCandidate> live(1);
  std::vector<BeamCandidate> finished;
  std::vector<int> feed{bos};
  std::vector<Extension> ext;

  for (std::size_t t = 0; t < max_len && !live.empty() && finished.size() < width; ++t) {
    const auto logp = session.step(feed);
    ext.clear();
    ext.reserve(live.size() * vocab);
    for (std::size_t r = 0; r < live.size(); ++r) {
      for (std::size_t v = 0; v < vocab; ++v) {
        ext.push_back({live[r].logprob + logp[r * vocab + v], r, static_cast<int>(v)});
      }
    }
    // Live beams all have the same length, so comparing (parent ids, token)
    // is the lexicographic comparison of the extended sequences.
    auto before = [&](const Extension& a, const Extension& b) {
      if (a.logprob != b.logprob) return a.logprob > b.logprob;
      if (a.parent != b.parent) return live[a.parent].ids < live[b.parent].ids;
      return a.token < b.token;
    };
    const std::size_t keep = std::min(width, ext.size());
    std::partial_sort(ext.begin(), ext.begin() + static_cast<std::ptrdiff_t>(keep), ext.end(),
                      before);

    std::vector<BeamCandidate> next;
    std::vector<std::size_t> parents;
    feed.clear();
    for (std::size_t i = 0; i < keep; ++i) {
      const auto& e = ext[i];
      BeamCandidate c{live[e.parent].ids, e.logprob, e.token == eos};
      c.ids.push_back(e.token);
      if (c.finished) {
        finished.push_back(std::move(c));
      } else {
        next.push_back(std::move(c));
        parents.push_back(e.parent);
        feed.push_back(e.token);
      }
    }
    live = std::move(next);
    if (!live.empty() && t + 1 < max_len && finished.size() < width) session.select(parents);
  }

  std::vector<BeamCandidate> out = std::move(finished);
  for (auto& c : live) out.push_back(std::move(c));
  std::sort(out.begin(), out.end(), beam_before);
  if (out.size() > width) out.resize(width);
  return out;
}

std::vector<BeamCandidate> beam_search(const SessionFactory& factory,
                                       std::span<const int> encoder_ids, std::size_t width,
                                       std::size_t max_len) {
  auto session = factory(encoder_ids);
  return beam_search(*session, width, max_len);
}

}  // namespace retroroute
