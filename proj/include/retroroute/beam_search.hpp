#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "retroroute/decoder_session.hpp"
#include "retroroute/tokenizer.hpp"

namespace retroroute {

struct BeamCandidate {
  std::vector<int> ids;  // generated tokens, without <bos>; ends in <eos> iff finished
  double logprob = 0.0;
  bool finished = false;
};

/// Orders by logprob descending, then by token ids ascending
/// (lexicographically). This is the only tie-break used anywhere in decoding.
bool beam_before(const BeamCandidate& a, const BeamCandidate& b);

/// Beam search without length normalization.
///
/// Every live beam is extended by every vocabulary token in one batched
/// session step and the best `width` extensions are kept. Extensions ending
/// in <eos> retire into the finished pool. Decoding stops once the pool
/// holds `width` beams, no beam is live, or `max_len` tokens have been
/// generated; beams still live at that point are returned with
/// finished = false. The result holds at most `width` candidates sorted by
/// beam_before.
///
/// Throws InputError when width is 0 and LengthExceeded when max_len does
/// not fit in the session.
std::vector<BeamCandidate> beam_search(DecoderSession& session, std::size_t width,
                                       std::size_t max_len, int bos = Vocab::kBos,
                                       int eos = Vocab::kEos);

std::vector<BeamCandidate> beam_search(const SessionFactory& factory,
                                       std::span<const int> encoder_ids, std::size_t width,
                                       std::size_t max_len);

}  // namespace retroroute
