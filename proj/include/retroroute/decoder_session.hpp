#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <vector>

namespace retroroute {

/// Step-wise next-token scorer over a set of parallel decoding rows.
///
/// A session starts with one row and no consumed tokens. step() feeds one
/// token to every row and returns rows × vocab_size() log-probabilities for
/// the following token. select() re-forms the row set from existing rows
/// (duplicates allowed), e.g. after a beam-search pruning round.
class DecoderSession {
 public:
  virtual ~DecoderSession() = default;

  virtual std::size_t vocab_size() const = 0;
  /// Largest number of tokens (including the start token) a row may hold.
  virtual std::size_t max_tokens() const {
    return std::numeric_limits<std::size_t>::max();
  }
  virtual std::vector<double> step(std::span<const int> tokens) = 0;
  virtual void select(std::span<const std::size_t> parents) = 0;
};

using SessionFactory =
    std::function<std::unique_ptr<DecoderSession>(std::span<const int> encoder_ids)>;

}  // namespace retroroute
