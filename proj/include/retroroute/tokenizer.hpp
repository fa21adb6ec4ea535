#pragma once

// Character-level tokenizer for route strings and encoder inputs.
//
// Token ids are laid out as: <bos>, <eos>, <pad>, the keywords `smiles` and
// `children`, then every single character observed in the corpus in byte
// order. Text is split by greedy longest match, so the two keywords come out
// as one token each and everything else as one token per character.

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace retroroute {

enum class SeqKind { kEncoderInput, kRouteTarget };

struct TokenSeq {
  std::vector<int> ids;
  SeqKind kind = SeqKind::kRouteTarget;
};

class Vocab {
 public:
  static constexpr int kBos = 0;
  static constexpr int kEos = 1;
  static constexpr int kPad = 2;
  static constexpr std::string_view kBosToken = "<bos>";
  static constexpr std::string_view kEosToken = "<eos>";
  static constexpr std::string_view kPadToken = "<pad>";
  static constexpr std::string_view kFileHeader = "retroroute-vocab 1";

  Vocab() = default;

  /// Throws EmptyCorpus when `corpus` is empty.
  static Vocab build(std::span<const std::string> corpus);

  std::size_t size() const noexcept { return tokens_.size(); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }
  const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  std::optional<int> id_of(std::string_view token) const;

  /// Greedy longest-match split of `text`; no special tokens are added.
  /// Throws UnknownToken with the offending byte offset.
  std::vector<int> encode(std::string_view text) const;

  /// Concatenates token strings, skipping <bos>, <eos> and <pad>.
  std::string decode(std::span<const int> ids) const;

  /// Line-oriented text form: a header line, then one escaped token per line.
  std::string to_text() const;
  static Vocab from_text(std::string_view text);
  void save(const std::string& path) const;
  static Vocab load(const std::string& path);

  /// 64-bit FNV-1a over to_text().
  std::uint64_t fingerprint() const;

  friend bool operator==(const Vocab& a, const Vocab& b) { return a.tokens_ == b.tokens_; }

 private:
  explicit Vocab(std::vector<std::string> tokens);

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
  std::vector<int> multi_char_;  // ids of multi-character non-special tokens
  std::array<int, 256> single_char_{};  // id + 1 per byte, 0 when absent
};

std::uint64_t fnv1a64(std::string_view bytes,
                      std::uint64_t seed = 0xcbf29ce484222325ULL) noexcept;

/// BOS ⊕ tokens(text) ⊕ EOS.
TokenSeq encode_route(std::string_view text, const Vocab& vocab);

/// tokens(target) ⊕ ',' ⊕ tokens(sm) ⊕ ',' ⊕ decimal digits of steps.
/// Throws StepsOutOfRange unless 1 ≤ steps ≤ 99.
TokenSeq encode_encoder_input(std::string_view target,
                              const std::optional<std::string>& sm, int steps,
                              const Vocab& vocab);

/// Text form of the encoder input, used to seed vocabulary construction.
std::string encoder_input_text(std::string_view target,
                               const std::optional<std::string>& sm, int steps);

/// Right-padded id matrix, row-major, with a 1/0 mask over real tokens.
struct PaddedBatch {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<int> ids;
  std::vector<std::uint8_t> mask;
  std::vector<std::size_t> lengths;
};

/// Throws SequenceTooLong when any sequence exceeds max_len.
PaddedBatch pad_batch(std::span<const TokenSeq> seqs, std::size_t max_len,
                      int pad_id = Vocab::kPad);

}  // namespace retroroute
