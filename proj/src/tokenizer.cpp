#include "retroroute/tokenizer.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "retroroute/errors.hpp"

namespace retroroute {

namespace {

constexpr std::string_view kKeywords[] = {"smiles", "children"};

bool is_special(int id) noexcept {
  return id == Vocab::kBos || id == Vocab::kEos || id == Vocab::kPad;
}

std::string escape(std::string_view token) {
  std::string out;
  for (char c : token) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      default: out += c;
    }
  }
  return out;
}

std::string unescape(std::string_view line) {
  std::string out;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] != '\\') {
      out += line[i];
      continue;
    }
    if (++i >= line.size()) throw InputError("vocabulary: dangling escape");
    switch (line[i]) {
      case '\\': out += '\\'; break;
      case 'n': out += '\n'; break;
      case 'r': out += '\r'; break;
      default: throw InputError("vocabulary: unknown escape");
    }
  }
  return out;
}

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed) noexcept {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

Vocab::Vocab(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    const int id = static_cast<int>(i);
    if (!index_.emplace(tokens_[i], id).second) {
      throw InputError("vocabulary: duplicate token '" + tokens_[i] + "'");
    }
    if (is_special(id)) continue;
    if (tokens_[i].size() == 1) {
      single_char_[static_cast<unsigned char>(tokens_[i][0])] = id + 1;
    } else {
      multi_char_.push_back(id);
    }
  }
  std::stable_sort(multi_char_.begin(), multi_char_.end(), [this](int a, int b) {
    return tokens_[static_cast<std::size_t>(a)].size() >
           tokens_[static_cast<std::size_t>(b)].size();
  });
}

Vocab Vocab::build(std::span<const std::string> corpus) {
  if (corpus.empty()) throw EmptyCorpus();
  std::set<unsigned char> chars;
  for (const auto& text : corpus) {
    std::string_view rest = text;
    while (!rest.empty()) {
      bool keyword = false;
      for (std::string_view kw : kKeywords) {
        if (rest.substr(0, kw.size()) == kw) {
          rest.remove_prefix(kw.size());
          keyword = true;
          break;
        }
      }
      if (keyword) continue;
      chars.insert(static_cast<unsigned char>(rest.front()));
      rest.remove_prefix(1);
    }
  }
  std::vector<std::string> tokens{std::string(kBosToken), std::string(kEosToken),
                                  std::string(kPadToken)};
  for (std::string_view kw : kKeywords) tokens.emplace_back(kw);
  for (unsigned char c : chars) tokens.emplace_back(1, static_cast<char>(c));
  return Vocab(std::move(tokens));
}

std::optional<int> Vocab::id_of(std::string_view token) const {
  const auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::vector<int> Vocab::encode(std::string_view text) const {
  std::vector<int> ids;
  ids.reserve(text.size());
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::string_view rest = text.substr(pos);
    bool matched = false;
    for (int id : multi_char_) {
      const auto& tok = tokens_[static_cast<std::size_t>(id)];
      if (rest.substr(0, tok.size()) == tok) {
        ids.push_back(id);
        pos += tok.size();
        matched = true;
        break;
      }
    }
    if (matched) continue;
    const int id = single_char_[static_cast<unsigned char>(rest.front())] - 1;
    if (id < 0) throw UnknownToken(pos);
    ids.push_back(id);
    ++pos;
  }
  return ids;
}

std::string Vocab::decode(std::span<const int> ids) const {
  std::string out;
  for (int id : ids) {
    if (is_special(id)) continue;
    out += token(id);
  }
  return out;
}

std::string Vocab::to_text() const {
  std::string out(kFileHeader);
  out += '\n';
  for (const auto& tok : tokens_) {
    out += escape(tok);
    out += '\n';
  }
  return out;
}

Vocab Vocab::from_text(std::string_view text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    const std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) {
      throw InputError("vocabulary: missing final newline");
    }
    lines.emplace_back(text.substr(start, end - start));
    start = end + 1;
  }
  if (lines.empty() || lines.front() != kFileHeader) {
    throw FormatVersionMismatch("vocabulary: expected header '" +
                                std::string(kFileHeader) + "'");
  }
  std::vector<std::string> tokens;
  for (std::size_t i = 1; i < lines.size(); ++i) tokens.push_back(unescape(lines[i]));
  if (tokens.size() < 3 || tokens[kBos] != kBosToken || tokens[kEos] != kEosToken ||
      tokens[kPad] != kPadToken) {
    throw InputError("vocabulary: special tokens missing or out of order");
  }
  return Vocab(std::move(tokens));
}

void Vocab::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write vocabulary " + path);
  out << to_text();
}

Vocab Vocab::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open vocabulary " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_text(buf.str());
}

std::uint64_t Vocab::fingerprint() const { return fnv1a64(to_text()); }

TokenSeq encode_route(std::string_view text, const Vocab& vocab) {
  TokenSeq seq{{Vocab::kBos}, SeqKind::kRouteTarget};
  const auto body = vocab.encode(text);
  seq.ids.insert(seq.ids.end(), body.begin(), body.end());
  seq.ids.push_back(Vocab::kEos);
  return seq;
}

std::string encoder_input_text(std::string_view target,
                               const std::optional<std::string>& sm, int steps) {
  if (steps < 1 || steps > 99) throw StepsOutOfRange(steps);
  std::string text(target);
  text += ',';
  if (sm) text += *sm;
  text += ',';
  text += std::to_string(steps);
  return text;
}

TokenSeq encode_encoder_input(std::string_view target,
                              const std::optional<std::string>& sm, int steps,
                              const Vocab& vocab) {
  const std::string text = encoder_input_text(target, sm, steps);
  // Each segment is tokenized on its own so that a keyword can never span
  // a separator.
  const auto sep = vocab.id_of(",");
  if (!sep) throw UnknownToken(target.size());
  TokenSeq seq{vocab.encode(target), SeqKind::kEncoderInput};
  seq.ids.push_back(*sep);
  if (sm) {
    try {
      const auto part = vocab.encode(*sm);
      seq.ids.insert(seq.ids.end(), part.begin(), part.end());
    } catch (const UnknownToken& e) {
      throw UnknownToken(target.size() + 1 + e.position());
    }
  }
  seq.ids.push_back(*sep);
  const std::size_t digits_at = text.size() - std::to_string(steps).size();
  for (std::size_t i = digits_at; i < text.size(); ++i) {
    const auto id = vocab.id_of(std::string_view(&text[i], 1));
    if (!id) throw UnknownToken(i);
    seq.ids.push_back(*id);
  }
  return seq;
}

PaddedBatch pad_batch(std::span<const TokenSeq> seqs, std::size_t max_len,
                      int pad_id) {
  PaddedBatch batch;
  batch.rows = seqs.size();
  for (const auto& s : seqs) {
    if (s.ids.size() > max_len) throw SequenceTooLong(s.ids.size(), max_len);
    batch.cols = std::max(batch.cols, s.ids.size());
  }
  batch.ids.assign(batch.rows * batch.cols, pad_id);
  batch.mask.assign(batch.rows * batch.cols, 0);
  batch.lengths.reserve(batch.rows);
  for (std::size_t r = 0; r < batch.rows; ++r) {
    const auto& ids = seqs[r].ids;
    std::copy(ids.begin(), ids.end(), batch.ids.begin() + static_cast<std::ptrdiff_t>(r * batch.cols));
    std::fill_n(batch.mask.begin() + static_cast<std::ptrdiff_t>(r * batch.cols), ids.size(), 1);
    batch.lengths.push_back(ids.size());
  }
  return batch;
}

}  // namespace retroroute
