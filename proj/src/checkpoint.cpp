#include "retroroute/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string_view>

#include "retroroute/errors.hpp"

namespace retroroute {

static_assert(std::endian::native == std::endian::little,
              "checkpoint IO assumes a little-endian host");

namespace {

constexpr std::string_view kMagic{"RRCKPT\0\0", 8};

class Writer {
 public:
  template <typename T>
  void put(T value) {
    const auto* p = reinterpret_cast<const char*>(&value);
    buf_.append(p, sizeof(T));
  }
  void bytes(std::string_view s) {
    put<std::uint64_t>(s.size());
    buf_.append(s);
  }
  template <typename T>
  void run(std::span<const T> values) {
    buf_.append(reinterpret_cast<const char*>(values.data()), values.size_bytes());
  }
  std::string& buffer() { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  explicit Reader(std::string_view data) : data_(data) {}

  template <typename T>
  T get() {
    T value;
    std::memcpy(&value, take(sizeof(T)).data(), sizeof(T));
    return value;
  }
  std::string bytes() {
    const auto n = get<std::uint64_t>();
    return std::string(take(n));
  }
  template <typename T>
  void run(std::span<T> out) {
    std::memcpy(out.data(), take(out.size_bytes()).data(), out.size_bytes());
  }
  std::string_view take(std::uint64_t n) {
    if (n > data_.size() - pos_) throw CorruptFile("checkpoint is truncated");
    auto s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const noexcept { return pos_ == data_.size(); }

 private:
  std::string_view data_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const std::string& path, const Seq2SeqModel& model, const Vocab& vocab,
                     std::uint64_t step, const nn::AdamState* optimizer,
                     const nlohmann::json& run_config) {
  if (static_cast<std::size_t>(model.config().vocab_size) != vocab.size()) {
    throw VocabMismatch("model vocab_size " + std::to_string(model.config().vocab_size) +
                        " differs from vocabulary size " + std::to_string(vocab.size()));
  }
  Writer w;
  w.buffer().append(kMagic);
  w.put<std::uint32_t>(kCheckpointVersion);
  nlohmann::json header = {{"model", model.config().to_json()}, {"run", run_config}};
  w.bytes(header.dump());
  const std::string vocab_text = vocab.to_text();
  w.bytes(vocab_text);
  w.put<std::uint64_t>(fnv1a64(vocab_text));
  w.put<std::uint64_t>(step);

  const auto params = model.parameters();
  const auto& manifest = model.manifest();
  w.put<std::uint32_t>(static_cast<std::uint32_t>(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(manifest[i].name.size()));
    w.buffer().append(manifest[i].name);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(manifest[i].shape.size()));
    for (auto dim : manifest[i].shape) w.put<std::uint64_t>(dim);
    w.run<float>(params[i].data());
  }
  w.put<std::uint8_t>(optimizer ? 1 : 0);
  if (optimizer) {
    if (optimizer->m.size() != params.size()) {
      throw ShapeMismatch("optimizer state does not match the model");
    }
    w.put<std::uint64_t>(optimizer->t);
    for (std::size_t i = 0; i < params.size(); ++i) {
      w.run<double>(optimizer->m[i]);
      w.run<double>(optimizer->v[i]);
    }
  }
  w.put<std::uint64_t>(fnv1a64(w.buffer()));

  // Write-then-rename so an interrupted save never leaves a torn file.
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write checkpoint: " + tmp);
    out.write(w.buffer().data(), static_cast<std::streamsize>(w.buffer().size()));
    if (!out) throw InputError("failed writing checkpoint: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::string& path, const Vocab* expected_vocab) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open checkpoint: " + path);
  const std::string data{std::istreambuf_iterator<char>(in), {}};

  Reader r(data);
  if (data.size() < kMagic.size() || r.take(kMagic.size()) != kMagic) {
    throw CorruptFile(path + " is not a checkpoint file");
  }
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw FormatVersionMismatch("checkpoint format version " + std::to_string(version) +
                                ", expected " + std::to_string(kCheckpointVersion));
  }
  if (data.size() < kMagic.size() + 4 + 8) throw CorruptFile("checkpoint is truncated");
  const std::string_view body(data.data(), data.size() - 8);
  std::uint64_t stored_sum;
  std::memcpy(&stored_sum, data.data() + body.size(), 8);
  if (fnv1a64(body) != stored_sum) {
    throw CorruptFile("checkpoint checksum mismatch (truncated or damaged): " + path);
  }

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(r.bytes());
  } catch (const nlohmann::json::parse_error& e) {
    throw CorruptFile(std::string("checkpoint header: ") + e.what());
  }
  const auto config = ModelConfig::from_json(header.at("model"));
  const std::string vocab_text = r.bytes();
  const auto fingerprint = r.get<std::uint64_t>();
  if (fingerprint != fnv1a64(vocab_text)) throw CorruptFile("vocabulary fingerprint mismatch");
  if (expected_vocab && expected_vocab->fingerprint() != fingerprint) {
    throw VocabMismatch("checkpoint was trained with a different vocabulary");
  }

  Checkpoint ckpt{Seq2SeqModel(config, 0), Vocab::from_text(vocab_text),
                  header.value("run", nlohmann::json::object()), r.get<std::uint64_t>(),
                  std::nullopt};
  auto params = ckpt.model.parameters();
  const auto& manifest = ckpt.model.manifest();
  if (r.get<std::uint32_t>() != params.size()) {
    throw CompatibilityError("checkpoint tensor count differs from the architecture");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const std::string name(r.take(r.get<std::uint32_t>()));
    nn::Shape shape(r.get<std::uint32_t>());
    for (auto& dim : shape) dim = r.get<std::uint64_t>();
    if (name != manifest[i].name || shape != manifest[i].shape) {
      throw CompatibilityError("checkpoint tensor " + name + " " + nn::shape_string(shape) +
                               " does not match manifest entry " + manifest[i].name + " " +
                               nn::shape_string(manifest[i].shape));
    }
    r.run<float>(params[i].data());
  }
  if (r.get<std::uint8_t>() != 0) {
    auto state = nn::AdamState::for_params(params);
    state.t = r.get<std::uint64_t>();
    for (std::size_t i = 0; i < params.size(); ++i) {
      r.run<double>(state.m[i]);
      r.run<double>(state.v[i]);
    }
    ckpt.optimizer = std::move(state);
  }
  (void)r.get<std::uint64_t>();
  if (!r.done()) throw CorruptFile("trailing bytes after checkpoint checksum");
  return ckpt;
}

}  // namespace retroroute
