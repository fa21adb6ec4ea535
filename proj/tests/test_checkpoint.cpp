#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "retroroute/checkpoint.hpp"
#include "retroroute/errors.hpp"

using namespace retroroute;

namespace {

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("retroroute_ckpt_" + name);
}

Vocab small_vocab() {
  const std::vector<std::string> corpus{"{'smiles':'CCO','children':[{'smiles':'CN'}]}"};
  return Vocab::build(corpus);
}

ModelConfig small_config(const Vocab& v) {
  ModelConfig c;
  c.n_layers = 1;
  c.n_heads = 2;
  c.d_model = 8;
  c.ff_mult = 2;
  c.vocab_size = static_cast<int>(v.size());
  c.max_encoder_len = 12;
  c.max_decoder_len = 12;
  return c;
}

std::vector<float> logits_of(const Seq2SeqModel& m) {
  std::vector<TokenSeq> enc{{{3, 4, 5}, SeqKind::kEncoderInput}};
  const auto t = m.forward(pad_batch(enc, 12), std::vector<int>{0, 4, 5}, 3);
  return {t.data().begin(), t.data().end()};
}

std::string read_all(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void write_all(const std::filesystem::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << s;
}

}  // namespace

TEST(Checkpoint, RoundTripReproducesLogitsAndState) {
  const auto vocab = small_vocab();
  const Seq2SeqModel model(small_config(vocab), 3);
  auto state = nn::AdamState::for_params(model.parameters());
  state.t = 17;
  state.m[0][0] = 0.25;
  state.v[1][0] = 1e-9;
  const auto path = temp_path("roundtrip.bin");
  save_checkpoint(path.string(), model, vocab, 42, &state, {{"seed", 5}});

  const auto loaded = load_checkpoint(path.string(), &vocab);
  EXPECT_EQ(loaded.step, 42u);
  EXPECT_EQ(loaded.vocab, vocab);
  EXPECT_EQ(loaded.model.config(), model.config());
  EXPECT_EQ(loaded.run_config.at("seed"), 5);
  ASSERT_TRUE(loaded.optimizer.has_value());
  EXPECT_EQ(loaded.optimizer->t, 17u);
  EXPECT_EQ(loaded.optimizer->m, state.m);
  EXPECT_EQ(loaded.optimizer->v, state.v);
  EXPECT_EQ(logits_of(loaded.model), logits_of(model));
  std::filesystem::remove(path);
}

TEST(Checkpoint, WithoutOptimizerState) {
  const auto vocab = small_vocab();
  const Seq2SeqModel model(small_config(vocab), 4);
  const auto path = temp_path("noopt.bin");
  save_checkpoint(path.string(), model, vocab, 0, nullptr, nlohmann::json::object());
  EXPECT_FALSE(load_checkpoint(path.string()).optimizer.has_value());
  std::filesystem::remove(path);
}

TEST(Checkpoint, EveryTruncationIsRejected) {
  const auto vocab = small_vocab();
  const Seq2SeqModel model(small_config(vocab), 5);
  const auto path = temp_path("trunc.bin");
  save_checkpoint(path.string(), model, vocab, 1, nullptr, nlohmann::json::object());
  const auto bytes = read_all(path);
  for (std::size_t keep = 0; keep < bytes.size(); keep += 1 + keep / 7) {
    write_all(path, bytes.substr(0, keep));
    EXPECT_THROW(load_checkpoint(path.string()), CorruptFile) << "kept " << keep;
  }
  std::filesystem::remove(path);
}

TEST(Checkpoint, FlippedByteFailsChecksum) {
  const auto vocab = small_vocab();
  const Seq2SeqModel model(small_config(vocab), 6);
  const auto path = temp_path("flip.bin");
  save_checkpoint(path.string(), model, vocab, 1, nullptr, nlohmann::json::object());
  auto bytes = read_all(path);
  bytes[bytes.size() / 2] ^= 0x01;
  write_all(path, bytes);
  EXPECT_THROW(load_checkpoint(path.string()), CorruptFile);
  std::filesystem::remove(path);
}

TEST(Checkpoint, VersionMismatch) {
  const auto vocab = small_vocab();
  const Seq2SeqModel model(small_config(vocab), 7);
  const auto path = temp_path("version.bin");
  save_checkpoint(path.string(), model, vocab, 1, nullptr, nlohmann::json::object());
  auto bytes = read_all(path);
  bytes[8] = static_cast<char>(kCheckpointVersion + 1);
  write_all(path, bytes);
  EXPECT_THROW(load_checkpoint(path.string()), FormatVersionMismatch);
  write_all(path, "not a checkpoint at all");
  EXPECT_THROW(load_checkpoint(path.string()), CorruptFile);
  std::filesystem::remove(path);
}

TEST(Checkpoint, VocabMismatch) {
  const auto vocab = small_vocab();
  const Seq2SeqModel model(small_config(vocab), 8);
  const auto path = temp_path("vocab.bin");
  save_checkpoint(path.string(), model, vocab, 1, nullptr, nlohmann::json::object());
  const std::vector<std::string> other_corpus{"{'smiles':'CCS'}"};
  const auto other = Vocab::build(other_corpus);
  EXPECT_THROW(load_checkpoint(path.string(), &other), VocabMismatch);
  EXPECT_THROW(save_checkpoint(path.string(), model, other, 1, nullptr, {}), VocabMismatch);
  std::filesystem::remove(path);
}

TEST(Checkpoint, MissingFileIsInputError) {
  EXPECT_THROW(load_checkpoint(temp_path("absent.bin").string()), InputError);
}
