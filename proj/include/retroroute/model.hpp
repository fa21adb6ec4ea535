#pragma once

// Encoder-decoder transformer.
//
// Layout (pre-norm residual blocks, fixed sinusoidal positions, untied
// decoder embedding and output projection):
//
//   encoder: tok_emb·√d + pos → [x += Attn(LN(x)); x += FF(LN(x))]×L → LN
//   decoder: tok_emb·√d + pos → [y += CausalAttn(LN(y));
//                                y += CrossAttn(LN(y), memory);
//                                y += FF(LN(y))]×L → LN → Linear(vocab)
//
// FF(x) = W2·gelu(W1·x + b1) + b2 with an inner width of ff_mult·d_model.
// Dropout is applied to embeddings and to each sublayer output.

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "retroroute/decoder_session.hpp"
#include "retroroute/random.hpp"
#include "retroroute/tensor.hpp"
#include "retroroute/tokenizer.hpp"

namespace retroroute {

struct ModelConfig {
  int n_layers = 6;
  int n_heads = 8;
  int d_model = 256;
  int ff_mult = 3;
  int vocab_size = 52;
  int max_encoder_len = 290;
  int max_decoder_len = 1076;
  float dropout_p = 0.1f;

  /// Throws InputError on an inconsistent configuration.
  void validate() const;

  static ModelConfig dms_10m(int vocab_size = 52);
  static ModelConfig dms_60m(int vocab_size = 52);

  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct ParamSpec {
  std::string name;
  nn::Shape shape;
};

/// Every learned tensor in declaration order; checkpoints follow it.
std::vector<ParamSpec> architecture_manifest(const ModelConfig& config);

std::uint64_t param_count(const ModelConfig& config);

class Seq2SeqModel {
 public:
  /// Randomly initialized weights (Xavier-uniform matrices, zero biases,
  /// unit layer-norm gains).
  Seq2SeqModel(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const noexcept { return config_; }
  const std::vector<ParamSpec>& manifest() const noexcept { return manifest_; }
  std::span<nn::Tensor> parameters() noexcept { return params_; }
  std::span<const nn::Tensor> parameters() const noexcept { return params_; }
  void zero_grad();

  /// Teacher-forced logits, (batch·dec_len) × vocab_size.
  ///
  /// `encoder` carries the padded encoder ids and mask; `decoder_ids` is a
  /// batch × dec_len row-major matrix. Pass a generator to enable dropout.
  /// Throws ShapeMismatch or LengthExceeded.
  nn::Tensor forward(const PaddedBatch& encoder, std::span<const int> decoder_ids,
                     std::size_t dec_len, Rng* dropout_rng = nullptr) const;

  /// Encoder output for one unpadded sequence, len × d_model.
  std::vector<float> encode(std::span<const int> encoder_ids) const;

  /// Incremental decoding with cached keys and values.
  std::unique_ptr<DecoderSession> start_session(std::span<const int> encoder_ids) const;
  SessionFactory session_factory() const;

 private:
  friend class ModelSession;
  friend std::vector<ParamSpec> architecture_manifest(const ModelConfig& config);

  struct Linear { std::size_t w, b; };
  struct Norm { std::size_t g, b; };
  struct Attn { Linear q, k, v, o; };
  struct FeedForward { Linear in, out; };
  struct EncoderLayer { Norm ln1; Attn attn; Norm ln2; FeedForward ff; };
  struct DecoderLayer {
    Norm ln1;
    Attn self_attn;
    Norm ln2;
    Attn cross_attn;
    Norm ln3;
    FeedForward ff;
  };
  struct Layout {
    std::size_t enc_emb = 0;
    std::vector<EncoderLayer> enc;
    Norm enc_norm{};
    std::size_t dec_emb = 0;
    std::vector<DecoderLayer> dec;
    Norm dec_norm{};
    Linear out{};
  };

  static Layout build_layout(const ModelConfig& config, std::vector<ParamSpec>* manifest);

  const nn::Tensor& p(std::size_t i) const { return params_[i]; }

  nn::Tensor embed(std::size_t table, std::span<const int> ids, std::size_t batch,
                   std::size_t len, Rng* rng) const;
  nn::Tensor linear(const nn::Tensor& x, const Linear& l) const;
  nn::Tensor norm(const nn::Tensor& x, const Norm& n) const;
  nn::Tensor attention_block(const nn::Tensor& x_norm, const nn::Tensor& memory,
                             const Attn& a, std::size_t batch, std::size_t q_len,
                             std::size_t k_len, bool causal,
                             std::span<const std::uint8_t> key_mask) const;
  nn::Tensor feed_forward(const nn::Tensor& x_norm, const FeedForward& f) const;
  nn::Tensor encoder_stack(const PaddedBatch& encoder, Rng* rng) const;

  ModelConfig config_;
  std::vector<ParamSpec> manifest_;
  Layout layout_;
  std::vector<nn::Tensor> params_;
  std::vector<float> positions_;  // max(len) × d_model sinusoid table
};

}  // namespace retroroute
