#include "retroroute/model.hpp"

#include <cmath>
#include <string>

#include "retroroute/errors.hpp"
#include "retroroute/kernels.hpp"
#include "retroroute/ops.hpp"

namespace retroroute {

namespace {

constexpr float kNormEps = 1e-5f;

std::vector<float> sinusoid_table(std::size_t len, std::size_t dim) {
  std::vector<float> table(len * dim);
  for (std::size_t pos = 0; pos < len; ++pos) {
    for (std::size_t i = 0; i < dim; i += 2) {
      const double rate = std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(dim));
      const double angle = static_cast<double>(pos) * rate;
      table[pos * dim + i] = static_cast<float>(std::sin(angle));
      if (i + 1 < dim) table[pos * dim + i + 1] = static_cast<float>(std::cos(angle));
    }
  }
  return table;
}

void log_softmax_row(std::span<const float> logits, std::span<double> out) {
  double mx = logits[0];
  for (float v : logits) mx = std::max(mx, static_cast<double>(v));
  double sum = 0.0;
  for (float v : logits) sum += std::exp(v - mx);
  const double lse = mx + std::log(sum);
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
}

}  // namespace

// --- configuration ---------------------------------------------------------

void ModelConfig::validate() const {
  if (n_layers < 1) throw InputError("model: n_layers must be >= 1");
  if (n_heads < 1 || d_model < 1 || d_model % n_heads != 0) {
    throw InputError("model: d_model must be a positive multiple of n_heads");
  }
  if (ff_mult < 1) throw InputError("model: ff_mult must be >= 1");
  if (vocab_size < 4) throw InputError("model: vocab_size must be >= 4");
  if (max_encoder_len < 1 || max_decoder_len < 2) {
    throw InputError("model: sequence maxima must be positive");
  }
  if (!(dropout_p >= 0.0f && dropout_p < 1.0f)) {
    throw InputError("model: dropout_p outside [0, 1)");
  }
}

ModelConfig ModelConfig::dms_10m(int vocab_size) {
  ModelConfig c;
  c.n_layers = 6;
  c.n_heads = 8;
  c.d_model = 256;
  c.ff_mult = 3;
  c.vocab_size = vocab_size;
  return c;
}

ModelConfig ModelConfig::dms_60m(int vocab_size) {
  ModelConfig c;
  c.n_layers = 8;
  c.n_heads = 8;
  c.d_model = 512;
  c.ff_mult = 4;
  c.vocab_size = vocab_size;
  return c;
}

nlohmann::json ModelConfig::to_json() const {
  return {
      {"n_layers", n_layers},
      {"n_heads", n_heads},
      {"d_model", d_model},
      {"ff_mult", ff_mult},
      {"vocab_size", vocab_size},
      {"max_encoder_len", max_encoder_len},
      {"max_decoder_len", max_decoder_len},
      {"dropout_p", dropout_p},
      {"positional_encoding", "sinusoidal"},
      {"norm_placement", "pre"},
      {"weight_tying", false},
  };
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig c;
  try {
    c.n_layers = j.value("n_layers", c.n_layers);
    c.n_heads = j.value("n_heads", c.n_heads);
    c.d_model = j.value("d_model", c.d_model);
    c.ff_mult = j.value("ff_mult", c.ff_mult);
    c.vocab_size = j.value("vocab_size", c.vocab_size);
    c.max_encoder_len = j.value("max_encoder_len", c.max_encoder_len);
    c.max_decoder_len = j.value("max_decoder_len", c.max_decoder_len);
    c.dropout_p = j.value("dropout_p", c.dropout_p);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("model config: ") + e.what());
  }
  if (j.value("positional_encoding", std::string("sinusoidal")) != "sinusoidal" ||
      j.value("norm_placement", std::string("pre")) != "pre" ||
      j.value("weight_tying", false)) {
    throw CompatibilityError("model config describes an unsupported architecture variant");
  }
  c.validate();
  return c;
}

// --- manifest ---------------------------------------------------------------

Seq2SeqModel::Layout Seq2SeqModel::build_layout(const ModelConfig& c,
                                                std::vector<ParamSpec>* manifest) {
  const auto d = static_cast<std::size_t>(c.d_model);
  const auto ff = d * static_cast<std::size_t>(c.ff_mult);
  const auto v = static_cast<std::size_t>(c.vocab_size);
  std::size_t next = 0;
  auto add = [&](std::string name, nn::Shape shape) {
    if (manifest) manifest->push_back({std::move(name), std::move(shape)});
    return next++;
  };
  auto linear = [&](const std::string& prefix, std::size_t in, std::size_t out) {
    Linear l{};
    l.w = add(prefix + ".weight", {in, out});
    l.b = add(prefix + ".bias", {out});
    return l;
  };
  auto norm = [&](const std::string& prefix) {
    Norm n{};
    n.g = add(prefix + ".gamma", {d});
    n.b = add(prefix + ".beta", {d});
    return n;
  };
  auto attn = [&](const std::string& prefix) {
    Attn a{};
    a.q = linear(prefix + ".q", d, d);
    a.k = linear(prefix + ".k", d, d);
    a.v = linear(prefix + ".v", d, d);
    a.o = linear(prefix + ".o", d, d);
    return a;
  };
  auto feed_forward = [&](const std::string& prefix) {
    FeedForward f{};
    f.in = linear(prefix + ".in", d, ff);
    f.out = linear(prefix + ".out", ff, d);
    return f;
  };

  Layout L;
  L.enc_emb = add("encoder.embedding", {v, d});
  for (int i = 0; i < c.n_layers; ++i) {
    const std::string pre = "encoder.layer" + std::to_string(i);
    EncoderLayer layer{};
    layer.ln1 = norm(pre + ".ln1");
    layer.attn = attn(pre + ".self_attn");
    layer.ln2 = norm(pre + ".ln2");
    layer.ff = feed_forward(pre + ".ff");
    L.enc.push_back(layer);
  }
  L.enc_norm = norm("encoder.final_norm");
  L.dec_emb = add("decoder.embedding", {v, d});
  for (int i = 0; i < c.n_layers; ++i) {
    const std::string pre = "decoder.layer" + std::to_string(i);
    DecoderLayer layer{};
    layer.ln1 = norm(pre + ".ln1");
    layer.self_attn = attn(pre + ".self_attn");
    layer.ln2 = norm(pre + ".ln2");
    layer.cross_attn = attn(pre + ".cross_attn");
    layer.ln3 = norm(pre + ".ln3");
    layer.ff = feed_forward(pre + ".ff");
    L.dec.push_back(layer);
  }
  L.dec_norm = norm("decoder.final_norm");
  L.out = linear("output", d, v);
  return L;
}

std::vector<ParamSpec> architecture_manifest(const ModelConfig& config) {
  config.validate();
  std::vector<ParamSpec> manifest;
  (void)Seq2SeqModel::build_layout(config, &manifest);
  return manifest;
}

std::uint64_t param_count(const ModelConfig& config) {
  std::uint64_t total = 0;
  for (const auto& spec : architecture_manifest(config)) total += nn::shape_numel(spec.shape);
  return total;
}

// --- model ------------------------------------------------------------------

Seq2SeqModel::Seq2SeqModel(const ModelConfig& config, std::uint64_t seed)
    : config_(config) {
  config_.validate();
  layout_ = build_layout(config_, &manifest_);
  Rng rng(seed);
  const auto d = static_cast<double>(config_.d_model);
  params_.reserve(manifest_.size());
  for (const auto& spec : manifest_) {
    auto t = nn::Tensor::zeros(spec.shape, true);
    auto data = t.data();
    const bool is_embedding = spec.name.ends_with(".embedding");
    if (spec.name.ends_with(".gamma")) {
      std::fill(data.begin(), data.end(), 1.0f);
    } else if (is_embedding || spec.name.ends_with(".weight")) {
      // Embeddings are scaled by √d on lookup, so their entries start at
      // variance 1/d.
      const double bound = is_embedding
                               ? std::sqrt(3.0 / d)
                               : std::sqrt(6.0 / static_cast<double>(spec.shape[0] + spec.shape[1]));
      for (float& x : data) x = static_cast<float>((2.0 * rng.uniform_double() - 1.0) * bound);
    }
    params_.push_back(std::move(t));
  }
  const auto longest = static_cast<std::size_t>(
      std::max(config_.max_encoder_len, config_.max_decoder_len));
  positions_ = sinusoid_table(longest, static_cast<std::size_t>(config_.d_model));
}

void Seq2SeqModel::zero_grad() {
  for (auto& t : params_) t.zero_grad();
}

nn::Tensor Seq2SeqModel::embed(std::size_t table, std::span<const int> ids,
                               std::size_t batch, std::size_t len, Rng* rng) const {
  const auto d = static_cast<std::size_t>(config_.d_model);
  auto e = nn::scale(nn::embedding_lookup(p(table), ids),
                     std::sqrt(static_cast<float>(config_.d_model)));
  std::vector<float> pos(batch * len * d);
  for (std::size_t b = 0; b < batch; ++b) {
    std::copy_n(positions_.begin(), len * d,
                pos.begin() + static_cast<std::ptrdiff_t>(b * len * d));
  }
  e = nn::add(e, nn::Tensor::from_data({batch * len, d}, std::move(pos)));
  if (rng) e = nn::dropout(e, config_.dropout_p, *rng);
  return e;
}

nn::Tensor Seq2SeqModel::linear(const nn::Tensor& x, const Linear& l) const {
  return nn::add_bias(nn::matmul(x, p(l.w)), p(l.b));
}

nn::Tensor Seq2SeqModel::norm(const nn::Tensor& x, const Norm& n) const {
  return nn::layer_norm(x, p(n.g), p(n.b), kNormEps);
}

nn::Tensor Seq2SeqModel::attention_block(const nn::Tensor& x_norm, const nn::Tensor& memory,
                                         const Attn& a, std::size_t batch,
                                         std::size_t q_len, std::size_t k_len, bool causal,
                                         std::span<const std::uint8_t> key_mask) const {
  kernels::AttentionShape shape;
  shape.batch = batch;
  shape.heads = static_cast<std::size_t>(config_.n_heads);
  shape.q_len = q_len;
  shape.k_len = k_len;
  shape.model_dim = static_cast<std::size_t>(config_.d_model);
  shape.causal = causal;
  auto q = linear(x_norm, a.q);
  auto k = linear(memory, a.k);
  auto v = linear(memory, a.v);
  return linear(nn::attention(q, k, v, shape, key_mask), a.o);
}

nn::Tensor Seq2SeqModel::feed_forward(const nn::Tensor& x_norm, const FeedForward& f) const {
  return linear(nn::gelu(linear(x_norm, f.in)), f.out);
}

nn::Tensor Seq2SeqModel::encoder_stack(const PaddedBatch& enc, Rng* rng) const {
  auto x = embed(layout_.enc_emb, enc.ids, enc.rows, enc.cols, rng);
  auto drop = [&](const nn::Tensor& t) {
    return rng ? nn::dropout(t, config_.dropout_p, *rng) : t;
  };
  for (const auto& layer : layout_.enc) {
    auto h = norm(x, layer.ln1);
    x = nn::add(x, drop(attention_block(h, h, layer.attn, enc.rows, enc.cols, enc.cols,
                                        false, enc.mask)));
    h = norm(x, layer.ln2);
    x = nn::add(x, drop(feed_forward(h, layer.ff)));
  }
  return norm(x, layout_.enc_norm);
}

nn::Tensor Seq2SeqModel::forward(const PaddedBatch& enc, std::span<const int> decoder_ids,
                                 std::size_t dec_len, Rng* rng) const {
  const std::size_t batch = enc.rows;
  if (batch == 0 || enc.cols == 0 || dec_len == 0) {
    throw ShapeMismatch("forward: empty batch");
  }
  if (enc.ids.size() != batch * enc.cols || enc.mask.size() != enc.ids.size()) {
    throw ShapeMismatch("forward: encoder batch is inconsistent");
  }
  if (decoder_ids.size() != batch * dec_len) {
    throw ShapeMismatch("forward: decoder ids are not batch x dec_len");
  }
  if (enc.cols > static_cast<std::size_t>(config_.max_encoder_len)) {
    throw LengthExceeded("encoder length " + std::to_string(enc.cols) + " exceeds " +
                         std::to_string(config_.max_encoder_len));
  }
  if (dec_len > static_cast<std::size_t>(config_.max_decoder_len)) {
    throw LengthExceeded("decoder length " + std::to_string(dec_len) + " exceeds " +
                         std::to_string(config_.max_decoder_len));
  }
  const auto memory = encoder_stack(enc, rng);
  auto y = embed(layout_.dec_emb, decoder_ids, batch, dec_len, rng);
  auto drop = [&](const nn::Tensor& t) {
    return rng ? nn::dropout(t, config_.dropout_p, *rng) : t;
  };
  for (const auto& layer : layout_.dec) {
    auto h = norm(y, layer.ln1);
    y = nn::add(y, drop(attention_block(h, h, layer.self_attn, batch, dec_len, dec_len,
                                        true, {})));
    h = norm(y, layer.ln2);
    y = nn::add(y, drop(attention_block(h, memory, layer.cross_attn, batch, dec_len,
                                        enc.cols, false, enc.mask)));
    h = norm(y, layer.ln3);
    y = nn::add(y, drop(feed_forward(h, layer.ff)));
  }
  return linear(norm(y, layout_.dec_norm), layout_.out);
}

std::vector<float> Seq2SeqModel::encode(std::span<const int> encoder_ids) const {
  if (encoder_ids.empty()) throw ShapeMismatch("encode: empty input");
  if (encoder_ids.size() > static_cast<std::size_t>(config_.max_encoder_len)) {
    throw LengthExceeded("encoder length " + std::to_string(encoder_ids.size()) +
                         " exceeds " + std::to_string(config_.max_encoder_len));
  }
  nn::NoGradGuard no_grad;
  PaddedBatch single;
  single.rows = 1;
  single.cols = encoder_ids.size();
  single.ids.assign(encoder_ids.begin(), encoder_ids.end());
  single.mask.assign(single.cols, 1);
  single.lengths = {single.cols};
  auto memory = encoder_stack(single, nullptr);
  return {memory.data().begin(), memory.data().end()};
}

// --- incremental decoding ---------------------------------------------------

class ModelSession final : public DecoderSession {
 public:
  ModelSession(const Seq2SeqModel& model, std::span<const int> encoder_ids)
      : model_(model),
        d_(static_cast<std::size_t>(model.config_.d_model)),
        heads_(static_cast<std::size_t>(model.config_.n_heads)),
        vocab_(static_cast<std::size_t>(model.config_.vocab_size)),
        enc_len_(encoder_ids.size()) {
    const auto memory = model.encode(encoder_ids);
    const auto& L = model.layout_;
    cross_k_.resize(L.dec.size());
    cross_v_.resize(L.dec.size());
    for (std::size_t l = 0; l < L.dec.size(); ++l) {
      cross_k_[l] = project(memory, enc_len_, L.dec[l].cross_attn.k);
      cross_v_[l] = project(memory, enc_len_, L.dec[l].cross_attn.v);
    }
    rows_.resize(1);
    rows_[0].self_k.resize(L.dec.size());
    rows_[0].self_v.resize(L.dec.size());
  }

  std::size_t vocab_size() const override { return vocab_; }
  std::size_t max_tokens() const override {
    return static_cast<std::size_t>(model_.config_.max_decoder_len);
  }

  void select(std::span<const std::size_t> parents) override {
    std::vector<Row> next;
    next.reserve(parents.size());
    for (std::size_t p : parents) next.push_back(rows_.at(p));
    rows_ = std::move(next);
  }

  std::vector<double> step(std::span<const int> tokens) override {
    const std::size_t n = rows_.size();
    if (tokens.size() != n) throw ShapeMismatch("session step: one token per row");
    if (length_ >= max_tokens()) {
      throw LengthExceeded("decoder reached its maximum length " + std::to_string(max_tokens()));
    }
    const auto& L = model_.layout_;
    const auto emb = model_.p(L.dec_emb).data();
    const float emb_scale = std::sqrt(static_cast<float>(d_));
    std::vector<float> x(n * d_);
    for (std::size_t r = 0; r < n; ++r) {
      const int tok = tokens[r];
      if (tok < 0 || static_cast<std::size_t>(tok) >= vocab_) {
        throw ShapeMismatch("session step: token outside vocabulary");
      }
      for (std::size_t c = 0; c < d_; ++c) {
        const float e = emb[static_cast<std::size_t>(tok) * d_ + c] * emb_scale;
        x[r * d_ + c] = e + model_.positions_[length_ * d_ + c];
      }
    }
    std::vector<float> h(n * d_), a(n * d_);
    for (std::size_t l = 0; l < L.dec.size(); ++l) {
      const auto& layer = L.dec[l];
      // causal self-attention over the cache
      layer_norm(x, layer.ln1, h);
      auto q = project(h, n, layer.self_attn.q);
      auto k = project(h, n, layer.self_attn.k);
      auto v = project(h, n, layer.self_attn.v);
      for (std::size_t r = 0; r < n; ++r) {
        auto& ck = rows_[r].self_k[l];
        auto& cv = rows_[r].self_v[l];
        ck.insert(ck.end(), k.begin() + static_cast<std::ptrdiff_t>(r * d_),
                  k.begin() + static_cast<std::ptrdiff_t>((r + 1) * d_));
        cv.insert(cv.end(), v.begin() + static_cast<std::ptrdiff_t>(r * d_),
                  v.begin() + static_cast<std::ptrdiff_t>((r + 1) * d_));
        attend(std::span<const float>(q).subspan(r * d_, d_), ck, cv, length_ + 1,
               std::span<float>(a).subspan(r * d_, d_));
      }
      residual(x, project(a, n, layer.self_attn.o));
      // cross-attention over the encoder memory
      layer_norm(x, layer.ln2, h);
      q = project(h, n, layer.cross_attn.q);
      for (std::size_t r = 0; r < n; ++r) {
        attend(std::span<const float>(q).subspan(r * d_, d_), cross_k_[l], cross_v_[l],
               enc_len_, std::span<float>(a).subspan(r * d_, d_));
      }
      residual(x, project(a, n, layer.cross_attn.o));
      // feed-forward
      layer_norm(x, layer.ln3, h);
      auto inner = project(h, n, layer.ff.in);
      kernels::gelu_forward(inner, inner);
      residual(x, project(inner, n, layer.ff.out));
    }
    layer_norm(x, L.dec_norm, h);
    const auto logits = project(h, n, L.out);
    std::vector<double> out(n * vocab_);
    for (std::size_t r = 0; r < n; ++r) {
      log_softmax_row(std::span<const float>(logits).subspan(r * vocab_, vocab_),
                      std::span<double>(out).subspan(r * vocab_, vocab_));
    }
    ++length_;
    return out;
  }

 private:
  struct Row {
    std::vector<std::vector<float>> self_k, self_v;  // per layer, len × d
  };

  std::vector<float> project(std::span<const float> x, std::size_t rows,
                             const Seq2SeqModel::Linear& l) const {
    const auto& w = model_.p(l.w);
    const std::size_t in = w.shape()[0], out = w.shape()[1];
    std::vector<float> y(rows * out);
    kernels::gemm(x, w.data(), y, rows, in, out);
    const auto b = model_.p(l.b).data();
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < out; ++c) y[r * out + c] += b[c];
    }
    return y;
  }

  void layer_norm(std::span<const float> x, const Seq2SeqModel::Norm& n,
                  std::span<float> out) const {
    kernels::layer_norm_forward(x, model_.p(n.g).data(), model_.p(n.b).data(), out, {}, {},
                                x.size() / d_, d_, kNormEps);
  }

  static void residual(std::span<float> x, std::span<const float> delta) {
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += delta[i];
  }

  void attend(std::span<const float> q, std::span<const float> k, std::span<const float> v,
              std::size_t k_len, std::span<float> out) const {
    kernels::AttentionShape shape;
    shape.heads = heads_;
    shape.q_len = 1;
    shape.k_len = k_len;
    shape.model_dim = d_;
    probs_.resize(shape.prob_size());
    kernels::attention_forward(shape, q, k, v, {}, out, probs_);
  }

  const Seq2SeqModel& model_;
  std::size_t d_, heads_, vocab_, enc_len_;
  std::size_t length_ = 0;
  std::vector<std::vector<float>> cross_k_, cross_v_;
  std::vector<Row> rows_;
  mutable std::vector<float> probs_;
};

std::unique_ptr<DecoderSession> Seq2SeqModel::start_session(
    std::span<const int> encoder_ids) const {
  return std::make_unique<ModelSession>(*this, encoder_ids);
}

SessionFactory Seq2SeqModel::session_factory() const {
  return [this](std::span<const int> encoder_ids) { return start_session(encoder_ids); };
}

}  // namespace retroroute
