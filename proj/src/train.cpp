#include "retroroute/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

#include "retroroute/errors.hpp"
#include "retroroute/ops.hpp"
#include "retroroute/optim.hpp"

namespace retroroute {

// --- configuration ---------------------------------------------------------

void TrainConfig::validate() const {
  model.validate();
  if (batch_size == 0) throw InputError("train: batch_size must be >= 1");
  if (epochs < 1) throw InputError("train: epochs must be >= 1");
  if (!(clip_norm > 0.0)) throw InputError("train: clip_norm must be positive");
  if (!(mask_prob >= 0.0 && mask_prob < 1.0)) throw InputError("train: mask_prob outside [0, 1)");
  if (n_buckets == 0) throw InputError("train: n_buckets must be >= 1");
  nn::LrSchedule s{peak_lr, final_lr, 1, warmup_fraction};
  s.validate();
}

nlohmann::json TrainConfig::to_json() const {
  return {{"model", model.to_json()},
          {"batch_size", batch_size},
          {"epochs", epochs},
          {"peak_lr", peak_lr},
          {"final_lr", final_lr},
          {"warmup_fraction", warmup_fraction},
          {"clip_norm", clip_norm},
          {"mask_prob", mask_prob},
          {"n_buckets", n_buckets},
          {"checkpoint_every", checkpoint_every},
          {"seed", seed},
          {"deterministic", deterministic}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  static const std::vector<std::string> known{
      "model",     "batch_size", "epochs",    "peak_lr",          "final_lr", "warmup_fraction",
      "clip_norm", "mask_prob",  "n_buckets", "checkpoint_every", "seed",     "deterministic"};
  if (!j.is_object()) throw InputError("train config must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw InputError("train config: unknown key '" + key + "'");
    }
  }
  TrainConfig c;
  try {
    if (j.contains("model")) c.model = ModelConfig::from_json(j.at("model"));
    c.batch_size = j.value("batch_size", c.batch_size);
    c.epochs = j.value("epochs", c.epochs);
    c.peak_lr = j.value("peak_lr", c.peak_lr);
    c.final_lr = j.value("final_lr", c.final_lr);
    c.warmup_fraction = j.value("warmup_fraction", c.warmup_fraction);
    c.clip_norm = j.value("clip_norm", c.clip_norm);
    c.mask_prob = j.value("mask_prob", c.mask_prob);
    c.n_buckets = j.value("n_buckets", c.n_buckets);
    c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
    c.seed = j.value("seed", c.seed);
    c.deterministic = j.value("deterministic", c.deterministic);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("train config: ") + e.what());
  }
  c.validate();
  return c;
}

// --- batching ---------------------------------------------------------------

std::vector<std::size_t> bucket_bounds(std::span<const std::size_t> lengths,
                                       std::size_t n_buckets) {
  if (lengths.empty()) return {};
  std::vector<std::size_t> sorted(lengths.begin(), lengths.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::size_t> bounds;
  for (std::size_t b = 1; b <= n_buckets; ++b) {
    const std::size_t idx = std::min(sorted.size() - 1, b * sorted.size() / n_buckets);
    const std::size_t bound = b == n_buckets ? sorted.back() : sorted[idx];
    if (bounds.empty() || bound > bounds.back()) bounds.push_back(bound);
  }
  if (bounds.back() < sorted.back()) bounds.push_back(sorted.back());
  return bounds;
}

namespace {

template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[rng.below(i)]);
  }
}

}  // namespace

std::vector<std::vector<std::size_t>> epoch_batches(std::span<const std::size_t> lengths,
                                                    std::span<const std::size_t> bounds,
                                                    std::size_t batch_size, std::uint64_t seed,
                                                    int epoch) {
  Rng rng(mix_seed(seed, 0x6261746368ULL + static_cast<std::uint64_t>(epoch)));
  std::vector<std::size_t> order(lengths.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  shuffle(order, rng);
  std::vector<std::vector<std::size_t>> buckets(std::max<std::size_t>(bounds.size(), 1));
  for (std::size_t idx : order) {
    const auto it = std::lower_bound(bounds.begin(), bounds.end(), lengths[idx]);
    const auto b = std::min(static_cast<std::size_t>(it - bounds.begin()), buckets.size() - 1);
    buckets[b].push_back(idx);
  }
  std::vector<std::vector<std::size_t>> batches;
  for (const auto& bucket : buckets) {
    for (std::size_t i = 0; i < bucket.size(); i += batch_size) {
      const auto end = std::min(bucket.size(), i + batch_size);
      batches.emplace_back(bucket.begin() + static_cast<std::ptrdiff_t>(i),
                           bucket.begin() + static_cast<std::ptrdiff_t>(end));
    }
  }
  shuffle(batches, rng);
  return batches;
}

std::size_t mask_encoder_tokens(PaddedBatch& batch, double p, Rng& rng) {
  if (p <= 0.0) return 0;
  std::size_t masked = 0;
  for (std::size_t i = 0; i < batch.ids.size(); ++i) {
    if (batch.mask[i] && rng.bernoulli(p)) {
      batch.ids[i] = Vocab::kPad;
      ++masked;
    }
  }
  return masked;
}

// --- training ---------------------------------------------------------------

namespace {

struct EncodedEntry {
  TokenSeq encoder;
  std::vector<int> route;  // <bos> ... <eos>
};

std::vector<EncodedEntry> encode_entries(std::span<const DatasetEntry> entries, const Vocab& vocab,
                                         const ModelConfig& config) {
  std::vector<EncodedEntry> out;
  out.reserve(entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    EncodedEntry enc{encode_encoder_input(e.target, e.sm, e.steps, vocab),
                     encode_route(e.route, vocab).ids};
    if (enc.encoder.ids.size() > static_cast<std::size_t>(config.max_encoder_len) ||
        enc.route.size() > static_cast<std::size_t>(config.max_decoder_len)) {
      throw SequenceTooLong(std::max(enc.encoder.ids.size(), enc.route.size()),
                            static_cast<std::size_t>(std::min(config.max_encoder_len,
                                                              config.max_decoder_len)));
    }
    out.push_back(std::move(enc));
  }
  return out;
}

struct TeacherBatch {
  PaddedBatch encoder;
  std::vector<int> decoder_in;
  std::vector<int> targets;
  std::size_t dec_len = 0;
};

TeacherBatch make_batch(std::span<const EncodedEntry> data, std::span<const std::size_t> rows,
                        const ModelConfig& config) {
  TeacherBatch b;
  std::vector<TokenSeq> enc;
  enc.reserve(rows.size());
  std::size_t longest = 0;
  for (std::size_t r : rows) {
    enc.push_back(data[r].encoder);
    longest = std::max(longest, data[r].route.size());
  }
  b.encoder = pad_batch(enc, static_cast<std::size_t>(config.max_encoder_len));
  b.dec_len = longest - 1;
  b.decoder_in.assign(rows.size() * b.dec_len, Vocab::kPad);
  b.targets.assign(rows.size() * b.dec_len, Vocab::kPad);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& route = data[rows[i]].route;
    for (std::size_t t = 0; t + 1 < route.size(); ++t) {
      b.decoder_in[i * b.dec_len + t] = route[t];
      b.targets[i * b.dec_len + t] = route[t + 1];
    }
  }
  return b;
}

std::string dump_path(const TrainOptions& o) {
  if (!o.checkpoint_path.empty()) return o.checkpoint_path + ".nonfinite.json";
  if (!o.metrics_path.empty()) return o.metrics_path + ".nonfinite.json";
  return "train.nonfinite.json";
}

[[noreturn]] void abort_non_finite(const TrainOptions& options, std::uint64_t step, double lr,
                                   double loss, double grad_norm,
                                   std::span<const DatasetEntry> entries,
                                   std::span<const std::size_t> rows, const std::string& what) {
  nlohmann::json dump = {{"step", step},
                         {"lr", lr},
                         {"loss", std::isfinite(loss) ? nlohmann::json(loss) : nlohmann::json(std::to_string(loss))},
                         {"grad_norm", std::isfinite(grad_norm) ? nlohmann::json(grad_norm)
                                                                : nlohmann::json(std::to_string(grad_norm))},
                         {"reason", what},
                         {"batch", nlohmann::json::array()}};
  for (std::size_t r : rows) dump["batch"].push_back(entries[r].to_json());
  const auto path = dump_path(options);
  std::ofstream(path) << dump.dump(2) << '\n';
  throw NonFiniteLoss("non-finite training state at step " + std::to_string(step) + " (" + what +
                      "); diagnostics written to " + path);
}

void rewrite_metrics_prefix(const std::string& path, std::uint64_t keep_through) {
  std::ifstream in(path);
  if (!in) return;
  std::vector<std::string> kept;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) continue;
    if (j.contains("step") && j["step"].get<std::uint64_t>() > keep_through) continue;
    kept.push_back(line);
  }
  in.close();
  std::ofstream out(path, std::ios::trunc);
  for (const auto& l : kept) out << l << '\n';
}

}  // namespace

TrainResult train(std::span<const DatasetEntry> entries, const Vocab& vocab,
                  const TrainConfig& config, const TrainOptions& options) {
  config.validate();
  if (entries.empty()) throw EmptyCorpus();
  if (static_cast<std::size_t>(config.model.vocab_size) != vocab.size()) {
    throw VocabMismatch("model vocab_size " + std::to_string(config.model.vocab_size) +
                        " differs from vocabulary size " + std::to_string(vocab.size()));
  }
  nn::set_deterministic(config.deterministic);
  const auto data = encode_entries(entries, vocab, config.model);
  std::vector<std::size_t> lengths(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    lengths[i] = data[i].encoder.ids.size() + data[i].route.size();
  }

  TrainResult result{Checkpoint{Seq2SeqModel(config.model, mix_seed(config.seed, 0x696e6974ULL)),
                                vocab, options.run_config, 0, std::nullopt},
                     {}, bucket_bounds(lengths, config.n_buckets), 0};
  auto& ckpt = result.checkpoint;
  auto& model = ckpt.model;

  const std::size_t per_epoch =
      epoch_batches(lengths, result.bucket_bounds, config.batch_size, config.seed, 0).size();
  result.total_steps = per_epoch * static_cast<std::uint64_t>(config.epochs);
  const nn::LrSchedule schedule{config.peak_lr, config.final_lr, result.total_steps,
                                config.warmup_fraction};

  nn::AdamState adam = nn::AdamState::for_params(model.parameters());
  std::uint64_t step = 0;
  if (!options.resume_from.empty()) {
    auto loaded = load_checkpoint(options.resume_from, &vocab);
    if (!(loaded.model.config() == config.model)) {
      throw CompatibilityError("resume checkpoint has a different model configuration");
    }
    if (!loaded.optimizer) throw CompatibilityError("resume checkpoint lacks optimizer state");
    if (loaded.step > result.total_steps) {
      throw StepOutOfRange("resume step " + std::to_string(loaded.step) + " beyond " +
                           std::to_string(result.total_steps));
    }
    model = std::move(loaded.model);
    adam = std::move(*loaded.optimizer);
    step = loaded.step;
  }

  std::ofstream metrics;
  if (!options.metrics_path.empty()) {
    if (step > 0) {
      rewrite_metrics_prefix(options.metrics_path, step);
      metrics.open(options.metrics_path, std::ios::app);
    } else {
      metrics.open(options.metrics_path, std::ios::trunc);
      nlohmann::json header = {{"bucket_bounds", result.bucket_bounds},
                               {"batch_size", config.batch_size},
                               {"steps_per_epoch", per_epoch},
                               {"total_steps", result.total_steps},
                               {"entries", entries.size()},
                               {"run_config", options.run_config}};
      metrics << nlohmann::json{{"header", header}}.dump() << '\n';
    }
    if (!metrics) throw InputError("cannot write metrics file " + options.metrics_path);
  }

  auto save = [&](std::uint64_t at) {
    if (options.checkpoint_path.empty()) return;
    save_checkpoint(options.checkpoint_path, model, vocab, at, &adam, options.run_config);
  };
  const std::size_t ckpt_every = config.checkpoint_every ? config.checkpoint_every : per_epoch;

  int cached_epoch = -1;
  std::vector<std::vector<std::size_t>> batches;
  double window_loss = 0.0;
  std::size_t window_n = 0;
  const std::uint64_t last_step = options.stop_at_step
                                      ? std::min(options.stop_at_step, result.total_steps)
                                      : result.total_steps;
  while (step < last_step) {
    const int epoch = static_cast<int>(step / per_epoch);
    if (epoch != cached_epoch) {
      batches = epoch_batches(lengths, result.bucket_bounds, config.batch_size, config.seed, epoch);
      cached_epoch = epoch;
    }
    const auto& rows = batches[step % per_epoch];
    const std::uint64_t next = step + 1;
    const double lr = nn::lr_at(static_cast<std::int64_t>(next), schedule);

    Rng rng(mix_seed(config.seed, next));
    auto batch = make_batch(data, rows, config.model);
    mask_encoder_tokens(batch.encoder, config.mask_prob, rng);

    model.zero_grad();
    double loss_value = 0.0;
    double grad_norm = 0.0;
    try {
      auto logits = model.forward(batch.encoder, batch.decoder_in, batch.dec_len, &rng);
      auto loss = nn::cross_entropy(logits, batch.targets, Vocab::kPad);
      loss_value = loss.item();
      if (!std::isfinite(loss_value)) {
        abort_non_finite(options, next, lr, loss_value, 0.0, entries, rows, "loss");
      }
      loss.backward();
    } catch (const NonFiniteInput& e) {
      abort_non_finite(options, next, lr, loss_value, 0.0, entries, rows, e.what());
    }
    grad_norm = nn::clip_global_norm(model.parameters(), config.clip_norm);
    if (!std::isfinite(grad_norm)) {
      abort_non_finite(options, next, lr, loss_value, grad_norm, entries, rows, "gradient norm");
    }
    nn::adam_step(model.parameters(), adam, lr);
    step = next;
    result.losses.push_back(loss_value);

    if (metrics.is_open()) {
      metrics << nlohmann::json{{"step", step}, {"loss", loss_value}, {"lr", lr}}.dump() << '\n';
    }
    window_loss += loss_value;
    ++window_n;
    if (options.log && (step % options.log_every == 0 || step == result.total_steps)) {
      std::ostringstream line;
      line << "step " << step << "/" << result.total_steps << " epoch " << epoch + 1
           << " loss " << window_loss / static_cast<double>(window_n) << " lr " << lr << '\n';
      *options.log << line.str() << std::flush;
      window_loss = 0.0;
      window_n = 0;
    }
    if (step % ckpt_every == 0 && step != last_step) {
      metrics.flush();
      save(step);
    }
  }
  metrics.flush();
  save(step);
  ckpt.step = step;
  ckpt.optimizer = std::move(adam);
  return result;
}

double evaluation_loss(const Seq2SeqModel& model, std::span<const DatasetEntry> entries,
                       const Vocab& vocab, std::size_t batch_size) {
  if (entries.empty()) throw EmptyCorpus();
  nn::NoGradGuard no_grad;
  const auto data = encode_entries(entries, vocab, model.config());
  double total = 0.0;
  std::size_t tokens = 0;
  for (std::size_t start = 0; start < data.size(); start += batch_size) {
    std::vector<std::size_t> rows;
    for (std::size_t i = start; i < std::min(data.size(), start + batch_size); ++i) rows.push_back(i);
    const auto batch = make_batch(data, rows, model.config());
    const auto logits = model.forward(batch.encoder, batch.decoder_in, batch.dec_len);
    const auto loss = nn::cross_entropy(logits, batch.targets, Vocab::kPad).item();
    const auto n = static_cast<std::size_t>(
        std::count_if(batch.targets.begin(), batch.targets.end(), [](int t) { return t != Vocab::kPad; }));
    total += loss * static_cast<double>(n);
    tokens += n;
  }
  return total / static_cast<double>(tokens);
}

}  // namespace retroroute
