#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "retroroute/checkpoint.hpp"
#include "retroroute/corpus.hpp"
#include "retroroute/model.hpp"
#include "retroroute/tokenizer.hpp"

namespace retroroute {

struct TrainConfig {
  ModelConfig model;
  std::size_t batch_size = 32;
  int epochs = 20;
  double peak_lr = 3e-4;
  double final_lr = 3e-5;
  double warmup_fraction = 0.10;
  double clip_norm = 1.0;
  double mask_prob = 0.05;
  std::size_t n_buckets = 8;
  std::size_t checkpoint_every = 0;  // steps; 0 = once per epoch
  std::uint64_t seed = 0;
  bool deterministic = false;

  void validate() const;
  nlohmann::json to_json() const;
  /// Missing keys keep their defaults; unknown keys are rejected.
  static TrainConfig from_json(const nlohmann::json& j);
};

struct TrainOptions {
  std::string checkpoint_path;  // empty = no checkpoints written
  std::string metrics_path;     // empty = no metrics file
  std::string resume_from;      // checkpoint to continue from
  nlohmann::json run_config = nlohmann::json::object();  // stored in checkpoints
  std::ostream* log = nullptr;
  std::size_t log_every = 50;
  std::uint64_t stop_at_step = 0;  // nonzero: save and return once this step is done
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<double> losses;  // one per step run in this call
  std::vector<std::size_t> bucket_bounds;
  std::uint64_t total_steps = 0;
};

/// Upper length bounds (encoder + decoder tokens) of the batching buckets,
/// placed at quantiles of the observed lengths.
std::vector<std::size_t> bucket_bounds(std::span<const std::size_t> lengths, std::size_t n_buckets);

/// Batches of entry indices for one epoch: entries are shuffled, grouped
/// by bucket, cut into batches, and the batch order is shuffled again.
std::vector<std::vector<std::size_t>> epoch_batches(std::span<const std::size_t> lengths,
                                                    std::span<const std::size_t> bounds,
                                                    std::size_t batch_size, std::uint64_t seed,
                                                    int epoch);

/// Replaces each real (mask = 1) token with <pad> with probability p.
/// Returns the number of replaced positions.
std::size_t mask_encoder_tokens(PaddedBatch& batch, double p, Rng& rng);

/// Teacher-forced training with ADAM, global-norm clipping, and a warmup +
/// cosine schedule. Throws NonFiniteLoss (after writing a diagnostic dump
/// next to the checkpoint or metrics file) when the loss or the gradient
/// norm stops being finite.
TrainResult train(std::span<const DatasetEntry> entries, const Vocab& vocab,
                  const TrainConfig& config, const TrainOptions& options = {});

/// Mean teacher-forced loss over entries without dropout or masking.
double evaluation_loss(const Seq2SeqModel& model, std::span<const DatasetEntry> entries,
                       const Vocab& vocab, std::size_t batch_size = 32);

}  // namespace retroroute
