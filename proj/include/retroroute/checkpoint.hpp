#pragma once

// Binary checkpoint file.
//
//   "RRCKPT\0\0"                 8-byte magic
//   u32 version                  kCheckpointVersion
//   u64 n, n bytes               header JSON (model config, run config)
//   u64 n, n bytes               vocabulary text (Vocab::to_text)
//   u64 vocab fingerprint        FNV-1a of the vocabulary text
//   u64 step
//   u32 tensor count, then per tensor in manifest order:
//     u32 n, name; u32 rank; u64 dims[rank]; f32 values
//   u8 has_optimizer, then (u64 t; f64 m and v runs per tensor) if set
//   u64 checksum                 FNV-1a of every preceding byte
//
// All integers and floats are little-endian.

#include <cstdint>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "retroroute/model.hpp"
#include "retroroute/optim.hpp"
#include "retroroute/tokenizer.hpp"

namespace retroroute {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  Seq2SeqModel model;
  Vocab vocab;
  nlohmann::json run_config = nlohmann::json::object();
  std::uint64_t step = 0;
  std::optional<nn::AdamState> optimizer;
};

void save_checkpoint(const std::string& path, const Seq2SeqModel& model, const Vocab& vocab,
                     std::uint64_t step, const nn::AdamState* optimizer,
                     const nlohmann::json& run_config);

inline void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  save_checkpoint(path, ckpt.model, ckpt.vocab, ckpt.step,
                  ckpt.optimizer ? &*ckpt.optimizer : nullptr, ckpt.run_config);
}

/// Throws FormatVersionMismatch, CorruptFile (bad magic, checksum or
/// truncation), and VocabMismatch when `expected_vocab` is given and its
/// fingerprint differs from the stored one.
Checkpoint load_checkpoint(const std::string& path, const Vocab* expected_vocab = nullptr);

}  // namespace retroroute
