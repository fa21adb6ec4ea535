#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace retroroute {

/// Broad failure classes; the CLI maps each one to a stable exit code.
enum class ErrorCategory {
  kInput,          // malformed files, grammar violations, bad arguments
  kNumeric,        // non-finite values during training or evaluation
  kCompatibility,  // checkpoint/vocabulary/format mismatches
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

class InputError : public Error {
 public:
  explicit InputError(const std::string& what)
      : Error(ErrorCategory::kInput, what) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what)
      : Error(ErrorCategory::kNumeric, what) {}
};

class CompatibilityError : public Error {
 public:
  explicit CompatibilityError(const std::string& what)
      : Error(ErrorCategory::kCompatibility, what) {}
};

// --- route grammar -------------------------------------------------------

class RouteSyntaxError : public InputError {
 public:
  RouteSyntaxError(std::size_t position, std::string expected)
      : InputError("route syntax error at position " +
                   std::to_string(position) + ": expected " + expected),
        position_(position),
        expected_(std::move(expected)) {}

  std::size_t position() const noexcept { return position_; }
  const std::string& expected() const noexcept { return expected_; }

 private:
  std::size_t position_;
  std::string expected_;
};

class DelimiterInSmiles : public InputError {
 public:
  explicit DelimiterInSmiles(const std::string& smiles)
      : InputError("molecule string contains a structural delimiter: '" +
                   smiles + "'") {}
};

/// Corpus-level parse failure; `index` is the position of the offending
/// route within its source file.
class ParseError : public InputError {
 public:
  ParseError(std::size_t index, const std::string& what)
      : InputError("route #" + std::to_string(index) + ": " + what),
        index_(index) {}

  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

// --- tokenizer -----------------------------------------------------------

class EmptyCorpus : public InputError {
 public:
  EmptyCorpus() : InputError("cannot build a vocabulary from an empty corpus") {}
};

class UnknownToken : public InputError {
 public:
  explicit UnknownToken(std::size_t position)
      : InputError("no vocabulary token matches at position " +
                   std::to_string(position)),
        position_(position) {}

  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

class StepsOutOfRange : public InputError {
 public:
  explicit StepsOutOfRange(int steps)
      : InputError("step count " + std::to_string(steps) +
                   " outside [1, 99]") {}
};

class SequenceTooLong : public InputError {
 public:
  SequenceTooLong(std::size_t length, std::size_t max_len)
      : InputError("sequence of length " + std::to_string(length) +
                   " exceeds maximum " + std::to_string(max_len)) {}
};

// --- numerics ------------------------------------------------------------

class ShapeMismatch : public InputError {
 public:
  explicit ShapeMismatch(const std::string& what)
      : InputError("shape mismatch: " + what) {}
};

class NonFiniteInput : public NumericError {
 public:
  explicit NonFiniteInput(const std::string& what)
      : NumericError("non-finite value: " + what) {}
};

class NonFiniteLoss : public NumericError {
 public:
  explicit NonFiniteLoss(const std::string& what) : NumericError(what) {}
};

class StepOutOfRange : public InputError {
 public:
  explicit StepOutOfRange(const std::string& what) : InputError(what) {}
};

class LengthExceeded : public InputError {
 public:
  explicit LengthExceeded(const std::string& what) : InputError(what) {}
};

// --- checkpoints ---------------------------------------------------------

class FormatVersionMismatch : public CompatibilityError {
 public:
  explicit FormatVersionMismatch(const std::string& what)
      : CompatibilityError(what) {}
};

class VocabMismatch : public CompatibilityError {
 public:
  explicit VocabMismatch(const std::string& what) : CompatibilityError(what) {}
};

class CorruptFile : public InputError {
 public:
  explicit CorruptFile(const std::string& what) : InputError(what) {}
};

}  // namespace retroroute
