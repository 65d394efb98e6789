#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace splitee {

enum class ErrorKind {
  InvalidArgument,
  InsufficientData,
  SingularJacobian,
  NonFiniteEvaluation,
  AllSplitsFailed,
  NegativeVariance,
  DomainError,
  DegenerateRange,
  SchemaMismatch,
  FileNotFound,
  ParseError,
};

const char* to_string(ErrorKind kind);

/// Library error. `stage` (1 or 2) and `split` are filled in when the error
/// surfaced inside a per-split fit.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }
  std::optional<int> stage() const noexcept { return stage_; }
  std::optional<std::int64_t> split() const noexcept { return split_; }

  Error with_context(int stage, std::optional<std::int64_t> split) const;

 private:
  ErrorKind kind_;
  std::optional<int> stage_;
  std::optional<std::int64_t> split_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& message);

}  // namespace splitee
