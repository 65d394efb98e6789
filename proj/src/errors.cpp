#include "splitee/errors.hpp"

namespace splitee {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::InsufficientData: return "InsufficientData";
    case ErrorKind::SingularJacobian: return "SingularJacobian";
    case ErrorKind::NonFiniteEvaluation: return "NonFiniteEvaluation";
    case ErrorKind::AllSplitsFailed: return "AllSplitsFailed";
    case ErrorKind::NegativeVariance: return "NegativeVariance";
    case ErrorKind::DomainError: return "DomainError";
    case ErrorKind::DegenerateRange: return "DegenerateRange";
    case ErrorKind::SchemaMismatch: return "SchemaMismatch";
    case ErrorKind::FileNotFound: return "FileNotFound";
    case ErrorKind::ParseError: return "ParseError";
  }
  return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

Error Error::with_context(int stage, std::optional<std::int64_t> split) const {
  std::string prefix = "stage-" + std::to_string(stage);
  if (split) prefix += ", split " + std::to_string(*split);
  std::string body = what();
  // strip our own kind prefix; the constructor re-adds it
  const std::string own = std::string(to_string(kind_)) + ": ";
  if (body.rfind(own, 0) == 0) body = body.substr(own.size());
  Error out(kind_, prefix + ": " + body);
  out.stage_ = stage;
  out.split_ = split;
  return out;
}

void fail(ErrorKind kind, const std::string& message) { throw Error(kind, message); }

}  // namespace splitee
