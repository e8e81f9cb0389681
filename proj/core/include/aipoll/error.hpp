#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace aipoll {

enum class ErrorCode {
  InvalidCardinality,
  NegativeMass,
  EmptyDistribution,
  Shape,
  Parse,
  Schema,
  Alignment,
  MissingEmbedding,
  MissingDistribution,
  Auth,
  Backend,
  Io,
  MissingArtifact,
  InvalidArgument,
};

std::string_view to_string(ErrorCode code) noexcept;

/// All library failures are reported through this type; `code()` lets
/// callers branch without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace aipoll
