#include "aipoll/error.hpp"

namespace aipoll {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidCardinality: return "invalid-cardinality";
    case ErrorCode::NegativeMass: return "negative-mass";
    case ErrorCode::EmptyDistribution: return "empty-distribution";
    case ErrorCode::Shape: return "shape";
    case ErrorCode::Parse: return "parse";
    case ErrorCode::Schema: return "schema";
    case ErrorCode::Alignment: return "alignment";
    case ErrorCode::MissingEmbedding: return "missing-embedding";
    case ErrorCode::MissingDistribution: return "missing-distribution";
    case ErrorCode::Auth: return "auth";
    case ErrorCode::Backend: return "backend";
    case ErrorCode::Io: return "io";
    case ErrorCode::MissingArtifact: return "missing-artifact";
    case ErrorCode::InvalidArgument: return "invalid-argument";
  }
  return "unknown";
}

}  // namespace aipoll
