#include "relsplit/error.hpp"

namespace relsplit {

std::string_view to_string(ErrorCode code) {
  switch (code) {
  case ErrorCode::ParseError: return "ParseError";
  case ErrorCode::DuplicateId: return "DuplicateId";
  case ErrorCode::EmptyPath: return "EmptyPath";
  case ErrorCode::EmptySegment: return "EmptySegment";
  case ErrorCode::InvalidSpec: return "InvalidSpec";
  case ErrorCode::TooFewGroups: return "TooFewGroups";
  case ErrorCode::CoverageError: return "CoverageError";
  case ErrorCode::EmptyField: return "EmptyField";
  case ErrorCode::ReservedMarker: return "ReservedMarker";
  case ErrorCode::ProviderError: return "ProviderError";
  case ErrorCode::MissingEntry: return "MissingEntry";
  case ErrorCode::DimMismatch: return "DimMismatch";
  case ErrorCode::EmptyBatch: return "EmptyBatch";
  case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
  case ErrorCode::ConfigMismatch: return "ConfigMismatch";
  case ErrorCode::FormatError: return "FormatError";
  case ErrorCode::IdMismatch: return "IdMismatch";
  case ErrorCode::OutOfRange: return "OutOfRange";
  case ErrorCode::IoError: return "IoError";
  case ErrorCode::InvalidArgument: return "InvalidArgument";
  case ErrorCode::LeakageDetected: return "LeakageDetected";
  case ErrorCode::InvariantViolation: return "InvariantViolation";
  }
  return "Unknown";
}

} // namespace relsplit
