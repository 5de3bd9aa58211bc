#include "cvner/error.hpp"

namespace cvner {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "INVALID_ARGUMENT";
    case ErrorCode::ParseError: return "PARSE_ERROR";
    case ErrorCode::UnsupportedVersion: return "UNSUPPORTED_VERSION";
    case ErrorCode::InvalidDataset: return "INVALID_DATASET";
    case ErrorCode::SpanOutOfBounds: return "SPAN_OUT_OF_BOUNDS";
    case ErrorCode::SpanOverlap: return "SPAN_OVERLAP";
    case ErrorCode::UnknownEntityType: return "UNKNOWN_ENTITY_TYPE";
    case ErrorCode::UnknownSection: return "UNKNOWN_SECTION";
    case ErrorCode::NotFound: return "NOT_FOUND";
    case ErrorCode::StateViolation: return "STATE_VIOLATION";
    case ErrorCode::VersionConflict: return "VERSION_CONFLICT";
    case ErrorCode::Busy: return "BUSY";
    case ErrorCode::Infeasible: return "INFEASIBLE";
    case ErrorCode::Io: return "IO_ERROR";
  }
  return "UNKNOWN";
}

}  // namespace cvner
