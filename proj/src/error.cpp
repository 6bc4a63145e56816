#include "icpcov/error.hpp"

namespace icpcov {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::AngleNearPi: return "AngleNearPi";
    case ErrorCode::NotPSD: return "NotPSD";
    case ErrorCode::EmptyCloud: return "EmptyCloud";
    case ErrorCode::TooFewPoints: return "TooFewPoints";
    case ErrorCode::TooFewCorrespondences: return "TooFewCorrespondences";
    case ErrorCode::NumericalFailure: return "NumericalFailure";
    case ErrorCode::NoMapScans: return "NoMapScans";
    case ErrorCode::InsufficientConvergence: return "InsufficientConvergence";
    case ErrorCode::TrainingDiverged: return "TrainingDiverged";
    case ErrorCode::MalformedFile: return "MalformedFile";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::BadTimestamps: return "BadTimestamps";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

bool is_numerical(ErrorCode code) {
  switch (code) {
    case ErrorCode::AngleNearPi:
    case ErrorCode::NotPSD:
    case ErrorCode::NumericalFailure:
    case ErrorCode::InsufficientConvergence:
    case ErrorCode::TrainingDiverged:
      return true;
    default:
      return false;
  }
}

}  // namespace icpcov
