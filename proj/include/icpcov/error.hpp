#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace icpcov {

enum class ErrorCode {
  AngleNearPi,
  NotPSD,
  EmptyCloud,
  TooFewPoints,
  TooFewCorrespondences,
  NumericalFailure,
  NoMapScans,
  InsufficientConvergence,
  TrainingDiverged,
  MalformedFile,
  ParseError,
  BadTimestamps,
  EmptyInput,
  LengthMismatch,
  InvalidArgument,
  IoError,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library carries one of the codes above so
/// callers (notably the CLI) can map it to an exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// True for codes that stem from numerical trouble rather than bad data.
bool is_numerical(ErrorCode code);

}  // namespace icpcov
