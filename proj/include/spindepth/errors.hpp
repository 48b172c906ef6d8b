#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace spindepth {

enum class ErrorCode {
  InvalidArgument,
  ConvergenceFailure,
  DimensionMismatch,
  NonIntegerSpin,
  ConstraintInfeasible,
  OutOfRange,
  SpinMismatch,
  NotQubit,
  MissingFields,
  NotSymmetric,
  SizeLimitExceeded,
  BinUnderflow,
  Io,
  Parse,
};

std::string_view to_string(ErrorCode code);

/// Base exception for every failure raised by the library. The code lets
/// frontends map failures onto exit statuses without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace spindepth
