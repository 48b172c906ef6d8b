#include "spindepth/errors.hpp"

namespace spindepth {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ConvergenceFailure: return "ConvergenceFailure";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NonIntegerSpin: return "NonIntegerSpin";
    case ErrorCode::ConstraintInfeasible: return "ConstraintInfeasible";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::SpinMismatch: return "SpinMismatch";
    case ErrorCode::NotQubit: return "NotQubit";
    case ErrorCode::MissingFields: return "MissingFields";
    case ErrorCode::NotSymmetric: return "NotSymmetric";
    case ErrorCode::SizeLimitExceeded: return "SizeLimitExceeded";
    case ErrorCode::BinUnderflow: return "BinUnderflow";
    case ErrorCode::Io: return "Io";
    case ErrorCode::Parse: return "Parse";
  }
  return "Unknown";
}

}  // namespace spindepth
