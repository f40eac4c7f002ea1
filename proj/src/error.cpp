#include "uscatter/error.hpp"

namespace uscatter {

const char* error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::NonPrimeP: return "NonPrimeP";
    case ErrorCode::GridTooLarge: return "GridTooLarge";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::GridMismatch: return "GridMismatch";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::NegativeKernelValue: return "NegativeKernelValue";
    case ErrorCode::DiagonalSingularity: return "DiagonalSingularity";
    case ErrorCode::InvalidKernel: return "InvalidKernel";
    case ErrorCode::MissingAnalyticK: return "MissingAnalyticK";
    case ErrorCode::NegativeLoss: return "NegativeLoss";
    case ErrorCode::NonRadialKernel: return "NonRadialKernel";
    case ErrorCode::NonEvaluable: return "NonEvaluable";
    case ErrorCode::StepTooLarge: return "StepTooLarge";
    case ErrorCode::ToleranceNotReached: return "ToleranceNotReached";
    case ErrorCode::NoPositiveSteadyState: return "NoPositiveSteadyState";
    case ErrorCode::NonConvergence: return "NonConvergence";
    case ErrorCode::DegenerateGrid: return "DegenerateGrid";
    case ErrorCode::NonPositiveN: return "NonPositiveN";
    case ErrorCode::InsufficientSamples: return "InsufficientSamples";
    case ErrorCode::NonPositiveValue: return "NonPositiveValue";
    case ErrorCode::ConfigParse: return "ConfigParse";
    case ErrorCode::Io: return "Io";
  }
  return "UnknownError";
}

}  // namespace uscatter
