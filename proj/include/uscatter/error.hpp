#pragma once

#include <stdexcept>
#include <string>

namespace uscatter {

/// Failure categories shared by every module. The numeric values are part of
/// the C API (see uscatter.h) and must stay stable.
enum class ErrorCode : int {
  NonPrimeP = 10,
  GridTooLarge = 11,
  IndexOutOfRange = 12,
  GridMismatch = 13,
  InvalidArgument = 14,

  NegativeKernelValue = 20,
  DiagonalSingularity = 21,
  InvalidKernel = 22,

  MissingAnalyticK = 30,
  NegativeLoss = 31,
  NonRadialKernel = 32,
  NonEvaluable = 33,

  StepTooLarge = 40,
  ToleranceNotReached = 41,

  NoPositiveSteadyState = 50,
  NonConvergence = 51,
  DegenerateGrid = 52,

  NonPositiveN = 60,
  InsufficientSamples = 61,
  NonPositiveValue = 62,

  ConfigParse = 70,
  Io = 71,
};

const char* error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace uscatter
