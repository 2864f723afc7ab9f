#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace diffnet {

using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using Matrix = Eigen::MatrixXd;

enum class ErrorCode {
  kDisconnectedGraph,
  kIndexOutOfRange,
  kNonPositiveSignalPower,
  kInvalidParameters,
  kDimensionMismatch,
  kNonPositiveBandwidth,
  kEmptyBuffer,
  kDegenerateDenominator,
  kDeltaOutOfRange,
  kNoConvergence,
  kUnstableSystem,
  kSingularSolve,
  kInsufficientPilot,
  kIoError,
  kPartialFailure,
  kConfigError,
};

const char* to_string(ErrorCode code) noexcept;

/// Every failure raised by the library carries one of the codes above so the
/// CLI can map it onto an exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline double to_db(double linear) { return 10.0 * std::log10(linear); }

}  // namespace diffnet
