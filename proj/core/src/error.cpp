#include "diffnet/types.hpp"

namespace diffnet {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kDisconnectedGraph: return "DisconnectedGraph";
    case ErrorCode::kIndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::kNonPositiveSignalPower: return "NonPositiveSignalPower";
    case ErrorCode::kInvalidParameters: return "InvalidParameters";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kNonPositiveBandwidth: return "NonPositiveBandwidth";
    case ErrorCode::kEmptyBuffer: return "EmptyBuffer";
    case ErrorCode::kDegenerateDenominator: return "DegenerateDenominator";
    case ErrorCode::kDeltaOutOfRange: return "DeltaOutOfRange";
    case ErrorCode::kNoConvergence: return "NoConvergence";
    case ErrorCode::kUnstableSystem: return "UnstableSystem";
    case ErrorCode::kSingularSolve: return "SingularSolve";
    case ErrorCode::kInsufficientPilot: return "InsufficientPilot";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kPartialFailure: return "PartialFailure";
    case ErrorCode::kConfigError: return "ConfigError";
  }
  return "Unknown";
}

}  // namespace diffnet
