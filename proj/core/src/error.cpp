#include "stackelq/error.hpp"

namespace stackelq {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kNotPSD: return "NotPSD";
    case ErrorCode::kUpsilonSingular: return "UpsilonSingular";
    case ErrorCode::kGamma2NotPD: return "Gamma2NotPD";
    case ErrorCode::kNotConverged: return "NotConverged";
    case ErrorCode::kDiverged: return "Diverged";
    case ErrorCode::kSeriesDivergent: return "SeriesDivergent";
    case ErrorCode::kStateOverflow: return "StateOverflow";
    case ErrorCode::kHessianNotPD: return "HessianNotPD";
    case ErrorCode::kFixedPointMismatch: return "FixedPointMismatch";
    case ErrorCode::kLeaderNotOptimal: return "LeaderNotOptimal";
    case ErrorCode::kInvalidInput: return "InvalidInput";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& what, std::optional<int> index)
    : std::runtime_error(std::string(to_string(code)) + ": " + what +
                         (index ? " (at index " + std::to_string(*index) + ")"
                                : std::string())),
      code_(code),
      index_(index) {}

}  // namespace stackelq
