#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace stackelq {

enum class ErrorCode {
  kDimensionMismatch,
  kNotPSD,
  kUpsilonSingular,
  kGamma2NotPD,
  kNotConverged,
  kDiverged,
  kSeriesDivergent,
  kStateOverflow,
  kHessianNotPD,
  kFixedPointMismatch,
  kLeaderNotOptimal,
  kInvalidInput,
};

std::string_view to_string(ErrorCode code);

// Thrown by solver operations. `index()` carries the step or iteration at
// which the failure was detected, when there is one.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what,
        std::optional<int> index = std::nullopt);

  ErrorCode code() const noexcept { return code_; }
  std::optional<int> index() const noexcept { return index_; }

 private:
  ErrorCode code_;
  std::optional<int> index_;
};

}  // namespace stackelq
