#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mpp {

enum class ErrorCode {
  InvalidArgument,
  NoTrim,
  NotStabilizable,
  Unplaceable,
  NoPathFound,
  SeedOccupied,
  CorridorDegenerate,
  DimensionMismatch,
  SingularSteadyState,
  RankDeficient,
  AllInfeasible,
  ConfigInvalid,
  Io,
};

std::string_view to_string(ErrorCode code);

/// Exception carrying a machine-readable code; every module reports failures
/// through this type.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace mpp
