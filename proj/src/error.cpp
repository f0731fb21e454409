#include "mpp/error.hpp"

namespace mpp {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::NoTrim: return "NoTrim";
    case ErrorCode::NotStabilizable: return "NotStabilizable";
    case ErrorCode::Unplaceable: return "Unplaceable";
    case ErrorCode::NoPathFound: return "NoPathFound";
    case ErrorCode::SeedOccupied: return "SeedOccupied";
    case ErrorCode::CorridorDegenerate: return "CorridorDegenerate";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::SingularSteadyState: return "SingularSteadyState";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::AllInfeasible: return "AllInfeasible";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace mpp
