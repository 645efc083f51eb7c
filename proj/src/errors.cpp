#include "fracctl/errors.hpp"

namespace fracctl {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidParams: return "InvalidParams";
    case ErrorCode::InvalidOrder: return "InvalidOrder";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::NonConvergence: return "NonConvergence";
    case ErrorCode::SingularKernel: return "SingularKernel";
    case ErrorCode::SingularGramian: return "SingularGramian";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::RankDeficientB: return "RankDeficientB";
    case ErrorCode::InvalidInput: return "InvalidInput";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace fracctl
