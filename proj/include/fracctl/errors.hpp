#pragma once

#include <stdexcept>
#include <string>

namespace fracctl {

enum class ErrorCode {
  InvalidParams,
  InvalidOrder,
  DomainError,
  NonConvergence,
  SingularKernel,
  SingularGramian,
  RankDeficient,
  RankDeficientB,
  InvalidInput,
  Io,
};

const char* to_string(ErrorCode code) noexcept;

/// Every failure raised by the library carries one of the codes above; the C
/// API maps them onto fracctl_status values.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace fracctl
