#pragma once

#include <stdexcept>
#include <string>

namespace freestop {

enum class ErrorCode {
  InvalidArgument,
  Parse,
  Io,
  Unreachable,
  Infeasible,
  Numeric,
  CflViolation,
  HorizonCheck,
  DimensionMismatch,
  Unsupported,
  OffLattice,
  Internal,
};

const char* to_string(ErrorCode code) noexcept;

// Every failure raised by the library carries a code so the C boundary can map
// it to a status value without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) throw Error(code, message);
}

}  // namespace freestop
