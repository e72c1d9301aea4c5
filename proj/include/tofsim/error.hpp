#pragma once

#include <stdexcept>
#include <string>

namespace tofsim {

// Failure categories surfaced by the library. The CLI maps these onto
// process exit codes (validation -> 2, numerical contract -> 3,
// oracle mismatch -> 4).
enum class ErrorKind {
    InvalidParameter,
    ContractViolation,
    DegenerateFunctional,
    DegenerateConditioning,
    AmbiguousInstant,
    InvalidCoupling,
    Resolution,
    Aliasing,
    OutOfSupport,
    NoCrossing,
    Infeasible,
    OracleMismatch,
    Usage,
};

const char* error_kind_name(ErrorKind kind);

class SimError : public std::runtime_error {
  public:
    SimError(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(error_kind_name(kind)) + ": " + message),
          kind_(kind) {}

    ErrorKind kind() const { return kind_; }

  private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
    throw SimError(kind, message);
}

} // namespace tofsim
