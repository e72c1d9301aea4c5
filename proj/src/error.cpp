#include "tofsim/error.hpp"

namespace tofsim {

const char* error_kind_name(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::InvalidParameter: return "invalid-parameter";
        case ErrorKind::ContractViolation: return "contract-violation";
        case ErrorKind::DegenerateFunctional: return "degenerate-functional";
        case ErrorKind::DegenerateConditioning: return "degenerate-conditioning";
        case ErrorKind::AmbiguousInstant: return "ambiguous-instant";
        case ErrorKind::InvalidCoupling: return "invalid-coupling";
        case ErrorKind::Resolution: return "resolution";
        case ErrorKind::Aliasing: return "aliasing";
        case ErrorKind::OutOfSupport: return "out-of-support";
        case ErrorKind::NoCrossing: return "no-crossing";
        case ErrorKind::Infeasible: return "infeasible";
        case ErrorKind::OracleMismatch: return "oracle-mismatch";
        case ErrorKind::Usage: return "usage";
    }
    return "unknown";
}

} // namespace tofsim
