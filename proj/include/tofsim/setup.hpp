#pragma once

#include <string>

#include "tofsim/error.hpp"

namespace tofsim {

// Full parameter vector of one measurement setup, everything in the
// dimensionless scaled units used throughout (hbar_eff = 1).
//
//   kappa          coupling constant of both pointer kicks
//   t1, t2, T      first kick, second kick, readout time; 0 < t1 < t2 < T
//   mass_ratio_i   particle mass over pointer-i mass, M/m_i
//   P0, dP0        mean and width of the particle's initial momentum
//   dp1, dp2       initial momentum widths of the pointers
struct ToFSetup {
    double kappa = 1.0;
    double t1 = 0.5;
    double t2 = 1.5;
    double T = 3.0;
    double mass_ratio_1 = 0.1;
    double mass_ratio_2 = 0.1;
    double P0 = 100.0;
    double dP0 = 150.0;
    double dp1 = 30.0;
    double dp2 = 30.0;

    // Throws SimError(InvalidParameter) naming the offending field.
    void validate() const;
};

} // namespace tofsim
