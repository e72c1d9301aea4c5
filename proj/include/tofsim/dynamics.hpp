#pragma once

#include <functional>
#include <variant>

#include "tofsim/phasespace.hpp"
#include "tofsim/setup.hpp"

namespace tofsim {

// Instantaneous couplings f_i(t) = kappa * delta(t - t_i).
struct DeltaSchedule {
    double kappa;
    double t1;
    double t2;
};

// General coupling functions sampled on demand. `support_lo/hi` bound the
// interval outside which both functions are negligible; quadrature always
// integrates from 0, the support is used for validation only.
struct SampledSchedule {
    std::function<double(double)> f1;
    std::function<double(double)> f2;
    double support_lo = 0.0;
    double support_hi = 0.0;
};

using CouplingSchedule = std::variant<DeltaSchedule, SampledSchedule>;

// The coupling integrals entering the Heisenberg solutions, all evaluated at
// time t:
//   a_i = int_0^t f_i                     (momentum transfer)
//   b_i = int_0^t a_i                     (position transfer)
//   c_i = int_0^t tau f_i(tau)            (pointer pickup of P(0))
//   g_ij = int_0^t f_i(tau) b_j(tau)      (pointer-pointer cross talk)
struct CouplingCoefficients {
    double a1 = 0, a2 = 0;
    double b1 = 0, b2 = 0;
    double c1 = 0, c2 = 0;
    double g11 = 0, g12 = 0, g21 = 0, g22 = 0;
    double t = 0; // evaluation time
};

// Closed-form step-function coefficients for the delta schedule. A kick at
// t_i contributes fully for t > t_i and not at all for t <= t_i; evaluation
// exactly at a kick instant is rejected as ambiguous.
CouplingCoefficients delta_coefficients(const DeltaSchedule& schedule, double t);

// Composite quadrature over [0, t] on a uniform grid with `panels` Simpson
// panels (2*panels + 1 nodes). Cumulative integrals a_i, b_i are built by
// trapezoid on the same grid, so the overall order of accuracy is 2.
CouplingCoefficients quadrature_coefficients(const SampledSchedule& schedule,
                                             double t, int panels);

// Panel doubling until all g_ij move by less than `tol` between refinements
// (or the panel cap is reached).
CouplingCoefficients sampled_coefficients_converged(const SampledSchedule& schedule,
                                                    double t, double tol = 1e-10,
                                                    long max_panels = 1L << 20);

// Heisenberg evolution map assembled from coupling coefficients:
//   P(t)   = P(0) - a1 p1(0) - a2 p2(0)
//   X(t)   = X(0) + t P(0) - b1 p1(0) - b2 p2(0)
//   x_i(t) = x_i(0) + (M/m_i) t p_i(0) + a_i X(0) + c_i P(0)
//            - g_i1 p1(0) - g_i2 p2(0)
//   p_i(t) = p_i(0)
SymplecticMap symplectic_from_coefficients(const CouplingCoefficients& coeffs,
                                           const ToFSetup& setup);

// Free evolution over tau: X -> X + P tau, x_i -> x_i + (M/m_i) p_i tau.
SymplecticMap free_map(double tau, double mass_ratio_1, double mass_ratio_2);

// Instantaneous kick generated by kappa X p_i:
//   P -> P - kappa p_i,  x_i -> x_i + kappa X.  `pointer` is 1 or 2.
SymplecticMap kick_map(double kappa, int pointer);

// F(T-t2) K2 F(t2-t1) K1 F(t1): the delta-schedule evolution from 0 to T.
SymplecticMap delta_symplectic_composed(const ToFSetup& setup);

// Evolution map at readout time T for either schedule kind.
SymplecticMap schedule_map(const ToFSetup& setup, const CouplingSchedule& schedule);

// The time-T state: schedule map applied to the initial product Gaussian.
GaussianState propagate(const ToFSetup& setup, const CouplingSchedule& schedule);

// Delta schedule with the setup's kick parameters.
DeltaSchedule delta_schedule(const ToFSetup& setup);

// Smooth stand-in for the delta schedule: normalized Gaussian pulses of area
// kappa centered at t1 and t2 with common width sigma.
SampledSchedule gaussian_pulse_schedule(const ToFSetup& setup, double sigma);

} // namespace tofsim
