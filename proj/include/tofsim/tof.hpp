#pragma once

#include <optional>
#include <vector>

#include "tofsim/dynamics.hpp"
#include "tofsim/phasespace.hpp"

namespace tofsim {

// Linear readout functional u = ell . z = (x2 - x1) / (kappa (t2 - t1)),
// i.e. the value a single pointer-pair readout assigns to the particle
// momentum.
struct ToFFunctional {
    Eigen::VectorXd ell; // 6-vector, nonzero only at x1 and x2
    double kappa;
    double t1;
    double t2;
};

ToFFunctional tof_functional(const ToFSetup& setup);

// Mean of (x2(T) - x1(T)) / (t2 - t1) under the evolved state, computed from
// the propagated pointer means. Equals kappa * P0.
double tof_expectation(const ToFSetup& setup);

// Particle momentum variance at readout time with the pointers traced out:
// dP0^2 + kappa^2 (dp1^2 + dp2^2). Computed from the propagated state.
double traced_variance(const ToFSetup& setup);

// Post-measurement description of the particle after conditioning on one
// readout value p_out.
struct ConditionedResult {
    double p_out;       // the assigned readout value
    double p_c;         // conditioned mean momentum
    double var_pc;      // conditioned variance (independent of p_out and P0)
    double var_pt;      // pre-conditioning variance
    double d;           // gradient of the p_c vs p_out deviation
    double width_ratio; // sqrt(var_pc) / dP0
};

ConditionedResult condition_on_tof(const ToFSetup& setup, double p_out);

// Slope in p_c = p_out + d (P0 - p_out), from the covariance identity
// d = 1 - Cov(P, u) / Var(u) on the time-T state.
double gradient_d(const ToFSetup& setup);

// Gaussian densities over the supplied momentum grid: the initial
// distribution, the traced (pointer-averaged) distribution at T, and, when
// p_out is given, the conditioned distribution.
struct DistributionSamples {
    std::vector<double> grid;
    std::vector<double> initial;
    std::vector<double> traced;
    std::optional<std::vector<double>> conditioned;
};

DistributionSamples distribution_samples(const ToFSetup& setup,
                                         std::optional<double> p_out,
                                         const std::vector<double>& grid);

// One simulated readout: draws (x1, x2) from the evolved Gaussian and assigns
// the corresponding p_out value.
double sample_readout(const ToFSetup& setup, std::mt19937_64& rng);

} // namespace tofsim
