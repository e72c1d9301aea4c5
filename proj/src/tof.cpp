#include "tofsim/tof.hpp"

#include <cmath>
#include <sstream>

namespace tofsim {

namespace {

GaussianState time_T_state(const ToFSetup& setup) {
    return propagate(setup, delta_schedule(setup));
}

double gaussian_density(double x, double mean, double variance) {
    const double z = x - mean;
    return std::exp(-0.5 * z * z / variance) / std::sqrt(2.0 * M_PI * variance);
}

// Computed variances can land a roundoff hair below zero after the
// conditioning subtraction at extreme momentum scales; values inside the
// numerical-zero band collapse to 0, anything worse is a genuine bug.
double clamp_variance(double var, double reference) {
    if (var >= 0.0) return var;
    if (var > -1e-10 * std::max(1.0, reference)) return 0.0;
    std::ostringstream msg;
    msg << "conditioned variance came out negative: " << var;
    fail(ErrorKind::ContractViolation, msg.str());
}

} // namespace

ToFFunctional tof_functional(const ToFSetup& setup) {
    setup.validate();
    if (setup.kappa == 0.0)
        fail(ErrorKind::DegenerateFunctional,
             "kappa = 0 carries no momentum information");
    const double inv = 1.0 / (setup.kappa * (setup.t2 - setup.t1));
    ToFFunctional f;
    f.ell = Eigen::VectorXd::Zero(kPhaseDim);
    f.ell(phase_ord(PhaseIndex::x1)) = -inv;
    f.ell(phase_ord(PhaseIndex::x2)) = inv;
    f.kappa = setup.kappa;
    f.t1 = setup.t1;
    f.t2 = setup.t2;
    return f;
}

double tof_expectation(const ToFSetup& setup) {
    const GaussianState state = time_T_state(setup);
    return (state.mean_of(PhaseIndex::x2) - state.mean_of(PhaseIndex::x1)) /
           (setup.t2 - setup.t1);
}

double traced_variance(const ToFSetup& setup) {
    const GaussianState state = time_T_state(setup);
    return marginal(state, {PhaseIndex::P}).var_of(PhaseIndex::P);
}

ConditionedResult condition_on_tof(const ToFSetup& setup, double p_out) {
    if (!std::isfinite(p_out))
        fail(ErrorKind::InvalidParameter, "p_out must be finite");
    const ToFFunctional functional = tof_functional(setup);
    const GaussianState at_T = time_T_state(setup);

    const Eigen::VectorXd cov_ell = at_T.cov() * functional.ell;
    const double var_u = functional.ell.dot(cov_ell);
    const double cov_pu = cov_ell(phase_ord(PhaseIndex::P));

    const GaussianState conditioned =
        condition_on_linear(at_T, functional.ell, p_out);

    ConditionedResult result;
    result.p_out = p_out;
    result.p_c = conditioned.mean_of(PhaseIndex::P);
    result.var_pt = at_T.var_of(PhaseIndex::P);
    result.var_pc = clamp_variance(conditioned.var_of(PhaseIndex::P), result.var_pt);
    result.d = 1.0 - cov_pu / var_u;
    result.width_ratio = std::sqrt(result.var_pc) / setup.dP0;

    // p_c = p_out + d (P0 - p_out) must hold up to roundoff
    const double predicted = p_out + result.d * (setup.P0 - p_out);
    const double scale = std::max({1.0, std::abs(p_out), std::abs(setup.P0)});
    if (std::abs(predicted - result.p_c) > 1e-10 * scale)
        fail(ErrorKind::ContractViolation,
             "conditioned mean disagrees with the gradient identity");
    if (result.var_pc > result.var_pt * (1.0 + 1e-12))
        fail(ErrorKind::ContractViolation,
             "conditioning increased the momentum variance");
    return result;
}

double gradient_d(const ToFSetup& setup) {
    const ToFFunctional functional = tof_functional(setup);
    const GaussianState at_T = time_T_state(setup);
    const Eigen::VectorXd cov_ell = at_T.cov() * functional.ell;
    const double var_u = functional.ell.dot(cov_ell);
    if (var_u <= 0.0)
        fail(ErrorKind::DegenerateConditioning, "readout statistic has no variance");
    return 1.0 - cov_ell(phase_ord(PhaseIndex::P)) / var_u;
}

DistributionSamples distribution_samples(const ToFSetup& setup,
                                         std::optional<double> p_out,
                                         const std::vector<double>& grid) {
    setup.validate();
    if (grid.empty())
        fail(ErrorKind::InvalidParameter, "momentum grid is empty");
    for (std::size_t i = 0; i + 1 < grid.size(); ++i)
        if (!(grid[i] < grid[i + 1]))
            fail(ErrorKind::InvalidParameter,
                 "momentum grid must be strictly increasing");

    DistributionSamples out;
    out.grid = grid;
    out.initial.reserve(grid.size());
    out.traced.reserve(grid.size());

    const double var0 = setup.dP0 * setup.dP0;
    const double var_t = traced_variance(setup);
    for (double p : grid) {
        out.initial.push_back(gaussian_density(p, setup.P0, var0));
        out.traced.push_back(gaussian_density(p, setup.P0, var_t));
    }

    if (p_out) {
        const ConditionedResult c = condition_on_tof(setup, *p_out);
        std::vector<double> cond;
        cond.reserve(grid.size());
        for (double p : grid)
            cond.push_back(gaussian_density(p, c.p_c, c.var_pc));
        out.conditioned = std::move(cond);
    }
    return out;
}

double sample_readout(const ToFSetup& setup, std::mt19937_64& rng) {
    const ToFFunctional functional = tof_functional(setup);
    const GaussianState at_T = time_T_state(setup);
    const GaussianState pointer_pair =
        marginal(at_T, {PhaseIndex::x1, PhaseIndex::x2});
    const Eigen::VectorXd readout = sample(pointer_pair, rng);
    return (readout(1) - readout(0)) /
           (functional.kappa * (functional.t2 - functional.t1));
}

} // namespace tofsim
