#pragma once

#include <string>
#include <vector>

#include "tofsim/setup.hpp"
#include "tofsim/tof.hpp"

namespace tofsim {

// Setup fields addressable by name in sweeps and overrides. `dp` ties
// dp1 = dp2 to one value.
enum class SetupParam {
    kappa,
    t1,
    t2,
    T,
    mass_ratio_1,
    mass_ratio_2,
    P0,
    dP0,
    dp1,
    dp2,
    dp,
};

SetupParam setup_param_from_string(const std::string& name);
const char* setup_param_name(SetupParam param);
void set_setup_param(ToFSetup& setup, SetupParam param, double value);

enum class SweepQuantity { gradient_d, width_ratio };

SweepQuantity sweep_quantity_from_string(const std::string& name);
const char* sweep_quantity_name(SweepQuantity q);

struct SweepAxis {
    SetupParam param;
    std::vector<double> values;
};

struct SweepSpec {
    ToFSetup base;
    SweepAxis axis1;
    SweepAxis axis2;
    SweepQuantity quantity = SweepQuantity::width_ratio;
};

struct SweepRow {
    double axis1;
    double axis2;
    double value;
};

struct SweepResult {
    SweepSpec spec; // echo of the request
    std::vector<SweepRow> rows; // row-major in (axis1, axis2)
};

// Evaluates the quantity on the full axis1 x axis2 grid. Every grid point is
// validated up front; an invalid point aborts the sweep naming its
// coordinates. Cells are evaluated in parallel; the row order is canonical.
SweepResult run_sweep(const SweepSpec& spec);

// Bisection for the initial width dP0 at which the post-measurement width
// ratio crosses 1, with dp1 = dp2 = dp and the bracket [1e-2, 1e6]. Errors
// if ratio - 1 does not change sign across the bracket.
double find_critical_width(const ToFSetup& base, double dp);

struct OptimizeBound {
    SetupParam param; // one of kappa, t1, t2, T, mass_ratio_1/2, dp1, dp2
    double lo;
    double hi;
};

struct OptimizeEval {
    ToFSetup setup;
    double ratio;
};

struct OptimizeResult {
    ToFSetup best;
    double best_ratio;
    std::vector<OptimizeEval> trace; // coarse-grid evaluations in scan order
};

// Derivative-free minimization of the width ratio over the given box: full
// coarse grid (8 points per free parameter, infeasible combinations skipped)
// followed by coordinate-wise golden-section refinement until the relative
// improvement per cycle drops below 1e-6. Deterministic.
OptimizeResult optimize_width_ratio(const ToFSetup& base,
                                    const std::vector<OptimizeBound>& free_params);

} // namespace tofsim
