#include "tofsim/sweep.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

namespace tofsim {

SetupParam setup_param_from_string(const std::string& name) {
    if (name == "kappa") return SetupParam::kappa;
    if (name == "t1") return SetupParam::t1;
    if (name == "t2") return SetupParam::t2;
    if (name == "T") return SetupParam::T;
    if (name == "mass_ratio_1") return SetupParam::mass_ratio_1;
    if (name == "mass_ratio_2") return SetupParam::mass_ratio_2;
    if (name == "P0") return SetupParam::P0;
    if (name == "dP0") return SetupParam::dP0;
    if (name == "dp1") return SetupParam::dp1;
    if (name == "dp2") return SetupParam::dp2;
    if (name == "dp") return SetupParam::dp;
    fail(ErrorKind::InvalidParameter, "unknown setup parameter '" + name + "'");
}

const char* setup_param_name(SetupParam param) {
    switch (param) {
        case SetupParam::kappa: return "kappa";
        case SetupParam::t1: return "t1";
        case SetupParam::t2: return "t2";
        case SetupParam::T: return "T";
        case SetupParam::mass_ratio_1: return "mass_ratio_1";
        case SetupParam::mass_ratio_2: return "mass_ratio_2";
        case SetupParam::P0: return "P0";
        case SetupParam::dP0: return "dP0";
        case SetupParam::dp1: return "dp1";
        case SetupParam::dp2: return "dp2";
        case SetupParam::dp: return "dp";
    }
    return "?";
}

void set_setup_param(ToFSetup& setup, SetupParam param, double value) {
    switch (param) {
        case SetupParam::kappa: setup.kappa = value; return;
        case SetupParam::t1: setup.t1 = value; return;
        case SetupParam::t2: setup.t2 = value; return;
        case SetupParam::T: setup.T = value; return;
        case SetupParam::mass_ratio_1: setup.mass_ratio_1 = value; return;
        case SetupParam::mass_ratio_2: setup.mass_ratio_2 = value; return;
        case SetupParam::P0: setup.P0 = value; return;
        case SetupParam::dP0: setup.dP0 = value; return;
        case SetupParam::dp1: setup.dp1 = value; return;
        case SetupParam::dp2: setup.dp2 = value; return;
        case SetupParam::dp:
            setup.dp1 = value;
            setup.dp2 = value;
            return;
    }
}

SweepQuantity sweep_quantity_from_string(const std::string& name) {
    if (name == "gradient_d") return SweepQuantity::gradient_d;
    if (name == "width_ratio") return SweepQuantity::width_ratio;
    fail(ErrorKind::InvalidParameter, "unknown sweep quantity '" + name + "'");
}

const char* sweep_quantity_name(SweepQuantity q) {
    return q == SweepQuantity::gradient_d ? "gradient_d" : "width_ratio";
}

namespace {

double evaluate_quantity(const ToFSetup& setup, SweepQuantity q) {
    if (q == SweepQuantity::gradient_d) return gradient_d(setup);
    // var_pc does not depend on the conditioning value; P0 is as good as any.
    return condition_on_tof(setup, setup.P0).width_ratio;
}

double width_ratio_at(const ToFSetup& base, double dP0) {
    ToFSetup setup = base;
    setup.dP0 = dP0;
    return condition_on_tof(setup, setup.P0).width_ratio;
}

void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body) {
    const std::size_t hw = std::max<std::size_t>(1, std::thread::hardware_concurrency());
    const std::size_t workers = std::min(hw, count);
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (std::size_t i = w; i < count; i += workers) body(i);
        });
    }
    for (auto& t : pool) t.join();
}

} // namespace

SweepResult run_sweep(const SweepSpec& spec) {
    spec.base.validate();
    if (spec.axis1.values.empty() || spec.axis2.values.empty())
        fail(ErrorKind::InvalidParameter, "sweep axes must be non-empty");

    const std::size_t n1 = spec.axis1.values.size();
    const std::size_t n2 = spec.axis2.values.size();

    // validate every grid point before evaluating anything
    for (std::size_t i = 0; i < n1; ++i) {
        for (std::size_t j = 0; j < n2; ++j) {
            ToFSetup cell = spec.base;
            set_setup_param(cell, spec.axis1.param, spec.axis1.values[i]);
            set_setup_param(cell, spec.axis2.param, spec.axis2.values[j]);
            try {
                cell.validate();
                if (spec.quantity == SweepQuantity::width_ratio ||
                    spec.quantity == SweepQuantity::gradient_d) {
                    if (cell.kappa == 0.0)
                        fail(ErrorKind::DegenerateFunctional, "kappa = 0");
                }
            } catch (const SimError& err) {
                std::ostringstream msg;
                msg << "invalid sweep point (" << setup_param_name(spec.axis1.param)
                    << " = " << spec.axis1.values[i] << ", "
                    << setup_param_name(spec.axis2.param) << " = "
                    << spec.axis2.values[j] << "): " << err.what();
                fail(ErrorKind::InvalidParameter, msg.str());
            }
        }
    }

    SweepResult result;
    result.spec = spec;
    result.rows.resize(n1 * n2);

    std::exception_ptr first_error;
    std::mutex error_mutex;
    parallel_for(n1 * n2, [&](std::size_t cell) {
        const std::size_t i = cell / n2;
        const std::size_t j = cell % n2;
        try {
            ToFSetup setup = spec.base;
            set_setup_param(setup, spec.axis1.param, spec.axis1.values[i]);
            set_setup_param(setup, spec.axis2.param, spec.axis2.values[j]);
            result.rows[cell] = SweepRow{spec.axis1.values[i], spec.axis2.values[j],
                                         evaluate_quantity(setup, spec.quantity)};
        } catch (...) {
            std::lock_guard<std::mutex> lock(error_mutex);
            if (!first_error) first_error = std::current_exception();
        }
    });
    if (first_error) std::rethrow_exception(first_error);

    for (const SweepRow& row : result.rows)
        if (!std::isfinite(row.value))
            fail(ErrorKind::ContractViolation, "sweep produced a non-finite value");
    return result;
}

double find_critical_width(const ToFSetup& base, double dp) {
    if (!(dp > 0.0))
        fail(ErrorKind::InvalidParameter, "pointer width dp must be positive");
    ToFSetup setup = base;
    setup.dp1 = dp;
    setup.dp2 = dp;
    setup.validate();

    double lo = 1e-2, hi = 1e6;
    const auto excess = [&](double w) { return width_ratio_at(setup, w) - 1.0; };
    double f_lo = excess(lo);
    double f_hi = excess(hi);
    if (f_lo == 0.0) return lo;
    if (f_hi == 0.0) return hi;
    if ((f_lo > 0.0) == (f_hi > 0.0)) {
        std::ostringstream msg;
        msg << "width ratio - 1 does not change sign over [" << lo << ", " << hi
            << "] (endpoints " << f_lo << ", " << f_hi << ")";
        fail(ErrorKind::NoCrossing, msg.str());
    }

    while ((hi - lo) > 1e-6 * (0.5 * (hi + lo))) {
        const double mid = 0.5 * (lo + hi);
        const double f_mid = excess(mid);
        if (f_mid == 0.0) return mid;
        if ((f_mid > 0.0) == (f_lo > 0.0)) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

namespace {

constexpr double kGolden = 0.6180339887498949; // (sqrt(5) - 1) / 2

bool allowed_free_param(SetupParam p) {
    switch (p) {
        case SetupParam::kappa:
        case SetupParam::t1:
        case SetupParam::t2:
        case SetupParam::T:
        case SetupParam::mass_ratio_1:
        case SetupParam::mass_ratio_2:
        case SetupParam::dp1:
        case SetupParam::dp2:
            return true;
        default:
            return false;
    }
}

std::optional<double> try_ratio(const ToFSetup& setup) {
    try {
        setup.validate();
        if (setup.kappa == 0.0) return std::nullopt;
        return condition_on_tof(setup, setup.P0).width_ratio;
    } catch (const SimError&) {
        return std::nullopt;
    }
}

// Feasible interval for one coordinate given the rest of the setup; empty
// when the ordering constraints leave no room inside the bounds.
std::optional<std::pair<double, double>> feasible_interval(const ToFSetup& setup,
                                                           const OptimizeBound& bound) {
    double lo = bound.lo, hi = bound.hi;
    const double margin = 1e-9 * std::max(1.0, std::abs(setup.T));
    switch (bound.param) {
        case SetupParam::t1:
            lo = std::max(lo, margin);
            hi = std::min(hi, setup.t2 - margin);
            break;
        case SetupParam::t2:
            lo = std::max(lo, setup.t1 + margin);
            hi = std::min(hi, setup.T - margin);
            break;
        case SetupParam::T:
            lo = std::max(lo, setup.t2 + margin);
            break;
        case SetupParam::kappa:
            break;
        default:
            lo = std::max(lo, margin);
            break;
    }
    if (!(lo < hi)) return std::nullopt;
    return std::make_pair(lo, hi);
}

} // namespace

OptimizeResult optimize_width_ratio(const ToFSetup& base,
                                    const std::vector<OptimizeBound>& free_params) {
    base.validate();
    if (base.kappa == 0.0)
        fail(ErrorKind::DegenerateFunctional, "kappa = 0 admits no width ratio");

    for (std::size_t i = 0; i < free_params.size(); ++i) {
        const OptimizeBound& b = free_params[i];
        if (!allowed_free_param(b.param))
            fail(ErrorKind::InvalidParameter,
                 std::string("parameter '") + setup_param_name(b.param) +
                     "' is not an apparatus parameter");
        if (!(b.lo < b.hi) || !std::isfinite(b.lo) || !std::isfinite(b.hi))
            fail(ErrorKind::InvalidParameter,
                 std::string("bounds for '") + setup_param_name(b.param) +
                     "' must satisfy lo < hi");
        for (std::size_t j = i + 1; j < free_params.size(); ++j)
            if (free_params[j].param == b.param)
                fail(ErrorKind::InvalidParameter,
                     std::string("duplicate free parameter '") +
                         setup_param_name(b.param) + "'");
    }

    OptimizeResult result;
    if (free_params.empty()) {
        result.best = base;
        result.best_ratio = condition_on_tof(base, base.P0).width_ratio;
        return result;
    }

    // full factorial coarse grid, 8 points per free parameter
    constexpr int kGridPoints = 8;
    const std::size_t k = free_params.size();
    std::size_t cells = 1;
    for (std::size_t i = 0; i < k; ++i) cells *= kGridPoints;

    ToFSetup best = base;
    double best_ratio = std::numeric_limits<double>::infinity();
    bool any_feasible = false;

    for (std::size_t cell = 0; cell < cells; ++cell) {
        ToFSetup candidate = base;
        std::size_t rem = cell;
        for (std::size_t i = 0; i < k; ++i) {
            const int gi = static_cast<int>(rem % kGridPoints);
            rem /= kGridPoints;
            const OptimizeBound& b = free_params[i];
            const double v = b.lo + (b.hi - b.lo) * (gi + 0.5) / kGridPoints;
            set_setup_param(candidate, b.param, v);
        }
        const std::optional<double> ratio = try_ratio(candidate);
        if (!ratio) continue;
        any_feasible = true;
        result.trace.push_back(OptimizeEval{candidate, *ratio});
        if (*ratio < best_ratio) {
            best_ratio = *ratio;
            best = candidate;
        }
    }
    if (!any_feasible)
        fail(ErrorKind::Infeasible,
             "no feasible point in the requested optimization box");

    // coordinate-wise golden-section refinement
    constexpr int kMaxCycles = 60;
    for (int cycle = 0; cycle < kMaxCycles; ++cycle) {
        const double cycle_start = best_ratio;
        for (const OptimizeBound& bound : free_params) {
            const auto interval = feasible_interval(best, bound);
            if (!interval) continue;
            double a = interval->first, b = interval->second;

            const auto eval_at = [&](double v) {
                ToFSetup s = best;
                set_setup_param(s, bound.param, v);
                const std::optional<double> r = try_ratio(s);
                return r.value_or(std::numeric_limits<double>::infinity());
            };

            double c = b - (b - a) * kGolden;
            double d = a + (b - a) * kGolden;
            double fc = eval_at(c);
            double fd = eval_at(d);
            const double span = b - a;
            while ((b - a) > 1e-10 * span + 1e-14) {
                if (fc < fd) {
                    b = d; d = c; fd = fc;
                    c = b - (b - a) * kGolden;
                    fc = eval_at(c);
                } else {
                    a = c; c = d; fc = fd;
                    d = a + (b - a) * kGolden;
                    fd = eval_at(d);
                }
            }
            const double candidate_v = fc < fd ? c : d;
            const double candidate_f = std::min(fc, fd);
            // accept only improvements so the result never regresses below
            // the best coarse-grid point
            if (candidate_f < best_ratio) {
                set_setup_param(best, bound.param, candidate_v);
                best_ratio = candidate_f;
            }
        }
        const double improvement =
            (cycle_start - best_ratio) / std::max(cycle_start, 1e-300);
        if (improvement < 1e-6) break;
    }

    result.best = best;
    result.best_ratio = best_ratio;
    return result;
}

} // namespace tofsim
