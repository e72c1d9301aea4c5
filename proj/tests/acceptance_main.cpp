// Acceptance suite: runs the ten release criteria end to end and prints one
// pass/fail line per criterion. Exit code = number of failed criteria.

#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "tofsim/dynamics.hpp"
#include "tofsim/oracle.hpp"
#include "tofsim/sweep.hpp"
#include "tofsim/tof.hpp"

using namespace tofsim;

namespace {

ToFSetup apparatus() {
    ToFSetup s;
    s.kappa = 1.0;
    s.t1 = 0.5;
    s.t2 = 1.5;
    s.T = 3.0;
    s.mass_ratio_1 = 0.1;
    s.mass_ratio_2 = 0.1;
    s.P0 = 100.0;
    s.dP0 = 150.0;
    s.dp1 = 30.0;
    s.dp2 = 30.0;
    return s;
}

ToFSetup desk_setup() {
    ToFSetup s;
    s.kappa = 1.0;
    s.t1 = 0.25;
    s.t2 = 0.75;
    s.T = 1.0;
    s.mass_ratio_1 = 0.1;
    s.mass_ratio_2 = 0.1;
    s.P0 = 2.0;
    s.dP0 = 1.0;
    s.dp1 = 0.5;
    s.dp2 = 0.5;
    return s;
}

class Harness {
  public:
    void criterion(int number, const std::string& title,
                   const std::function<std::string()>& body) {
        std::string detail;
        bool ok = true;
        try {
            detail = body();
        } catch (const std::exception& err) {
            ok = false;
            detail = std::string("exception: ") + err.what();
        }
        std::printf("%s  criterion %2d: %s (%s)\n", ok ? "PASS" : "FAIL", number,
                    title.c_str(), detail.c_str());
        std::fflush(stdout);
        if (!ok) ++failures_;
    }

    // throws to mark the criterion failed
    static void require(bool ok, const std::string& what) {
        if (!ok) throw std::runtime_error("requirement failed: " + what);
    }

    int failures() const { return failures_; }

  private:
    int failures_ = 0;
};

std::string fmt(const char* pattern, double a, double b = 0.0) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), pattern, a, b);
    return buf;
}

ToFSetup random_setup(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    ToFSetup s;
    s.kappa = 0.1 + 1.9 * u(rng);
    s.t1 = 0.05 + 1.95 * u(rng);
    s.t2 = s.t1 + 0.05 + 1.95 * u(rng);
    s.T = s.t2 + 0.05 + 1.95 * u(rng);
    s.mass_ratio_1 = 0.02 + 5.0 * u(rng);
    s.mass_ratio_2 = 0.02 + 5.0 * u(rng);
    s.P0 = -50.0 + 100.0 * u(rng);
    s.dP0 = 0.1 + 20.0 * u(rng);
    s.dp1 = 0.1 + 10.0 * u(rng);
    s.dp2 = 0.1 + 10.0 * u(rng);
    return s;
}

} // namespace

int main() {
    Harness h;

    h.criterion(1, "operational mean ToF value equals kappa P0", [] {
        const double got = tof_expectation(apparatus());
        const double err = std::abs(got - 100.0);
        Harness::require(err <= 1e-10, fmt("|err| = %.3g", err));
        return fmt("<ToF> = %.17g, |err| = %.3g <= 1e-10", got, err);
    });

    h.criterion(2, "propagated momentum variance picks up the pointer noise", [] {
        const double got = traced_variance(apparatus());
        const double rel = std::abs(got - 24300.0) / 24300.0;
        Harness::require(rel <= 1e-8, fmt("rel err = %.3g", rel));
        return fmt("var = %.17g, rel err = %.3g <= 1e-8", got, rel);
    });

    h.criterion(3, "closed-form coefficients equal the composed kick chain", [] {
        std::mt19937_64 rng(12345);
        double worst_entry = 0.0, worst_cross = 0.0;
        for (int i = 0; i < 100; ++i) {
            const ToFSetup s = random_setup(rng);
            const SymplecticMap composed = delta_symplectic_composed(s);
            const SymplecticMap direct = symplectic_from_coefficients(
                delta_coefficients(delta_schedule(s), s.T), s);
            worst_entry = std::max(
                worst_entry,
                (composed.matrix() - direct.matrix()).cwiseAbs().maxCoeff());
            const double cross = composed.matrix()(phase_ord(PhaseIndex::x2),
                                                   phase_ord(PhaseIndex::p1));
            const double expect = -s.kappa * s.kappa * (s.t2 - s.t1);
            worst_cross = std::max(worst_cross, std::abs(cross - expect));
        }
        Harness::require(worst_entry <= 1e-12, fmt("entry err = %.3g", worst_entry));
        Harness::require(worst_cross <= 1e-12, fmt("cross err = %.3g", worst_cross));
        return fmt("100 setups, max entry err = %.3g, cross-term err = %.3g",
                   worst_entry, worst_cross);
    });

    h.criterion(4, "smooth pulses converge to the delta evolution map", [] {
        const ToFSetup s = apparatus();
        const SymplecticMap ref = delta_symplectic_composed(s);
        double prev = 1e300, last = 0.0;
        std::ostringstream os;
        os << "errors";
        for (double sigma : {1e-1, 1e-2, 1e-3}) {
            const SymplecticMap smooth =
                schedule_map(s, gaussian_pulse_schedule(s, sigma));
            last = (smooth.matrix() - ref.matrix()).cwiseAbs().maxCoeff();
            Harness::require(last < prev, "error not monotone decreasing");
            prev = last;
            os << " " << fmt("%.3g", last);
        }
        Harness::require(last < 1e-3, fmt("err(sigma=1e-3) = %.3g", last));
        os << ", final < 1e-3";
        return os.str();
    });

    h.criterion(5, "conditioned width is exact and readout independent", [] {
        const ToFSetup s = apparatus();
        const double spread = 2.0 * std::sqrt(traced_variance(s));
        const double ref = condition_on_tof(s, s.P0).var_pc;
        for (double p_out : {s.P0 - spread, s.P0, s.P0 + spread}) {
            const double var = condition_on_tof(s, p_out).var_pc;
            Harness::require(std::abs(var - ref) <= 1e-12,
                             fmt("var_pc moved by %.3g across p_out", var - ref));
        }
        for (double p0 : {0.0, 100.0, 1e4}) {
            ToFSetup shifted = s;
            shifted.P0 = p0;
            const double var = condition_on_tof(shifted, shifted.P0 + spread).var_pc;
            Harness::require(std::abs(var - ref) <= 1e-12,
                             fmt("var_pc moved by %.3g across P0", var - ref));
            const double p_c = condition_on_tof(shifted, p0).p_c;
            Harness::require(p_c == p0, fmt("p_c = %.17g != P0 = %.17g", p_c, p0));
        }
        return fmt("var_pc = %.17g stable to 1e-12; p_c = P0 exactly", ref);
    });

    h.criterion(6, "gradient vanishes for broad packets and is affine", [] {
        double prev = 2.0, at_widest = 0.0;
        for (double w : {1e2, 1e3, 1e4, 1e6}) {
            ToFSetup s = apparatus();
            s.dP0 = w;
            const double d = gradient_d(s);
            Harness::require(d < prev, fmt("d(%g) not decreasing", w));
            prev = d;
            at_widest = d;
        }
        Harness::require(at_widest < 1e-4, fmt("d(1e6) = %.3g", at_widest));

        const ToFSetup s = apparatus();
        const double d = gradient_d(s);
        const double lo = condition_on_tof(s, s.P0 - 1.0).p_c;
        const double mid = condition_on_tof(s, s.P0).p_c;
        const double hi = condition_on_tof(s, s.P0 + 1.0).p_c;
        const double d_rec = 1.0 - 0.5 * (hi - lo);
        Harness::require(std::abs(mid - 0.5 * (lo + hi)) <= 1e-10,
                         "p_c(p_out) is not affine");
        Harness::require(std::abs(d_rec - d) <= 1e-9,
                         fmt("recovered d differs by %.3g", d_rec - d));
        return fmt("d(1e6) = %.3g < 1e-4, recovery err = %.3g", at_widest,
                   std::abs(d_rec - d));
    });

    h.criterion(7, "a single readout narrows the momentum distribution", [] {
        const ToFSetup s = apparatus();
        const double ratio = condition_on_tof(s, s.P0).width_ratio;
        Harness::require(ratio < 1.0, fmt("ratio = %.6g", ratio));
        ToFSetup wide = s;
        wide.dP0 = 1e6;
        const double asymptotic = condition_on_tof(wide, wide.P0).width_ratio;
        Harness::require(asymptotic < 1e-2, fmt("ratio(1e6) = %.3g", asymptotic));
        return fmt("ratio = %.6g < 1, ratio(dP0=1e6) = %.3g < 1e-2", ratio,
                   asymptotic);
    });

    h.criterion(8, "critical initial width exists and brackets the crossing", [] {
        const ToFSetup base = apparatus();
        std::ostringstream os;
        os << "crossings";
        double crossing30 = 0.0;
        for (double dp : {10.0, 30.0, 60.0}) {
            const double crossing = find_critical_width(base, dp);
            Harness::require(std::isfinite(crossing), "crossing not finite");
            ToFSetup probe = base;
            probe.dp1 = probe.dp2 = dp;
            probe.dP0 = crossing * (1.0 - 1e-4);
            const double below = condition_on_tof(probe, probe.P0).width_ratio - 1.0;
            probe.dP0 = crossing * (1.0 + 1e-4);
            const double above = condition_on_tof(probe, probe.P0).width_ratio - 1.0;
            Harness::require(below * above < 0.0,
                             fmt("no sign change at dp = %g", dp));
            if (dp == 30.0) crossing30 = crossing;
            os << " " << fmt("%.6g", crossing);
        }
        Harness::require(crossing30 < 150.0,
                         fmt("crossing(dp=30) = %.6g !< 150", crossing30));
        return os.str();
    });

    h.criterion(9, "grid oracle reproduces the Gaussian engine at desk scale", [] {
        const ToFSetup s = desk_setup();
        GridSpec spec;
        spec.n = 128;
        spec.half_width_X = 9.5;
        spec.half_width_x1 = 10.0;
        spec.half_width_x2 = 11.0;
        spec.dt = 0.01;

        GridState state = propagate_grid(init_grid(s, spec), s);
        const double drift = std::abs(state.norm_squared() - 1.0);
        Harness::require(drift < 1e-8, fmt("norm drift = %.3g", drift));

        const GaussianState engine = propagate(s, delta_schedule(s));
        const MomentComparison cmp = compare_moments(grid_moments(state), engine);
        Harness::require(cmp.max_mean_err < 0.01,
                         fmt("mean err = %.3g", cmp.max_mean_err));
        Harness::require(cmp.max_cov_err < 0.01,
                         fmt("cov err = %.3g", cmp.max_cov_err));

        const ConditionedGridStats grid_stats =
            conditioned_stats_grid(state, s, s.P0);
        const ConditionedResult engine_stats = condition_on_tof(s, s.P0);
        const double mean_err =
            std::abs(grid_stats.mean - engine_stats.p_c) / std::abs(engine_stats.p_c);
        const double var_err = std::abs(grid_stats.variance - engine_stats.var_pc) /
                               engine_stats.var_pc;
        Harness::require(mean_err < 0.01, fmt("cond mean err = %.3g", mean_err));
        Harness::require(var_err < 0.01, fmt("cond var err = %.3g", var_err));
        return fmt("moment errs %.3g / %.3g", cmp.max_mean_err, cmp.max_cov_err) +
               fmt(", conditioned errs %.3g / %.3g, all < 1%%", mean_err, var_err);
    });

    h.criterion(10, "simulated readouts average to the initial momentum", [] {
        const ToFSetup s = apparatus();
        std::mt19937_64 rng(424242);
        const int n = 100000;
        double sum = 0.0, sq = 0.0;
        for (int i = 0; i < n; ++i) {
            const double p = sample_readout(s, rng);
            sum += p;
            sq += p * p;
        }
        const double mean = sum / n;
        const double var = sq / n - mean * mean;
        const double se = std::sqrt(var / n);
        const double z = std::abs(mean - s.P0) / se;
        Harness::require(z < 4.0, fmt("|z| = %.3g", z));
        return fmt("sample mean = %.6g, |z| = %.3g < 4", mean, z);
    });

    if (h.failures() == 0) {
        std::printf("all criteria passed\n");
    } else {
        std::printf("%d criterion(s) failed\n", h.failures());
    }
    return h.failures();
}
