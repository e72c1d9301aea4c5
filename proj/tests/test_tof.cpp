#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "analytic_reference.hpp"
#include "tofsim/tof.hpp"

using namespace tofsim;

namespace {

ToFSetup reference_setup() {
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

} // namespace

TEST_CASE("functional entries and degenerate coupling") {
    const ToFSetup s = reference_setup();
    const ToFFunctional f = tof_functional(s);
    CHECK(f.ell(phase_ord(PhaseIndex::x1)) == -1.0);
    CHECK(f.ell(phase_ord(PhaseIndex::x2)) == 1.0);
    CHECK(f.ell(phase_ord(PhaseIndex::X)) == 0.0);
    CHECK(f.ell(phase_ord(PhaseIndex::P)) == 0.0);

    // applied to the evolved mean the functional recovers P0
    const GaussianState at_T = propagate(s, delta_schedule(s));
    CHECK(f.ell.dot(at_T.mean()) == doctest::Approx(100.0).epsilon(1e-14));

    ToFSetup off = s;
    off.kappa = 0.0;
    try {
        tof_functional(off);
        FAIL("expected degenerate-functional error");
    } catch (const SimError& err) {
        CHECK(err.kind() == ErrorKind::DegenerateFunctional);
    }
}

TEST_CASE("tof expectation recovers kappa P0 operationally") {
    CHECK(tof_expectation(reference_setup()) == doctest::Approx(100.0).epsilon(1e-14));

    ToFSetup zero_p = reference_setup();
    zero_p.P0 = 0.0;
    CHECK(tof_expectation(zero_p) == doctest::Approx(0.0));

    ToFSetup scaled = reference_setup();
    scaled.kappa = 2.0;
    scaled.P0 = 5.0;
    CHECK(tof_expectation(scaled) == doctest::Approx(10.0).epsilon(1e-13));
}

TEST_CASE("traced variance closed form") {
    CHECK(traced_variance(reference_setup()) == doctest::Approx(24300.0).epsilon(1e-14));

    ToFSetup off = reference_setup();
    off.kappa = 0.0;
    CHECK(traced_variance(off) == doctest::Approx(22500.0).epsilon(1e-14));

    // continuity: dp -> 0+ approaches the bare width
    ToFSetup tiny = reference_setup();
    tiny.dp1 = tiny.dp2 = 1e-6;
    CHECK(traced_variance(tiny) == doctest::Approx(22500.0).epsilon(1e-10));
}

TEST_CASE("conditioning on p_out = P0 returns P0 exactly") {
    const ToFSetup s = reference_setup();
    const ConditionedResult r = condition_on_tof(s, s.P0);
    CHECK(r.p_c == 100.0);
    CHECK(r.var_pc < r.var_pt);
    CHECK(r.width_ratio < 1.0);
}

TEST_CASE("conditioned variance matches the hand-derived closed form") {
    const ToFSetup s = reference_setup();
    const ConditionedResult r = condition_on_tof(s, 40.0);
    const double expected = testref::var_pc_ref(s);
    CHECK(r.var_pc == doctest::Approx(expected).epsilon(1e-12));
    // anchor value, derived once from the closed forms above
    CHECK(r.var_pc == doctest::Approx(1581.5539217226).epsilon(1e-10));
    CHECK(r.var_pc < s.dP0 * s.dP0);
}

TEST_CASE("conditioned variance is independent of p_out and P0") {
    const ToFSetup s = reference_setup();
    const ConditionedResult a = condition_on_tof(s, s.P0 - 300.0);
    const ConditionedResult b = condition_on_tof(s, s.P0);
    const ConditionedResult c = condition_on_tof(s, s.P0 + 300.0);
    CHECK(a.var_pc == b.var_pc);
    CHECK(b.var_pc == c.var_pc);

    ToFSetup shifted = s;
    shifted.P0 = -4321.0;
    CHECK(condition_on_tof(shifted, 10.0).var_pc == b.var_pc);
}

TEST_CASE("conditioned mean is affine in p_out") {
    const ToFSetup s = reference_setup();
    const double d = gradient_d(s);
    const ConditionedResult lo = condition_on_tof(s, s.P0 - 40.0);
    const ConditionedResult mid = condition_on_tof(s, s.P0);
    const ConditionedResult hi = condition_on_tof(s, s.P0 + 40.0);

    // three-point collinearity
    CHECK(std::abs(mid.p_c - 0.5 * (lo.p_c + hi.p_c)) <= 1e-10);
    // slope recovers 1 - d
    const double slope = (hi.p_c - lo.p_c) / 80.0;
    CHECK(std::abs((1.0 - slope) - d) <= 1e-9);
}

TEST_CASE("gradient agrees with the independent closed form") {
    const ToFSetup s = reference_setup();
    CHECK(gradient_d(s) == doctest::Approx(testref::gradient_d_ref(s)).epsilon(1e-12));

    // broad initial packets make the deviation disappear
    ToFSetup wide = s;
    wide.dP0 = 1e6;
    CHECK(gradient_d(wide) < 1e-4);

    // d decreases towards zero along increasing dP0
    double prev = 2.0;
    for (double w : {1e2, 1e3, 1e4, 1e6}) {
        ToFSetup probe = s;
        probe.dP0 = w;
        const double d = gradient_d(probe);
        CHECK(d < prev);
        CHECK(d > 0.0);
        prev = d;
    }
}

TEST_CASE("vanishing coupling pushes the gradient to one") {
    const double d2 = gradient_d([] {
        ToFSetup s = reference_setup();
        s.kappa = 1e-2;
        return s;
    }());
    const double d3 = gradient_d([] {
        ToFSetup s = reference_setup();
        s.kappa = 1e-3;
        return s;
    }());
    CHECK(d3 > d2);
    CHECK(1.0 - d3 < 1e-3);
}

TEST_CASE("gradient identity holds across p_out") {
    const ToFSetup s = reference_setup();
    const double d = gradient_d(s);
    for (double p_out : {-120.0, 0.0, 99.0, 350.0}) {
        const ConditionedResult r = condition_on_tof(s, p_out);
        CHECK(std::abs(r.p_c - (p_out + d * (s.P0 - p_out))) <= 1e-10);
    }
}

TEST_CASE("distribution samples are normalized Gaussian tables") {
    const ToFSetup s = reference_setup();

    const auto make_grid = [](double center, double sigma) {
        std::vector<double> grid;
        const int n = 513;
        for (int i = 0; i < n; ++i)
            grid.push_back(center - 8.0 * sigma +
                           16.0 * sigma * static_cast<double>(i) / (n - 1));
        return grid;
    };

    // initial density: peak value at P0 is 1 / sqrt(2 pi dP0^2)
    const auto initial_grid = make_grid(s.P0, s.dP0);
    const DistributionSamples with_cond =
        distribution_samples(s, 160.0, initial_grid);
    const double peak = 1.0 / std::sqrt(2.0 * M_PI * s.dP0 * s.dP0);
    CHECK(with_cond.initial[256] == doctest::Approx(peak).epsilon(1e-12));

    const auto trapezoid = [](const std::vector<double>& grid,
                              const std::vector<double>& f) {
        double acc = 0.0;
        for (std::size_t i = 0; i + 1 < grid.size(); ++i)
            acc += 0.5 * (f[i] + f[i + 1]) * (grid[i + 1] - grid[i]);
        return acc;
    };
    CHECK(std::abs(trapezoid(initial_grid, with_cond.initial) - 1.0) < 1e-6);

    const auto traced_grid = make_grid(s.P0, std::sqrt(traced_variance(s)));
    const DistributionSamples traced = distribution_samples(s, {}, traced_grid);
    CHECK(std::abs(trapezoid(traced_grid, traced.traced) - 1.0) < 1e-6);
    CHECK_FALSE(traced.conditioned.has_value());

    const ConditionedResult r = condition_on_tof(s, 160.0);
    const auto cond_grid = make_grid(r.p_c, std::sqrt(r.var_pc));
    const DistributionSamples cond = distribution_samples(s, 160.0, cond_grid);
    REQUIRE(cond.conditioned.has_value());
    CHECK(std::abs(trapezoid(cond_grid, *cond.conditioned) - 1.0) < 1e-6);

    // conditioned density peaks at p_c, not at p_out, when d != 0
    std::size_t argmax = 0;
    for (std::size_t i = 1; i < cond.conditioned->size(); ++i)
        if ((*cond.conditioned)[i] > (*cond.conditioned)[argmax]) argmax = i;
    CHECK(std::abs(cond_grid[argmax] - r.p_c) <
          std::abs(cond_grid[argmax] - 160.0));
}

TEST_CASE("distribution grid validation") {
    const ToFSetup s = reference_setup();
    CHECK_THROWS_AS(distribution_samples(s, {}, {}), SimError);
    CHECK_THROWS_AS(distribution_samples(s, {}, {1.0, 1.0}), SimError);
    CHECK_THROWS_AS(distribution_samples(s, {}, {2.0, 1.0}), SimError);
}

TEST_CASE("without coupling the traced density is the initial one") {
    ToFSetup s = reference_setup();
    s.kappa = 0.0;
    const DistributionSamples tables =
        distribution_samples(s, {}, {-200.0, 0.0, 100.0, 250.0, 600.0});
    for (std::size_t i = 0; i < tables.grid.size(); ++i)
        CHECK(tables.traced[i] == doctest::Approx(tables.initial[i]).epsilon(1e-14));
}

TEST_CASE("readout sampling is statistically consistent") {
    const ToFSetup s = reference_setup();
    std::mt19937_64 rng(7071);
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
    CHECK(std::abs(mean - s.P0) < 4.0 * se);

    // the readout spread matches Var(u) from the hand-derived closed form
    const double expected = testref::delta_second_moments(s).var_u;
    CHECK(var == doctest::Approx(expected).epsilon(0.05));
}
