#include "tofsim/oracle.hpp"

#include <cmath>
#include <sstream>

#include <fftw3.h>

#include "tofsim/dynamics.hpp"

namespace tofsim {

namespace {

constexpr double kNormDriftTol = 1e-8;
constexpr double kAliasTol = 1e-8;
constexpr int kEdgeBins = 3;

using Complex = std::complex<double>;

fftw_complex* raw(std::vector<Complex>& v) {
    return reinterpret_cast<fftw_complex*>(v.data());
}

void fft_3d(std::vector<Complex>& amp, int n, int sign) {
    fftw_plan plan = fftw_plan_dft_3d(n, n, n, raw(amp), raw(amp), sign,
                                      FFTW_ESTIMATE);
    fftw_execute(plan);
    fftw_destroy_plan(plan);
    if (sign == FFTW_BACKWARD) {
        const double scale = 1.0 / (static_cast<double>(n) * n * n);
        for (Complex& a : amp) a *= scale;
    }
}

void fft_axis(std::vector<Complex>& amp, int n, int axis, int sign) {
    const long strides[3] = {static_cast<long>(n) * n, n, 1};
    fftw_iodim64 dim{n, strides[axis], strides[axis]};
    fftw_iodim64 howmany[2];
    int h = 0;
    for (int a = 0; a < 3; ++a)
        if (a != axis) howmany[h++] = fftw_iodim64{n, strides[a], strides[a]};
    fftw_plan plan = fftw_plan_guru64_dft(1, &dim, 2, howmany, raw(amp), raw(amp),
                                          sign, FFTW_ESTIMATE);
    fftw_execute(plan);
    fftw_destroy_plan(plan);
    if (sign == FFTW_BACKWARD) {
        const double scale = 1.0 / n;
        for (Complex& a : amp) a *= scale;
    }
}

double signed_bin(int index, int n) {
    return static_cast<double>(index < n / 2 ? index : index - n);
}

} // namespace

GridState::GridState(GridSpec spec, std::vector<Complex> amplitudes, double time)
    : spec_(spec), amp_(std::move(amplitudes)), time_(time) {
    const long n = spec_.n;
    if (static_cast<long>(amp_.size()) != n * n * n)
        fail(ErrorKind::InvalidParameter, "amplitude array size mismatch");
}

double GridState::half_width(int axis) const {
    switch (axis) {
        case 0: return spec_.half_width_X;
        case 1: return spec_.half_width_x1;
        case 2: return spec_.half_width_x2;
    }
    fail(ErrorKind::InvalidParameter, "axis must be 0, 1 or 2");
}

double GridState::step(int axis) const {
    return 2.0 * half_width(axis) / spec_.n;
}

double GridState::momentum_step(int axis) const {
    return 2.0 * M_PI / (spec_.n * step(axis));
}

double GridState::momentum_cutoff(int axis) const {
    return M_PI / step(axis);
}

double GridState::coordinate(int axis, int index) const {
    return -half_width(axis) + step(axis) * index;
}

double GridState::momentum(int axis, int index) const {
    return momentum_step(axis) * signed_bin(index, spec_.n);
}

double GridState::volume_element() const {
    return step(0) * step(1) * step(2);
}

double GridState::norm_squared() const {
    double sum = 0.0;
    for (const Complex& a : amp_) sum += std::norm(a);
    return sum * volume_element();
}

double GridState::spectral_edge_mass(int axis) const {
    std::vector<Complex> work = amp_;
    fft_axis(work, spec_.n, axis, FFTW_FORWARD);
    const int n = spec_.n;
    double total = 0.0, edge = 0.0;
    long idx = 0;
    for (int i0 = 0; i0 < n; ++i0) {
        for (int i1 = 0; i1 < n; ++i1) {
            for (int i2 = 0; i2 < n; ++i2, ++idx) {
                const double w = std::norm(work[idx]);
                total += w;
                const int bin = axis == 0 ? i0 : (axis == 1 ? i1 : i2);
                const double s = std::abs(signed_bin(bin, n));
                if (n / 2 - s < kEdgeBins) edge += w;
            }
        }
    }
    return total > 0.0 ? edge / total : 0.0;
}

namespace {

struct AxisLayout {
    double half_width;
    double dx;
    double dp;
    double cutoff;
};

AxisLayout layout_for(const GridSpec& spec, int axis) {
    const double hw = axis == 0 ? spec.half_width_X
                                : (axis == 1 ? spec.half_width_x1 : spec.half_width_x2);
    const double dx = 2.0 * hw / spec.n;
    return AxisLayout{hw, dx, 2.0 * M_PI / (spec.n * dx), M_PI / dx};
}

void require(bool ok, const std::string& bound) {
    if (!ok) fail(ErrorKind::Resolution, "grid bound violated: " + bound);
}

std::string axis_name(int axis) {
    return axis == 0 ? "X" : (axis == 1 ? "x1" : "x2");
}

void check_norm(const GridState& state, const char* where) {
    const double drift = std::abs(state.norm_squared() - 1.0);
    if (drift > kNormDriftTol) {
        std::ostringstream msg;
        msg << "norm drift " << drift << " after " << where;
        fail(ErrorKind::ContractViolation, msg.str());
    }
}

// Edge-mass accumulation over all three axes while the state sits in the
// full momentum representation.
void check_aliasing_in_momentum_rep(const std::vector<Complex>& amp, int n) {
    double total = 0.0;
    double edge[3] = {0.0, 0.0, 0.0};
    long idx = 0;
    for (int i0 = 0; i0 < n; ++i0) {
        const bool e0 = n / 2 - std::abs(signed_bin(i0, n)) < kEdgeBins;
        for (int i1 = 0; i1 < n; ++i1) {
            const bool e1 = n / 2 - std::abs(signed_bin(i1, n)) < kEdgeBins;
            for (int i2 = 0; i2 < n; ++i2, ++idx) {
                const double w = std::norm(amp[idx]);
                total += w;
                if (e0) edge[0] += w;
                if (e1) edge[1] += w;
                if (n / 2 - std::abs(signed_bin(i2, n)) < kEdgeBins) edge[2] += w;
            }
        }
    }
    for (int axis = 0; axis < 3; ++axis) {
        if (edge[axis] / total > kAliasTol) {
            std::ostringstream msg;
            msg << "spectral mass " << edge[axis] / total
                << " within " << kEdgeBins << " bins of the momentum edge on axis "
                << axis_name(axis);
            fail(ErrorKind::Aliasing, msg.str());
        }
    }
}

} // namespace

GridState init_grid(const ToFSetup& setup, const GridSpec& spec) {
    setup.validate();
    const int n = spec.n;
    if (n < 64 || (n & (n - 1)) != 0)
        fail(ErrorKind::Resolution, "grid bound violated: n must be a power of two >= 64");
    if (!(spec.half_width_X > 0.0) || !(spec.half_width_x1 > 0.0) ||
        !(spec.half_width_x2 > 0.0))
        fail(ErrorKind::Resolution, "grid bound violated: half widths must be positive");
    if (!(spec.dt > 0.0) || !std::isfinite(spec.dt))
        fail(ErrorKind::Resolution, "grid bound violated: dt must be positive");

    const GaussianState initial = make_initial_state(setup);
    const GaussianState at_T = propagate(setup, delta_schedule(setup));

    const PhaseIndex pos_of[3] = {PhaseIndex::X, PhaseIndex::x1, PhaseIndex::x2};
    const PhaseIndex mom_of[3] = {PhaseIndex::P, PhaseIndex::p1, PhaseIndex::p2};

    for (int axis = 0; axis < 3; ++axis) {
        const AxisLayout lay = layout_for(spec, axis);
        const std::string name = axis_name(axis);

        const double sig_x0 = std::sqrt(initial.var_of(pos_of[axis]));
        const double sig_p0 = std::sqrt(initial.var_of(mom_of[axis]));
        // at least 8 points across the +-4 sigma bulk, in both representations
        require(lay.dx <= sig_x0,
                "axis " + name + " needs dx <= initial position sigma (8 points per"
                " 8-sigma span); dx = " + std::to_string(lay.dx) +
                ", sigma = " + std::to_string(sig_x0));
        require(lay.dp <= sig_p0,
                "axis " + name + " needs dp <= initial momentum sigma (8 points per"
                " 8-sigma span); dp = " + std::to_string(lay.dp) +
                ", sigma = " + std::to_string(sig_p0));

        // extent: packet center plus 6 sigma must stay inside the box, at
        // t = 0 and at readout (spreads grow monotonically in between)
        for (const GaussianState* st : {&initial, &at_T}) {
            const double reach = std::abs(st->mean_of(pos_of[axis])) +
                                 6.0 * std::sqrt(st->var_of(pos_of[axis]));
            require(reach < lay.half_width,
                    "axis " + name + " position extent " + std::to_string(reach) +
                        " exceeds half width " + std::to_string(lay.half_width));
            const double p_reach = std::abs(st->mean_of(mom_of[axis])) +
                                   6.0 * std::sqrt(st->var_of(mom_of[axis]));
            require(p_reach < lay.cutoff - kEdgeBins * lay.dp,
                    "axis " + name + " momentum extent " + std::to_string(p_reach) +
                        " reaches the grid cutoff " + std::to_string(lay.cutoff));
        }
    }

    // declared stepping bound: the fastest kinetic phase advances by at most
    // pi per step, dt <= 2 pi / max_a(w_a p_cut_a^2)
    const double weights[3] = {1.0, setup.mass_ratio_1, setup.mass_ratio_2};
    double max_rate = 0.0;
    for (int axis = 0; axis < 3; ++axis) {
        const AxisLayout lay = layout_for(spec, axis);
        max_rate = std::max(max_rate, weights[axis] * lay.cutoff * lay.cutoff);
    }
    require(spec.dt <= 2.0 * M_PI / max_rate,
            "dt = " + std::to_string(spec.dt) + " exceeds the kinetic phase bound " +
                std::to_string(2.0 * M_PI / max_rate));

    // product of the three initial Gaussians; the particle axis carries the
    // plane-wave factor exp(i P0 X)
    const AxisLayout lx = layout_for(spec, 0);
    const AxisLayout l1 = layout_for(spec, 1);
    const AxisLayout l2 = layout_for(spec, 2);
    const double sigX = 1.0 / (2.0 * setup.dP0);
    const double sig1 = 1.0 / (2.0 * setup.dp1);
    const double sig2 = 1.0 / (2.0 * setup.dp2);

    const auto packet = [](double x, double sigma) {
        return std::pow(2.0 * M_PI * sigma * sigma, -0.25) *
               std::exp(-x * x / (4.0 * sigma * sigma));
    };

    std::vector<Complex> fX(n);
    std::vector<double> f1(n), f2(n);
    for (int j = 0; j < n; ++j) {
        const double x = -lx.half_width + lx.dx * j;
        fX[j] = packet(x, sigX) * std::polar(1.0, setup.P0 * x);
        f1[j] = packet(-l1.half_width + l1.dx * j, sig1);
        f2[j] = packet(-l2.half_width + l2.dx * j, sig2);
    }

    std::vector<Complex> amp(static_cast<std::size_t>(n) * n * n);
    std::size_t idx = 0;
    for (int i0 = 0; i0 < n; ++i0)
        for (int i1 = 0; i1 < n; ++i1) {
            const Complex pre = fX[i0] * f1[i1];
            for (int i2 = 0; i2 < n; ++i2, ++idx) amp[idx] = pre * f2[i2];
        }

    GridState state(spec, std::move(amp), 0.0);
    const double norm = state.norm_squared();
    if (std::abs(norm - 1.0) > 1e-10) {
        std::ostringstream msg;
        msg << "grid bound violated: initial norm " << norm
            << " deviates from 1 beyond 1e-10";
        fail(ErrorKind::Resolution, msg.str());
    }
    return state;
}

namespace {

// Spectral kinetic evolution over `tau`, stepped in chunks of at most dt.
// The state enters and leaves in position representation; the aliasing
// tripwire runs while the full momentum representation is available.
void free_segment(GridState& state, const ToFSetup& setup, double tau) {
    if (tau <= 0.0) return;
    const int n = state.n();
    auto& amp = state.amplitudes();
    fft_3d(amp, n, FFTW_FORWARD);

    const long steps = std::max(1L, static_cast<long>(std::ceil(tau / state.spec().dt)));
    const double chunk = tau / static_cast<double>(steps);

    const double w[3] = {1.0, setup.mass_ratio_1, setup.mass_ratio_2};
    std::vector<Complex> phase[3];
    for (int axis = 0; axis < 3; ++axis) {
        phase[axis].resize(n);
        for (int j = 0; j < n; ++j) {
            const double p = state.momentum(axis, j);
            phase[axis][j] = std::polar(1.0, -0.5 * w[axis] * p * p * chunk);
        }
    }

    for (long s = 0; s < steps; ++s) {
        std::size_t idx = 0;
        for (int i0 = 0; i0 < n; ++i0) {
            const Complex ph0 = phase[0][i0];
            for (int i1 = 0; i1 < n; ++i1) {
                const Complex ph01 = ph0 * phase[1][i1];
                for (int i2 = 0; i2 < n; ++i2, ++idx)
                    amp[idx] *= ph01 * phase[2][i2];
            }
        }
    }

    check_aliasing_in_momentum_rep(amp, n);
    fft_3d(amp, n, FFTW_BACKWARD);
    state.set_time(state.time() + tau);
    check_norm(state, "free segment");
}

// Exact kick exp(-i kappa X p_i) as a single phase in the mixed (X, p_i)
// representation; no time-step resolution is involved.
void kick_segment(GridState& state, int pointer, double kappa) {
    if (kappa == 0.0) return;
    const int n = state.n();
    const int axis = pointer == 1 ? 1 : 2;
    auto& amp = state.amplitudes();
    fft_axis(amp, n, axis, FFTW_FORWARD);

    std::vector<double> pvals(n);
    for (int j = 0; j < n; ++j) pvals[j] = state.momentum(axis, j);

    std::size_t idx = 0;
    for (int i0 = 0; i0 < n; ++i0) {
        const double x = state.coordinate(0, i0);
        if (axis == 1) {
            for (int i1 = 0; i1 < n; ++i1) {
                const Complex ph = std::polar(1.0, -kappa * x * pvals[i1]);
                for (int i2 = 0; i2 < n; ++i2, ++idx) amp[idx] *= ph;
            }
        } else {
            for (int i1 = 0; i1 < n; ++i1)
                for (int i2 = 0; i2 < n; ++i2, ++idx)
                    amp[idx] *= std::polar(1.0, -kappa * x * pvals[i2]);
        }
    }

    fft_axis(amp, n, axis, FFTW_BACKWARD);
    check_norm(state, "kick");
}

} // namespace

GridState propagate_grid(GridState state, const ToFSetup& setup) {
    return propagate_grid(std::move(state), setup, setup.kappa, setup.kappa);
}

GridState propagate_grid(GridState state, const ToFSetup& setup, double kappa1,
                         double kappa2) {
    setup.validate();
    if (state.time() != 0.0)
        fail(ErrorKind::InvalidParameter, "grid propagation must start at t = 0");

    free_segment(state, setup, setup.t1);
    kick_segment(state, 1, kappa1);
    free_segment(state, setup, setup.t2 - setup.t1);
    kick_segment(state, 2, kappa2);
    free_segment(state, setup, setup.T - setup.t2);
    return state;
}

ConditionedGridStats conditioned_stats_grid(const GridState& state,
                                            const ToFSetup& setup, double p_out) {
    setup.validate();
    if (!std::isfinite(p_out))
        fail(ErrorKind::InvalidParameter, "p_out must be finite");
    if (std::abs(state.time() - setup.T) > 1e-12 * std::max(1.0, setup.T))
        fail(ErrorKind::InvalidParameter, "grid state is not at readout time T");

    const int n = state.n();
    const double offset = setup.kappa * (setup.t2 - setup.t1) * p_out;
    const double lo1 = -state.half_width(1), hi1 = state.half_width(1);
    const double lo2 = -state.half_width(2), hi2 = state.half_width(2);
    // the substitution line x2 = offset + x1 must cross the grid interior
    if (std::max(lo1, lo2 - offset) >= std::min(hi1, hi2 - offset))
        fail(ErrorKind::OutOfSupport,
             "substitution line x2 = kappa (t2-t1) p_out + x1 misses the grid");

    std::vector<Complex> work = state.amplitudes();
    fft_axis(work, n, 0, FFTW_FORWARD); // particle axis to momentum

    const double dx1 = state.step(1);
    const double dx2 = state.step(2);
    std::vector<double> weight(n, 0.0); // unnormalized W(P) per momentum bin

    for (int i0 = 0; i0 < n; ++i0) {
        const Complex* slab = work.data() + static_cast<std::size_t>(i0) * n * n;
        double acc = 0.0;
        for (int i1 = 0; i1 < n; ++i1) {
            const double x2_star = offset + (lo1 + dx1 * i1);
            const double f = (x2_star - lo2) / dx2;
            const long j2 = static_cast<long>(std::floor(f));
            if (j2 < 0 || j2 + 1 >= n) continue;
            const double frac = f - static_cast<double>(j2);
            const Complex* row = slab + static_cast<std::size_t>(i1) * n;
            const double d0 = std::norm(row[j2]);
            const double d1 = std::norm(row[j2 + 1]);
            acc += (d0 * (1.0 - frac) + d1 * frac) * dx1;
        }
        weight[i0] = acc;
    }

    double total = 0.0, mean_acc = 0.0;
    for (int i0 = 0; i0 < n; ++i0) {
        total += weight[i0];
        mean_acc += weight[i0] * state.momentum(0, i0);
    }
    if (total <= 0.0)
        fail(ErrorKind::OutOfSupport, "conditioned density vanishes on the grid");
    const double mean = mean_acc / total;
    double var_acc = 0.0;
    for (int i0 = 0; i0 < n; ++i0) {
        const double dp = state.momentum(0, i0) - mean;
        var_acc += weight[i0] * dp * dp;
    }
    return ConditionedGridStats{mean, var_acc / total};
}

namespace {

std::vector<Complex> momentum_applied(const GridState& state, int axis) {
    std::vector<Complex> work = state.amplitudes();
    const int n = state.n();
    fft_axis(work, n, axis, FFTW_FORWARD);
    std::size_t idx = 0;
    for (int i0 = 0; i0 < n; ++i0) {
        for (int i1 = 0; i1 < n; ++i1) {
            for (int i2 = 0; i2 < n; ++i2, ++idx) {
                const int bin = axis == 0 ? i0 : (axis == 1 ? i1 : i2);
                work[idx] *= state.momentum(axis, bin);
            }
        }
    }
    fft_axis(work, n, axis, FFTW_BACKWARD);
    return work;
}

} // namespace

GridMoments grid_moments(const GridState& state) {
    const int n = state.n();
    const double dV = state.volume_element();
    const auto& psi = state.amplitudes();

    // phase-space order (X, P, x1, p1, x2, p2); position operators act by
    // coordinate multiplication, momentum operators spectrally
    const std::vector<Complex> phi_P = momentum_applied(state, 0);
    const std::vector<Complex> phi_p1 = momentum_applied(state, 1);
    const std::vector<Complex> phi_p2 = momentum_applied(state, 2);

    double pos_mean[3] = {0, 0, 0};
    double mom_mean[3] = {0, 0, 0};
    double pos_pos[3][3] = {};
    double pos_mom[3][3] = {};
    double mom_mom[3][3] = {};

    std::size_t idx = 0;
    for (int i0 = 0; i0 < n; ++i0) {
        const double x0 = state.coordinate(0, i0);
        for (int i1 = 0; i1 < n; ++i1) {
            const double x1 = state.coordinate(1, i1);
            for (int i2 = 0; i2 < n; ++i2, ++idx) {
                const double pos[3] = {x0, x1, state.coordinate(2, i2)};
                const double rho = std::norm(psi[idx]);
                const Complex conj_psi = std::conj(psi[idx]);
                const Complex phi[3] = {phi_P[idx], phi_p1[idx], phi_p2[idx]};

                for (int a = 0; a < 3; ++a) {
                    pos_mean[a] += rho * pos[a];
                    mom_mean[a] += (conj_psi * phi[a]).real();
                    for (int b = a; b < 3; ++b) {
                        pos_pos[a][b] += rho * pos[a] * pos[b];
                        mom_mom[a][b] += (std::conj(phi[a]) * phi[b]).real();
                    }
                    for (int b = 0; b < 3; ++b)
                        pos_mom[a][b] += pos[a] * (conj_psi * phi[b]).real();
                }
            }
        }
    }

    const double norm = state.norm_squared();
    const double scale = dV / norm;

    GridMoments out;
    out.cov.setZero();
    const int pos_slot[3] = {0, 2, 4}; // X, x1, x2
    const int mom_slot[3] = {1, 3, 5}; // P, p1, p2
    for (int a = 0; a < 3; ++a) {
        out.mean(pos_slot[a]) = pos_mean[a] * scale;
        out.mean(mom_slot[a]) = mom_mean[a] * scale;
    }
    const auto set_cov = [&out](int i, int j, double v) {
        out.cov(i, j) = v;
        out.cov(j, i) = v;
    };
    for (int a = 0; a < 3; ++a) {
        for (int b = a; b < 3; ++b) {
            set_cov(pos_slot[a], pos_slot[b],
                    pos_pos[a][b] * scale - out.mean(pos_slot[a]) * out.mean(pos_slot[b]));
            set_cov(mom_slot[a], mom_slot[b],
                    mom_mom[a][b] * scale - out.mean(mom_slot[a]) * out.mean(mom_slot[b]));
        }
        for (int b = 0; b < 3; ++b) {
            set_cov(pos_slot[a], mom_slot[b],
                    pos_mom[a][b] * scale - out.mean(pos_slot[a]) * out.mean(mom_slot[b]));
        }
    }
    return out;
}

MomentComparison compare_moments(const GridMoments& grid, const GaussianState& engine) {
    if (engine.dim() != kPhaseDim)
        fail(ErrorKind::InvalidParameter, "moment comparison needs the full state");

    MomentComparison cmp;
    for (int i = 0; i < kPhaseDim; ++i) {
        const double sigma = std::sqrt(engine.cov()(i, i));
        const double scale = std::max(std::abs(engine.mean()(i)), sigma);
        cmp.max_mean_err = std::max(
            cmp.max_mean_err, std::abs(grid.mean(i) - engine.mean()(i)) / scale);
    }
    for (int i = 0; i < kPhaseDim; ++i) {
        for (int j = 0; j < kPhaseDim; ++j) {
            const double scale =
                std::sqrt(engine.cov()(i, i) * engine.cov()(j, j));
            cmp.max_cov_err = std::max(
                cmp.max_cov_err, std::abs(grid.cov(i, j) - engine.cov()(i, j)) / scale);
        }
    }
    return cmp;
}

} // namespace tofsim
