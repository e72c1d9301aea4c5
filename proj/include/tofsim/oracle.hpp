#pragma once

#include <array>
#include <complex>
#include <vector>

#include "tofsim/phasespace.hpp"
#include "tofsim/setup.hpp"

namespace tofsim {

// Grid layout for the brute-force wavefunction propagation. The same point
// count n is used on all three axes (X, x1, x2); the half extents may differ.
struct GridSpec {
    int n = 128;               // points per axis, power of two, >= 64
    double half_width_X = 12.0;
    double half_width_x1 = 12.0;
    double half_width_x2 = 12.0;
    double dt = 0.01;          // stepping granularity inside free segments
};

// Complex amplitudes over the (X, x1, x2) position grid, row-major with x2
// contiguous. Tracks the evolution time reached so far.
class GridState {
  public:
    GridState(GridSpec spec, std::vector<std::complex<double>> amplitudes,
              double time);

    const GridSpec& spec() const { return spec_; }
    int n() const { return spec_.n; }
    double time() const { return time_; }
    void set_time(double t) { time_ = t; }

    std::vector<std::complex<double>>& amplitudes() { return amp_; }
    const std::vector<std::complex<double>>& amplitudes() const { return amp_; }

    // axis: 0 = X, 1 = x1, 2 = x2
    double half_width(int axis) const;
    double step(int axis) const;                 // position spacing
    double momentum_step(int axis) const;        // 2 pi / (n dx)
    double momentum_cutoff(int axis) const;      // pi / dx
    double coordinate(int axis, int index) const;
    double momentum(int axis, int index) const;  // signed DFT frequency
    double volume_element() const;

    // sum |psi|^2 dV
    double norm_squared() const;

    // Fraction of spectral weight within 3 bins of the momentum-grid edge on
    // the given axis; the aliasing tripwire checks this against 1e-8.
    double spectral_edge_mass(int axis) const;

  private:
    GridSpec spec_;
    std::vector<std::complex<double>> amp_;
    double time_;
};

// Product of the three initial Gaussians on the grid (particle axis carries
// the exp(i P0 X) momentum carrier). Validates resolution and extent against
// the Gaussian engine's time-T spreads; violations raise a resolution error
// naming the failed bound.
GridState init_grid(const ToFSetup& setup, const GridSpec& spec);

// Split-step propagation of the delta schedule from the state's current time
// to T: spectral kinetic phases for the free segments, one exact mixed-
// representation phase per kick. kappa1/kappa2 override the kick strengths
// (both default to setup.kappa).
GridState propagate_grid(GridState state, const ToFSetup& setup);
GridState propagate_grid(GridState state, const ToFSetup& setup, double kappa1,
                         double kappa2);

struct ConditionedGridStats {
    double mean;
    double variance;
};

// Literal conditioning on a readout pair: transform the particle axis to
// momentum, evaluate |Psi(P, x1, kappa (t2-t1) p_out + x1)|^2 with linear
// interpolation along x2, integrate over x1, normalize over P.
ConditionedGridStats conditioned_stats_grid(const GridState& state,
                                            const ToFSetup& setup, double p_out);

// First moments and symmetrized second moments of all six phase-space
// coordinates, for comparison against the Gaussian engine.
struct GridMoments {
    Eigen::Matrix<double, 6, 1> mean;
    Eigen::Matrix<double, 6, 6> cov;
};

GridMoments grid_moments(const GridState& state);

// |a - b| <= rel * scale comparison used for engine/oracle equivalence;
// per-entry scales are sqrt(Var_a Var_b) for covariances and max(|mean|,
// sigma) for means.
struct MomentComparison {
    double max_mean_err = 0.0; // worst normalized first-moment deviation
    double max_cov_err = 0.0;  // worst normalized second-moment deviation
};

MomentComparison compare_moments(const GridMoments& grid, const GaussianState& engine);

} // namespace tofsim
