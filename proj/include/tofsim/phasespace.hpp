#pragma once

#include <random>
#include <vector>

#include <Eigen/Dense>

#include "tofsim/error.hpp"
#include "tofsim/setup.hpp"

namespace tofsim {

// Canonical coordinate order of the three-mode phase space. Every vector
// and matrix in the library uses this order.
enum class PhaseIndex : int {
    X = 0,  // particle position
    P = 1,  // particle momentum
    x1 = 2, // pointer-1 position
    p1 = 3, // pointer-1 momentum
    x2 = 4, // pointer-2 position
    p2 = 5, // pointer-2 momentum
};

inline constexpr int kPhaseDim = 6;

const char* phase_index_name(PhaseIndex idx);

inline int phase_ord(PhaseIndex idx) { return static_cast<int>(idx); }

// All six coordinates in canonical order.
std::vector<PhaseIndex> all_phase_indices();

// Symplectic form restricted to a coordinate subset: Omega_sub = sel * Omega * sel^T.
// For the full set this is the block-diagonal [[0,1],[-1,0]] form; for subsets
// that break a conjugate pair the corresponding rows are zero and the
// uncertainty condition degenerates to plain positive-semidefiniteness.
Eigen::MatrixXd symplectic_form(const std::vector<PhaseIndex>& coords);

class SymplecticMap;

// Gaussian state given by its first and second moments over a subset of the
// canonical coordinates (the full six unless produced by marginal()).
// Construction enforces covariance symmetry (by symmetrizing within a 1e-12
// relative budget), positive semidefiniteness, and — for states reachable by
// unitary evolution — the uncertainty condition cov + (i/2) Omega >= 0.
// Conditioning on a pointer readout yields the classical posterior over
// phase space: it has zero variance along the measured statistic, so only
// positive semidefiniteness can hold there (the particle marginal of such a
// posterior is still a valid quantum state).
class GaussianState {
  public:
    GaussianState(Eigen::VectorXd mean, Eigen::MatrixXd cov);
    GaussianState(Eigen::VectorXd mean, Eigen::MatrixXd cov,
                  std::vector<PhaseIndex> coords);

    int dim() const { return static_cast<int>(mean_.size()); }
    const Eigen::VectorXd& mean() const { return mean_; }
    const Eigen::MatrixXd& cov() const { return cov_; }
    const std::vector<PhaseIndex>& coords() const { return coords_; }

    // False once a readout has been conditioned on: the object then
    // describes the measurement posterior rather than a unitary-evolution
    // state, and the uncertainty check is reduced to semidefiniteness.
    bool unitary_reachable() const { return unitary_reachable_; }

    // Moment accessors by coordinate label; error if the coordinate was
    // traced out.
    double mean_of(PhaseIndex idx) const;
    double var_of(PhaseIndex idx) const;
    double cov_of(PhaseIndex a, PhaseIndex b) const;

  private:
    // validation_scale is the magnitude at which the moments were computed;
    // cancellation noise in a conditioning update is bounded by the
    // pre-conditioning covariance, not by the (possibly much smaller) result.
    GaussianState(Eigen::VectorXd mean, Eigen::MatrixXd cov,
                  std::vector<PhaseIndex> coords, bool unitary_reachable,
                  double validation_scale = 0.0);

    friend GaussianState apply_map(const SymplecticMap& map,
                                   const GaussianState& state);
    friend GaussianState marginal(const GaussianState& state,
                                  const std::vector<PhaseIndex>& indices);
    friend GaussianState condition_on_linear(const GaussianState& state,
                                             const Eigen::VectorXd& ell,
                                             double value);

    int position_of(PhaseIndex idx) const;
    void validate(double validation_scale);

    Eigen::VectorXd mean_;
    Eigen::MatrixXd cov_;
    std::vector<PhaseIndex> coords_;
    bool unitary_reachable_ = true;
};

// Linear phase-space map S with S Omega S^T = Omega. Construction rejects
// matrices whose residual exceeds the tolerance (relative to the squared
// entry scale). Exactly constructed maps use the strict default; maps
// assembled from quadrature coefficients inherit the declared integration
// tolerance and pass a looser bound.
class SymplecticMap {
  public:
    explicit SymplecticMap(Eigen::Matrix<double, 6, 6> matrix,
                           double residual_tol = 1e-12);

    static SymplecticMap identity();

    const Eigen::Matrix<double, 6, 6>& matrix() const { return mat_; }

    // max-norm of S Omega S^T - Omega
    double symplectic_residual() const;

  private:
    Eigen::Matrix<double, 6, 6> mat_;
};

// Initial product state: particle Gaussian centered at momentum P0 with
// width dP0 and vanishing mean position, pointers centered at the phase-space
// origin; all three are minimum-uncertainty (Var(x) = 1/(4 Var(p))).
GaussianState make_initial_state(const ToFSetup& setup);

// mean' = S mean, cov' = S cov S^T (symmetrized). Requires a full 6-dim state.
GaussianState apply_map(const SymplecticMap& map, const GaussianState& state);

// Matrix product outer * inner (inner acts first).
SymplecticMap compose(const SymplecticMap& outer, const SymplecticMap& inner);

// Restriction of mean and covariance to the selected coordinates. For
// Gaussian states tracing out is exactly row/column deletion.
GaussianState marginal(const GaussianState& state,
                       const std::vector<PhaseIndex>& indices);

// Condition on the linear statistic u = ell . z taking the given value:
//   mean' = mean + cov ell (value - ell.mean) / Var(u)
//   cov'  = cov - (cov ell)(cov ell)^T / Var(u)
// The updated covariance does not depend on `value` or on the state's mean.
// If Var(u) is numerically zero the statistic is already determined:
// conditioning on the consistent value is a no-op, anything else is a
// degenerate-conditioning error.
GaussianState condition_on_linear(const GaussianState& state,
                                  const Eigen::VectorXd& ell, double value);

// One phase-space sample mean + L xi with L the Cholesky factor of cov.
// Requires a strictly positive-definite covariance.
Eigen::VectorXd sample(const GaussianState& state, std::mt19937_64& rng);

} // namespace tofsim
