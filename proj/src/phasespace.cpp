#include "tofsim/phasespace.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace tofsim {

namespace {

constexpr double kSymmetryRelTol = 1e-12;
// Base tolerances for the uncertainty and degenerate-conditioning checks.
// Both are scaled by the covariance magnitude so that states at the large
// momentum scales of the sweeps (dP0 up to 1e6) are not rejected on
// eigensolver roundoff; at O(1) scales they reduce to the absolute bounds.
constexpr double kUncertaintyTol = 1e-10;
constexpr double kDegenerateTol = 1e-14;

Eigen::Matrix<double, 6, 6> full_symplectic_form() {
    Eigen::Matrix<double, 6, 6> omega = Eigen::Matrix<double, 6, 6>::Zero();
    for (int mode = 0; mode < 3; ++mode) {
        omega(2 * mode, 2 * mode + 1) = 1.0;
        omega(2 * mode + 1, 2 * mode) = -1.0;
    }
    return omega;
}

} // namespace

const char* phase_index_name(PhaseIndex idx) {
    switch (idx) {
        case PhaseIndex::X: return "X";
        case PhaseIndex::P: return "P";
        case PhaseIndex::x1: return "x1";
        case PhaseIndex::p1: return "p1";
        case PhaseIndex::x2: return "x2";
        case PhaseIndex::p2: return "p2";
    }
    return "?";
}

std::vector<PhaseIndex> all_phase_indices() {
    return {PhaseIndex::X, PhaseIndex::P, PhaseIndex::x1,
            PhaseIndex::p1, PhaseIndex::x2, PhaseIndex::p2};
}

Eigen::MatrixXd symplectic_form(const std::vector<PhaseIndex>& coords) {
    const auto omega = full_symplectic_form();
    const int d = static_cast<int>(coords.size());
    Eigen::MatrixXd sub(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            sub(i, j) = omega(phase_ord(coords[i]), phase_ord(coords[j]));
    return sub;
}

GaussianState::GaussianState(Eigen::VectorXd mean, Eigen::MatrixXd cov)
    : GaussianState(std::move(mean), std::move(cov), all_phase_indices(), true) {}

GaussianState::GaussianState(Eigen::VectorXd mean, Eigen::MatrixXd cov,
                             std::vector<PhaseIndex> coords)
    : GaussianState(std::move(mean), std::move(cov), std::move(coords), true) {}

GaussianState::GaussianState(Eigen::VectorXd mean, Eigen::MatrixXd cov,
                             std::vector<PhaseIndex> coords, bool unitary_reachable,
                             double validation_scale)
    : mean_(std::move(mean)),
      cov_(std::move(cov)),
      coords_(std::move(coords)),
      unitary_reachable_(unitary_reachable) {
    validate(validation_scale);
}

void GaussianState::validate(double validation_scale) {
    const int d = dim();
    if (d == 0) fail(ErrorKind::InvalidParameter, "empty Gaussian state");
    if (cov_.rows() != d || cov_.cols() != d ||
        static_cast<int>(coords_.size()) != d)
        fail(ErrorKind::InvalidParameter, "Gaussian state dimension mismatch");
    if (!mean_.allFinite() || !cov_.allFinite())
        fail(ErrorKind::InvalidParameter, "non-finite Gaussian moments");

    const double scale =
        std::max({1.0, cov_.cwiseAbs().maxCoeff(), validation_scale});
    const double asym = (cov_ - cov_.transpose()).cwiseAbs().maxCoeff();
    if (asym > kSymmetryRelTol * scale)
        fail(ErrorKind::ContractViolation, "covariance asymmetry beyond tolerance");
    cov_ = 0.5 * (cov_ + cov_.transpose().eval());

    // Unitary-evolution states must satisfy cov + (i/2) Omega >= 0
    // (hbar_eff = 1); measurement posteriors only need a semidefinite
    // covariance. Failures indicate a bug upstream, never repaired here.
    Eigen::MatrixXcd herm = cov_.cast<std::complex<double>>();
    if (unitary_reachable_) {
        const Eigen::MatrixXd omega = symplectic_form(coords_);
        herm += std::complex<double>(0.0, 0.5) * omega.cast<std::complex<double>>();
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(herm,
                                                           Eigen::EigenvaluesOnly);
    const double min_eig = solver.eigenvalues().minCoeff();
    if (min_eig < -kUncertaintyTol * scale) {
        std::ostringstream msg;
        msg << (unitary_reachable_
                    ? "uncertainty condition violated: min eigenvalue of cov + (i/2)Omega = "
                    : "covariance not positive semidefinite: min eigenvalue = ")
            << min_eig;
        fail(ErrorKind::ContractViolation, msg.str());
    }
}

int GaussianState::position_of(PhaseIndex idx) const {
    auto it = std::find(coords_.begin(), coords_.end(), idx);
    if (it == coords_.end())
        fail(ErrorKind::InvalidParameter,
             std::string("coordinate ") + phase_index_name(idx) +
                 " not present in this state");
    return static_cast<int>(it - coords_.begin());
}

double GaussianState::mean_of(PhaseIndex idx) const {
    return mean_(position_of(idx));
}

double GaussianState::var_of(PhaseIndex idx) const {
    const int i = position_of(idx);
    return cov_(i, i);
}

double GaussianState::cov_of(PhaseIndex a, PhaseIndex b) const {
    return cov_(position_of(a), position_of(b));
}

SymplecticMap::SymplecticMap(Eigen::Matrix<double, 6, 6> matrix, double residual_tol)
    : mat_(std::move(matrix)) {
    if (!mat_.allFinite())
        fail(ErrorKind::InvalidParameter, "non-finite symplectic matrix");
    const double entry_scale = std::max(1.0, mat_.cwiseAbs().maxCoeff());
    const double residual = symplectic_residual();
    if (residual > residual_tol * entry_scale * entry_scale) {
        std::ostringstream msg;
        msg << "matrix is not symplectic: max |S Omega S^T - Omega| = " << residual;
        fail(ErrorKind::ContractViolation, msg.str());
    }
}

SymplecticMap SymplecticMap::identity() {
    return SymplecticMap(Eigen::Matrix<double, 6, 6>::Identity());
}

double SymplecticMap::symplectic_residual() const {
    const auto omega = full_symplectic_form();
    return (mat_ * omega * mat_.transpose() - omega).cwiseAbs().maxCoeff();
}

GaussianState make_initial_state(const ToFSetup& setup) {
    setup.validate();
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(kPhaseDim);
    mean(phase_ord(PhaseIndex::P)) = setup.P0;

    // Minimum-uncertainty real Gaussians: Var(x) Var(p) = 1/4, no
    // position-momentum covariance.
    Eigen::VectorXd diag(kPhaseDim);
    diag(phase_ord(PhaseIndex::X)) = 1.0 / (4.0 * setup.dP0 * setup.dP0);
    diag(phase_ord(PhaseIndex::P)) = setup.dP0 * setup.dP0;
    diag(phase_ord(PhaseIndex::x1)) = 1.0 / (4.0 * setup.dp1 * setup.dp1);
    diag(phase_ord(PhaseIndex::p1)) = setup.dp1 * setup.dp1;
    diag(phase_ord(PhaseIndex::x2)) = 1.0 / (4.0 * setup.dp2 * setup.dp2);
    diag(phase_ord(PhaseIndex::p2)) = setup.dp2 * setup.dp2;

    return GaussianState(std::move(mean), diag.asDiagonal());
}

GaussianState apply_map(const SymplecticMap& map, const GaussianState& state) {
    if (state.dim() != kPhaseDim)
        fail(ErrorKind::InvalidParameter,
             "apply_map requires the full 6-dimensional state");
    Eigen::VectorXd mean = map.matrix() * state.mean();
    Eigen::MatrixXd cov = map.matrix() * state.cov() * map.matrix().transpose();
    cov = 0.5 * (cov + cov.transpose().eval());
    return GaussianState(std::move(mean), std::move(cov), state.coords(),
                         state.unitary_reachable());
}

SymplecticMap compose(const SymplecticMap& outer, const SymplecticMap& inner) {
    return SymplecticMap(outer.matrix() * inner.matrix());
}

GaussianState marginal(const GaussianState& state,
                       const std::vector<PhaseIndex>& indices) {
    if (indices.empty())
        fail(ErrorKind::InvalidParameter, "marginal over an empty coordinate set");

    std::vector<int> pos;
    pos.reserve(indices.size());
    for (PhaseIndex idx : indices) {
        auto it = std::find(state.coords().begin(), state.coords().end(), idx);
        if (it == state.coords().end())
            fail(ErrorKind::InvalidParameter,
                 std::string("marginal coordinate ") + phase_index_name(idx) +
                     " not present");
        pos.push_back(static_cast<int>(it - state.coords().begin()));
    }

    const int d = static_cast<int>(pos.size());
    Eigen::VectorXd mean(d);
    Eigen::MatrixXd cov(d, d);
    for (int i = 0; i < d; ++i) {
        mean(i) = state.mean()(pos[i]);
        for (int j = 0; j < d; ++j) cov(i, j) = state.cov()(pos[i], pos[j]);
    }
    return GaussianState(std::move(mean), std::move(cov), indices,
                         state.unitary_reachable());
}

GaussianState condition_on_linear(const GaussianState& state,
                                  const Eigen::VectorXd& ell, double value) {
    if (ell.size() != state.dim())
        fail(ErrorKind::InvalidParameter, "functional dimension mismatch");
    if (!ell.allFinite() || !std::isfinite(value))
        fail(ErrorKind::InvalidParameter, "non-finite conditioning input");

    const Eigen::VectorXd cov_ell = state.cov() * ell;
    const double var_u = ell.dot(cov_ell);
    const double mean_u = ell.dot(state.mean());
    const double scale = std::max(1.0, state.cov().cwiseAbs().maxCoeff());

    if (var_u <= kDegenerateTol * scale) {
        // The statistic is already determined. Conditioning on its value is
        // the identity; any other value contradicts the state.
        const double residual_scale =
            std::max({1.0, std::abs(value), std::abs(mean_u)});
        if (std::abs(value - mean_u) <= 1e-8 * residual_scale) return state;
        std::ostringstream msg;
        msg << "degenerate conditioning: Var(u) = " << var_u
            << " carries no information about value " << value;
        fail(ErrorKind::DegenerateConditioning, msg.str());
    }

    Eigen::VectorXd mean = state.mean() + cov_ell * ((value - mean_u) / var_u);
    Eigen::MatrixXd cov = state.cov() - (cov_ell * cov_ell.transpose()) / var_u;
    cov = 0.5 * (cov + cov.transpose().eval());
    // the posterior has no variance along ell: classical Gaussian from here
    // on, with residual cancellation noise at the pre-conditioning scale
    return GaussianState(std::move(mean), std::move(cov), state.coords(), false,
                         scale);
}

Eigen::VectorXd sample(const GaussianState& state, std::mt19937_64& rng) {
    Eigen::LLT<Eigen::MatrixXd> llt(state.cov());
    if (llt.info() != Eigen::Success)
        fail(ErrorKind::InvalidParameter,
             "sampling requires a positive-definite covariance");
    std::normal_distribution<double> unit(0.0, 1.0);
    Eigen::VectorXd xi(state.dim());
    for (int i = 0; i < state.dim(); ++i) xi(i) = unit(rng);
    return state.mean() + llt.matrixL() * xi;
}

} // namespace tofsim
