#pragma once

#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "dqd/device.hpp"

namespace dqd {

/// Lowest single-particle states of the Quantum region. Wavefunctions live on the full grid
/// (zero outside the region) and are normalized so that sum |psi|^2 dx dy = 1 (nm^-2).
struct Spectrum {
    std::vector<double> energies;  // eV, ascending
    std::vector<Eigen::VectorXd> wavefunctions;

    int n_states() const { return static_cast<int>(energies.size()); }
};

/// Mapping between grid cells and the unknowns of the eigenproblem.
struct QuantumRegion {
    std::vector<int> cells;  // local -> grid index
    std::vector<int> local;  // grid -> local index, -1 outside

    explicit QuantumRegion(const Grid& g);
    int size() const { return static_cast<int>(cells.size()); }
};

/// H = -(hbar^2/2) div(1/m grad) + V on the Quantum cells with psi = 0 on the region boundary
/// (faces to non-Quantum cells or the domain edge). Energies in eV.
Eigen::SparseMatrix<double> effective_mass_hamiltonian(const Grid& g, const MaterialParams& mat,
                                                       const Eigen::VectorXd& potential_ev, const QuantumRegion& q);

enum class EigenMethod { Auto, Lanczos, Dense };

struct EigenOptions {
    EigenMethod method = EigenMethod::Auto;
    /// Converged when ||H y - lambda y|| <= tol (eV) for every requested state.
    double residual_tol = 1e-10;
    int max_restarts = 6;
    /// Below this size Auto falls back to the dense solver if the Krylov iteration fails.
    int dense_limit = 5000;
    /// Optional starting block for the Krylov iteration (full-grid columns, e.g. the states
    /// of a nearby potential). Empty starts from pseudo-random vectors.
    Eigen::MatrixXd initial_guess;
};

/// Lowest n_states eigenpairs of the effective-mass Hamiltonian for the conduction band
/// edge `potential_ev` (eV, full grid). Block Lanczos on (H - s)^-1 with the shift s at the
/// well bottom and full reorthogonalization; the dense solver is the reference oracle.
/// Throws NumericalError when the iteration does not converge.
Spectrum solve_eigenstates(const Eigen::VectorXd& potential_ev, const Grid& g, const MaterialParams& mat,
                           int n_states, const EigenOptions& opts = {});

/// Max |<psi_i|psi_j> - delta_ij| over the spectrum.
double orthonormality_error(const Spectrum& s, const Grid& g);

}  // namespace dqd
