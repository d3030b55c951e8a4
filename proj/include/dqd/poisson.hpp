#pragma once

#include <functional>
#include <memory>
#include <vector>

#include <Eigen/Sparse>

#include "dqd/device.hpp"

namespace dqd {

using SparseMatrix = Eigen::SparseMatrix<double>;

/// Boundary values per boundary face of the grid. A NaN entry is a zero-flux (Neumann) face,
/// anything else a Dirichlet value (eV).
struct PoissonBoundary {
    std::vector<double> top, bottom;  // size nx
    std::vector<double> left, right;  // size ny

    static PoissonBoundary neumann(const Grid& g);
    bool has_dirichlet() const;
};

/// Device boundary: gates at Phi_B - q V_gate, grounded source at 0, drain at -q eps,
/// zero normal field elsewhere.
PoissonBoundary device_boundary(const Grid& g, const MaterialParams& mat, const DeviceBiases& b);

enum class LinearSolver { Auto, Direct, ConjugateGradient };

struct PoissonOptions {
    LinearSolver solver = LinearSolver::Auto;
    double rel_tol = 1e-10;
    int max_iterations = 50000;
    /// Auto switches to conjugate gradients above this many unknowns.
    int direct_limit = 200000;
};

/// Discrete operator A = -div(eps_r grad .) on cell centres (finite volumes with harmonic
/// face permittivity), scaled per unit cell area:
///   (A U)_c = sum_faces w_f (U_c - U_nb) / area,   w = eps_face * (face length / distance).
/// Dirichlet faces couple to the boundary value at half a cell distance.
class PoissonOperator {
public:
    PoissonOperator(const Grid& g, const Eigen::VectorXd& eps_r, const PoissonBoundary& bc,
                    const PoissonOptions& opts = {});
    PoissonOperator(const Grid& g, const MaterialParams& mat, const PoissonBoundary& bc,
                    const PoissonOptions& opts = {});
    ~PoissonOperator();
    PoissonOperator(PoissonOperator&&) noexcept;

    /// Solves A U = f + boundary terms, with f in eV/nm^2.
    Eigen::VectorXd solve_source(const Eigen::VectorXd& f) const;
    /// Solves for the electron potential energy with electron density n (cm^-3).
    Eigen::VectorXd solve_density(const Eigen::VectorXd& n_cm3) const;

    /// Nonlinear solve of A U = c n(U) + boundary terms by damped Newton iteration. `density`
    /// returns n (cm^-3) and dn/dU (cm^-3/eV) for a trial U.
    using DensityModel =
        std::function<void(const Eigen::VectorXd& u, Eigen::VectorXd& n, Eigen::VectorXd& dn_du)>;
    Eigen::VectorXd solve_nonlinear(const DensityModel& density, Eigen::VectorXd u0, double tol_ev = 1e-9,
                                    int max_iterations = 200) const;

    /// max |A U - f - boundary| scaled to eV/nm^2.
    double residual_norm(const Eigen::VectorXd& u, const Eigen::VectorXd& f) const;

    const SparseMatrix& matrix() const { return a_; }
    const Eigen::VectorXd& boundary_rhs() const { return b_; }
    bool has_dirichlet() const { return has_dirichlet_; }

private:
    struct Factor;
    Eigen::VectorXd solve_linear(const Eigen::VectorXd& rhs) const;

    SparseMatrix a_;
    Eigen::VectorXd b_;
    bool has_dirichlet_ = false;
    PoissonOptions opts_;
    std::unique_ptr<Factor> factor_;
};

Eigen::VectorXd permittivity_field(const Grid& g, const MaterialParams& mat);

/// Potential energy field for the given electron density.
PotentialField solve_poisson(const Grid& g, const MaterialParams& mat, const DeviceBiases& b,
                             const ChargeDensityField& charge, const PoissonOptions& opts = {});

/// Conduction-band edge E_c = U + band offset (eV).
Eigen::VectorXd conduction_band(const Grid& g, const MaterialParams& mat, const Eigen::VectorXd& u);

/// Semiclassical electron density N_c F_{1/2}((E_F - E_c)/kT) in Bulk cells; Quantum cells 0.
ChargeDensityField bulk_charge(const Grid& g, const PotentialField& u, const MaterialParams& mat, double temperature_k);

}  // namespace dqd
