#include "dqd/poisson.hpp"

#include <cmath>
#include <limits>
#include <string>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>

#include "dqd/errors.hpp"
#include "dqd/fermi.hpp"
#include "dqd/units.hpp"

namespace dqd {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

double harmonic(double a, double b) { return 2.0 * a * b / (a + b); }

bool use_direct(const PoissonOptions& o, int n) {
    return o.solver == LinearSolver::Direct || (o.solver == LinearSolver::Auto && n <= o.direct_limit);
}

Eigen::VectorXd cg_solve(const SparseMatrix& a, const Eigen::VectorXd& rhs, const Eigen::VectorXd& guess,
                         const PoissonOptions& o) {
    Eigen::ConjugateGradient<SparseMatrix, Eigen::Lower | Eigen::Upper, Eigen::IncompleteCholesky<double>> cg;
    cg.setTolerance(o.rel_tol);
    cg.setMaxIterations(o.max_iterations);
    cg.compute(a);
    if (cg.info() != Eigen::Success) throw NumericalError("incomplete Cholesky preconditioner failed");
    Eigen::VectorXd x = cg.solveWithGuess(rhs, guess);
    if (cg.info() != Eigen::Success)
        throw NumericalError("conjugate gradient did not converge in " + std::to_string(cg.iterations()) +
                                 " iterations (relative residual " + std::to_string(cg.error()) + ")",
                             {cg.error()});
    return x;
}

}  // namespace

PoissonBoundary PoissonBoundary::neumann(const Grid& g) {
    PoissonBoundary bc;
    bc.top.assign(g.nx, kNan);
    bc.bottom.assign(g.nx, kNan);
    bc.left.assign(g.ny, kNan);
    bc.right.assign(g.ny, kNan);
    return bc;
}

bool PoissonBoundary::has_dirichlet() const {
    for (const auto* side : {&top, &bottom, &left, &right})
        for (double v : *side)
            if (!std::isnan(v)) return true;
    return false;
}

PoissonBoundary device_boundary(const Grid& g, const MaterialParams& mat, const DeviceBiases& b) {
    if (!b.valid()) throw ConfigError("biases must be finite with a non-negative drain bias");
    PoissonBoundary bc = PoissonBoundary::neumann(g);
    for (int i = 0; i < g.nx; ++i) {
        const int e = g.top_electrode[i];
        if (e < 0) continue;
        const std::string& name = g.electrode_names[e];
        double v = 0.0;
        if (name == "B1" || name == "B2")
            v = b.v_b;
        else if (name == "L")
            v = b.v_l;
        else if (name == "M")
            v = b.v_m;
        else
            v = b.v_r;
        bc.top[i] = mat.schottky_barrier(name) - v;
    }
    for (int j = 0; j < g.ny; ++j) {
        if (!g.contact_row[j]) continue;
        bc.left[j] = 0.0;        // grounded source, ohmic
        bc.right[j] = -b.drain;  // drain at -q*eps
    }
    return bc;
}

struct PoissonOperator::Factor {
    Eigen::SimplicialLDLT<SparseMatrix> ldlt;
};

PoissonOperator::PoissonOperator(const Grid& g, const MaterialParams& mat, const PoissonBoundary& bc,
                                 const PoissonOptions& opts)
    : PoissonOperator(g, permittivity_field(g, mat), bc, opts) {}

PoissonOperator::PoissonOperator(const Grid& g, const Eigen::VectorXd& eps, const PoissonBoundary& bc,
                                 const PoissonOptions& opts)
    : opts_(opts) {
    const int n = g.size();
    if (eps.size() != n) throw ConfigError("permittivity field does not match the grid");
    if (static_cast<int>(bc.top.size()) != g.nx || static_cast<int>(bc.bottom.size()) != g.nx ||
        static_cast<int>(bc.left.size()) != g.ny || static_cast<int>(bc.right.size()) != g.ny)
        throw ConfigError("boundary description does not match the grid");
    has_dirichlet_ = bc.has_dirichlet();
    if (!has_dirichlet_) throw ConfigError("Poisson problem needs at least one Dirichlet boundary face");

    const double ix2 = 1.0 / (g.dx * g.dx);
    const double iy2 = 1.0 / (g.dy * g.dy);
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(5 * n);
    b_ = Eigen::VectorXd::Zero(n);
    for (int j = 0; j < g.ny; ++j) {
        for (int i = 0; i < g.nx; ++i) {
            const int c = g.index(i, j);
            double diag = 0.0;
            auto couple = [&](int nb, double w) {
                trip.emplace_back(c, nb, -w);
                diag += w;
            };
            auto boundary = [&](double value, double w) {
                if (std::isnan(value)) return;
                diag += w;
                b_[c] += w * value;
            };
            if (i > 0) couple(g.index(i - 1, j), harmonic(eps[c], eps[g.index(i - 1, j)]) * ix2);
            else boundary(bc.left[j], 2.0 * eps[c] * ix2);
            if (i + 1 < g.nx) couple(g.index(i + 1, j), harmonic(eps[c], eps[g.index(i + 1, j)]) * ix2);
            else boundary(bc.right[j], 2.0 * eps[c] * ix2);
            if (j > 0) couple(g.index(i, j - 1), harmonic(eps[c], eps[g.index(i, j - 1)]) * iy2);
            else boundary(bc.top[i], 2.0 * eps[c] * iy2);
            if (j + 1 < g.ny) couple(g.index(i, j + 1), harmonic(eps[c], eps[g.index(i, j + 1)]) * iy2);
            else boundary(bc.bottom[i], 2.0 * eps[c] * iy2);
            trip.emplace_back(c, c, diag);
        }
    }
    a_.resize(n, n);
    a_.setFromTriplets(trip.begin(), trip.end());
    a_.makeCompressed();

    if (use_direct(opts_, n)) {
        factor_ = std::make_unique<Factor>();
        factor_->ldlt.compute(a_);
        if (factor_->ldlt.info() != Eigen::Success) throw NumericalError("sparse LDLT factorization failed");
    }
}

PoissonOperator::~PoissonOperator() = default;
PoissonOperator::PoissonOperator(PoissonOperator&&) noexcept = default;

Eigen::VectorXd PoissonOperator::solve_linear(const Eigen::VectorXd& rhs) const {
    if (factor_) return factor_->ldlt.solve(rhs);
    return cg_solve(a_, rhs, Eigen::VectorXd::Zero(rhs.size()), opts_);
}

Eigen::VectorXd PoissonOperator::solve_source(const Eigen::VectorXd& f) const {
    if (f.size() != a_.rows()) throw ConfigError("source term does not match the grid");
    return solve_linear(f + b_);
}

Eigen::VectorXd PoissonOperator::solve_density(const Eigen::VectorXd& n_cm3) const {
    return solve_source(units::poisson_coeff * n_cm3);
}

double PoissonOperator::residual_norm(const Eigen::VectorXd& u, const Eigen::VectorXd& f) const {
    return (a_ * u - f - b_).lpNorm<Eigen::Infinity>();
}

Eigen::VectorXd PoissonOperator::solve_nonlinear(const DensityModel& density, Eigen::VectorXd u, double tol_ev,
                                                 int max_iterations) const {
    const int n = static_cast<int>(a_.rows());
    if (u.size() != n) throw ConfigError("initial potential does not match the grid");
    constexpr double kMaxStep = 0.1;  // eV; limits Newton steps far from the solution
    const double c = units::poisson_coeff;
    Eigen::VectorXd dens(n), ddens(n);
    auto residual = [&](const Eigen::VectorXd& x) {
        density(x, dens, ddens);
        return Eigen::VectorXd(a_ * x - b_ - c * dens);
    };

    Eigen::SimplicialLDLT<SparseMatrix> ldlt;
    const bool direct = use_direct(opts_, n);
    if (direct) ldlt.analyzePattern(a_);

    std::vector<double> history;
    Eigen::VectorXd r = residual(u);
    for (int it = 0; it < max_iterations; ++it) {
        SparseMatrix jac = a_;
        for (int k = 0; k < n; ++k) jac.coeffRef(k, k) -= c * ddens[k];
        Eigen::VectorXd delta;
        if (direct) {
            ldlt.factorize(jac);
            if (ldlt.info() != Eigen::Success) throw NumericalError("Newton Jacobian factorization failed", history);
            delta = ldlt.solve(-r);
        } else {
            delta = cg_solve(jac, -r, Eigen::VectorXd::Zero(n), opts_);
        }
        const double step = delta.lpNorm<Eigen::Infinity>();
        history.push_back(step);
        if (!std::isfinite(step)) throw NumericalError("Newton update is not finite", history);

        double lambda = std::min(1.0, kMaxStep / std::max(step, 1e-300));
        const double r0 = r.norm();
        Eigen::VectorXd trial;
        Eigen::VectorXd r_trial;
        for (int bt = 0; bt < 30; ++bt) {
            trial = u + lambda * delta;
            r_trial = residual(trial);
            if (r_trial.norm() <= (1.0 - 1e-4 * lambda) * r0 || lambda * step <= tol_ev) break;
            lambda *= 0.5;
        }
        u = trial;
        r = r_trial;
        if (lambda * step <= tol_ev) return u;
    }
    throw NumericalError("nonlinear Poisson iteration did not converge in " + std::to_string(max_iterations) +
                             " iterations",
                         history);
}

Eigen::VectorXd permittivity_field(const Grid& g, const MaterialParams& mat) {
    Eigen::VectorXd eps(g.size());
    for (int c = 0; c < g.size(); ++c) eps[c] = mat.permittivity(g.material[c]);
    return eps;
}

PotentialField solve_poisson(const Grid& g, const MaterialParams& mat, const DeviceBiases& b,
                             const ChargeDensityField& charge, const PoissonOptions& opts) {
    if (!charge.matches(g)) throw ConfigError("charge density field does not match the grid");
    if (!charge.values.allFinite()) throw ConfigError("charge density contains non-finite values");
    const PoissonOperator op(g, mat, device_boundary(g, mat, b), opts);
    PotentialField u(g);
    u.values = op.solve_density(charge.values);
    return u;
}

Eigen::VectorXd conduction_band(const Grid& g, const MaterialParams& mat, const Eigen::VectorXd& u) {
    Eigen::VectorXd ec(u.size());
    for (int c = 0; c < g.size(); ++c) ec[c] = u[c] + mat.cb_offset(g.material[c]);
    return ec;
}

ChargeDensityField bulk_charge(const Grid& g, const PotentialField& u, const MaterialParams& mat,
                               double temperature_k) {
    if (!u.matches(g)) throw ConfigError("potential field does not match the grid");
    if (!u.values.allFinite()) throw ConfigError("potential contains non-finite values");
    ChargeDensityField n(g);
    for (int c = 0; c < g.size(); ++c) {
        if (g.region[c] != Region::Bulk) continue;
        const double ec = u.values[c] + mat.cb_offset(g.material[c]);
        n.values[c] = bulk_density_cm3(ec - mat.fermi_level_ev, mat.mass_dos, temperature_k);
    }
    return n;
}

}  // namespace dqd
