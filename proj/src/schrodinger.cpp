#include "dqd/schrodinger.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include <Eigen/SparseCholesky>

#include "dqd/errors.hpp"
#include "dqd/units.hpp"

namespace dqd {

QuantumRegion::QuantumRegion(const Grid& g) : local(g.size(), -1) {
    for (int c = 0; c < g.size(); ++c)
        if (g.region[c] == Region::Quantum) {
            local[c] = static_cast<int>(cells.size());
            cells.push_back(c);
        }
}

Eigen::SparseMatrix<double> effective_mass_hamiltonian(const Grid& g, const MaterialParams& mat,
                                                       const Eigen::VectorXd& v, const QuantumRegion& q) {
    if (v.size() != g.size()) throw ConfigError("potential does not match the grid");
    if (!v.allFinite()) throw ConfigError("potential contains non-finite values");
    const double kx = units::hbar2_over_2m0_eVnm2 / (g.dx * g.dx);
    const double ky = units::hbar2_over_2m0_eVnm2 / (g.dy * g.dy);
    const double inv_mx = 1.0 / mat.mass_x;
    const double inv_my = 1.0 / mat.mass_y;

    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(5 * q.size());
    for (int a = 0; a < q.size(); ++a) {
        const int c = q.cells[a];
        const int i = c % g.nx;
        const int j = c / g.nx;
        double diag = v[c];
        // A face to a non-Quantum cell or the domain edge is a hard wall located on the face:
        // the mirrored ghost value -psi doubles the face coupling on the diagonal.
        auto face = [&](int ii, int jj, double k) {
            const bool inside = ii >= 0 && ii < g.nx && jj >= 0 && jj < g.ny;
            const int nb = inside ? q.local[g.index(ii, jj)] : -1;
            if (nb >= 0) {
                trip.emplace_back(a, nb, -k);
                diag += k;
            } else {
                diag += 2.0 * k;
            }
        };
        face(i - 1, j, kx * inv_mx);
        face(i + 1, j, kx * inv_mx);
        face(i, j - 1, ky * inv_my);
        face(i, j + 1, ky * inv_my);
        trip.emplace_back(a, a, diag);
    }
    Eigen::SparseMatrix<double> h(q.size(), q.size());
    h.setFromTriplets(trip.begin(), trip.end());
    h.makeCompressed();
    return h;
}

namespace {

struct LocalEigen {
    Eigen::VectorXd values;
    Eigen::MatrixXd vectors;  // orthonormal columns (Euclidean)
};

LocalEigen dense_lowest(const Eigen::SparseMatrix<double>& h, int k) {
    const Eigen::MatrixXd hd = Eigen::MatrixXd(h);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(hd);
    if (es.info() != Eigen::Success) throw NumericalError("dense eigensolver failed");
    return {es.eigenvalues().head(k), es.eigenvectors().leftCols(k)};
}

// Orthogonalize the columns of `w` against `basis` (twice, classical Gram-Schmidt) and then
// among themselves. Columns that collapse are replaced by fresh pseudo-random directions.
Eigen::MatrixXd orthonormal_block(const Eigen::MatrixXd& basis, Eigen::MatrixXd w, std::mt19937_64& rng) {
    std::normal_distribution<double> nd;
    for (int pass = 0; pass < 2; ++pass)
        if (basis.cols() > 0) w -= basis * (basis.transpose() * w);
    for (int c = 0; c < w.cols(); ++c) {
        for (int attempt = 0; attempt < 4; ++attempt) {
            const double before = w.col(c).norm();
            for (int pass = 0; pass < 2; ++pass) {
                if (basis.cols() > 0) w.col(c) -= basis * (basis.transpose() * w.col(c));
                for (int p = 0; p < c; ++p) w.col(c) -= w.col(p).dot(w.col(c)) * w.col(p);
            }
            const double after = w.col(c).norm();
            if (after > 1e-10 * std::max(before, 1e-300) && after > 1e-300) {
                w.col(c) /= after;
                break;
            }
            for (int r = 0; r < w.rows(); ++r) w(r, c) = nd(rng);
        }
    }
    return w;
}

LocalEigen block_lanczos(const Eigen::SparseMatrix<double>& h, int k, const EigenOptions& opts,
                         const Eigen::MatrixXd& guess) {
    const int n = static_cast<int>(h.rows());
    // Shift at the well bottom: H - s is positive definite because the kinetic term is.
    double shift = h.diagonal().minCoeff();
    for (int a = 0; a < n; ++a) {
        // diag = V + kinetic couplings >= V; a lower bound on V keeps H - s SPD.
        double off = 0.0;
        for (Eigen::SparseMatrix<double>::InnerIterator it(h, a); it; ++it)
            if (it.row() != a) off += std::abs(it.value());
        shift = std::min(shift, h.coeff(a, a) - off);
    }
    shift -= 1e-6;
    Eigen::SparseMatrix<double> shifted = h;
    for (int a = 0; a < n; ++a) shifted.coeffRef(a, a) -= shift;
    Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt(shifted);
    if (llt.info() != Eigen::Success) throw NumericalError("shift-invert factorization failed");

    const int block = std::max(2, std::min(k, 8));
    std::mt19937_64 rng(0x5eed1234abcdULL);
    std::normal_distribution<double> nd;

    int max_dim = std::min(n, std::max(4 * k + 40, 60));
    std::vector<double> history;
    Eigen::MatrixXd ritz;
    for (int restart = 0; restart <= opts.max_restarts; ++restart) {
        Eigen::MatrixXd q(n, 0), z(n, 0);
        Eigen::MatrixXd start(n, block);
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < block; ++c) start(r, c) = nd(rng);
        // Restarts continue from the best Ritz vectors so far.
        const Eigen::MatrixXd& seed = restart == 0 ? guess : ritz;
        for (int c = 0; c < std::min<int>(block, static_cast<int>(seed.cols())); ++c) start.col(c) = seed.col(c);
        Eigen::MatrixXd v = orthonormal_block(q, start, rng);
        LocalEigen out;
        while (q.cols() + v.cols() <= max_dim) {
            const Eigen::MatrixXd w = llt.solve(v);
            q.conservativeResize(n, q.cols() + v.cols());
            z.conservativeResize(n, z.cols() + v.cols());
            q.rightCols(v.cols()) = v;
            z.rightCols(v.cols()) = w;
            if (q.cols() >= std::min(n, k + block) && (q.cols() / block) % 2 == 0) {
                Eigen::MatrixXd t = q.transpose() * z;
                t = 0.5 * (t + t.transpose()).eval();
                Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t);
                // Largest theta = 1/(lambda - s) are the lowest lambda.
                const int m = static_cast<int>(t.rows());
                Eigen::MatrixXd y = q * es.eigenvectors().rightCols(k).rowwise().reverse();
                Eigen::VectorXd lam(k);
                double worst = 0.0;
                for (int c = 0; c < k; ++c) {
                    const Eigen::VectorXd hy = h * y.col(c);
                    lam[c] = y.col(c).dot(hy);
                    worst = std::max(worst, (hy - lam[c] * y.col(c)).norm());
                }
                history.push_back(worst);
                ritz = y;
                if (worst <= opts.residual_tol && m >= k) {
                    out.values = lam;
                    out.vectors = y;
                    return out;
                }
            }
            if (q.cols() >= n) break;
            const int next = std::min<int>(block, n - static_cast<int>(q.cols()));
            v = orthonormal_block(q, w.rightCols(next), rng);
        }
        max_dim = std::min(n, 2 * max_dim);
    }
    throw NumericalError("Lanczos eigensolver did not reach residual " + std::to_string(opts.residual_tol) + " eV",
                         history);
}

}  // namespace

Spectrum solve_eigenstates(const Eigen::VectorXd& potential_ev, const Grid& g, const MaterialParams& mat,
                           int n_states, const EigenOptions& opts) {
    if (n_states < 1) throw ConfigError("need at least one eigenstate");
    const QuantumRegion q(g);
    if (q.size() < n_states) throw ConfigError("Quantum region has fewer cells than requested states");
    const auto h = effective_mass_hamiltonian(g, mat, potential_ev, q);

    LocalEigen le;
    if (opts.method == EigenMethod::Dense) {
        le = dense_lowest(h, n_states);
    } else {
        try {
            Eigen::MatrixXd guess;
            if (opts.initial_guess.cols() > 0) {
                if (opts.initial_guess.rows() != g.size()) throw ConfigError("initial guess does not match the grid");
                guess.resize(q.size(), opts.initial_guess.cols());
                for (int a = 0; a < q.size(); ++a) guess.row(a) = opts.initial_guess.row(q.cells[a]);
            }
            le = block_lanczos(h, n_states, opts, guess);
        } catch (const NumericalError&) {
            if (opts.method == EigenMethod::Lanczos || q.size() >= opts.dense_limit) throw;
            le = dense_lowest(h, n_states);
        }
    }

    // Sort ascending and fix the sign of each vector for reproducibility.
    std::vector<int> order(n_states);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) { return le.values[a] < le.values[b]; });
    Spectrum s;
    const double norm = 1.0 / std::sqrt(g.cell_area());
    for (int idx : order) {
        Eigen::VectorXd y = le.vectors.col(idx);
        Eigen::Index imax = 0;
        y.cwiseAbs().maxCoeff(&imax);
        if (y[imax] < 0.0) y = -y;
        Eigen::VectorXd psi = Eigen::VectorXd::Zero(g.size());
        for (int a = 0; a < q.size(); ++a) psi[q.cells[a]] = y[a] * norm;
        s.energies.push_back(le.values[idx]);
        s.wavefunctions.push_back(std::move(psi));
    }
    return s;
}

double orthonormality_error(const Spectrum& s, const Grid& g) {
    double worst = 0.0;
    for (int a = 0; a < s.n_states(); ++a)
        for (int b = a; b < s.n_states(); ++b) {
            const double ip = s.wavefunctions[a].dot(s.wavefunctions[b]) * g.cell_area();
            worst = std::max(worst, std::abs(ip - (a == b ? 1.0 : 0.0)));
        }
    return worst;
}

}  // namespace dqd
