#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "dqd/errors.hpp"
#include "dqd/poisson.hpp"
#include "dqd/units.hpp"
#include "test_support.hpp"

using namespace dqd;
using dqd::test::box_grid;

namespace {

PoissonBoundary dirichlet_all(const Grid& g, double v) {
    PoissonBoundary bc = PoissonBoundary::neumann(g);
    std::fill(bc.top.begin(), bc.top.end(), v);
    std::fill(bc.bottom.begin(), bc.bottom.end(), v);
    std::fill(bc.left.begin(), bc.left.end(), v);
    std::fill(bc.right.begin(), bc.right.end(), v);
    return bc;
}

/// Max-norm error of the manufactured solution u = sin(pi x / L) sin(pi y / L) on an n x n grid.
double mms_error(int n, LinearSolver solver = LinearSolver::Direct) {
    const double len = 40.0, h = len / n;
    const Grid g = box_grid(n, n, h, h);
    const Eigen::VectorXd eps = Eigen::VectorXd::Ones(g.size());
    PoissonOptions o;
    o.solver = solver;
    o.rel_tol = 1e-13;
    const PoissonOperator op(g, eps, dirichlet_all(g, 0.0), o);
    const double k = units::pi / len;
    Eigen::VectorXd f(g.size()), exact(g.size());
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            exact[g.index(i, j)] = std::sin(k * g.x(i)) * std::sin(k * g.y(j));
            f[g.index(i, j)] = 2.0 * k * k * exact[g.index(i, j)];
        }
    return (op.solve_source(f) - exact).cwiseAbs().maxCoeff();
}

}  // namespace

TEST(Poisson, ConstantBoundaryGivesConstantSolution) {
    const Grid g = box_grid(17, 11, 2.0, 1.0);
    const PoissonOperator op(g, Eigen::VectorXd::Constant(g.size(), 11.7), dirichlet_all(g, 0.37));
    const Eigen::VectorXd u = op.solve_source(Eigen::VectorXd::Zero(g.size()));
    EXPECT_LT((u.array() - 0.37).abs().maxCoeff(), 1e-12);
}

TEST(Poisson, LinearRampIsExact) {
    const Grid g = box_grid(8, 20, 2.0, 1.5);
    PoissonBoundary bc = PoissonBoundary::neumann(g);
    std::fill(bc.top.begin(), bc.top.end(), 0.0);
    std::fill(bc.bottom.begin(), bc.bottom.end(), 1.0);
    const PoissonOperator op(g, Eigen::VectorXd::Constant(g.size(), 5.0), bc);
    const Eigen::VectorXd u = op.solve_source(Eigen::VectorXd::Zero(g.size()));
    const double height = g.ny * g.dy;
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) EXPECT_NEAR(u[g.index(i, j)], g.y(j) / height, 1e-12);
}

TEST(Poisson, LayeredRampPreservesFluxContinuity) {
    // Two dielectrics meeting at a cell face: the exact solution is piecewise linear with
    // slopes inversely proportional to the permittivity.
    const int ny = 20;
    const Grid g = box_grid(4, ny, 1.0, 1.0);
    Eigen::VectorXd eps(g.size());
    const double e1 = 13.0, e2 = 11.7;
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < g.nx; ++i) eps[g.index(i, j)] = j < ny / 2 ? e1 : e2;
    PoissonBoundary bc = PoissonBoundary::neumann(g);
    std::fill(bc.top.begin(), bc.top.end(), 0.0);
    std::fill(bc.bottom.begin(), bc.bottom.end(), 1.0);
    const Eigen::VectorXd u = PoissonOperator(g, eps, bc).solve_source(Eigen::VectorXd::Zero(g.size()));
    const double half = ny / 2 * g.dy;
    const double flux = 1.0 / (half / e1 + half / e2);  // eps dU/dy, constant
    for (int j = 0; j < ny; ++j) {
        const double y = g.y(j);
        const double exact = y < half ? flux * y / e1 : flux * half / e1 + flux * (y - half) / e2;
        EXPECT_NEAR(u[g.index(1, j)], exact, 1e-12);
    }
}

TEST(Poisson, ManufacturedSolutionConvergesAtSecondOrder) {
    const double e1 = mms_error(16), e2 = mms_error(32), e3 = mms_error(64);
    const double order1 = std::log2(e1 / e2), order2 = std::log2(e2 / e3);
    EXPECT_GE(order1, 1.9);
    EXPECT_GE(order2, 1.9);
}

TEST(Poisson, MaximumPrinciple) {
    const Grid g = box_grid(24, 18, 2.0, 1.0);
    Eigen::VectorXd eps(g.size());
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u01(1.0, 16.0);
    for (int c = 0; c < g.size(); ++c) eps[c] = u01(rng);
    PoissonBoundary bc = dirichlet_all(g, 0.0);
    for (int i = 0; i < g.nx; ++i) bc.top[i] = 0.1 * std::sin(0.3 * i);
    const PoissonOperator op(g, eps, bc);
    // A non-negative source (a sheet of electrons) pushes U up: the minimum sits on the boundary.
    Eigen::VectorXd f(g.size());
    for (int c = 0; c < g.size(); ++c) f[c] = 0.01 * u01(rng);
    const double bmin = *std::min_element(bc.top.begin(), bc.top.end());
    EXPECT_GE(op.solve_source(f).minCoeff(), bmin - 1e-12);
    // Without sources the solution is bounded by the boundary values on both sides.
    const Eigen::VectorXd u0 = op.solve_source(Eigen::VectorXd::Zero(g.size()));
    const double bmax = *std::max_element(bc.top.begin(), bc.top.end());
    EXPECT_GE(u0.minCoeff(), bmin - 1e-12);
    EXPECT_LE(u0.maxCoeff(), bmax + 1e-12);
}

TEST(Poisson, ConjugateGradientMatchesDirect) {
    const double direct = mms_error(32, LinearSolver::Direct);
    const double cg = mms_error(32, LinearSolver::ConjugateGradient);
    EXPECT_NEAR(direct, cg, 1e-8);

    const auto& f = test::reference_device();
    const Grid g = build_grid(f.spec);
    const ChargeDensityField n(g, 0.0);
    PoissonOptions od, oc;
    od.solver = LinearSolver::Direct;
    oc.solver = LinearSolver::ConjugateGradient;
    oc.rel_tol = 1e-12;
    const auto ud = solve_poisson(g, f.materials, f.biases, n, od);
    const auto uc = solve_poisson(g, f.materials, f.biases, n, oc);
    EXPECT_LT((ud.values - uc.values).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Poisson, Deterministic) {
    const auto& f = test::reference_device();
    const Grid g = build_grid(f.spec);
    const ChargeDensityField n(g, 1e15);
    const auto a = solve_poisson(g, f.materials, f.biases, n);
    const auto b = solve_poisson(g, f.materials, f.biases, n);
    EXPECT_EQ(a.values, b.values);
}

TEST(Poisson, GateBoundaryValues) {
    const auto& f = test::reference_device();
    const Grid g = build_grid(f.spec);
    const DeviceBiases b = f.biases;
    const PoissonBoundary bc = device_boundary(g, f.materials, b);
    auto bias_of = [&](const std::string& name) {
        if (name == "L") return b.v_l;
        if (name == "R") return b.v_r;
        if (name == "M") return b.v_m;
        return b.v_b;
    };
    for (int i = 0; i < g.nx; ++i) {
        const int e = g.top_electrode[i];
        if (e < 0) {
            EXPECT_TRUE(std::isnan(bc.top[i])) << i;
            continue;
        }
        const std::string& name = g.electrode_names[e];
        EXPECT_NEAR(bc.top[i], f.materials.schottky_barrier(name) - bias_of(name), 1e-15) << name;
    }
    for (int j = 0; j < g.ny; ++j) {
        if (!g.contact_row[j]) continue;
        EXPECT_EQ(bc.left[j], 0.0);
        EXPECT_NEAR(bc.right[j], -b.drain, 1e-15);
    }
}

TEST(Poisson, PureNeumannIsRejected) {
    const Grid g = box_grid(5, 5, 1.0, 1.0);
    EXPECT_THROW(PoissonOperator(g, Eigen::VectorXd::Ones(g.size()), PoissonBoundary::neumann(g)), ConfigError);
}
