#include <gtest/gtest.h>

#include <cmath>

#include "dqd/spin_hamiltonian.hpp"
#include "dqd/units.hpp"

using namespace dqd;

namespace {
constexpr double kPi = units::pi;

Mat4 dense_expm(const Mat4& h, double dt) {
    Eigen::ComplexEigenSolver<Mat4> es(h);
    Eigen::Vector4cd ph = (cplx(0, -2 * kPi * dt) * es.eigenvalues()).array().exp();
    return es.eigenvectors() * ph.asDiagonal() * es.eigenvectors().inverse();
}
}  // namespace

TEST(StaticHamiltonian, DecoupledZeemanIsDiagonal) {
    const SpinParams p = make_spin_params_ghz(18.309, 18.453, 0.0);
    const Mat4 h = build_hamiltonian(p, DrivePulse::off(), 0.0);
    const double s = 0.5 * (p.ez_left + p.ez_right), d = 0.5 * (p.ez_left - p.ez_right);
    EXPECT_DOUBLE_EQ(h(kUpUp, kUpUp).real(), s);
    EXPECT_DOUBLE_EQ(h(kUpDown, kUpDown).real(), d);
    EXPECT_DOUBLE_EQ(h(kDownUp, kDownUp).real(), -d);
    EXPECT_DOUBLE_EQ(h(kDownDown, kDownDown).real(), -s);
    EXPECT_EQ((h - Mat4(h.diagonal().asDiagonal())).norm(), 0.0);
}

TEST(StaticHamiltonian, MiddleBlockGapMatchesClosedForm) {
    for (double j : {1e5, 19.3e6, 266.1e6}) {
        const SpinParams p = make_spin_params_ghz(18.312, 18.448, j);
        const Mat4 h = static_hamiltonian(p);
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix2cd> es(h.block<2, 2>(1, 1));
        const double gap = es.eigenvalues()(1) - es.eigenvalues()(0);
        const double de = p.ez_left - p.ez_right;
        EXPECT_NEAR(gap, std::sqrt(de * de + j * j), 1e-6 * gap);
    }
}

TEST(StaticHamiltonian, PolarizedStatesAreEigenstates) {
    const SpinParams p = make_spin_params_ghz(18.3, 18.4, 50e6);
    const Mat4 h = static_hamiltonian(p);
    for (int b : {kUpUp, kDownDown}) {
        const Vec4 v = Vec4::Unit(b);
        const Vec4 hv = h * v;
        EXPECT_NEAR((hv - hv(b) * v).norm(), 0.0, 0.0);
    }
}

TEST(DrivenHamiltonian, HermitianAndStaticAtDriveNode) {
    const SpinParams p = make_spin_params_ghz(18.309, 18.453, 75.6e3);
    const DrivePulse d = DrivePulse::on(5e6, p.ez_left, 0.3);
    for (double t : {0.0, 1.3e-9, 77.7e-9}) {
        const Mat4 h = build_hamiltonian(p, d, t);
        EXPECT_LT((h - h.adjoint()).norm(), 1e-6);  // entries ~1e10 Hz
    }
    // cos(2 pi f t + theta) = 0 at t = (pi/2 - theta) / (2 pi f).
    const DrivePulse d0 = DrivePulse::on(5e6, 1e9, 0.0);
    const double t_node = 0.25e-9;
    const Mat4 diff = build_hamiltonian(p, d0, t_node) - static_hamiltonian(p);
    EXPECT_LT(diff.norm(), 1e-8 * 5e6);
}

TEST(Propagator, ClosedFormMatchesDenseExponential) {
    const SpinParams p = make_spin_params_ghz(18.312, 18.448, 19.3e6);
    for (double dt : {1e-12, 3.7e-11, 2.5e-9}) {
        const Mat4 h = static_hamiltonian(p);
        EXPECT_LT((propagator(h, dt) - dense_expm(h, dt)).norm(), 1e-9);
        const Mat4 hd = rwa_hamiltonian(p, DrivePulse::on(5e6, 18.31e9, 0.7), 18.31e9, 0.0);
        EXPECT_LT((propagator(hd, dt) - dense_expm(hd, dt)).norm(), 1e-9);
    }
}

TEST(Rotations, RyAndRzConventions) {
    // ry(pi) maps down to up (up to sign); rz is diagonal with opposite phases.
    const Mat2 y = ry(kPi);
    EXPECT_NEAR(std::abs(y(0, 1)), 1.0, 1e-15);
    const Mat2 z = rz(0.4);
    EXPECT_NEAR(std::arg(z(0, 0)), 0.2, 1e-15);
    EXPECT_NEAR(std::arg(z(1, 1)), -0.2, 1e-15);
    EXPECT_LT((rz(0.3) * rz(0.5) - rz(0.8)).norm(), 1e-15);
}
