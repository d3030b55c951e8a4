#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "dqd/errors.hpp"
#include "dqd/fidelity.hpp"
#include "dqd/units.hpp"

using namespace dqd;

namespace {
constexpr double kPi = units::pi;

// The 60 two-qubit stabilizer states form a 3-design, so averaging state fidelity over
// them reproduces the Haar average exactly. Generated by closing |dd> under H, S, CNOT.
std::vector<Vec4> stabilizer_states() {
    const double r = 1.0 / std::sqrt(2.0);
    Mat2 h;
    h << r, r, r, -r;
    Mat2 s;
    s << 1, 0, 0, cplx(0, 1);
    const std::vector<Mat4> gens{kron(h, pauli::id()), kron(pauli::id(), h), kron(s, pauli::id()),
                                 kron(pauli::id(), s), gates::cnot(Qubit::Left), gates::cnot(Qubit::Right)};
    auto canonical = [](Vec4 v) {
        int k = 0;
        while (std::abs(v(k)) < 1e-9) ++k;
        return Vec4(v * (std::abs(v(k)) / v(k)));
    };
    std::vector<Vec4> states{Vec4::Unit(kDownDown)};
    for (std::size_t i = 0; i < states.size(); ++i)
        for (const auto& g : gens) {
            const Vec4 n = canonical(g * states[i]);
            bool seen = false;
            for (const auto& o : states) seen = seen || (n - o).norm() < 1e-9;
            if (!seen) states.push_back(n);
        }
    return states;
}

double design_average(const Mat4& actual, const Mat4& ideal) {
    const auto states = stabilizer_states();
    double acc = 0.0;
    for (const auto& psi : states) acc += std::norm((ideal * psi).dot(actual * psi));
    return acc / static_cast<double>(states.size());
}
}  // namespace

TEST(Fidelity, StabilizerOracleHasSixtyStates) { EXPECT_EQ(stabilizer_states().size(), 60u); }

TEST(Fidelity, IdenticalAndGlobalPhase) {
    const Mat4 cn = gates::cnot(Qubit::Left);
    EXPECT_NEAR(gate_fidelity(cn, cn, false), 100.0, 1e-12);
    EXPECT_NEAR(gate_fidelity(std::exp(cplx(0, 1.234)) * cn, cn, false), 100.0, 1e-12);
    EXPECT_NEAR(gate_fidelity(std::exp(cplx(0, -2.0)) * cn, cn, true), 100.0, 1e-12);
}

TEST(Fidelity, OverRotatedCnotMatchesDesignAverage) {
    // Conditional flip over-rotated by pi/2: target rotates by 3pi/2 when the control is up.
    Mat4 u = Mat4::Identity();
    const Mat2 rot = std::exp(cplx(0, 0.0)) * (std::cos(0.75 * kPi) * pauli::id() -
                                               cplx(0, 1) * std::sin(0.75 * kPi) * pauli::x());
    // control = right spin up (index bit r = 0), target = left
    u(kUpUp, kUpUp) = rot(0, 0);
    u(kUpUp, kDownUp) = rot(0, 1);
    u(kDownUp, kUpUp) = rot(1, 0);
    u(kDownUp, kDownUp) = rot(1, 1);
    const Mat4 ideal = gates::cnot(Qubit::Left);
    const double oracle = 100.0 * design_average(u, ideal);
    EXPECT_NEAR(gate_fidelity(u, ideal, false), oracle, 1e-10);
    EXPECT_LT(oracle, 90.0);
}

TEST(Fidelity, DesignAverageAgreesOnRandomUnitaries) {
    std::srand(7);
    for (int k = 0; k < 5; ++k) {
        const Mat4 a = Mat4::Random();
        const Mat4 q = Eigen::HouseholderQR<Mat4>(a).householderQ();
        const Mat4 ideal = gates::cz();
        EXPECT_NEAR(average_gate_fidelity(q, ideal), design_average(q, ideal), 1e-12);
    }
}

TEST(Fidelity, FrameOptimizationRemovesVirtualZ) {
    const Mat4 ideal = gates::cnot(Qubit::Left);
    const Mat4 dressed = rz_on(Qubit::Left, 0.7) * rz_on(Qubit::Right, -1.9) * ideal * rz_on(Qubit::Left, 2.2) *
                         rz_on(Qubit::Right, 0.4);
    EXPECT_LT(gate_fidelity(dressed, ideal, false), 99.0);
    const FrameFit fit = fit_virtual_frames(dressed, ideal);
    EXPECT_NEAR(100.0 * fit.fidelity, 100.0, 1e-9);
    EXPECT_NEAR(gate_fidelity(dressed, ideal, true), 100.0, 1e-9);
    // Frame optimization never lowers the fidelity and cannot undo a non-Z error.
    const Mat4 err = ry_on(Qubit::Right, 0.3) * ideal;
    EXPECT_GE(gate_fidelity(err, ideal, true), gate_fidelity(err, ideal, false) - 1e-12);
    EXPECT_LT(gate_fidelity(err, ideal, true), 99.9);
}

TEST(Fidelity, FrameFitMatchesBruteForceGrid) {
    std::srand(11);
    const Mat4 q = Eigen::HouseholderQR<Mat4>(Mat4::Random()).householderQ();
    const Mat4 ideal = gates::cnot(Qubit::Left);
    double best = 0.0;
    const int n = 24;
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
            for (int c = 0; c < n; ++c)
                for (int d = 0; d < n; ++d) {
                    const double s = 4 * kPi / n;
                    const Mat4 v = kron(rz(a * s), rz(b * s)) * ideal * kron(rz(c * s), rz(d * s));
                    best = std::max(best, average_gate_fidelity(q, v));
                }
    const double fit = fit_virtual_frames(q, ideal).fidelity;
    EXPECT_GE(fit, best - 1e-12);
    EXPECT_LE(fit - best, 5e-3);
}

TEST(Fidelity, RejectsNonUnitary) {
    EXPECT_THROW(gate_fidelity(2.0 * Mat4::Identity(), Mat4::Identity()), ModelError);
}
