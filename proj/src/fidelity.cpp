#include "dqd/fidelity.hpp"

#include <cmath>

#include "dqd/errors.hpp"
#include "dqd/units.hpp"

namespace dqd {

namespace gates {

Mat4 cnot(Qubit target, ControlOn control) {
    // Control spin value that triggers the flip: up is bit 0 in (u, d) ordering.
    const int ctl = control == ControlOn::Up ? 0 : 1;
    Mat4 m = Mat4::Zero();
    for (int l = 0; l < 2; ++l)
        for (int r = 0; r < 2; ++r) {
            const int in = 2 * l + r;
            int out = in;
            if (target == Qubit::Left && r == ctl) out = 2 * (1 - l) + r;
            if (target == Qubit::Right && l == ctl) out = 2 * l + (1 - r);
            m(out, in) = 1.0;
        }
    return m;
}

Mat4 cz() {
    Mat4 m = Mat4::Identity();
    m(kUpUp, kUpUp) = -1.0;
    return m;
}

Mat4 native_u(double phi) {
    Mat4 m = Mat4::Identity();
    const cplx p = std::exp(cplx(0.0, 0.5 * phi));
    m(kUpDown, kUpDown) = p;
    m(kDownUp, kDownUp) = p;
    return m;
}

}  // namespace gates

double average_gate_fidelity(const Mat4& actual, const Mat4& ideal) {
    const double tr = std::abs((ideal.adjoint() * actual).trace());
    return (4.0 + tr * tr) / 20.0;
}

namespace {

constexpr std::array<int, 4> kSignL{+1, +1, -1, -1};
constexpr std::array<int, 4> kSignR{+1, -1, +1, -1};

// T(angles) = sum_ij t_ij exp(-i (s_post(i) + s_pre(j)) / 2) where t_ij = conj(V_ij) U_ij.
struct FrameObjective {
    Eigen::Matrix4cd m;

    double exponent(const std::array<double, 4>& a, int i, int j) const {
        return 0.5 * (kSignL[i] * a[0] + kSignR[i] * a[1] + kSignL[j] * a[2] + kSignR[j] * a[3]);
    }
    int sign_of(int coord, int i, int j) const {
        switch (coord) {
            case 0: return kSignL[i];
            case 1: return kSignR[i];
            case 2: return kSignL[j];
            default: return kSignR[j];
        }
    }
    cplx value(const std::array<double, 4>& a) const {
        cplx t = 0.0;
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j)
                if (m(i, j) != 0.0) t += m(i, j) * std::exp(cplx(0.0, -exponent(a, i, j)));
        return t;
    }
    // Exact maximizer of |T| along one coordinate: T = e^{-ia/2} P + e^{ia/2} Q.
    double best_coordinate(std::array<double, 4> a, int coord) const {
        a[coord] = 0.0;
        cplx p = 0.0, q = 0.0;
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) {
                if (m(i, j) == 0.0) continue;
                const cplx term = m(i, j) * std::exp(cplx(0.0, -exponent(a, i, j)));
                (sign_of(coord, i, j) > 0 ? p : q) += term;
            }
        if (std::abs(p) == 0.0 || std::abs(q) == 0.0) return 0.0;
        return std::arg(p * std::conj(q));
    }
};

Mat4 dress(const Mat4& ideal, const std::array<double, 4>& a) {
    return (kron(rz(a[0]), rz(a[1]))) * ideal * kron(rz(a[2]), rz(a[3]));
}

}  // namespace

FrameFit fit_virtual_frames(const Mat4& actual, const Mat4& ideal) {
    FrameObjective obj;
    obj.m = ideal.conjugate().cwiseProduct(actual);

    FrameFit best;
    best.fidelity = -1.0;
    const double starts[] = {0.0, 0.5 * units::pi, units::pi, 1.5 * units::pi};
    for (double s0 : starts)
        for (double s1 : starts) {
            std::array<double, 4> a{s0, s1, 0.0, 0.0};
            double val = std::abs(obj.value(a));
            for (int sweep = 0; sweep < 200; ++sweep) {
                for (int c = 0; c < 4; ++c) a[c] = obj.best_coordinate(a, c);
                const double nv = std::abs(obj.value(a));
                const bool done = nv - val <= 1e-15 * std::max(1.0, nv);
                val = nv;
                if (done) break;
            }
            const double f = (4.0 + val * val) / 20.0;
            if (f > best.fidelity) {
                best.fidelity = f;
                best.angles = a;
            }
        }
    best.ideal_in_frame = dress(ideal, best.angles);
    return best;
}

double gate_fidelity(const Mat4& actual, const Mat4& ideal, bool frame_opt) {
    if (unitarity_error(actual) > 1e-6 || unitarity_error(ideal) > 1e-6)
        throw ModelError("gate_fidelity: inputs must be unitary");
    const double f = frame_opt ? fit_virtual_frames(actual, ideal).fidelity : average_gate_fidelity(actual, ideal);
    return 100.0 * std::min(1.0, std::max(0.0, f));
}

}  // namespace dqd
