#include "dqd/spin_hamiltonian.hpp"

#include <cmath>

#include "dqd/units.hpp"

namespace dqd {

namespace {
constexpr cplx I{0.0, 1.0};
constexpr double kTwoPi = 2.0 * units::pi;

Mat2 exp_hermitian2(const Mat2& h, double scale) {
    // h = m I + n.sigma ; exp(-i scale h) = e^{-i scale m} (cos(scale r) - i sin(scale r) n.sigma / r)
    const double m = 0.5 * (h(0, 0).real() + h(1, 1).real());
    const double nz = 0.5 * (h(0, 0).real() - h(1, 1).real());
    const double nx = h(1, 0).real();
    const double ny = h(1, 0).imag();
    const double r = std::sqrt(nx * nx + ny * ny + nz * nz);
    const cplx phase = std::exp(-I * (scale * m));
    Mat2 out = Mat2::Identity() * std::cos(scale * r);
    if (r > 0.0) {
        const double s = std::sin(scale * r) / r;
        Mat2 ns;
        ns << nz, cplx(nx, -ny), cplx(nx, ny), -nz;
        out -= I * s * ns;
    }
    return phase * out;
}

bool is_block_diagonal(const Mat4& h) {
    return h(0, 1) == 0.0 && h(0, 2) == 0.0 && h(0, 3) == 0.0 && h(1, 3) == 0.0 && h(2, 3) == 0.0 &&
           h(1, 0) == 0.0 && h(2, 0) == 0.0 && h(3, 0) == 0.0 && h(3, 1) == 0.0 && h(3, 2) == 0.0;
}
}  // namespace

DrivePulse DrivePulse::on(double rabi_hz, double freq_hz, double phase) {
    DrivePulse d;
    d.rabi_hz = rabi_hz;
    d.freq_hz = freq_hz;
    d.phase = std::fmod(phase, kTwoPi);
    if (d.phase < 0.0) d.phase += kTwoPi;
    d.active = true;
    return d;
}

namespace pauli {
Mat2 x() {
    Mat2 m;
    m << 0, 1, 1, 0;
    return m;
}
Mat2 y() {
    Mat2 m;
    m << 0, -I, I, 0;
    return m;
}
Mat2 z() {
    Mat2 m;
    m << 1, 0, 0, -1;
    return m;
}
Mat2 id() { return Mat2::Identity(); }
}  // namespace pauli

Mat4 kron(const Mat2& a, const Mat2& b) {
    Mat4 out;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) out.block<2, 2>(2 * i, 2 * j) = a(i, j) * b;
    return out;
}

Mat4 static_hamiltonian(const SpinParams& p) {
    Mat4 h = Mat4::Zero();
    const double sum = 0.5 * (p.ez_left + p.ez_right);
    const double diff = 0.5 * (p.ez_left - p.ez_right);
    h(kUpUp, kUpUp) = sum;
    h(kUpDown, kUpDown) = diff - 0.5 * p.j;
    h(kDownUp, kDownUp) = -diff - 0.5 * p.j;
    h(kDownDown, kDownDown) = -sum;
    h(kUpDown, kDownUp) = 0.5 * p.j;
    h(kDownUp, kUpDown) = 0.5 * p.j;
    return h;
}

Mat4 build_hamiltonian(const SpinParams& p, const DrivePulse& d, double t) {
    Mat4 h = static_hamiltonian(p);
    if (!d.active || d.rabi_hz == 0.0) return h;
    const double amp = d.rabi_hz * std::cos(kTwoPi * d.freq_hz * t + d.phase);
    if (amp == 0.0) return h;
    h += amp * (kron(pauli::y(), pauli::id()) + kron(pauli::id(), pauli::y()));
    return h;
}

Mat4 rwa_hamiltonian(const SpinParams& p, const DrivePulse& d, double frame_hz, double t) {
    SpinParams shifted = p;
    shifted.ez_left -= frame_hz;
    shifted.ez_right -= frame_hz;
    Mat4 h = static_hamiltonian(shifted);
    if (!d.active || d.rabi_hz == 0.0) return h;
    const double theta = d.phase + kTwoPi * (d.freq_hz - frame_hz) * t;
    const Mat2 single = 0.5 * d.rabi_hz * (std::cos(theta) * pauli::y() - std::sin(theta) * pauli::x());
    h += kron(single, pauli::id()) + kron(pauli::id(), single);
    return h;
}

Mat4 propagator(const Mat4& h, double dt) {
    const double scale = kTwoPi * dt;
    if (is_block_diagonal(h)) {
        Mat4 u = Mat4::Zero();
        u(0, 0) = std::exp(-I * (scale * h(0, 0).real()));
        u(3, 3) = std::exp(-I * (scale * h(3, 3).real()));
        u.block<2, 2>(1, 1) = exp_hermitian2(h.block<2, 2>(1, 1), scale);
        return u;
    }
    Eigen::SelfAdjointEigenSolver<Mat4> es(h);
    const Eigen::Vector4cd phases = (-I * scale * es.eigenvalues().cast<cplx>()).array().exp();
    return es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
}

Mat4 frame_rotation(double frame_hz, double t) {
    const double a = kTwoPi * frame_hz * t;
    Mat4 r = Mat4::Zero();
    r(kUpUp, kUpUp) = std::exp(-I * a);
    r(kUpDown, kUpDown) = 1.0;
    r(kDownUp, kDownUp) = 1.0;
    r(kDownDown, kDownDown) = std::exp(I * a);
    return r;
}

Mat2 rz(double angle) {
    Mat2 m = Mat2::Zero();
    m(0, 0) = std::exp(I * (0.5 * angle));
    m(1, 1) = std::exp(-I * (0.5 * angle));
    return m;
}

Mat4 rz_on(Qubit q, double angle) {
    return q == Qubit::Left ? kron(rz(angle), pauli::id()) : kron(pauli::id(), rz(angle));
}

Mat2 ry(double angle) {
    return std::cos(0.5 * angle) * pauli::id() - I * std::sin(0.5 * angle) * pauli::y();
}

Mat4 ry_on(Qubit q, double angle) {
    return q == Qubit::Left ? kron(ry(angle), pauli::id()) : kron(pauli::id(), ry(angle));
}

double unitarity_error(const Mat4& u) { return (u.adjoint() * u - Mat4::Identity()).norm(); }

StaticSpectrum static_spectrum(const SpinParams& p) {
    Eigen::SelfAdjointEigenSolver<Mat4> es(static_hamiltonian(p));
    return {es.eigenvalues(), es.eigenvectors()};
}

}  // namespace dqd
