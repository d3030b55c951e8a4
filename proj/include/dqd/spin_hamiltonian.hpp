#pragma once

#include <Eigen/Dense>
#include <complex>

#include "dqd/spin_params.hpp"

namespace dqd {

using cplx = std::complex<double>;
using Mat2 = Eigen::Matrix2cd;
using Mat4 = Eigen::Matrix4cd;
using Vec4 = Eigen::Vector4cd;

/// Two-spin basis order used everywhere: |uu>, |ud>, |du>, |dd>, left spin first.
enum BasisState : int { kUpUp = 0, kUpDown = 1, kDownUp = 2, kDownDown = 3 };

enum class Qubit { Left, Right };

/// Microwave drive B_Y(t) = B_o cos(2 pi f_D t + theta), applied to both spins.
/// `rabi_hz` is the on-resonance Rabi frequency: a pi rotation takes 1 / (2 rabi_hz).
struct DrivePulse {
    double rabi_hz = 0.0;
    double freq_hz = 0.0;
    double phase = 0.0;
    bool active = false;

    static DrivePulse off() { return {}; }
    static DrivePulse on(double rabi_hz, double freq_hz, double phase);

    friend bool operator==(const DrivePulse&, const DrivePulse&) = default;
};

namespace pauli {
Mat2 x();
Mat2 y();
Mat2 z();
Mat2 id();
}  // namespace pauli

/// Kronecker product, `left` acting on the left spin.
Mat4 kron(const Mat2& left, const Mat2& right);

/// Static part H0/h in Hz:
///   (E_ZL/2) sz x I + (E_ZR/2) I x sz + J (S1.S2 - 1/4).
Mat4 static_hamiltonian(const SpinParams& p);

/// Lab-frame H(t)/h in Hz, t in seconds.
Mat4 build_hamiltonian(const SpinParams& p, const DrivePulse& d, double t);

/// Rotating-wave Hamiltonian in a frame rotating at `frame_hz` for both spins.
/// Counter-rotating drive terms at ~2 f_D are dropped.
Mat4 rwa_hamiltonian(const SpinParams& p, const DrivePulse& d, double frame_hz, double t);

/// exp(-i 2 pi H dt) for Hermitian H in Hz. Uses the closed form for the
/// block structure {uu}, {ud,du}, {dd} when the drive is off.
Mat4 propagator(const Mat4& h_hz, double dt);

/// Frame rotation exp(-i 2 pi f t (sz x I + I x sz)/2) taking rotating-frame states to the lab.
Mat4 frame_rotation(double frame_hz, double t);

/// Single-qubit frame rotation RZ(angle) = exp(-i angle sz_qubit / 2) written in the (|0>=d, |1>=u)
/// qubit convention, i.e. diag(e^{+i a/2}, e^{-i a/2}) on (u, d).
Mat2 rz(double angle);
Mat4 rz_on(Qubit q, double angle);

/// Physical rotation exp(-i angle sy / 2) on (u, d).
Mat2 ry(double angle);
Mat4 ry_on(Qubit q, double angle);

/// ||U^dagger U - I|| (Frobenius).
double unitarity_error(const Mat4& u);

/// Eigenvalues (ascending) and eigenvectors of the static Hamiltonian.
struct StaticSpectrum {
    Eigen::Vector4d energies;
    Mat4 vectors;
};
StaticSpectrum static_spectrum(const SpinParams& p);

}  // namespace dqd
