#pragma once

#include <array>

#include "dqd/spin_hamiltonian.hpp"

namespace dqd {

/// Ideal two-qubit gates in the (uu, ud, du, dd) basis, with |1> = up.
namespace gates {
/// X on `target` when the other spin is in `control_state` (kUp = 1, standard CNOT).
enum class ControlOn { Up, Down };
Mat4 cnot(Qubit target, ControlOn control = ControlOn::Up);
/// Phase flip of |uu>.
Mat4 cz();
/// Device-native conditional phase: diag(1, e^{i phi/2}, e^{i phi/2}, 1) for phi = pi.
Mat4 native_u(double conditional_phase);
}  // namespace gates

/// Average gate fidelity F = (d + |Tr(V^dagger U)|^2) / (d (d + 1)), d = 4, as a fraction.
double average_gate_fidelity(const Mat4& actual, const Mat4& ideal);

struct FrameFit {
    double fidelity = 0.0;  // fraction
    /// Z angles (post-left, post-right, pre-left, pre-right) of the best frame.
    std::array<double, 4> angles{};
    Mat4 ideal_in_frame = Mat4::Identity();
};

/// Maximizes the average gate fidelity over Ideal' = (RZ(a) x RZ(b)) Ideal (RZ(c) x RZ(d)) and
/// the global phase.
FrameFit fit_virtual_frames(const Mat4& actual, const Mat4& ideal);

/// Gate fidelity in percent. With `frame_opt` the ideal is dressed with the best virtual-Z
/// frames. Throws ModelError if either input is not unitary to 1e-6.
double gate_fidelity(const Mat4& actual, const Mat4& ideal, bool frame_opt = true);

}  // namespace dqd
