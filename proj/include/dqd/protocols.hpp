#pragma once

#include <string>

#include "dqd/evolve.hpp"
#include "dqd/schedule.hpp"
#include "dqd/spin_params.hpp"

namespace dqd {

/// Rabi frequency that makes a pi/2 rotation take 48.1 ns, the rotation time used by the
/// three-step CNOT of the reference device.
inline constexpr double kMultiStepRabiHz = 1.0 / (4.0 * 48.1e-9);

/// Knobs shared by the gate compilers. Voltages in mV, frequencies in Hz, times in ns.
struct ProtocolSettings {
    double weak_vm_mv = 400.0;
    /// Rabi frequency of addressed single-qubit rotations.
    double rabi_hz = 5.0e6;
    /// Exchange above which single-qubit addressing is refused.
    double addressability_j_hz = 1.0e6;
    /// Single-step CNOT drive.
    double cnot_rabi_hz = 4.977e6;
    double cnot_phase = 1.5 * 3.14159265358979323846;
    /// Rabi frequency of the two RY(+-pi/2) pulses of the three-step CNOT.
    double multi_step_rabi_hz = kMultiStepRabiHz;
};

/// Addressed rotation about Y of `target` by `angle` at the weak-interaction bias.
/// theta = 0 for positive angles and pi for negative; a pi rotation lasts 1 / (2 B_o).
/// Returns an empty schedule for angle 0. Throws ModelError if J exceeds the
/// addressability threshold, ConfigError for |angle| > 2 pi.
PulseSchedule ry_pulse(Qubit target, double angle, const SpinParams& p, const ProtocolSettings& s = {});

/// Zero-duration software frame rotation.
PulseSchedule virtual_z(Qubit target, double angle, const SpinParams& weak, const ProtocolSettings& s = {});

/// Hold time giving conditional phase pi: tau_U = 1 / (2 J).
double native_u_hold_ns(double j_hz);

/// Ramp V_M weak -> strong over tau_TR, hold tau_U, ramp back. No drive.
PulseSchedule u_gate_schedule(const SpinParams& strong, double strong_vm_mv, double tau_tr_ns,
                              const ProtocolSettings& s = {});

/// Native U followed by virtual RZ(-pi/2) on both qubits at T_Z (end of the down-ramp).
/// Each RZ also undoes the single-qubit phase 2 pi (E_Z,strong - E_Z,weak) tau_U accrued
/// during the hold; phases accrued during the ramps are left uncompensated.
PulseSchedule cz_schedule(const SpinParams& weak, const SpinParams& strong, double strong_vm_mv, double tau_tr_ns,
                          const ProtocolSettings& s = {});

/// Transition frequencies of the left spin conditioned on the right spin, from the 4x4 spectrum.
struct ConditionalResonances {
    double control_down_hz;  // |dd> <-> |ud>
    double control_up_hz;    // |du> <-> |uu>
};
ConditionalResonances conditional_resonances(const SpinParams& p);

/// Single resonant pulse at the control-down conditional resonance of the left (target) spin,
/// lasting 1 / (2 B_o). Throws ModelError when the conditional resonances are not separated
/// by more than B_o.
PulseSchedule cnot_single_schedule(const SpinParams& strong, double strong_vm_mv, const ProtocolSettings& s = {});

/// RY(-pi/2) on the left spin, CZ (ramp, U hold, ramp, virtual RZ(-pi/2) on both), RY(pi/2).
/// Right spin is the control.
PulseSchedule cnot_multi_schedule(const SpinParams& weak, const SpinParams& strong, double strong_vm_mv,
                                  double tau_tr_ns, const ProtocolSettings& s = {});

/// Protocol identifiers accepted by the harness.
enum class Protocol { RyPiLeft, RyPiRight, NativeU, Cz, CnotSingle, CnotMulti };
Protocol parse_protocol(const std::string& name);
std::string to_string(Protocol p);

/// Compiled schedule together with the unitary it is meant to implement.
struct CompiledProtocol {
    PulseSchedule schedule;
    Mat4 ideal;
};

struct ProtocolRequest {
    Protocol protocol = Protocol::CnotMulti;
    double strong_vm_mv = 408.0;
    double tau_tr_ns = 5.0;
    ProtocolSettings settings{};
};

/// Compiles `req` against the nominal parameter curve.
CompiledProtocol compile_protocol(const ProtocolRequest& req, const ParamsSource& nominal);

}  // namespace dqd
