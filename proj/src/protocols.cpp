#include "dqd/protocols.hpp"

#include <cmath>

#include "dqd/errors.hpp"
#include "dqd/fidelity.hpp"
#include "dqd/units.hpp"

namespace dqd {

namespace {
constexpr double kPi = units::pi;

int dominant_eigenvector(const StaticSpectrum& sp, int basis) {
    int best = 0;
    double w = -1.0;
    for (int k = 0; k < 4; ++k) {
        const double o = std::norm(sp.vectors(basis, k));
        if (o > w) {
            w = o;
            best = k;
        }
    }
    return best;
}
}  // namespace

PulseSchedule ry_pulse(Qubit target, double angle, const SpinParams& p, const ProtocolSettings& s) {
    if (!std::isfinite(angle) || std::abs(angle) > 2.0 * kPi + 1e-12)
        throw ConfigError("ry_pulse: |angle| must not exceed 2 pi");
    if (p.j >= s.addressability_j_hz)
        throw ModelError("ry_pulse: exchange " + std::to_string(p.j) + " Hz is above the addressability threshold");
    if (!(s.rabi_hz > 0.0)) throw ConfigError("ry_pulse: Rabi frequency must be positive");
    PulseSchedule out;
    out.protocol = "ry";
    if (angle == 0.0) return out;
    const double freq = target == Qubit::Left ? p.ez_left : p.ez_right;
    Segment seg;
    seg.duration = Ticks::from_seconds(std::abs(angle) / (2.0 * kPi) / s.rabi_hz);
    seg.vm_start_mv = seg.vm_end_mv = s.weak_vm_mv;
    seg.drive = DrivePulse::on(s.rabi_hz, freq, angle > 0.0 ? 0.0 : kPi);
    seg.label = target == Qubit::Left ? "RY_L" : "RY_R";
    out.tau_y_ns = seg.duration.ns();
    out.append(std::move(seg));
    return out;
}

PulseSchedule virtual_z(Qubit target, double angle, const SpinParams& weak, const ProtocolSettings& s) {
    if (weak.j >= s.addressability_j_hz)
        throw ModelError("virtual_z: frame updates require the weak-interaction regime");
    PulseSchedule out;
    out.protocol = "rz";
    out.add_frame_event(target, angle);
    return out;
}

double native_u_hold_ns(double j_hz) {
    if (!(j_hz > 0.0)) throw ModelError("native U needs J > 0");
    return 0.5 / j_hz * 1e9;
}

PulseSchedule u_gate_schedule(const SpinParams& strong, double strong_vm_mv, double tau_tr_ns,
                              const ProtocolSettings& s) {
    if (!(tau_tr_ns >= 0.0)) throw ConfigError("tau_TR must be >= 0");
    const double tau_u = native_u_hold_ns(strong.j);
    const Ticks hold = Ticks::from_ns(tau_u);
    if (hold.fs < 1000) throw ConfigError("tau_U = " + std::to_string(tau_u) + " ns is below the 1 ps resolution");
    PulseSchedule out;
    out.protocol = "u";
    out.tau_u_ns = tau_u;
    out.tau_tr_ns = tau_tr_ns;
    const Ticks ramp = Ticks::from_ns(tau_tr_ns);
    out.append(Segment{ramp, s.weak_vm_mv, strong_vm_mv, DrivePulse::off(), "ramp_up"});
    out.append(Segment{hold, strong_vm_mv, strong_vm_mv, DrivePulse::off(), "U"});
    out.append(Segment{ramp, strong_vm_mv, s.weak_vm_mv, DrivePulse::off(), "ramp_down"});
    return out;
}

PulseSchedule cz_schedule(const SpinParams& weak, const SpinParams& strong, double strong_vm_mv, double tau_tr_ns,
                          const ProtocolSettings& s) {
    PulseSchedule out = u_gate_schedule(strong, strong_vm_mv, tau_tr_ns, s);
    out.protocol = "cz";
    const double hold_s = out.tau_u_ns * 1e-9;
    const double comp_l = 2.0 * kPi * (strong.ez_left - weak.ez_left) * hold_s;
    const double comp_r = 2.0 * kPi * (strong.ez_right - weak.ez_right) * hold_s;
    out.append(virtual_z(Qubit::Left, -0.5 * kPi + comp_l, weak, s));
    out.append(virtual_z(Qubit::Right, -0.5 * kPi + comp_r, weak, s));
    return out;
}

ConditionalResonances conditional_resonances(const SpinParams& p) {
    const StaticSpectrum sp = static_spectrum(p);
    const double e_uu = sp.energies(dominant_eigenvector(sp, kUpUp));
    const double e_ud = sp.energies(dominant_eigenvector(sp, kUpDown));
    const double e_du = sp.energies(dominant_eigenvector(sp, kDownUp));
    const double e_dd = sp.energies(dominant_eigenvector(sp, kDownDown));
    return {e_ud - e_dd, e_uu - e_du};
}

PulseSchedule cnot_single_schedule(const SpinParams& strong, double strong_vm_mv, const ProtocolSettings& s) {
    if (!(s.cnot_rabi_hz > 0.0)) throw ConfigError("single-step CNOT: Rabi frequency must be positive");
    const ConditionalResonances res = conditional_resonances(strong);
    if (std::abs(res.control_up_hz - res.control_down_hz) <= s.cnot_rabi_hz)
        throw ModelError("single-step CNOT: conditional resonances are not resolved (J too small)");
    PulseSchedule out;
    out.protocol = "cnot_single";
    Segment seg;
    seg.duration = Ticks::from_seconds(0.5 / s.cnot_rabi_hz);
    seg.vm_start_mv = seg.vm_end_mv = strong_vm_mv;
    seg.drive = DrivePulse::on(s.cnot_rabi_hz, res.control_down_hz, s.cnot_phase);
    seg.label = "CROT";
    out.append(std::move(seg));
    return out;
}

PulseSchedule cnot_multi_schedule(const SpinParams& weak, const SpinParams& strong, double strong_vm_mv,
                                  double tau_tr_ns, const ProtocolSettings& s) {
    ProtocolSettings rot = s;
    rot.rabi_hz = s.multi_step_rabi_hz;
    PulseSchedule out = ry_pulse(Qubit::Left, -0.5 * kPi, weak, rot);
    out.append(cz_schedule(weak, strong, strong_vm_mv, tau_tr_ns, s));
    out.append(ry_pulse(Qubit::Left, 0.5 * kPi, weak, rot));
    out.protocol = "cnot_multi";
    return out;
}

Protocol parse_protocol(const std::string& n) {
    if (n == "ry-left" || n == "ry_pi_left") return Protocol::RyPiLeft;
    if (n == "ry-right" || n == "ry_pi_right") return Protocol::RyPiRight;
    if (n == "u" || n == "native-u") return Protocol::NativeU;
    if (n == "cz") return Protocol::Cz;
    if (n == "cnot-single" || n == "cnot_single") return Protocol::CnotSingle;
    if (n == "cnot-multi" || n == "cnot_multi") return Protocol::CnotMulti;
    throw ConfigError("unknown protocol '" + n + "'");
}

std::string to_string(Protocol p) {
    switch (p) {
        case Protocol::RyPiLeft: return "ry-left";
        case Protocol::RyPiRight: return "ry-right";
        case Protocol::NativeU: return "u";
        case Protocol::Cz: return "cz";
        case Protocol::CnotSingle: return "cnot-single";
        case Protocol::CnotMulti: return "cnot-multi";
    }
    return "?";
}

CompiledProtocol compile_protocol(const ProtocolRequest& req, const ParamsSource& nominal) {
    const SpinParams weak = nominal(req.settings.weak_vm_mv);
    const SpinParams strong = nominal(req.strong_vm_mv);
    switch (req.protocol) {
        case Protocol::RyPiLeft: return {ry_pulse(Qubit::Left, kPi, weak, req.settings), ry_on(Qubit::Left, kPi)};
        case Protocol::RyPiRight: return {ry_pulse(Qubit::Right, kPi, weak, req.settings), ry_on(Qubit::Right, kPi)};
        case Protocol::NativeU:
            return {u_gate_schedule(strong, req.strong_vm_mv, req.tau_tr_ns, req.settings), gates::native_u(kPi)};
        case Protocol::Cz: return {cz_schedule(weak, strong, req.strong_vm_mv, req.tau_tr_ns, req.settings), gates::cz()};
        case Protocol::CnotSingle:
            return {cnot_single_schedule(strong, req.strong_vm_mv, req.settings),
                    gates::cnot(Qubit::Left, gates::ControlOn::Down)};
        case Protocol::CnotMulti:
            return {cnot_multi_schedule(weak, strong, req.strong_vm_mv, req.tau_tr_ns, req.settings),
                    gates::cnot(Qubit::Left, gates::ControlOn::Up)};
    }
    throw ConfigError("unhandled protocol");
}

}  // namespace dqd
