#pragma once

#include <cmath>

namespace dqd {

/// Gate biases in volts. V_B drives both barrier gates.
struct DeviceBiases {
    double v_b = 0.200;
    double v_l = 0.540;
    double v_r = 0.570;
    double v_m = 0.400;
    double drain = 1e-4;

    bool valid() const {
        return std::isfinite(v_b) && std::isfinite(v_l) && std::isfinite(v_r) && std::isfinite(v_m) &&
               std::isfinite(drain) && drain >= 0.0;
    }
    friend bool operator==(const DeviceBiases&, const DeviceBiases&) = default;
};

/// Zeeman splittings of the left/right dot ground states and their exchange coupling, all in Hz.
/// This triple is the only thing the spin dynamics needs from the device layer.
struct SpinParams {
    double ez_left = 0.0;
    double ez_right = 0.0;
    double j = 0.0;
    DeviceBiases biases{};

    double ez_left_ghz() const { return ez_left * 1e-9; }
    double ez_right_ghz() const { return ez_right * 1e-9; }

    friend bool operator==(const SpinParams&, const SpinParams&) = default;
};

inline SpinParams make_spin_params_ghz(double ezl_ghz, double ezr_ghz, double j_hz) {
    SpinParams p;
    p.ez_left = ezl_ghz * 1e9;
    p.ez_right = ezr_ghz * 1e9;
    p.j = j_hz;
    return p;
}

}  // namespace dqd
