#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

#include "dqd/schedule.hpp"
#include "dqd/spin_hamiltonian.hpp"
#include "dqd/spin_params.hpp"

namespace dqd {

/// Spin parameters as a function of the middle-gate bias V_M (mV).
using ParamsSource = std::function<SpinParams(double vm_mv)>;

/// Spin parameters tabulated at a few V_M anchors. J is interpolated linearly in log J
/// (exchange is close to exponential in V_M), Zeeman splittings linearly. Outside the
/// table the end intervals are extrapolated.
class SpinParamCurve {
public:
    struct Anchor {
        double vm_mv;
        SpinParams params;
    };

    SpinParamCurve() = default;
    explicit SpinParamCurve(std::vector<Anchor> anchors);

    SpinParams at(double vm_mv) const;
    const std::vector<Anchor>& anchors() const { return anchors_; }
    ParamsSource source() const {
        return [c = *this](double vm) { return c.at(vm); };
    }

    /// The values reported for the reference device: (E_ZL, E_ZR) at 400/408 mV and
    /// J at 400/408/410/412 mV.
    static SpinParamCurve reference();

private:
    std::vector<Anchor> anchors_;
};

enum class Integrator { Lab, Rotating };

struct EvolveOptions {
    Integrator integrator = Integrator::Rotating;
    /// Multiplies the default step bound (0.5 halves every step).
    double dt_scale = 1.0;
    /// Rotating-frame frequency; defaults to the schedule's drive frequency.
    std::optional<double> frame_hz;
    bool record_trajectory = false;
    /// Keep every n-th step in the trajectory.
    int trajectory_stride = 1;
    Vec4 initial_state = Vec4::Unit(kDownDown);
    /// Integrate the adjoint dynamics backwards from T to 0 (returns U^dagger).
    bool reverse = false;
    double max_unitarity_drift = 1e-8;
};

struct TrajectorySample {
    double t_ns;
    Vec4 amplitudes;
};

struct UnitaryResult {
    Mat4 u = Mat4::Identity();
    double elapsed_ns = 0.0;
    Integrator integrator = Integrator::Rotating;
    double frame_hz = 0.0;
    double max_dt_s = 0.0;
    std::int64_t steps = 0;
    std::vector<TrajectorySample> trajectory;
};

/// Time-ordered product of per-step propagators. Segments with a constant Hamiltonian are
/// exponentiated exactly; time-dependent ones use a fourth-order commutator-free Magnus
/// step (two exact exponentials of H at the Gauss-Legendre nodes).
///
/// Lab frame: dt <= 1 / (200 max(E_ZL, E_ZR)).
/// Rotating frame: dt <= 1 / (200 max(J, B_o, |detunings|)), with all drives required to
/// share one frequency (or an explicit frame). Frame events are applied at segment
/// boundaries. Throws ScheduleError / NumericalError.
UnitaryResult evolve(const PulseSchedule& schedule, const ParamsSource& params, const EvolveOptions& opts = {});

/// Lab-frame propagator expressed in the frame rotating at `frame_hz`.
Mat4 lab_to_rotating(const Mat4& u_lab, double frame_hz, double t_seconds);

/// CSV rows: t_ns, p_uu, p_ud, p_du, p_dd, then re/im of the four amplitudes.
void write_trajectory_csv(std::ostream& os, const std::vector<TrajectorySample>& traj);

}  // namespace dqd
