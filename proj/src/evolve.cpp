#include "dqd/evolve.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>

#include "dqd/errors.hpp"
#include "dqd/units.hpp"

namespace dqd {

SpinParamCurve::SpinParamCurve(std::vector<Anchor> anchors) : anchors_(std::move(anchors)) {
    if (anchors_.empty()) throw ConfigError("spin-parameter curve needs at least one anchor");
    std::sort(anchors_.begin(), anchors_.end(), [](const Anchor& a, const Anchor& b) { return a.vm_mv < b.vm_mv; });
    for (std::size_t i = 1; i < anchors_.size(); ++i)
        if (anchors_[i].vm_mv == anchors_[i - 1].vm_mv) throw ConfigError("duplicate V_M anchor");
    for (const auto& a : anchors_)
        if (!(a.params.j >= 0.0)) throw ConfigError("negative exchange in spin-parameter curve");
}

SpinParams SpinParamCurve::at(double vm) const {
    if (anchors_.size() == 1) return anchors_.front().params;
    std::size_t hi = 1;
    while (hi + 1 < anchors_.size() && anchors_[hi].vm_mv < vm) ++hi;
    const Anchor& a = anchors_[hi - 1];
    const Anchor& b = anchors_[hi];
    if (vm == a.vm_mv) return a.params;
    if (vm == b.vm_mv) return b.params;
    const double w = (vm - a.vm_mv) / (b.vm_mv - a.vm_mv);
    SpinParams p;
    p.ez_left = a.params.ez_left + w * (b.params.ez_left - a.params.ez_left);
    p.ez_right = a.params.ez_right + w * (b.params.ez_right - a.params.ez_right);
    if (a.params.j > 0.0 && b.params.j > 0.0)
        p.j = std::exp(std::log(a.params.j) + w * (std::log(b.params.j) - std::log(a.params.j)));
    else
        p.j = std::max(0.0, a.params.j + w * (b.params.j - a.params.j));
    p.biases = a.params.biases;
    p.biases.v_m = vm * 1e-3;
    return p;
}

SpinParamCurve SpinParamCurve::reference() {
    auto mk = [](double vm, double ezl, double ezr, double j) {
        SpinParams p = make_spin_params_ghz(ezl, ezr, j);
        p.biases.v_m = vm * 1e-3;
        return Anchor{vm, p};
    };
    // Zeeman splittings are reported at 400 and 408 mV only; 410/412 continue the same line.
    const double dl = (18.312 - 18.309) / 8.0;
    const double dr = (18.448 - 18.453) / 8.0;
    return SpinParamCurve({
        mk(400.0, 18.309, 18.453, 75.6e3),
        mk(408.0, 18.312, 18.448, 19.3e6),
        mk(410.0, 18.312 + 2 * dl, 18.448 + 2 * dr, 69.5e6),
        mk(412.0, 18.312 + 4 * dl, 18.448 + 4 * dr, 266.1e6),
    });
}

namespace {

struct SegmentPlan {
    std::int64_t steps = 1;
    bool time_dependent = false;
};

double rate_bound(const SpinParams& p, const DrivePulse& d, Integrator integ, double frame) {
    double r = 0.0;
    if (integ == Integrator::Lab) {
        r = std::max({std::abs(p.ez_left), std::abs(p.ez_right), std::abs(p.j)});
        if (d.active) r = std::max({r, d.rabi_hz, std::abs(d.freq_hz)});
    } else {
        r = std::max({std::abs(p.j), std::abs(p.ez_left - frame), std::abs(p.ez_right - frame)});
        if (d.active) r = std::max({r, d.rabi_hz, std::abs(d.freq_hz - frame)});
    }
    return r;
}

SegmentPlan plan_segment(const Segment& s, const ParamsSource& params, const EvolveOptions& o, double frame) {
    SegmentPlan plan;
    const SpinParams p0 = params(s.vm_start_mv);
    const SpinParams p1 = s.is_ramp() ? params(s.vm_end_mv) : p0;
    const double rate = std::max(rate_bound(p0, s.drive, o.integrator, frame),
                                 rate_bound(p1, s.drive, o.integrator, frame));
    const double dur = s.duration.seconds();
    if (rate > 0.0) {
        const double dt_max = o.dt_scale / (200.0 * rate);
        plan.steps = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(dur / dt_max * (1.0 - 1e-12))));
    }
    const bool drive_td = s.drive.active && s.drive.rabi_hz != 0.0 &&
                          (o.integrator == Integrator::Lab || s.drive.freq_hz != frame);
    plan.time_dependent = s.is_ramp() || drive_td;
    return plan;
}

Mat4 step_hamiltonian(const Segment& s, const ParamsSource& params, const EvolveOptions& o, double frame,
                      double fraction, double t_abs) {
    const SpinParams p = params(s.vm_at(fraction));
    return o.integrator == Integrator::Lab ? build_hamiltonian(p, s.drive, t_abs)
                                           : rwa_hamiltonian(p, s.drive, frame, t_abs);
}

Mat4 frame_event_unitary(const FrameEvent& e) { return rz_on(e.target, e.angle); }

}  // namespace

UnitaryResult evolve(const PulseSchedule& schedule, const ParamsSource& params, const EvolveOptions& o) {
    schedule.validate();
    UnitaryResult res;
    res.integrator = o.integrator;
    res.elapsed_ns = schedule.total_time().ns();

    double frame = 0.0;
    if (o.integrator == Integrator::Rotating) {
        if (o.frame_hz) {
            frame = *o.frame_hz;
        } else if (auto f = schedule.common_drive_frequency()) {
            frame = *f;
        } else if (!schedule.segments.empty()) {
            const SpinParams p = params(schedule.segments.front().vm_start_mv);
            frame = 0.5 * (p.ez_left + p.ez_right);
        }
    }
    res.frame_hz = frame;

    const auto starts = schedule.segment_starts();
    const std::size_t nseg = schedule.segments.size();
    std::vector<SegmentPlan> plans(nseg);
    for (std::size_t i = 0; i < nseg; ++i) plans[i] = plan_segment(schedule.segments[i], params, o, frame);

    // Frame events must sit on segment boundaries.
    std::vector<std::vector<const FrameEvent*>> events_at(nseg + 1);
    for (const auto& e : schedule.frame_events) {
        std::size_t k = 0;
        while (k < nseg && starts[k] < e.time) ++k;
        const Ticks boundary = k < nseg ? starts[k] : schedule.total_time();
        if (boundary != e.time) throw ScheduleError("frame event at " + std::to_string(e.time.ns()) +
                                                    " ns does not fall on a segment boundary");
        events_at[k].push_back(&e);
    }

    Mat4 u = Mat4::Identity();

    auto record = [&](double t_ns) {
        if (!o.record_trajectory) return;
        res.trajectory.push_back({t_ns, u * o.initial_state});
    };

    // A forward pass multiplies on the left; the reverse pass builds U^dagger by walking
    // backwards in time and multiplying on the left as well.
    auto apply_events = [&](std::size_t k) {
        if (o.reverse) {
            for (auto it = events_at[k].rbegin(); it != events_at[k].rend(); ++it)
                u = frame_event_unitary(**it).adjoint() * u;
        } else {
            for (const auto* e : events_at[k]) u = frame_event_unitary(*e) * u;
        }
    };

    // The reverse pass applies adjoint step propagators in reverse order.
    auto apply_step = [&](const Mat4& step) { u = (o.reverse ? Mat4(step.adjoint()) : step) * u; };

    auto run_segment = [&](std::size_t i) {
        const Segment& s = schedule.segments[i];
        const SegmentPlan& plan = plans[i];
        const double t0 = starts[i].seconds();
        const double dur = s.duration.seconds();
        const double dt = dur / static_cast<double>(plan.steps);
        res.max_dt_s = std::max(res.max_dt_s, dt);
        res.steps += plan.steps;
        if (!plan.time_dependent) {
            const Mat4 h = step_hamiltonian(s, params, o, frame, 0.5, t0 + 0.5 * dur);
            if (!o.record_trajectory || o.reverse) {
                apply_step(propagator(h, dur));
                return;
            }
            const Mat4 step = propagator(h, dt);
            for (std::int64_t k = 0; k < plan.steps; ++k) {
                u = step * u;
                if ((k + 1) % o.trajectory_stride == 0 || k + 1 == plan.steps)
                    record((t0 + (k + 1) * dt) * 1e9);
            }
            return;
        }
        // Fourth-order commutator-free Magnus step built from Hamiltonians at the two
        // Gauss-Legendre nodes; each factor is an exact 4x4 exponential.
        constexpr double kNode = 0.28867513459481287;  // sqrt(3)/6
        constexpr double kA1 = 0.25 - kNode;            // (3 - 2 sqrt(3)) / 12
        constexpr double kA2 = 0.25 + kNode;
        const double n = static_cast<double>(plan.steps);
        for (std::int64_t kk = 0; kk < plan.steps; ++kk) {
            const std::int64_t k = o.reverse ? plan.steps - 1 - kk : kk;
            const double f1 = (static_cast<double>(k) + 0.5 - kNode) / n;
            const double f2 = (static_cast<double>(k) + 0.5 + kNode) / n;
            const Mat4 h1 = step_hamiltonian(s, params, o, frame, f1, t0 + f1 * dur);
            const Mat4 h2 = step_hamiltonian(s, params, o, frame, f2, t0 + f2 * dur);
            const Mat4 first = propagator(kA2 * h1 + kA1 * h2, dt);
            const Mat4 second = propagator(kA1 * h1 + kA2 * h2, dt);
            apply_step(second * first);
            if (!o.reverse && ((kk + 1) % o.trajectory_stride == 0 || kk + 1 == plan.steps))
                record((t0 + (k + 1) * dt) * 1e9);
        }
    };

    if (!o.reverse) {
        record(0.0);
        for (std::size_t i = 0; i < nseg; ++i) {
            apply_events(i);
            run_segment(i);
        }
        apply_events(nseg);
    } else {
        apply_events(nseg);
        for (std::size_t i = nseg; i-- > 0;) {
            run_segment(i);
            apply_events(i);
        }
    }

    const double drift = unitarity_error(u);
    if (!(drift <= o.max_unitarity_drift))
        throw NumericalError("unitarity drift " + std::to_string(drift) + " exceeds tolerance", {drift});
    res.u = u;
    return res;
}

Mat4 lab_to_rotating(const Mat4& u_lab, double frame_hz, double t) {
    return frame_rotation(frame_hz, t).adjoint() * u_lab;
}

void write_trajectory_csv(std::ostream& os, const std::vector<TrajectorySample>& traj) {
    os << "t_ns,p_uu,p_ud,p_du,p_dd,re_uu,im_uu,re_ud,im_ud,re_du,im_du,re_dd,im_dd\n";
    const auto old = os.precision(12);
    for (const auto& s : traj) {
        os << s.t_ns;
        for (int i = 0; i < 4; ++i) os << ',' << std::norm(s.amplitudes(i));
        for (int i = 0; i < 4; ++i) os << ',' << s.amplitudes(i).real() << ',' << s.amplitudes(i).imag();
        os << '\n';
    }
    os.precision(old);
}

}  // namespace dqd
