#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "dqd/evolve.hpp"
#include "dqd/fidelity.hpp"
#include "dqd/protocols.hpp"
#include "dqd/errors.hpp"
#include "dqd/units.hpp"

using namespace dqd;

namespace {
constexpr double kPi = units::pi;

ParamsSource constant(const SpinParams& p) {
    return [p](double) { return p; };
}

PulseSchedule single_segment(double ns, DrivePulse d, double vm0 = 400.0, double vm1 = 400.0) {
    PulseSchedule s;
    s.append(Segment{Ticks::from_ns(ns), vm0, vm1, d, "seg"});
    return s;
}

double op_norm(const Mat4& m) { return Eigen::JacobiSVD<Mat4>(m).singularValues()(0); }

/// Rotating-frame propagator and the lab propagator brought into the same frame.
std::pair<Mat4, Mat4> both_frames(const PulseSchedule& s, const ParamsSource& src) {
    EvolveOptions rwa;
    const UnitaryResult r = evolve(s, src, rwa);
    EvolveOptions lab;
    lab.integrator = Integrator::Lab;
    const UnitaryResult l = evolve(s, src, lab);
    return {r.u, lab_to_rotating(l.u, r.frame_hz, s.total_time().seconds())};
}
}  // namespace

TEST(Evolve, ZeroHamiltonianIsIdentity) {
    const PulseSchedule s = single_segment(37.5, DrivePulse::off());
    for (auto integ : {Integrator::Lab, Integrator::Rotating}) {
        EvolveOptions o;
        o.integrator = integ;
        o.frame_hz = 0.0;
        const UnitaryResult r = evolve(s, constant(SpinParams{}), o);
        EXPECT_LT((r.u - Mat4::Identity()).norm(), 1e-14);
    }
}

TEST(Evolve, ResonantRabiFlipMatchesRabiFormula) {
    const SpinParams p = make_spin_params_ghz(18.309, 18.453, 0.0);
    const double rabi = 5e6;
    const PulseSchedule s = single_segment(0.5 / rabi * 1e9, DrivePulse::on(rabi, p.ez_left, 0.0));
    const auto [u_rwa, u_lab] = both_frames(s, constant(p));
    // Off-resonant right spin: generalized Rabi formula for detuning det.
    const double det = p.ez_right - p.ez_left;
    const double omega = std::hypot(rabi, det);
    const double expect = rabi * rabi / (omega * omega) * std::pow(std::sin(kPi * omega * 0.5 / rabi), 2);
    const double p_right = std::norm(u_rwa(kDownUp, kDownDown)) + std::norm(u_rwa(kUpUp, kDownDown));
    EXPECT_NEAR(p_right, expect, 1e-6);

    // |dd> -> |ud>: the resonant left spin flips completely; with J = 0 the spins are
    // independent, so the only loss is the right-spin crosstalk above.
    const double p_rwa = std::norm(u_rwa(kUpDown, kDownDown));
    const double p_lab = std::norm(u_lab(kUpDown, kDownDown));
    EXPECT_NEAR(p_rwa, 1.0 - expect, 1e-6);
    EXPECT_GE(p_rwa, 0.998);
    EXPECT_NEAR(p_lab, p_rwa, 1e-3);
}

TEST(Evolve, UnitarityOverMillionLabSteps) {
    const SpinParams p = make_spin_params_ghz(18.309, 18.453, 75.6e3);
    const PulseSchedule s = single_segment(100.0, DrivePulse::on(5e6, p.ez_left, 0.0));
    EvolveOptions o;
    o.integrator = Integrator::Lab;
    o.dt_scale = 0.35;
    const UnitaryResult r = evolve(s, constant(p), o);
    EXPECT_GE(r.steps, 1'000'000);
    EXPECT_LE(unitarity_error(r.u), 1e-8);
}

TEST(Evolve, LabAndRotatingFramesAgreeForReferenceProtocols) {
    const auto src = SpinParamCurve::reference().source();
    std::vector<ProtocolRequest> reqs;
    for (auto proto : {Protocol::RyPiLeft, Protocol::RyPiRight, Protocol::CnotSingle}) {
        ProtocolRequest r;
        r.protocol = proto;
        reqs.push_back(r);
    }
    ProtocolRequest multi;
    multi.protocol = Protocol::CnotMulti;
    multi.strong_vm_mv = 408.0;
    multi.tau_tr_ns = 5.0;
    reqs.push_back(multi);
    for (const auto& req : reqs) {
        const CompiledProtocol c = compile_protocol(req, src);
        const auto [u_rwa, u_lab] = both_frames(c.schedule, src);
        EXPECT_LE(op_norm(u_rwa - u_lab), 1e-3) << to_string(req.protocol);
    }
}

TEST(Evolve, TimeReversalReturnsIdentity) {
    const auto src = SpinParamCurve::reference().source();
    ProtocolRequest req;
    req.protocol = Protocol::CnotMulti;
    req.strong_vm_mv = 412.0;
    req.tau_tr_ns = 5.0;
    const CompiledProtocol c = compile_protocol(req, src);
    for (auto integ : {Integrator::Rotating, Integrator::Lab}) {
        EvolveOptions fwd;
        fwd.integrator = integ;
        EvolveOptions back = fwd;
        back.reverse = true;
        const Mat4 u = evolve(c.schedule, src, fwd).u;
        const Mat4 v = evolve(c.schedule, src, back).u;
        EXPECT_LE((v * u - Mat4::Identity()).norm(), 1e-6);
    }
}

TEST(Evolve, StepHalvingIsConverged) {
    const auto src = SpinParamCurve::reference().source();
    for (double vm : {408.0, 412.0}) {
        ProtocolRequest req;
        req.protocol = Protocol::CnotMulti;
        req.strong_vm_mv = vm;
        req.tau_tr_ns = 5.0;
        const CompiledProtocol c = compile_protocol(req, src);
        EvolveOptions a, b;
        b.dt_scale = 0.5;
        const Mat4 ua = evolve(c.schedule, src, a).u;
        const Mat4 ub = evolve(c.schedule, src, b).u;
        EXPECT_LE((ua - ub).norm(), 1e-6) << vm;
    }
}

TEST(Evolve, FrameMismatchIsRejected) {
    PulseSchedule s;
    s.append(Segment{Ticks::from_ns(10), 400, 400, DrivePulse::on(5e6, 18.309e9, 0.0), "a"});
    s.append(Segment{Ticks::from_ns(10), 400, 400, DrivePulse::on(5e6, 18.453e9, 0.0), "b"});
    EXPECT_THROW(evolve(s, SpinParamCurve::reference().source()), ScheduleError);
    EvolveOptions lab;
    lab.integrator = Integrator::Lab;
    EXPECT_NO_THROW(evolve(s, SpinParamCurve::reference().source(), lab));
}

TEST(Evolve, TrajectoryEndsOnFinalState) {
    const auto src = SpinParamCurve::reference().source();
    ProtocolRequest req;
    req.protocol = Protocol::RyPiLeft;
    const CompiledProtocol c = compile_protocol(req, src);
    EvolveOptions o;
    o.record_trajectory = true;
    o.trajectory_stride = 50;
    const UnitaryResult r = evolve(c.schedule, src, o);
    ASSERT_GE(r.trajectory.size(), 2u);
    EXPECT_EQ(r.trajectory.front().t_ns, 0.0);
    EXPECT_NEAR(r.trajectory.back().t_ns, r.elapsed_ns, 1e-9);
    EXPECT_LT((r.trajectory.back().amplitudes - r.u.col(kDownDown)).norm(), 1e-12);
    std::ostringstream os;
    write_trajectory_csv(os, r.trajectory);
    EXPECT_NE(os.str().find("t_ns,p_uu"), std::string::npos);
}
