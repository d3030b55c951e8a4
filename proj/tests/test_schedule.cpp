#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "dqd/errors.hpp"
#include "dqd/evolve.hpp"
#include "dqd/protocols.hpp"
#include "dqd/schedule.hpp"

using namespace dqd;

TEST(Schedule, TextRoundTripPreservesTimingAndEvents) {
    const auto curve = SpinParamCurve::reference();
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> tr(0.0, 6.0);
    for (double vm : {408.0, 410.0, 412.0}) {
        const PulseSchedule s = cnot_multi_schedule(curve.at(400.0), curve.at(vm), vm, tr(rng));
        std::stringstream ss;
        write_schedule(ss, s);
        const PulseSchedule r = read_schedule(ss);
        ASSERT_EQ(r.segments.size(), s.segments.size());
        EXPECT_EQ(r.total_time(), s.total_time());
        EXPECT_EQ(r.protocol, s.protocol);
        ASSERT_EQ(r.frame_events.size(), s.frame_events.size());
        for (std::size_t i = 0; i < s.frame_events.size(); ++i) {
            EXPECT_EQ(r.frame_events[i].time, s.frame_events[i].time);
            EXPECT_DOUBLE_EQ(r.frame_events[i].angle, s.frame_events[i].angle);
        }
        const Mat4 a = evolve(s, curve.source()).u;
        const Mat4 b = evolve(r, curve.source()).u;
        EXPECT_LT((a - b).norm(), 1e-9);
    }
}

TEST(Schedule, RejectsGapsAndBadEvents) {
    std::istringstream gap(
        "segment 0 10 400 400 off 0 0 0 0 a\n"
        "segment 12 10 400 400 off 0 0 0 0 b\n");
    EXPECT_THROW(read_schedule(gap), ScheduleError);
    std::istringstream ramp_flag("segment 0 10 400 408 off 0 0 0 0 a\n");
    EXPECT_THROW(read_schedule(ramp_flag), ScheduleError);
    std::istringstream late("segment 0 10 400 400 off 0 0 0 0 a\nvz 11 L 0.5\n");
    EXPECT_THROW(read_schedule(late), ScheduleError);

    PulseSchedule s;
    s.append(Segment{Ticks::from_ns(10), 400, 400, DrivePulse::off(), "a"});
    s.append(Segment{Ticks::from_ns(10), 400, 400, DrivePulse::off(), "b"});
    s.frame_events.push_back({Ticks::from_ns(5), Qubit::Left, 1.0});
    EXPECT_THROW(evolve(s, SpinParamCurve::reference().source()), ScheduleError);
}

TEST(Schedule, TicksAreExact) {
    EXPECT_EQ(Ticks::from_ns(25.906735751295336).fs, 25906736);
    EXPECT_EQ((Ticks::from_ns(0.1) + Ticks::from_ns(0.2)).fs, Ticks::from_ns(0.3).fs);
}
