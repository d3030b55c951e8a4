#include "dqd/schedule.hpp"

#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "dqd/errors.hpp"

namespace dqd {

Ticks Ticks::from_ns(double ns) {
    if (!std::isfinite(ns)) throw ScheduleError("non-finite duration");
    return {static_cast<std::int64_t>(std::llround(ns * 1e6))};
}

Ticks PulseSchedule::total_time() const {
    Ticks t;
    for (const auto& s : segments) t = t + s.duration;
    return t;
}

std::vector<Ticks> PulseSchedule::segment_starts() const {
    std::vector<Ticks> starts;
    starts.reserve(segments.size());
    Ticks t;
    for (const auto& s : segments) {
        starts.push_back(t);
        t = t + s.duration;
    }
    return starts;
}

void PulseSchedule::append(const PulseSchedule& other) {
    const Ticks offset = total_time();
    for (const auto& s : other.segments) segments.push_back(s);
    for (auto e : other.frame_events) {
        e.time = e.time + offset;
        frame_events.push_back(e);
    }
    tau_y_ns = std::max(tau_y_ns, other.tau_y_ns);
    tau_u_ns = std::max(tau_u_ns, other.tau_u_ns);
    tau_tr_ns = std::max(tau_tr_ns, other.tau_tr_ns);
}

void PulseSchedule::append(Segment s) {
    if (s.duration.fs > 0) segments.push_back(std::move(s));
}

void PulseSchedule::add_frame_event(Qubit q, double angle) {
    if (angle == 0.0) return;
    frame_events.push_back({total_time(), q, angle});
}

std::optional<double> PulseSchedule::common_drive_frequency() const {
    std::optional<double> f;
    for (const auto& s : segments) {
        if (!s.drive.active) continue;
        if (f && *f != s.drive.freq_hz)
            throw ScheduleError("frame mismatch: drive segments use different frequencies");
        f = s.drive.freq_hz;
    }
    return f;
}

void PulseSchedule::validate() const {
    for (const auto& s : segments) {
        if (s.duration.fs <= 0) throw ScheduleError("segment '" + s.label + "' has non-positive duration");
        if (!std::isfinite(s.vm_start_mv) || !std::isfinite(s.vm_end_mv))
            throw ScheduleError("segment '" + s.label + "' has non-finite V_M");
        if (s.drive.active && (s.drive.rabi_hz < 0.0 || !std::isfinite(s.drive.freq_hz)))
            throw ScheduleError("segment '" + s.label + "' has an invalid drive");
    }
    const Ticks total = total_time();
    Ticks prev;
    for (const auto& e : frame_events) {
        if (e.time < prev || e.time > total) throw ScheduleError("frame events out of order or outside the schedule");
        if (!std::isfinite(e.angle)) throw ScheduleError("non-finite frame angle");
        prev = e.time;
    }
}

void write_schedule(std::ostream& os, const PulseSchedule& s) {
    const auto old_precision = os.precision(std::numeric_limits<double>::max_digits10);
    os << "# dqd-schedule v1\n";
    os << "protocol " << (s.protocol.empty() ? "-" : s.protocol) << '\n';
    os << "tau_y_ns " << s.tau_y_ns << '\n';
    os << "tau_u_ns " << s.tau_u_ns << '\n';
    os << "tau_tr_ns " << s.tau_tr_ns << '\n';
    os << "# segment t_start_ns duration_ns vm_start_mV vm_end_mV drive B_o_MHz omega_D_GHz theta_rad ramp label\n";
    const auto starts = s.segment_starts();
    for (std::size_t i = 0; i < s.segments.size(); ++i) {
        const auto& g = s.segments[i];
        os << "segment " << std::fixed << std::setprecision(6) << starts[i].ns() << ' ' << g.duration.ns() << ' '
           << std::defaultfloat << std::setprecision(std::numeric_limits<double>::max_digits10) << g.vm_start_mv
           << ' ' << g.vm_end_mv << ' ' << (g.drive.active ? "on" : "off") << ' ' << g.drive.rabi_hz * 1e-6 << ' '
           << g.drive.freq_hz * 1e-9 << ' ' << g.drive.phase << ' ' << (g.is_ramp() ? 1 : 0) << ' '
           << (g.label.empty() ? "-" : g.label) << '\n';
    }
    os << "# vz t_ns target angle_rad\n";
    for (const auto& e : s.frame_events) {
        os << "vz " << std::fixed << std::setprecision(6) << e.time.ns() << ' ' << std::defaultfloat
           << std::setprecision(std::numeric_limits<double>::max_digits10)
           << (e.target == Qubit::Left ? 'L' : 'R') << ' ' << e.angle << '\n';
    }
    os.precision(old_precision);
}

PulseSchedule read_schedule(std::istream& is) {
    PulseSchedule s;
    std::string line;
    Ticks expected_start;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::string key;
        ls >> key;
        auto fail = [&](const std::string& why) {
            throw ScheduleError("schedule line " + std::to_string(lineno) + ": " + why);
        };
        if (key == "protocol") {
            ls >> s.protocol;
            if (s.protocol == "-") s.protocol.clear();
        } else if (key == "tau_y_ns") {
            ls >> s.tau_y_ns;
        } else if (key == "tau_u_ns") {
            ls >> s.tau_u_ns;
        } else if (key == "tau_tr_ns") {
            ls >> s.tau_tr_ns;
        } else if (key == "segment") {
            double t0, dur, b, f, th;
            std::string drive, label;
            int ramp;
            Segment g;
            if (!(ls >> t0 >> dur >> g.vm_start_mv >> g.vm_end_mv >> drive >> b >> f >> th >> ramp >> label))
                fail("malformed segment");
            if (Ticks::from_ns(t0) != expected_start) fail("segments are not contiguous");
            g.duration = Ticks::from_ns(dur);
            if (drive == "on") {
                g.drive.active = true;
                g.drive.rabi_hz = b * 1e6;
                g.drive.freq_hz = f * 1e9;
                g.drive.phase = th;
            } else if (drive != "off") {
                fail("drive must be on/off");
            }
            if ((ramp != 0) != g.is_ramp()) fail("ramp flag disagrees with V_M endpoints");
            g.label = label == "-" ? "" : label;
            expected_start = expected_start + g.duration;
            s.segments.push_back(std::move(g));
        } else if (key == "vz") {
            double t;
            char target;
            FrameEvent e;
            if (!(ls >> t >> target >> e.angle)) fail("malformed vz event");
            if (target != 'L' && target != 'R') fail("vz target must be L or R");
            e.time = Ticks::from_ns(t);
            e.target = target == 'L' ? Qubit::Left : Qubit::Right;
            s.frame_events.push_back(e);
        } else {
            fail("unknown key '" + key + "'");
        }
    }
    s.validate();
    return s;
}

}  // namespace dqd
