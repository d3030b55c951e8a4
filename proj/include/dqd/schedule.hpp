#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dqd/spin_hamiltonian.hpp"

namespace dqd {

/// Schedule clock tick: one femtosecond. Durations are integers so that
/// the total time is the exact sum of segment durations.
struct Ticks {
    std::int64_t fs = 0;

    static Ticks from_ns(double ns);
    static Ticks from_seconds(double s) { return from_ns(s * 1e9); }
    double ns() const { return static_cast<double>(fs) * 1e-6; }
    double seconds() const { return static_cast<double>(fs) * 1e-15; }

    friend Ticks operator+(Ticks a, Ticks b) { return {a.fs + b.fs}; }
    friend Ticks operator-(Ticks a, Ticks b) { return {a.fs - b.fs}; }
    friend auto operator<=>(const Ticks&, const Ticks&) = default;
};

/// One contiguous piece of a schedule. V_M is linear between `vm_start_mv` and `vm_end_mv`;
/// equal values mean a hold.
struct Segment {
    Ticks duration;
    double vm_start_mv = 400.0;
    double vm_end_mv = 400.0;
    DrivePulse drive;
    std::string label;

    bool is_ramp() const { return vm_start_mv != vm_end_mv; }
    double vm_at(double fraction) const { return vm_start_mv + (vm_end_mv - vm_start_mv) * fraction; }
};

/// Instantaneous software frame update (virtual Z) applied at `time`.
struct FrameEvent {
    Ticks time;
    Qubit target = Qubit::Left;
    double angle = 0.0;
};

struct PulseSchedule {
    std::string protocol;
    std::vector<Segment> segments;
    std::vector<FrameEvent> frame_events;

    // Bookkeeping durations in ns (0 when not applicable).
    double tau_y_ns = 0.0;
    double tau_u_ns = 0.0;
    double tau_tr_ns = 0.0;

    Ticks total_time() const;
    std::vector<Ticks> segment_starts() const;

    /// Append another schedule; its frame events are shifted by this schedule's duration.
    void append(const PulseSchedule& other);
    void append(Segment s);
    void add_frame_event(Qubit q, double angle);

    /// Drive frequency shared by every active drive segment, if any.
    /// Throws ScheduleError when active segments disagree.
    std::optional<double> common_drive_frequency() const;

    /// Checks durations, ordering of frame events and finiteness; throws ScheduleError.
    void validate() const;
};

/// Structured-text export: one `segment` line per segment and one `vz` line per frame event.
void write_schedule(std::ostream& os, const PulseSchedule& s);
PulseSchedule read_schedule(std::istream& is);

}  // namespace dqd
