#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace dqd {

/// Invalid geometry, material table, bias point or experiment configuration.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An iterative method failed to converge. Carries the residual history.
class NumericalError : public std::runtime_error {
public:
    NumericalError(const std::string& what, std::vector<double> history = {})
        : std::runtime_error(what), history_(std::move(history)) {}

    const std::vector<double>& history() const noexcept { return history_; }
    double last_residual() const noexcept { return history_.empty() ? 0.0 : history_.back(); }

private:
    std::vector<double> history_;
};

/// Physical model outside its validity range (e.g. U - V <= 0, unresolvable resonances).
class ModelError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed pulse schedule (non-contiguous segments, frame mismatch).
class ScheduleError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace dqd
