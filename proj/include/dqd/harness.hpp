#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dqd/device_model.hpp"
#include "dqd/evolve.hpp"
#include "dqd/noise.hpp"
#include "dqd/protocols.hpp"

namespace dqd {

enum class Experiment { Stability, JSweep, Gate, NoiseSweep, TransitionSweep, FluctStats };
Experiment parse_experiment(const std::string& name);
std::string to_string(Experiment e);

/// Where the nominal spin parameters of the gate compilers come from.
enum class NominalSource {
    Reference,  // the reported values of the reference device
    Device,     // the simulated device at the weak and strong middle-gate biases
};

/// Experiment configuration (JSON with comments). Paths inside the file are relative to it.
/// Biases in mV, noise in ueV, times in ns.
struct ExperimentConfig {
    Experiment experiment = Experiment::Gate;
    std::filesystem::path device_file;
    std::filesystem::path field_map_file;
    std::string config_hash;  // FNV-1a over the config, device and field-map file contents
    std::uint64_t seed = 1;
    int threads = 1;
    Integrator integrator = Integrator::Rotating;
    NominalSource nominal = NominalSource::Reference;
    std::filesystem::path output;

    // stability
    StabilityWindow stability;
    // j-sweep
    double vm_min_mv = 400.0, vm_max_mv = 412.0, vm_step_mv = 1.0;
    // gate
    Protocol protocol = Protocol::CnotSingle;
    int trajectory_stride = 10;
    // shared by gate / noise / transition sweeps
    double strong_vm_mv = 408.0;
    double tau_tr_ns = 5.0;
    ProtocolSettings settings;
    // noise-sweep
    std::vector<Protocol> protocols = {Protocol::CnotSingle, Protocol::CnotMulti};
    std::vector<double> sigmas_uev = {1e-3, 1e-2, 1e-1, 1.0, 5.0};
    int n_samples = 1000;
    double max_failure_rate = 0.01;
    // transition-sweep
    std::vector<double> tau_tr_grid_ns = {1, 2, 3, 4, 5};
    double transition_sigma_uev = 1e-3;
    // fluct-stats
    std::vector<double> fluct_vm_mv = {400.0, 408.0};

    /// Throws ConfigError when a range is empty, n_samples < 1 or the output is unset.
    void validate() const;
};

/// Reads the config file; `experiment` selects the section that is used.
ExperimentConfig load_experiment_config(const std::filesystem::path& path, Experiment experiment);

/// Rows are stored preformatted so that CSV bodies are byte-identical across runs.
struct SweepResult {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::pair<std::string, std::string>> metadata;  // written as "# key: value"
};

/// Raised when some points finished but the run had to stop (exit code 4).
class PartialResultsError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct RunOptions {
    bool resume = false;  // keep completed points of an existing output with the same config hash
    std::function<void(const std::string&)> log;  // progress and per-sample failure messages
};

/// Runs the configured experiment, streaming rows to `cfg.output` (CSV with a '#' metadata
/// header) point by point, then writes the JSON sidecar `<output>.json`. Returns the result.
SweepResult run_experiment(const ExperimentConfig& cfg, const RunOptions& opts = {});

/// Nominal spin-parameter curve used by the gate compilers for `cfg`; a device-derived curve
/// is evaluated at `pinit` with V_M replaced by the weak and strong biases.
SpinParamCurve nominal_curve(const ExperimentConfig& cfg, const DeviceModel* device, const DeviceBiases& pinit);

/// Nominal curve with the noise-induced changes of the device applied: E_Z shifts are added
/// and J is scaled by J_noisy / J_clean, both taken at the weak and strong biases and
/// interpolated linearly in V_M in between.
SpinParamCurve perturbed_curve(const SpinParamCurve& nominal, double weak_vm_mv, const SpinParams& weak_clean,
                               const SpinParams& weak_noisy, double strong_vm_mv, const SpinParams& strong_clean,
                               const SpinParams& strong_noisy);

/// Process exit code for an exception escaping run_experiment: 2 configuration, 3 numerical
/// or model failure, 4 partial results.
int exit_code_for(const std::exception& e);

/// 64-bit FNV-1a hash as 16 hex digits.
std::string fnv1a_hex(const std::string& bytes);

}  // namespace dqd
