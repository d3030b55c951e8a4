#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "dqd/device_model.hpp"

namespace dqd {

struct NoiseConfig {
    double sigma_uev = 0.0;  // standard deviation of the per-cell potential noise (ueV)
    std::uint64_t seed = 0;
    int n_samples = 1;

    /// Throws ConfigError for sigma < 0 (or non-finite) and n_samples < 1.
    void validate() const;
};

/// Quasi-static potential perturbation (eV) on every grid cell.
struct NoiseField : GridField {
    std::uint64_t seed = 0;
    int sample_index = 0;
    double sigma_ev = 0.0;

    NoiseField() = default;
    explicit NoiseField(const Grid& g) : GridField(g) {}
};

/// i.i.d. N(0, sigma^2) per cell, fully determined by (seed, sample_index): a 64-bit Mersenne
/// Twister seeded from both drives a Box-Muller transform cell by cell. sigma = 0 gives the
/// zero field.
NoiseField sample_noise(const Grid& g, const NoiseConfig& cfg, int sample_index);

/// Re-solves the single-particle problem on the converged band edge plus the noise (the
/// electrostatics is frozen) and recomputes the Zeeman splittings and the exchange.
/// Eigensolver failures are rethrown as NumericalError naming the sample index.
SpinParams perturbed_spin_params(const ConvergedSolution& s, const NoiseField& noise, const MagnetFieldMap& map,
                                 const DotOptions& dot_opts = {});

struct QuantityStats {
    double mean = 0.0;
    double std = 0.0;  // sample standard deviation (n - 1)
    double min = 0.0;
    double max = 0.0;
    int n = 0;
};

struct FluctStats {
    double sigma_uev = 0.0;
    double v_m = 0.0;
    int n_samples = 0;  // requested
    int failures = 0;   // samples that threw; excluded from the statistics
    std::vector<std::string> failure_messages;
    QuantityStats ez_left, ez_right, j;  // Hz
};

/// Runs perturbed_spin_params for samples 1..n_samples on `threads` workers and aggregates in
/// sample order, so the result is independent of the thread count. Failing samples are
/// counted and skipped; if every sample fails the last error is rethrown.
FluctStats fluctuation_stats(const ConvergedSolution& clean, const MagnetFieldMap& map, const NoiseConfig& cfg,
                             int threads = 1, const DotOptions& dot_opts = {});
FluctStats fluctuation_stats(const DeviceSpec& spec, const MaterialParams& mat, const DeviceBiases& b,
                             const MagnetFieldMap& map, const NoiseConfig& cfg, const ScfOptions& opts = {},
                             int threads = 1);

/// CSV with columns sigma_ueV,V_M,quantity,mean_Hz,std_Hz,min_Hz,max_Hz,n,failures; one row per
/// quantity (E_ZL, E_ZR, J) and sigma.
void write_fluct_stats_csv(std::ostream& os, const std::vector<FluctStats>& rows);

}  // namespace dqd
