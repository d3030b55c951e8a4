#include "dqd/noise.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <ostream>
#include <random>
#include <thread>
#include <tuple>

#include "dqd/errors.hpp"
#include "dqd/units.hpp"

namespace dqd {

void NoiseConfig::validate() const {
    if (!std::isfinite(sigma_uev) || sigma_uev < 0.0) throw ConfigError("noise sigma must be finite and >= 0");
    if (n_samples < 1) throw ConfigError("noise needs at least one sample");
}

NoiseField sample_noise(const Grid& g, const NoiseConfig& cfg, int sample_index) {
    cfg.validate();
    NoiseField f(g);
    f.seed = cfg.seed;
    f.sample_index = sample_index;
    f.sigma_ev = cfg.sigma_uev * 1e-6;
    if (f.sigma_ev == 0.0) return f;
    const auto idx = static_cast<std::uint64_t>(static_cast<std::int64_t>(sample_index));
    std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                      static_cast<std::uint32_t>(idx), static_cast<std::uint32_t>(idx >> 32)};
    std::mt19937_64 rng(seq);
    // 53-bit uniforms in (0, 1]; the engine's output sequence is fixed by the standard, unlike
    // the library distributions, so fields are reproducible across toolchains.
    auto uniform = [&] { return (static_cast<double>(rng() >> 11) + 1.0) * 0x1.0p-53; };
    for (int c = 0; c < g.size(); c += 2) {
        const double r = std::sqrt(-2.0 * std::log(uniform()));
        const double phi = 2.0 * units::pi * uniform();
        f.values[c] = f.sigma_ev * r * std::cos(phi);
        if (c + 1 < g.size()) f.values[c + 1] = f.sigma_ev * r * std::sin(phi);
    }
    return f;
}

SpinParams perturbed_spin_params(const ConvergedSolution& s, const NoiseField& noise, const MagnetFieldMap& map,
                                 const DotOptions& dot_opts) {
    if (!noise.matches(s.grid)) throw ConfigError("noise field does not match the grid");
    const Eigen::VectorXd edge = s.band_edge() + noise.values;
    Spectrum spectrum;
    try {
        // The clean states are an excellent starting block for a micro-eV perturbation.
        EigenOptions eo;
        eo.initial_guess.resize(s.grid.size(), s.spectrum.n_states());
        for (int k = 0; k < s.spectrum.n_states(); ++k) eo.initial_guess.col(k) = s.spectrum.wavefunctions[k];
        spectrum = solve_eigenstates(edge, s.grid, s.materials, s.spectrum.n_states(), eo);
    } catch (const NumericalError& e) {
        throw NumericalError("noise sample " + std::to_string(noise.sample_index) + ": " + e.what(), e.history());
    }
    const auto& m = s.spec.electrode("M");
    const DotRegions dots = find_dots(s.grid, edge, spectrum, s.materials.fermi_level_ev,
                                      0.5 * (m.start_nm + m.end_nm), dot_opts);
    SpinParams p;
    std::tie(p.ez_left, p.ez_right) = zeeman_splittings(s.grid, spectrum, dots, map);
    p.j = exchange_energy(s.grid, spectrum, dots, s.materials.eps_si).j_hz;
    p.biases = s.biases;
    return p;
}

namespace {

QuantityStats stats(const std::vector<double>& v) {
    QuantityStats q;
    q.n = static_cast<int>(v.size());
    if (v.empty()) {
        q.mean = q.std = q.min = q.max = std::numeric_limits<double>::quiet_NaN();
        return q;
    }
    double sum = 0.0;
    q.min = q.max = v.front();
    for (double x : v) {
        sum += x;
        q.min = std::min(q.min, x);
        q.max = std::max(q.max, x);
    }
    q.mean = sum / q.n;
    double ss = 0.0;
    for (double x : v) ss += (x - q.mean) * (x - q.mean);
    q.std = q.n > 1 ? std::sqrt(ss / (q.n - 1)) : 0.0;
    return q;
}

}  // namespace

FluctStats fluctuation_stats(const ConvergedSolution& clean, const MagnetFieldMap& map, const NoiseConfig& cfg,
                             int threads, const DotOptions& dot_opts) {
    cfg.validate();
    const int n = cfg.n_samples;
    std::vector<SpinParams> results(n);
    std::vector<std::exception_ptr> errors(n);
    std::atomic<int> next{0};
    auto worker = [&] {
        for (int k = next++; k < n; k = next++) {
            try {
                results[k] = perturbed_spin_params(clean, sample_noise(clean.grid, cfg, k + 1), map, dot_opts);
            } catch (...) {
                errors[k] = std::current_exception();
            }
        }
    };
    const int n_workers = std::max(1, std::min(threads, n));
    std::vector<std::thread> pool;
    for (int t = 1; t < n_workers; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    FluctStats out;
    out.sigma_uev = cfg.sigma_uev;
    out.v_m = clean.biases.v_m;
    out.n_samples = n;
    std::vector<double> ezl, ezr, j;
    std::exception_ptr last;
    for (int k = 0; k < n; ++k) {
        if (errors[k]) {
            ++out.failures;
            last = errors[k];
            try {
                std::rethrow_exception(errors[k]);
            } catch (const std::exception& e) {
                out.failure_messages.push_back("sample " + std::to_string(k + 1) + ": " + e.what());
            }
            continue;
        }
        ezl.push_back(results[k].ez_left);
        ezr.push_back(results[k].ez_right);
        j.push_back(results[k].j);
    }
    if (out.failures == n) std::rethrow_exception(last);
    out.ez_left = stats(ezl);
    out.ez_right = stats(ezr);
    out.j = stats(j);
    return out;
}

FluctStats fluctuation_stats(const DeviceSpec& spec, const MaterialParams& mat, const DeviceBiases& b,
                             const MagnetFieldMap& map, const NoiseConfig& cfg, const ScfOptions& opts, int threads) {
    cfg.validate();
    return fluctuation_stats(self_consistent_solve(spec, mat, b, opts), map, cfg, threads);
}

void write_fluct_stats_csv(std::ostream& os, const std::vector<FluctStats>& rows) {
    os << "sigma_ueV,V_M,quantity,mean_Hz,std_Hz,min_Hz,max_Hz,n,failures\n";
    const auto old = os.precision(15);
    for (const auto& r : rows) {
        const std::pair<const char*, const QuantityStats*> qs[] = {{"E_ZL", &r.ez_left}, {"E_ZR", &r.ez_right},
                                                                   {"J", &r.j}};
        for (const auto& [name, q] : qs)
            os << r.sigma_uev << ',' << r.v_m << ',' << name << ',' << q->mean << ',' << q->std << ',' << q->min << ','
               << q->max << ',' << q->n << ',' << r.failures << '\n';
    }
    os.precision(old);
}

}  // namespace dqd
