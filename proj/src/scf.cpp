#include "dqd/scf.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "dqd/errors.hpp"
#include "dqd/fermi.hpp"
#include "dqd/units.hpp"

namespace dqd {

namespace {

constexpr double kNm3ToCm3 = 1e21;

Eigen::VectorXd band_offsets(const Grid& g, const MaterialParams& mat) {
    Eigen::VectorXd off(g.size());
    for (int c = 0; c < g.size(); ++c) off[c] = mat.cb_offset(g.material[c]);
    return off;
}

// Bulk (semiclassical) density and its derivative with respect to U.
void add_bulk_density(const Grid& g, const MaterialParams& mat, const Eigen::VectorXd& off, double t_k,
                      const Eigen::VectorXd& u, Eigen::VectorXd& n, Eigen::VectorXd& dn) {
    const double kt = units::kB_eV * t_k;
    const double nc = effective_dos_cm3(mat.mass_dos, t_k);
    for (int c = 0; c < g.size(); ++c) {
        if (g.region[c] != Region::Bulk) continue;
        const double eta = (mat.fermi_level_ev - u[c] - off[c]) / kt;
        if (eta < -700.0) continue;
        n[c] += nc * fermi_dirac_integral(0.5, eta);
        dn[c] -= nc * fermi_dirac_integral_derivative(0.5, eta) / kt;
    }
}

}  // namespace

ChargeDensityField quantum_charge(const Grid& g, const Spectrum& spectrum, double fermi_level_ev,
                                  double temperature_k, double mass_z) {
    if (!(temperature_k > 0.0)) throw ConfigError("temperature must be positive");
    ChargeDensityField n(g);
    for (int s = 0; s < spectrum.n_states(); ++s) {
        if (!std::isfinite(spectrum.energies[s])) throw ConfigError("spectrum contains non-finite energies");
        const double line = subband_line_density(spectrum.energies[s] - fermi_level_ev, mass_z, temperature_k);
        if (line == 0.0) continue;
        n.values += (line * kNm3ToCm3) * spectrum.wavefunctions[s].cwiseAbs2();
    }
    return n;
}

Eigen::VectorXd ConvergedSolution::band_edge() const {
    return potential.values + band_offsets(grid, materials);
}

namespace {

struct ScfContext {
    const Grid& g;
    const MaterialParams& mat;
    const PoissonOperator& op;
    Eigen::VectorXd off;
    double t_k;
    const ScfOptions& opts;

    // One outer step: states of U, then the nonlinear Poisson solve with the predicted quantum
    // density n_q(U') = sum_i |psi_i|^2 n_1D(E_i + U' - U).
    Eigen::VectorXd step(const Eigen::VectorXd& u, Spectrum& spec) const {
        spec = solve_eigenstates(u + off, g, mat, opts.n_states, opts.eigen);
        const double kt = units::kB_eV * t_k;
        struct Active {
            double e_minus_ef;
            const Eigen::VectorXd* psi;
        };
        std::vector<Active> active;
        for (int s = 0; s < spec.n_states(); ++s) {
            const double de = spec.energies[s] - mat.fermi_level_ev;
            // States more than ~100 kT above E_F stay empty for any shift the Newton solve takes.
            if (de < 0.1 + 100.0 * kt) active.push_back({de, &spec.wavefunctions[s]});
        }
        auto model = [&](const Eigen::VectorXd& x, Eigen::VectorXd& n, Eigen::VectorXd& dn) {
            n.setZero();
            dn.setZero();
            add_bulk_density(g, mat, off, t_k, x, n, dn);
            for (const auto& st : active) {
                for (int c = 0; c < g.size(); ++c) {
                    const double w = (*st.psi)[c] * (*st.psi)[c];
                    if (w == 0.0) continue;
                    const double e = st.e_minus_ef + (x[c] - u[c]);
                    n[c] += w * kNm3ToCm3 * subband_line_density(e, mat.mass_z, t_k);
                    dn[c] += w * kNm3ToCm3 * subband_line_density_derivative(e, mat.mass_z, t_k);
                }
            }
        };
        return op.solve_nonlinear(model, u, 1e-3 * opts.tolerance_ev);
    }

    ChargeDensityField total_charge(const Eigen::VectorXd& u, const Spectrum& spec) const {
        Eigen::VectorXd n = Eigen::VectorXd::Zero(g.size()), dn = Eigen::VectorXd::Zero(g.size());
        add_bulk_density(g, mat, off, t_k, u, n, dn);
        ChargeDensityField q = quantum_charge(g, spec, mat.fermi_level_ev, t_k, mat.mass_z);
        q.values += n;
        return q;
    }
};

// Damped Anderson update: minimizes the linearized residual over the recent history, then
// takes a damped step from the extrapolated iterate.
Eigen::VectorXd mix(const Eigen::VectorXd& u, const Eigen::VectorXd& f, std::vector<Eigen::VectorXd>& hu,
                    std::vector<Eigen::VectorXd>& hf, const ScfOptions& opts) {
    const double beta = opts.mixing;
    if (opts.anderson_depth <= 0) return u + beta * f;
    hu.push_back(u);
    hf.push_back(f);
    if (static_cast<int>(hu.size()) > opts.anderson_depth + 1) {
        hu.erase(hu.begin());
        hf.erase(hf.begin());
    }
    const int m = static_cast<int>(hu.size()) - 1;
    if (m == 0) return u + beta * f;
    Eigen::MatrixXd df(f.size(), m), du(u.size(), m);
    for (int k = 0; k < m; ++k) {
        df.col(k) = hf[k + 1] - hf[k];
        du.col(k) = hu[k + 1] - hu[k];
    }
    const Eigen::VectorXd gamma = df.colPivHouseholderQr().solve(f);
    return u + beta * f - (du + beta * df) * gamma;
}

}  // namespace

ConvergedSolution self_consistent_solve(const DeviceSpec& spec, const MaterialParams& mat, const DeviceBiases& b,
                                        const ScfOptions& opts) {
    if (!(opts.mixing > 0.0 && opts.mixing <= 1.0)) throw ConfigError("mixing factor must lie in (0, 1]");
    if (opts.n_states < 2) throw ConfigError("need at least two eigenstates");
    mat.validate();
    ConvergedSolution sol;
    sol.spec = spec;
    sol.materials = mat;
    sol.biases = b;
    sol.grid = build_grid(spec);
    const Grid& g = sol.grid;
    const PoissonOperator op(g, mat, device_boundary(g, mat, b), opts.poisson);
    const ScfContext ctx{g, mat, op, band_offsets(g, mat), spec.temperature_k, opts};

    // Start from the semiclassical solution without quantum charge.
    auto bulk_only = [&](const Eigen::VectorXd& x, Eigen::VectorXd& n, Eigen::VectorXd& dn) {
        n.setZero();
        dn.setZero();
        add_bulk_density(g, mat, ctx.off, ctx.t_k, x, n, dn);
    };
    Eigen::VectorXd u;
    if (opts.initial_potential.size() > 0) {
        if (opts.initial_potential.size() != g.size() || !opts.initial_potential.allFinite())
            throw ConfigError("initial potential does not match the grid");
        u = opts.initial_potential;
    } else {
        u = op.solve_nonlinear(bulk_only, op.solve_density(Eigen::VectorXd::Zero(g.size())));
    }

    Spectrum states;
    std::vector<Eigen::VectorXd> hist_u, hist_f;  // previous iterates and residuals
    for (int it = 1; it <= opts.max_iterations; ++it) {
        const Eigen::VectorXd u_out = ctx.step(u, states);
        const Eigen::VectorXd f = u_out - u;
        const double update = f.lpNorm<Eigen::Infinity>();
        sol.update_history.push_back(update);
        if (opts.progress) opts.progress(it, update);
        if (update <= opts.tolerance_ev) {
            u = u_out;
            sol.iterations = it;
            sol.final_update_norm = update;
            sol.potential = PotentialField(g);
            sol.potential.values = u;
            sol.spectrum = solve_eigenstates(u + ctx.off, g, mat, opts.n_states, opts.eigen);
            sol.charge = ctx.total_charge(u, sol.spectrum);
            return sol;
        }
        u = mix(u, f, hist_u, hist_f, opts);
    }
    throw NumericalError("self-consistent loop did not converge in " + std::to_string(opts.max_iterations) +
                             " iterations",
                         sol.update_history);
}

double self_consistency_residual(const ConvergedSolution& s, const ScfOptions& opts) {
    const PoissonOperator op(s.grid, s.materials, device_boundary(s.grid, s.materials, s.biases), opts.poisson);
    const ScfContext ctx{s.grid, s.materials, op, band_offsets(s.grid, s.materials), s.spec.temperature_k, opts};
    Spectrum states;
    return (ctx.step(s.potential.values, states) - s.potential.values).lpNorm<Eigen::Infinity>();
}

// ---------------------------------------------------------------------------------------------
// Snapshot

namespace {

constexpr char kMagic[8] = {'D', 'Q', 'D', 'S', 'N', 'A', 'P', '\0'};
constexpr std::uint32_t kVersion = 1;

void write_vec(std::ostream& os, const Eigen::VectorXd& v) {
    os.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
}

Eigen::VectorXd read_vec(std::istream& is, int n) {
    Eigen::VectorXd v(n);
    is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
    if (!is) throw ConfigError("snapshot is truncated");
    return v;
}

}  // namespace

void save_snapshot(const std::filesystem::path& path, const ConvergedSolution& s) {
    nlohmann::json h;
    h["device"] = to_json(s.spec);
    h["materials"] = to_json(s.materials);
    h["biases"] = {{"V_B", s.biases.v_b}, {"V_L", s.biases.v_l}, {"V_M", s.biases.v_m}, {"V_R", s.biases.v_r},
                   {"drain", s.biases.drain}};
    h["iterations"] = s.iterations;
    h["final_update_norm_eV"] = s.final_update_norm;
    h["update_history_eV"] = s.update_history;
    h["energies_eV"] = s.spectrum.energies;
    const std::string header = h.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write snapshot " + path.string());
    out.write(kMagic, sizeof kMagic);
    out.write(reinterpret_cast<const char*>(&kVersion), sizeof kVersion);
    const std::uint64_t len = header.size();
    out.write(reinterpret_cast<const char*>(&len), sizeof len);
    out.write(header.data(), static_cast<std::streamsize>(len));
    write_vec(out, s.potential.values);
    write_vec(out, s.charge.values);
    for (const auto& psi : s.spectrum.wavefunctions) write_vec(out, psi);
    if (!out) throw ConfigError("failed writing snapshot " + path.string());
}

ConvergedSolution load_snapshot(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open snapshot " + path.string());
    char magic[8];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kMagic, sizeof magic) != 0) throw ConfigError(path.string() + " is not a snapshot");
    std::uint32_t version = 0;
    in.read(reinterpret_cast<char*>(&version), sizeof version);
    if (version != kVersion) throw ConfigError("unsupported snapshot version " + std::to_string(version));
    std::uint64_t len = 0;
    in.read(reinterpret_cast<char*>(&len), sizeof len);
    if (!in || len > (1u << 30)) throw ConfigError("corrupt snapshot header");
    std::string header(len, '\0');
    in.read(header.data(), static_cast<std::streamsize>(len));
    if (!in) throw ConfigError("snapshot is truncated");

    ConvergedSolution s;
    try {
        const auto h = nlohmann::json::parse(header);
        s.spec = device_spec_from_json(h.at("device"));
        s.materials = material_params_from_json(h.at("materials"));
        s.biases = biases_from_json(h.at("biases"));
        s.iterations = h.at("iterations").get<int>();
        s.final_update_norm = h.at("final_update_norm_eV").get<double>();
        s.update_history = h.at("update_history_eV").get<std::vector<double>>();
        s.spectrum.energies = h.at("energies_eV").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("corrupt snapshot header: ") + e.what());
    }
    s.grid = build_grid(s.spec);
    const int n = s.grid.size();
    s.potential = PotentialField(s.grid);
    s.potential.values = read_vec(in, n);
    s.charge = ChargeDensityField(s.grid);
    s.charge.values = read_vec(in, n);
    for (std::size_t k = 0; k < s.spectrum.energies.size(); ++k) s.spectrum.wavefunctions.push_back(read_vec(in, n));
    return s;
}

}  // namespace dqd
