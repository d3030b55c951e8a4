#include "dqd/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <atomic>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "dqd/errors.hpp"
#include "dqd/fidelity.hpp"

#ifndef DQD_VERSION
#define DQD_VERSION "unknown"
#endif

namespace dqd {

using nlohmann::json;
using Row = std::vector<std::string>;

Experiment parse_experiment(const std::string& name) {
    if (name == "stability") return Experiment::Stability;
    if (name == "j-sweep") return Experiment::JSweep;
    if (name == "gate") return Experiment::Gate;
    if (name == "noise-sweep") return Experiment::NoiseSweep;
    if (name == "transition-sweep") return Experiment::TransitionSweep;
    if (name == "fluct-stats") return Experiment::FluctStats;
    throw ConfigError("unknown experiment '" + name +
                      "' (expected stability, j-sweep, gate, noise-sweep, transition-sweep or fluct-stats)");
}

std::string to_string(Experiment e) {
    switch (e) {
        case Experiment::Stability: return "stability";
        case Experiment::JSweep: return "j-sweep";
        case Experiment::Gate: return "gate";
        case Experiment::NoiseSweep: return "noise-sweep";
        case Experiment::TransitionSweep: return "transition-sweep";
        case Experiment::FluctStats: return "fluct-stats";
    }
    return "?";
}

std::string fnv1a_hex(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

std::string fmt(long long v) { return std::to_string(v); }
std::string fmt(int v) { return std::to_string(v); }
std::string fmt(std::uint64_t v) { return std::to_string(v); }

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw ConfigError("cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// ---------------------------------------------------------------------------------------------
// Config parsing

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + " must be an object");
    for (const auto& [key, _] : j.items()) {
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
            throw ConfigError("unknown key '" + key + "' in " + where);
    }
}

template <class T>
void get(const json& j, const char* key, T& out, const std::string& where) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(where + "." + key + ": " + e.what());
    }
}

void get_range(const json& j, const char* key, double& lo, double& hi, double& step, const std::string& where) {
    if (!j.contains(key)) return;
    const json& r = j.at(key);
    const std::string w = where + "." + key;
    check_keys(r, {"min", "max", "step"}, w);
    get(r, "min", lo, w);
    get(r, "max", hi, w);
    get(r, "step", step, w);
}

void get_protocol_settings(const json& j, ExperimentConfig& c, const std::string& where) {
    get(j, "strong_V_M_mV", c.strong_vm_mv, where);
    get(j, "tau_tr_ns", c.tau_tr_ns, where);
    double mhz = 0.0;
    if (j.contains("rabi_MHz")) get(j, "rabi_MHz", mhz, where), c.settings.rabi_hz = mhz * 1e6;
    if (j.contains("cnot_rabi_MHz")) get(j, "cnot_rabi_MHz", mhz, where), c.settings.cnot_rabi_hz = mhz * 1e6;
    if (j.contains("addressability_MHz"))
        get(j, "addressability_MHz", mhz, where), c.settings.addressability_j_hz = mhz * 1e6;
    if (j.contains("multi_step_rabi_MHz"))
        get(j, "multi_step_rabi_MHz", mhz, where), c.settings.multi_step_rabi_hz = mhz * 1e6;
    get(j, "cnot_phase_rad", c.settings.cnot_phase, where);
}

Protocol protocol_from(const json& j, const std::string& where) {
    try {
        return parse_protocol(j.get<std::string>());
    } catch (const json::exception& e) {
        throw ConfigError(where + ": " + e.what());
    }
}

}  // namespace

void ExperimentConfig::validate() const {
    if (threads < 1) throw ConfigError("threads must be >= 1");
    if (output.empty()) throw ConfigError("no output path (set \"output\" or pass --out)");
    if (n_samples < 1) throw ConfigError("n_samples must be >= 1");
    if (!(max_failure_rate >= 0.0 && max_failure_rate <= 1.0)) throw ConfigError("max_failure_rate must be in [0, 1]");
    if (trajectory_stride < 1) throw ConfigError("trajectory_stride must be >= 1");
    if (!(tau_tr_ns >= 0.0) || !std::isfinite(tau_tr_ns)) throw ConfigError("tau_tr_ns must be >= 0");
    if (!std::isfinite(strong_vm_mv)) throw ConfigError("strong_V_M_mV must be finite");
    auto nonneg = [](const std::vector<double>& v, const char* name) {
        if (v.empty()) throw ConfigError(std::string(name) + " grid is empty");
        for (double x : v)
            if (!(x >= 0.0) || !std::isfinite(x)) throw ConfigError(std::string(name) + " values must be >= 0");
    };
    switch (experiment) {
        case Experiment::Stability:
            stability.v_l_values();
            stability.v_r_values();
            break;
        case Experiment::JSweep:
            if (!(vm_step_mv > 0.0) || !(vm_max_mv >= vm_min_mv)) throw ConfigError("V_M sweep range is empty");
            break;
        case Experiment::Gate: break;
        case Experiment::NoiseSweep:
            if (protocols.empty()) throw ConfigError("noise_sweep.protocols is empty");
            nonneg(sigmas_uev, "sigma_ueV");
            break;
        case Experiment::TransitionSweep:
            nonneg(tau_tr_grid_ns, "tau_tr_ns");
            nonneg({transition_sigma_uev}, "sigma_ueV");
            break;
        case Experiment::FluctStats:
            nonneg(sigmas_uev, "sigma_ueV");
            if (fluct_vm_mv.empty()) throw ConfigError("fluct_stats.V_M_mV is empty");
            break;
    }
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path, Experiment experiment) {
    const std::string text = read_file(path);
    json j;
    try {
        j = json::parse(text, nullptr, true, /*ignore_comments=*/true);
    } catch (const json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    const std::string top = path.filename().string();
    check_keys(j,
               {"device", "field_map", "seed", "threads", "integrator", "nominal", "output", "protocol", "stability",
                "j_sweep", "gate", "noise_sweep", "transition_sweep", "fluct_stats"},
               top);

    ExperimentConfig c;
    c.experiment = experiment;
    const auto base = path.parent_path();
    auto resolve = [&](const std::string& p) {
        std::filesystem::path q(p);
        return q.is_absolute() ? q : base / q;
    };
    if (!j.contains("device")) throw ConfigError(top + ": missing \"device\"");
    c.device_file = resolve(j.at("device").get<std::string>());
    if (j.contains("field_map")) c.field_map_file = resolve(j.at("field_map").get<std::string>());
    get(j, "seed", c.seed, top);
    get(j, "threads", c.threads, top);
    if (j.contains("integrator")) {
        const auto s = j.at("integrator").get<std::string>();
        if (s == "lab") c.integrator = Integrator::Lab;
        else if (s == "rwa") c.integrator = Integrator::Rotating;
        else throw ConfigError("integrator must be \"lab\" or \"rwa\"");
    }
    if (j.contains("nominal")) {
        const auto s = j.at("nominal").get<std::string>();
        if (s == "reference") c.nominal = NominalSource::Reference;
        else if (s == "device") c.nominal = NominalSource::Device;
        else throw ConfigError("nominal must be \"reference\" or \"device\"");
    }
    if (j.contains("output")) c.output = resolve(j.at("output").get<std::string>());

    const std::initializer_list<const char*> protocol_keys = {
        "strong_V_M_mV", "tau_tr_ns", "rabi_MHz", "cnot_rabi_MHz", "addressability_MHz", "multi_step_rabi_MHz",
        "cnot_phase_rad"};
    if (j.contains("protocol")) {
        check_keys(j["protocol"], protocol_keys, "protocol");
        get_protocol_settings(j["protocol"], c, "protocol");
    }

    if (j.contains("stability")) {
        const json& s = j["stability"];
        check_keys(s, {"V_L_mV", "V_R_mV", "V_M_mV", "V_B_mV"}, "stability");
        StabilityWindow w;
        double l0 = w.v_l_min * 1e3, l1 = w.v_l_max * 1e3, ls = w.v_l_step * 1e3;
        double r0 = w.v_r_min * 1e3, r1 = w.v_r_max * 1e3, rs = w.v_r_step * 1e3;
        double vm = w.v_m * 1e3, vb = w.v_b * 1e3;
        get_range(s, "V_L_mV", l0, l1, ls, "stability");
        get_range(s, "V_R_mV", r0, r1, rs, "stability");
        get(s, "V_M_mV", vm, "stability");
        get(s, "V_B_mV", vb, "stability");
        c.stability = {l0 * 1e-3, l1 * 1e-3, ls * 1e-3, r0 * 1e-3, r1 * 1e-3, rs * 1e-3, vm * 1e-3, vb * 1e-3,
                       w.drain};
    }
    if (j.contains("j_sweep")) {
        const json& s = j["j_sweep"];
        check_keys(s, {"V_M_mV"}, "j_sweep");
        get_range(s, "V_M_mV", c.vm_min_mv, c.vm_max_mv, c.vm_step_mv, "j_sweep");
    }
    if (j.contains("gate")) {
        const json& s = j["gate"];
        check_keys(s, {"protocol", "trajectory_stride"}, "gate");
        if (s.contains("protocol")) c.protocol = protocol_from(s["protocol"], "gate.protocol");
        get(s, "trajectory_stride", c.trajectory_stride, "gate");
    }
    // Section-specific protocol knobs only apply to the experiment being run.
    if (j.contains("noise_sweep")) {
        const json& s = j["noise_sweep"];
        check_keys(s, {"protocols", "sigma_ueV", "n_samples", "max_failure_rate", "strong_V_M_mV", "tau_tr_ns"},
                   "noise_sweep");
        if (experiment == Experiment::NoiseSweep) {
            if (s.contains("protocols")) {
                if (!s["protocols"].is_array()) throw ConfigError("noise_sweep.protocols must be a list");
                c.protocols.clear();
                for (const auto& p : s["protocols"]) c.protocols.push_back(protocol_from(p, "noise_sweep.protocols"));
            }
            get(s, "sigma_ueV", c.sigmas_uev, "noise_sweep");
            get(s, "n_samples", c.n_samples, "noise_sweep");
            get(s, "max_failure_rate", c.max_failure_rate, "noise_sweep");
            get(s, "strong_V_M_mV", c.strong_vm_mv, "noise_sweep");
            get(s, "tau_tr_ns", c.tau_tr_ns, "noise_sweep");
        }
    }
    if (j.contains("transition_sweep")) {
        const json& s = j["transition_sweep"];
        check_keys(s, {"protocol", "tau_tr_ns", "sigma_ueV", "n_samples", "max_failure_rate", "strong_V_M_mV"},
                   "transition_sweep");
        if (experiment == Experiment::TransitionSweep) {
            c.protocol = Protocol::CnotMulti;
            if (s.contains("protocol")) c.protocol = protocol_from(s["protocol"], "transition_sweep.protocol");
            get(s, "tau_tr_ns", c.tau_tr_grid_ns, "transition_sweep");
            get(s, "sigma_ueV", c.transition_sigma_uev, "transition_sweep");
            get(s, "n_samples", c.n_samples, "transition_sweep");
            get(s, "max_failure_rate", c.max_failure_rate, "transition_sweep");
            get(s, "strong_V_M_mV", c.strong_vm_mv, "transition_sweep");
        }
    }
    if (j.contains("fluct_stats")) {
        const json& s = j["fluct_stats"];
        check_keys(s, {"sigma_ueV", "V_M_mV", "n_samples"}, "fluct_stats");
        if (experiment == Experiment::FluctStats) {
            get(s, "sigma_ueV", c.sigmas_uev, "fluct_stats");
            get(s, "V_M_mV", c.fluct_vm_mv, "fluct_stats");
            get(s, "n_samples", c.n_samples, "fluct_stats");
        }
    }

    std::string hashed = text;
    hashed += '\0';
    hashed += read_file(c.device_file);
    if (!c.field_map_file.empty()) {
        hashed += '\0';
        hashed += read_file(c.field_map_file);
    }
    c.config_hash = fnv1a_hex(hashed);
    return c;
}

// ---------------------------------------------------------------------------------------------
// Spin-parameter curves

SpinParamCurve perturbed_curve(const SpinParamCurve& nominal, double weak_vm_mv, const SpinParams& weak_clean,
                               const SpinParams& weak_noisy, double strong_vm_mv, const SpinParams& strong_clean,
                               const SpinParams& strong_noisy) {
    struct Delta {
        double dl, dr, ratio;
    };
    auto delta = [](const SpinParams& clean, const SpinParams& noisy) {
        if (!(clean.j > 0.0) || !(noisy.j > 0.0)) throw ModelError("exchange must stay positive under noise");
        return Delta{noisy.ez_left - clean.ez_left, noisy.ez_right - clean.ez_right, noisy.j / clean.j};
    };
    const Delta w = delta(weak_clean, weak_noisy);
    const Delta s = delta(strong_clean, strong_noisy);
    auto at = [&](double vm) {
        if (strong_vm_mv == weak_vm_mv) return w;
        const double f = std::clamp((vm - weak_vm_mv) / (strong_vm_mv - weak_vm_mv), 0.0, 1.0);
        return Delta{w.dl + f * (s.dl - w.dl), w.dr + f * (s.dr - w.dr), w.ratio + f * (s.ratio - w.ratio)};
    };
    auto anchors = nominal.anchors();
    for (auto& a : anchors) {
        const Delta d = at(a.vm_mv);
        a.params.ez_left += d.dl;
        a.params.ez_right += d.dr;
        a.params.j *= d.ratio;
    }
    return SpinParamCurve(std::move(anchors));
}

SpinParamCurve nominal_curve(const ExperimentConfig& cfg, const DeviceModel* device, const DeviceBiases& pinit) {
    if (cfg.nominal == NominalSource::Reference) return SpinParamCurve::reference();
    if (device == nullptr) throw ConfigError("a device-derived nominal curve needs the device model");
    const double weak = cfg.settings.weak_vm_mv;
    std::vector<SpinParamCurve::Anchor> anchors;
    // Anchored at the weak and the configured strong bias; J is log-linear in between.
    DeviceBiases b = pinit;
    b.v_m = weak * 1e-3;
    anchors.push_back({weak, device->spin_params(b)});
    if (cfg.strong_vm_mv != weak) {
        b.v_m = cfg.strong_vm_mv * 1e-3;
        anchors.push_back({cfg.strong_vm_mv, device->spin_params(b)});
    }
    return SpinParamCurve(std::move(anchors));
}

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const PartialResultsError*>(&e)) return 4;
    if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const ScheduleError*>(&e)) return 2;
    if (dynamic_cast<const std::filesystem::filesystem_error*>(&e)) return 2;
    return 3;
}

// ---------------------------------------------------------------------------------------------
// Runner

namespace {

/// An experiment as a list of points whose rows are appended in point order.
struct Plan {
    std::vector<std::string> columns;
    std::vector<std::pair<std::string, std::string>> metadata;
    std::size_t n_points = 0;
    /// Rows per point, used to recognise completed points on resume (0: no partial resume).
    std::size_t rows_per_point = 0;
    /// Points are independent and may run concurrently; otherwise the point itself is parallel.
    bool parallel_points = false;
    std::function<std::vector<Row>(std::size_t)> compute;
    /// Extra sidecar content computed from the full row set.
    std::function<json(const std::vector<Row>&)> summarize;
};

struct Stats {
    double mean = 0.0, std = 0.0;
    int n = 0;
};

Stats stats_of(const std::vector<double>& v) {
    Stats s;
    s.n = static_cast<int>(v.size());
    if (v.empty()) return s;
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    if (*lo == *hi) return {*lo, 0.0, s.n};  // exact for noise-free runs
    for (double x : v) s.mean += x;
    s.mean /= s.n;
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.std = s.n > 1 ? std::sqrt(ss / (s.n - 1)) : 0.0;
    return s;
}

std::string csv_line(const Row& r) {
    std::string s;
    for (std::size_t k = 0; k < r.size(); ++k) {
        if (k) s += ',';
        s += r[k];
    }
    return s;
}

Row split_csv(const std::string& line) {
    Row r;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) r.push_back(cell);
    if (!line.empty() && line.back() == ',') r.emplace_back();
    return r;
}

json cell_json(const std::string& s) {
    if (s.empty()) return s;
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() + s.size() && std::isfinite(v)) {
        if (s.find_first_of(".eE") == std::string::npos && std::abs(v) < 9e15) return static_cast<long long>(v);
        return v;
    }
    return s;
}

void write_sidecar(const std::filesystem::path& path, const std::vector<std::pair<std::string, std::string>>& meta,
                   const std::vector<std::string>& columns, const std::vector<Row>& rows, bool complete,
                   const json& summary) {
    json j;
    json m = json::object();
    for (const auto& [k, v] : meta) m[k] = cell_json(v);
    j["metadata"] = m;
    j["complete"] = complete;
    j["columns"] = columns;
    json body = json::array();
    for (const auto& r : rows) {
        json row = json::array();
        for (const auto& c : r) row.push_back(cell_json(c));
        body.push_back(std::move(row));
    }
    j["rows"] = std::move(body);
    if (!summary.is_null()) j["summary"] = summary;
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

/// Metadata lines that must match for a resumed run to keep existing rows.
bool same_run(const std::vector<std::pair<std::string, std::string>>& meta, const std::string& header_line,
              const std::filesystem::path& path, std::vector<Row>& rows_out) {
    std::ifstream in(path);
    if (!in) return false;
    std::vector<std::string> expected;
    for (const auto& [k, v] : meta) expected.push_back("# " + k + ": " + v);
    std::string line;
    std::size_t k = 0;
    bool header_seen = false;
    std::vector<Row> rows;
    while (std::getline(in, line)) {
        if (!header_seen) {
            if (line.rfind("# ", 0) == 0) {
                if (k >= expected.size() || line != expected[k]) return false;
                ++k;
                continue;
            }
            if (k != expected.size() || line != header_line) return false;
            header_seen = true;
            continue;
        }
        if (in.eof()) break;  // last line without newline: possibly truncated
        rows.push_back(split_csv(line));
    }
    if (!header_seen) return false;
    rows_out = std::move(rows);
    return true;
}

SweepResult run_plan(const ExperimentConfig& cfg, Plan plan, const RunOptions& opts) {
    SweepResult res;
    res.columns = plan.columns;
    res.metadata = {{"experiment", to_string(cfg.experiment)},
                    {"config_hash", cfg.config_hash},
                    {"seed", fmt(cfg.seed)},
                    {"version", DQD_VERSION},
                    {"integrator", cfg.integrator == Integrator::Lab ? "lab" : "rwa"}};
    for (auto& m : plan.metadata) res.metadata.push_back(m);
    res.metadata.emplace_back("points", fmt(static_cast<long long>(plan.n_points)));

    const std::string header = csv_line(plan.columns);
    std::size_t first_point = 0;
    if (opts.resume && plan.rows_per_point > 0 && std::filesystem::exists(cfg.output)) {
        std::vector<Row> old;
        if (same_run(res.metadata, header, cfg.output, old)) {
            first_point = std::min(plan.n_points, old.size() / plan.rows_per_point);
            old.resize(first_point * plan.rows_per_point);
            res.rows = std::move(old);
            if (opts.log && first_point > 0)
                opts.log("resuming after " + std::to_string(first_point) + " of " + std::to_string(plan.n_points) +
                         " points");
        } else if (opts.log) {
            opts.log("existing output does not match this configuration; starting over");
        }
    }

    if (cfg.output.has_parent_path()) std::filesystem::create_directories(cfg.output.parent_path());
    std::ofstream out(cfg.output, std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + cfg.output.string());
    for (const auto& [k, v] : res.metadata) out << "# " << k << ": " << v << '\n';
    out << header << '\n';
    for (const auto& r : res.rows) out << csv_line(r) << '\n';
    out.flush();

    auto sidecar = std::filesystem::path(cfg.output.string() + ".json");
    auto fail = [&](const std::string& what, bool config_error) -> void {
        write_sidecar(sidecar, res.metadata, res.columns, res.rows, false, json());
        if (config_error) throw ConfigError(what);
        if (!res.rows.empty()) throw PartialResultsError(what + " (" + std::to_string(res.rows.size()) +
                                                         " rows written to " + cfg.output.string() + ")");
    };

    const std::size_t batch = plan.parallel_points ? static_cast<std::size_t>(cfg.threads) : 1;
    for (std::size_t p0 = first_point; p0 < plan.n_points; p0 += batch) {
        const std::size_t p1 = std::min(plan.n_points, p0 + batch);
        std::vector<std::vector<Row>> rows(p1 - p0);
        std::vector<std::exception_ptr> errors(p1 - p0);
        auto work = [&](std::size_t p) {
            try {
                rows[p - p0] = plan.compute(p);
            } catch (...) {
                errors[p - p0] = std::current_exception();
            }
        };
        if (p1 - p0 == 1) {
            work(p0);
        } else {
            std::vector<std::thread> pool;
            for (std::size_t p = p0; p < p1; ++p) pool.emplace_back(work, p);
            for (auto& t : pool) t.join();
        }
        for (std::size_t p = p0; p < p1; ++p) {
            if (errors[p - p0]) {
                try {
                    std::rethrow_exception(errors[p - p0]);
                } catch (const ConfigError& e) {
                    fail(e.what(), true);
                } catch (const ScheduleError& e) {
                    fail(e.what(), true);
                } catch (const std::exception& e) {
                    fail(e.what(), false);
                    throw;
                }
            }
            for (auto& r : rows[p - p0]) {
                out << csv_line(r) << '\n';
                res.rows.push_back(std::move(r));
            }
            out.flush();
            if (opts.log) opts.log("point " + std::to_string(p + 1) + "/" + std::to_string(plan.n_points) + " done");
        }
    }
    out.close();
    json summary = plan.summarize ? plan.summarize(res.rows) : json();
    write_sidecar(sidecar, res.metadata, res.columns, res.rows, true, summary);
    return res;
}

std::unique_ptr<DeviceModel> load_device_model(const ExperimentConfig& cfg, DeviceBiases* pinit = nullptr) {
    DeviceFile f = load_device_file(cfg.device_file);
    if (pinit) *pinit = f.biases;
    if (cfg.field_map_file.empty()) throw ConfigError("this experiment needs \"field_map\"");
    return std::make_unique<DeviceModel>(f.spec, f.materials, MagnetFieldMap::load(cfg.field_map_file));
}

// ---------------------------------------------------------------------------------------------
// Experiments

SweepResult run_stability(const ExperimentConfig& cfg, const RunOptions& opts) {
    const DeviceFile f = load_device_file(cfg.device_file);
    const StabilityWindow w = cfg.stability;
    const auto v_l = w.v_l_values();
    const auto v_r = w.v_r_values();
    Plan plan;
    plan.columns = {"V_L", "V_R", "n_L", "n_R"};
    plan.metadata = {{"V_M", fmt(w.v_m)}, {"V_B", fmt(w.v_b)}, {"units", "V"}};
    plan.n_points = v_r.size();
    plan.rows_per_point = v_l.size();
    plan.parallel_points = true;
    plan.compute = [&, v_r](std::size_t p) {
        StabilityWindow row = w;
        row.v_r_min = row.v_r_max = v_r[p];
        const StabilityDiagram d = charge_stability(f.spec, f.materials, row, ScfOptions{}, 1);
        std::vector<Row> rows;
        for (std::size_t c = 0; c < d.v_l.size(); ++c)
            rows.push_back({fmt(d.v_l[c]), fmt(d.v_r[0]), fmt(d.n_l[c]), fmt(d.n_r[c])});
        return rows;
    };
    plan.summarize = [v_l, v_r](const std::vector<Row>& rows) {
        StabilityDiagram d;
        d.v_l = v_l;
        d.v_r = v_r;
        for (const auto& r : rows) {
            d.n_l.push_back(std::stoi(r[2]));
            d.n_r.push_back(std::stoi(r[3]));
        }
        json s;
        json regimes = json::array();
        for (auto [a, b] : d.regimes()) regimes.push_back({a, b});
        s["regimes"] = regimes;
        json bounds = json::array();
        for (const auto& b : stability_boundaries(d)) {
            json pts = json::array();
            for (auto [x, y] : b.points) pts.push_back({x, y});
            bounds.push_back({{"label", b.label}, {"points", pts}});
        }
        s["boundaries"] = bounds;
        return s;
    };
    return run_plan(cfg, std::move(plan), opts);
}

SweepResult run_j_sweep(const ExperimentConfig& cfg, const RunOptions& opts) {
    DeviceBiases pinit;
    const auto owned = load_device_model(cfg, &pinit);
    const DeviceModel& model = *owned;
    std::vector<double> vms;
    const long n = std::lround(std::floor((cfg.vm_max_mv - cfg.vm_min_mv) / cfg.vm_step_mv + 1e-9)) + 1;
    for (long k = 0; k < n; ++k) vms.push_back(cfg.vm_min_mv + k * cfg.vm_step_mv);
    Plan plan;
    plan.columns = {"V_M_mV", "E_ZL_GHz", "E_ZR_GHz", "J_Hz", "n_L", "n_R"};
    plan.n_points = vms.size();
    plan.rows_per_point = 1;
    plan.parallel_points = true;
    plan.compute = [&](std::size_t p) {
        DeviceBiases b = pinit;
        b.v_m = vms[p] * 1e-3;
        const auto sol = model.solution(b);
        const DotRegions dots = find_dots(*sol);
        const SpinParams sp = model.spin_params(b);
        return std::vector<Row>{{fmt(vms[p]), fmt(sp.ez_left_ghz()), fmt(sp.ez_right_ghz()), fmt(sp.j),
                                 fmt(dots.n_left()), fmt(dots.n_right())}};
    };
    return run_plan(cfg, std::move(plan), opts);
}

EvolveOptions evolve_options(const ExperimentConfig& cfg) {
    EvolveOptions o;
    o.integrator = cfg.integrator;
    return o;
}

SweepResult run_gate(const ExperimentConfig& cfg, const RunOptions& opts) {
    std::unique_ptr<DeviceModel> model;
    DeviceBiases pinit;
    if (cfg.nominal == NominalSource::Device) model = load_device_model(cfg, &pinit);
    const SpinParamCurve nominal = nominal_curve(cfg, model.get(), pinit);
    const CompiledProtocol cp =
        compile_protocol({cfg.protocol, cfg.strong_vm_mv, cfg.tau_tr_ns, cfg.settings}, nominal.source());
    EvolveOptions eo = evolve_options(cfg);
    eo.record_trajectory = true;
    eo.trajectory_stride = cfg.trajectory_stride;
    const UnitaryResult r = evolve(cp.schedule, nominal.source(), eo);
    const double fidelity = gate_fidelity(r.u, cp.ideal);

    Plan plan;
    plan.columns = {"t_ns", "p_uu", "p_ud", "p_du", "p_dd", "re_uu", "im_uu", "re_ud", "im_ud", "re_du", "im_du",
                    "re_dd", "im_dd"};
    plan.metadata = {{"protocol", to_string(cfg.protocol)},
                     {"strong_V_M_mV", fmt(cfg.strong_vm_mv)},
                     {"tau_tr_ns", fmt(cfg.tau_tr_ns)},
                     {"gate_time_ns", fmt(r.elapsed_ns)},
                     {"frame_GHz", fmt(r.frame_hz * 1e-9)},
                     {"max_dt_ps", fmt(r.max_dt_s * 1e12)},
                     {"fidelity", fmt(fidelity)}};
    plan.n_points = 1;
    plan.compute = [&](std::size_t) {
        std::vector<Row> rows;
        for (const auto& s : r.trajectory) {
            Row row{fmt(s.t_ns)};
            for (int i = 0; i < 4; ++i) row.push_back(fmt(std::norm(s.amplitudes(i))));
            for (int i = 0; i < 4; ++i) {
                row.push_back(fmt(s.amplitudes(i).real()));
                row.push_back(fmt(s.amplitudes(i).imag()));
            }
            rows.push_back(std::move(row));
        }
        return rows;
    };
    return run_plan(cfg, std::move(plan), opts);
}

/// Noisy spin-parameter curves of the device, one per noise sample.
class NoiseCampaign {
public:
    NoiseCampaign(const ExperimentConfig& cfg, const DeviceModel& model, const DeviceBiases& pinit,
                  SpinParamCurve nominal)
        : cfg_(cfg), map_(model.field_map()), nominal_(std::move(nominal)) {
        DeviceBiases b = pinit;
        weak_vm_ = cfg.settings.weak_vm_mv;
        b.v_m = weak_vm_ * 1e-3;
        weak_ = model.solution(b);
        b.v_m = cfg.strong_vm_mv * 1e-3;
        strong_ = model.solution(b);
        weak_clean_ = spin_params(*weak_, map_);
        strong_clean_ = spin_params(*strong_, map_);
    }

    /// Curve for sample `k` (1-based) at noise level sigma.
    SpinParamCurve curve(double sigma_uev, int k) const {
        if (sigma_uev == 0.0) return nominal_;
        const NoiseConfig nc{sigma_uev, cfg_.seed, cfg_.n_samples};
        const NoiseField noise = sample_noise(weak_->grid, nc, k);
        const SpinParams w = perturbed_spin_params(*weak_, noise, map_);
        const SpinParams s = perturbed_spin_params(*strong_, noise, map_);
        return perturbed_curve(nominal_, weak_vm_, weak_clean_, w, cfg_.strong_vm_mv, strong_clean_, s);
    }

private:
    const ExperimentConfig& cfg_;
    const MagnetFieldMap& map_;
    SpinParamCurve nominal_;
    double weak_vm_ = 400.0;
    std::shared_ptr<const ConvergedSolution> weak_, strong_;
    SpinParams weak_clean_, strong_clean_;
};

/// Runs `sample(k)` for k = 1..n on `threads` workers. out[k-1] holds the result, or
/// msgs[k-1] the failure message.
template <class T>
void parallel_samples(int n, int threads, const std::function<T(int)>& sample, std::vector<std::optional<T>>& out,
                      std::vector<std::string>& msgs) {
    out.assign(n, std::nullopt);
    msgs.assign(n, std::string());
    std::atomic<int> next{0};
    auto worker = [&] {
        for (int i = next++; i < n; i = next++) {
            try {
                out[i] = sample(i + 1);
            } catch (const std::exception& e) {
                msgs[i] = "sample " + std::to_string(i + 1) + ": " + e.what();
            }
        }
    };
    std::vector<std::thread> pool;
    for (int t = 1; t < std::min(threads, n); ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
}

/// Logs the failed samples and throws when more than `max_rate` of them failed. Returns the count.
int check_failures(const std::vector<std::string>& msgs, double max_rate, const std::string& where,
                   const RunOptions& opts) {
    std::vector<std::string> failures;
    for (const auto& m : msgs)
        if (!m.empty()) failures.push_back(m);
    const int n = static_cast<int>(msgs.size());
    if (opts.log)
        for (const auto& f : failures) opts.log(where + ", " + f);
    if (static_cast<double>(failures.size()) > max_rate * n) {
        std::string msg = where + ": " + std::to_string(failures.size()) + " of " + std::to_string(n) +
                          " samples failed (limit " + fmt(max_rate * 100.0) + "%)";
        for (std::size_t k = 0; k < std::min<std::size_t>(3, failures.size()); ++k) msg += "; " + failures[k];
        throw NumericalError(msg);
    }
    return static_cast<int>(failures.size());
}

SweepResult run_noise_sweep(const ExperimentConfig& cfg, const RunOptions& opts) {
    DeviceBiases pinit;
    const auto owned = load_device_model(cfg, &pinit);
    const DeviceModel& model = *owned;
    const SpinParamCurve nominal = nominal_curve(cfg, &model, pinit);
    const NoiseCampaign campaign(cfg, model, pinit, nominal);
    std::vector<CompiledProtocol> compiled;
    for (Protocol p : cfg.protocols)
        compiled.push_back(compile_protocol({p, cfg.strong_vm_mv, cfg.tau_tr_ns, cfg.settings}, nominal.source()));
    const EvolveOptions eo = evolve_options(cfg);

    Plan plan;
    plan.columns = {"protocol", "sigma_ueV", "strong_V_M_mV", "tau_tr_ns", "mean_fidelity", "std_fidelity",
                    "n",        "failures",  "seed"};
    plan.n_points = cfg.sigmas_uev.size();
    plan.rows_per_point = cfg.protocols.size();
    plan.compute = [&](std::size_t p) {
        const double sigma = cfg.sigmas_uev[p];
        const std::size_t np = compiled.size();
        std::vector<std::optional<std::vector<double>>> res;
        std::vector<std::string> failures;
        parallel_samples<std::vector<double>>(
            cfg.n_samples, cfg.threads,
            [&](int k) {
                const SpinParamCurve c = campaign.curve(sigma, k);
                std::vector<double> f(np);
                for (std::size_t q = 0; q < np; ++q)
                    f[q] = gate_fidelity(evolve(compiled[q].schedule, c.source(), eo).u, compiled[q].ideal);
                return f;
            },
            res, failures);
        const int n_failed = check_failures(failures, cfg.max_failure_rate, "sigma " + fmt(sigma) + " ueV", opts);
        std::vector<Row> rows;
        for (std::size_t q = 0; q < np; ++q) {
            std::vector<double> v;
            for (const auto& r : res)
                if (r) v.push_back((*r)[q]);
            const Stats s = stats_of(v);
            rows.push_back({to_string(cfg.protocols[q]), fmt(sigma), fmt(cfg.strong_vm_mv), fmt(cfg.tau_tr_ns),
                            fmt(s.mean), fmt(s.std), fmt(s.n), fmt(n_failed), fmt(cfg.seed)});
        }
        return rows;
    };
    return run_plan(cfg, std::move(plan), opts);
}

SweepResult run_transition_sweep(const ExperimentConfig& cfg, const RunOptions& opts) {
    DeviceBiases pinit;
    const auto owned = load_device_model(cfg, &pinit);
    const DeviceModel& model = *owned;
    const SpinParamCurve nominal = nominal_curve(cfg, &model, pinit);
    const NoiseCampaign campaign(cfg, model, pinit, nominal);
    const EvolveOptions eo = evolve_options(cfg);
    const double sigma = cfg.transition_sigma_uev;

    // The noise realizations do not depend on tau_TR: draw them once, on first use.
    std::vector<std::optional<SpinParamCurve>> curves;
    std::vector<std::string> curve_failures;
    bool drawn = false;

    Plan plan;
    plan.columns = {"protocol", "tau_tr_ns", "sigma_ueV", "strong_V_M_mV", "mean_fidelity", "std_fidelity",
                    "n",        "failures",  "seed"};
    plan.n_points = cfg.tau_tr_grid_ns.size();
    plan.rows_per_point = 1;
    plan.compute = [&](std::size_t p) {
        if (!drawn) {
            parallel_samples<SpinParamCurve>(
                cfg.n_samples, cfg.threads, [&](int k) { return campaign.curve(sigma, k); }, curves, curve_failures);
            drawn = true;
        }
        const double tau = cfg.tau_tr_grid_ns[p];
        const CompiledProtocol cp =
            compile_protocol({cfg.protocol, cfg.strong_vm_mv, tau, cfg.settings}, nominal.source());
        std::vector<std::optional<double>> res;
        std::vector<std::string> failures;
        parallel_samples<double>(
            cfg.n_samples, cfg.threads,
            [&](int k) {
                const auto& c = curves[k - 1];
                if (!c) throw ModelError(curve_failures[k - 1]);
                return gate_fidelity(evolve(cp.schedule, c->source(), eo).u, cp.ideal);
            },
            res, failures);
        const int n_failed = check_failures(failures, cfg.max_failure_rate, "tau_TR " + fmt(tau) + " ns", opts);
        std::vector<double> v;
        for (const auto& r : res)
            if (r) v.push_back(*r);
        const Stats s = stats_of(v);
        return std::vector<Row>{{to_string(cfg.protocol), fmt(tau), fmt(sigma), fmt(cfg.strong_vm_mv), fmt(s.mean),
                                 fmt(s.std), fmt(s.n), fmt(n_failed), fmt(cfg.seed)}};
    };
    return run_plan(cfg, std::move(plan), opts);
}

SweepResult run_fluct_stats(const ExperimentConfig& cfg, const RunOptions& opts) {
    DeviceBiases pinit;
    const auto owned = load_device_model(cfg, &pinit);
    const DeviceModel& model = *owned;
    Plan plan;
    plan.columns = {"sigma_ueV", "V_M_mV", "quantity", "mean_Hz", "std_Hz", "rel_std", "min_Hz",
                    "max_Hz",    "n",      "failures", "seed"};
    plan.n_points = cfg.fluct_vm_mv.size() * cfg.sigmas_uev.size();
    plan.rows_per_point = 3;
    plan.compute = [&](std::size_t p) {
        const double vm = cfg.fluct_vm_mv[p / cfg.sigmas_uev.size()];
        const double sigma = cfg.sigmas_uev[p % cfg.sigmas_uev.size()];
        DeviceBiases b = pinit;
        b.v_m = vm * 1e-3;
        const FluctStats fs =
            fluctuation_stats(*model.solution(b), model.field_map(), {sigma, cfg.seed, cfg.n_samples}, cfg.threads);
        if (opts.log)
            for (const auto& m : fs.failure_messages) opts.log("V_M " + fmt(vm) + " mV, " + m);
        std::vector<Row> rows;
        auto add = [&](const char* name, const QuantityStats& q) {
            rows.push_back({fmt(sigma), fmt(vm), name, fmt(q.mean), fmt(q.std), fmt(q.mean != 0.0 ? q.std / q.mean : 0.0),
                            fmt(q.min), fmt(q.max), fmt(q.n), fmt(fs.failures), fmt(cfg.seed)});
        };
        add("E_ZL", fs.ez_left);
        add("E_ZR", fs.ez_right);
        add("J", fs.j);
        return rows;
    };
    return run_plan(cfg, std::move(plan), opts);
}

}  // namespace

SweepResult run_experiment(const ExperimentConfig& cfg, const RunOptions& opts) {
    cfg.validate();
    switch (cfg.experiment) {
        case Experiment::Stability: return run_stability(cfg, opts);
        case Experiment::JSweep: return run_j_sweep(cfg, opts);
        case Experiment::Gate: return run_gate(cfg, opts);
        case Experiment::NoiseSweep: return run_noise_sweep(cfg, opts);
        case Experiment::TransitionSweep: return run_transition_sweep(cfg, opts);
        case Experiment::FluctStats: return run_fluct_stats(cfg, opts);
    }
    throw ConfigError("unknown experiment");
}

}  // namespace dqd
