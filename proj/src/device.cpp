#include "dqd/device.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <set>

#include <nlohmann/json.hpp>

#include "dqd/errors.hpp"

namespace dqd {

namespace {

constexpr double kGeomTol = 1e-9;
const std::set<std::string> kElectrodeNames = {"B1", "L", "M", "R", "B2"};

std::string material_name(const Material& m) { return m.kind == MaterialKind::Si ? "Si" : "SiGe"; }

}  // namespace

double DeviceSpec::height_nm() const {
    double h = 0.0;
    for (const auto& l : layers) h += l.thickness_nm;
    return h;
}

const Electrode& DeviceSpec::electrode(const std::string& name) const {
    for (const auto& e : electrodes)
        if (e.name == name) return e;
    throw ConfigError("device has no electrode named '" + name + "'");
}

void DeviceSpec::validate() const {
    if (layers.empty()) throw ConfigError("device has no layers");
    for (const auto& l : layers) {
        if (!(l.thickness_nm > 0.0)) throw ConfigError("layer '" + l.name + "' has non-positive thickness");
        if (!(l.material.ge_fraction >= 0.0 && l.material.ge_fraction <= 1.0))
            throw ConfigError("layer '" + l.name + "' has Ge fraction outside [0, 1]");
    }
    if (grid.nx < 1 || grid.ny < 1 || !(grid.dx_nm > 0.0) || !(grid.dy_nm > 0.0))
        throw ConfigError("grid needs positive nx, ny, dx, dy");
    if (std::abs(grid.ny * grid.dy_nm - height_nm()) > 1e-6 * height_nm())
        throw ConfigError("grid height ny*dy does not match the layer stack thickness");
    if (!(temperature_k > 0.0)) throw ConfigError("temperature must be positive");

    std::vector<Electrode> sorted = electrodes;
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.start_nm < b.start_nm; });
    std::set<std::string> seen;
    for (std::size_t k = 0; k < sorted.size(); ++k) {
        const auto& e = sorted[k];
        if (!kElectrodeNames.count(e.name)) throw ConfigError("unknown electrode '" + e.name + "'");
        if (!seen.insert(e.name).second) throw ConfigError("duplicate electrode '" + e.name + "'");
        if (!(e.end_nm > e.start_nm)) throw ConfigError("electrode '" + e.name + "' has an empty span");
        if (e.start_nm < -kGeomTol || e.end_nm > width_nm() + kGeomTol)
            throw ConfigError("electrode '" + e.name + "' lies outside the domain");
        if (k > 0 && e.start_nm < sorted[k - 1].end_nm - kGeomTol)
            throw ConfigError("electrodes '" + sorted[k - 1].name + "' and '" + e.name + "' overlap");
    }
    if (!(source_drain.bottom_nm > source_drain.top_nm) || source_drain.top_nm < 0.0 ||
        source_drain.bottom_nm > height_nm() + kGeomTol)
        throw ConfigError("source/drain contact depth range is invalid");
}

double MaterialParams::permittivity(const Material& m) const {
    return m.kind == MaterialKind::Si ? eps_si : eps_si + (eps_ge - eps_si) * m.ge_fraction;
}

double MaterialParams::cb_offset(const Material& m) const {
    return m.kind == MaterialKind::Si ? 0.0 : cb_offset_per_ge_ev * m.ge_fraction;
}

double MaterialParams::schottky_barrier(const std::string& electrode) const {
    double phi = schottky_barrier_ev;
    for (const auto& [name, delta] : electrode_barrier_offsets)
        if (name == electrode) phi += delta;
    return phi;
}

void MaterialParams::validate() const {
    if (!(eps_si > 1.0 && eps_ge > 1.0)) throw ConfigError("permittivities must exceed 1");
    if (!(mass_x > 0.0 && mass_y > 0.0 && mass_z > 0.0 && mass_dos > 0.0))
        throw ConfigError("effective masses must be positive");
    if (!(schottky_barrier_ev >= 0.0)) throw ConfigError("Schottky barrier must be non-negative");
    for (const auto& [name, delta] : electrode_barrier_offsets)
        if (!(schottky_barrier(name) >= 0.0)) throw ConfigError("Schottky barrier of '" + name + "' is negative");
}

int Grid::quantum_cell_count() const {
    return static_cast<int>(std::count(region.begin(), region.end(), Region::Quantum));
}

Grid build_grid(const DeviceSpec& spec) {
    spec.validate();
    Grid g;
    g.nx = spec.grid.nx;
    g.ny = spec.grid.ny;
    g.dx = spec.grid.dx_nm;
    g.dy = spec.grid.dy_nm;
    g.temperature_k = spec.temperature_k;

    // Row -> layer by cell centre; every layer must own at least two rows.
    std::vector<int> row_layer(g.ny);
    std::vector<int> rows_per_layer(spec.layers.size(), 0);
    for (int j = 0; j < g.ny; ++j) {
        const double yc = g.y(j);
        double top = 0.0;
        int k = 0;
        for (; k < static_cast<int>(spec.layers.size()) - 1; ++k) {
            if (yc < top + spec.layers[k].thickness_nm) break;
            top += spec.layers[k].thickness_nm;
        }
        row_layer[j] = k;
        ++rows_per_layer[k];
    }
    for (std::size_t k = 0; k < spec.layers.size(); ++k)
        if (rows_per_layer[k] < 2)
            throw ConfigError("grid too coarse: layer '" + spec.layers[k].name + "' spans " +
                              std::to_string(rows_per_layer[k]) + " cell(s), need at least 2");

    g.layer.resize(g.size());
    g.region.resize(g.size());
    g.material.resize(g.size());
    for (int j = 0; j < g.ny; ++j) {
        const Layer& l = spec.layers[row_layer[j]];
        for (int i = 0; i < g.nx; ++i) {
            const int c = g.index(i, j);
            g.layer[c] = row_layer[j];
            g.material[c] = l.material;
            g.region[c] = l.quantum ? Region::Quantum : Region::Bulk;
        }
    }

    for (const auto& e : spec.electrodes) g.electrode_names.push_back(e.name);
    g.top_electrode.assign(g.nx, -1);
    for (int i = 0; i < g.nx; ++i) {
        const double xc = g.x(i);
        for (std::size_t k = 0; k < spec.electrodes.size(); ++k)
            if (xc >= spec.electrodes[k].start_nm && xc < spec.electrodes[k].end_nm)
                g.top_electrode[i] = static_cast<int>(k);
    }
    g.contact_row.assign(g.ny, false);
    for (int j = 0; j < g.ny; ++j) {
        const double yc = g.y(j);
        g.contact_row[j] = yc >= spec.source_drain.top_nm && yc < spec.source_drain.bottom_nm;
    }
    return g;
}

void write_field_csv(std::ostream& os, const GridField& f, const std::string& value_name) {
    os << "x_nm,y_nm," << value_name << '\n';
    os << std::setprecision(12);
    for (int j = 0; j < f.ny; ++j)
        for (int i = 0; i < f.nx; ++i) os << (i + 0.5) * f.dx << ',' << (j + 0.5) * f.dy << ',' << f(i, j) << '\n';
}

// ---------------------------------------------------------------------------------------------
// JSON schema

namespace {

Material material_from_json(const nlohmann::json& j) {
    Material m;
    const std::string kind = j.at("material").get<std::string>();
    if (kind == "Si") {
        m.kind = MaterialKind::Si;
    } else if (kind == "SiGe") {
        m.kind = MaterialKind::SiGe;
        m.ge_fraction = j.value("ge_fraction", 0.30);
    } else {
        throw ConfigError("unknown material '" + kind + "'");
    }
    return m;
}

template <class F>
auto guarded(const char* what, F&& f) {
    try {
        return f();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("invalid ") + what + ": " + e.what());
    }
}

}  // namespace

DeviceSpec device_spec_from_json(const nlohmann::json& j) {
    return guarded("device description", [&] {
        DeviceSpec s;
        for (const auto& lj : j.at("layers")) {
            Layer l;
            l.name = lj.value("name", std::string{});
            l.material = material_from_json(lj);
            l.thickness_nm = lj.at("thickness_nm").get<double>();
            l.quantum = lj.value("quantum", l.material.kind == MaterialKind::Si && l.thickness_nm <= 20.0);
            s.layers.push_back(l);
        }
        for (const auto& ej : j.at("electrodes"))
            s.electrodes.push_back({ej.at("name").get<std::string>(), ej.at("start_nm").get<double>(),
                                    ej.at("end_nm").get<double>()});
        const auto& sd = j.at("source_drain");
        s.source_drain = {sd.at("top_nm").get<double>(), sd.at("bottom_nm").get<double>()};
        const auto& gj = j.at("grid");
        s.grid = {gj.at("nx").get<int>(), gj.at("ny").get<int>(), gj.at("dx_nm").get<double>(),
                  gj.at("dy_nm").get<double>()};
        s.temperature_k = j.value("temperature_K", 1.5);
        s.validate();
        return s;
    });
}

MaterialParams material_params_from_json(const nlohmann::json& j) {
    return guarded("material parameters", [&] {
        MaterialParams m;
        m.eps_si = j.value("eps_si", m.eps_si);
        m.eps_ge = j.value("eps_ge", m.eps_ge);
        m.cb_offset_per_ge_ev = j.value("cb_offset_per_ge_eV", m.cb_offset_per_ge_ev);
        m.mass_x = j.value("mass_x", m.mass_x);
        m.mass_y = j.value("mass_y", m.mass_y);
        m.mass_z = j.value("mass_z", m.mass_z);
        m.mass_dos = j.value("mass_dos", m.mass_dos);
        m.schottky_barrier_ev = j.value("schottky_barrier_eV", m.schottky_barrier_ev);
        if (j.contains("electrode_barrier_offsets_eV"))
            for (const auto& [k, v] : j.at("electrode_barrier_offsets_eV").items())
                m.electrode_barrier_offsets.emplace_back(k, v.get<double>());
        m.fermi_level_ev = j.value("fermi_level_eV", m.fermi_level_ev);
        m.validate();
        return m;
    });
}

DeviceBiases biases_from_json(const nlohmann::json& j) {
    return guarded("biases", [&] {
        DeviceBiases b;
        b.v_b = j.value("V_B", b.v_b);
        b.v_l = j.value("V_L", b.v_l);
        b.v_m = j.value("V_M", b.v_m);
        b.v_r = j.value("V_R", b.v_r);
        b.drain = j.value("drain", b.drain);
        if (!b.valid()) throw ConfigError("biases must be finite with a non-negative drain bias");
        return b;
    });
}

nlohmann::json to_json(const DeviceSpec& s) {
    nlohmann::json j;
    for (const auto& l : s.layers) {
        nlohmann::json lj = {{"name", l.name}, {"material", material_name(l.material)},
                             {"thickness_nm", l.thickness_nm}, {"quantum", l.quantum}};
        if (l.material.kind == MaterialKind::SiGe) lj["ge_fraction"] = l.material.ge_fraction;
        j["layers"].push_back(lj);
    }
    for (const auto& e : s.electrodes)
        j["electrodes"].push_back({{"name", e.name}, {"start_nm", e.start_nm}, {"end_nm", e.end_nm}});
    j["source_drain"] = {{"top_nm", s.source_drain.top_nm}, {"bottom_nm", s.source_drain.bottom_nm}};
    j["grid"] = {{"nx", s.grid.nx}, {"ny", s.grid.ny}, {"dx_nm", s.grid.dx_nm}, {"dy_nm", s.grid.dy_nm}};
    j["temperature_K"] = s.temperature_k;
    return j;
}

nlohmann::json to_json(const MaterialParams& m) {
    nlohmann::json j = {{"eps_si", m.eps_si},
                        {"eps_ge", m.eps_ge},
                        {"cb_offset_per_ge_eV", m.cb_offset_per_ge_ev},
                        {"mass_x", m.mass_x},
                        {"mass_y", m.mass_y},
                        {"mass_z", m.mass_z},
                        {"mass_dos", m.mass_dos},
                        {"schottky_barrier_eV", m.schottky_barrier_ev},
                        {"fermi_level_eV", m.fermi_level_ev}};
    if (!m.electrode_barrier_offsets.empty()) {
        nlohmann::json o = nlohmann::json::object();
        for (const auto& [k, v] : m.electrode_barrier_offsets) o[k] = v;
        j["electrode_barrier_offsets_eV"] = o;
    }
    return j;
}

DeviceFile load_device_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open device file " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in, nullptr, true, /*ignore_comments=*/true);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("cannot parse " + path.string() + ": " + e.what());
    }
    if (!j.is_object() || !j.contains("device")) throw ConfigError(path.string() + " has no 'device' section");
    DeviceFile f;
    f.spec = device_spec_from_json(j.at("device"));
    if (j.contains("materials")) f.materials = material_params_from_json(j.at("materials"));
    if (j.contains("biases")) f.biases = biases_from_json(j.at("biases"));
    return f;
}

void save_device_file(const std::filesystem::path& path, const DeviceFile& f) {
    nlohmann::json j;
    j["device"] = to_json(f.spec);
    j["materials"] = to_json(f.materials);
    j["biases"] = {{"V_B", f.biases.v_b}, {"V_L", f.biases.v_l}, {"V_M", f.biases.v_m}, {"V_R", f.biases.v_r},
                   {"drain", f.biases.drain}};
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << std::setw(2) << j << '\n';
}

}  // namespace dqd
