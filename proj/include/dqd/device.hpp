#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include "dqd/spin_params.hpp"

namespace dqd {

enum class MaterialKind { Si, SiGe };

struct Material {
    MaterialKind kind = MaterialKind::Si;
    double ge_fraction = 0.0;  // only meaningful for SiGe
};

struct Layer {
    std::string name;
    Material material;
    double thickness_nm = 0.0;
    /// Solved quantum mechanically. Defaults to true for thin (<= 20 nm) Si layers.
    bool quantum = false;
};

/// Gate electrode on the top surface; span is [start_nm, end_nm) along x.
struct Electrode {
    std::string name;  // B1, L, M, R or B2
    double start_nm = 0.0;
    double end_nm = 0.0;
};

/// Ohmic reservoir contacts on the left (source) and right (drain) sides of the domain,
/// spanning depths [top_nm, bottom_nm) below the top surface.
struct OhmicContacts {
    double top_nm = 0.0;
    double bottom_nm = 0.0;
};

struct GridSpec {
    int nx = 0;
    int ny = 0;
    double dx_nm = 1.0;
    double dy_nm = 1.0;
};

/// Heterostructure, electrodes and discretization of the 2D device slice. x runs along the
/// lateral [100] direction, y downwards from the top surface.
struct DeviceSpec {
    std::vector<Layer> layers;  // ordered from the top surface down
    std::vector<Electrode> electrodes;
    OhmicContacts source_drain;
    GridSpec grid;
    double temperature_k = 1.5;

    double width_nm() const { return grid.nx * grid.dx_nm; }
    double height_nm() const;
    const Electrode& electrode(const std::string& name) const;
    /// Throws ConfigError when an invariant is violated.
    void validate() const;
};

/// Band and dielectric parameters. SiGe properties are linear in the Ge fraction.
struct MaterialParams {
    double eps_si = 11.7;
    double eps_ge = 16.2;
    /// Conduction-band offset of Si(1-x)Ge(x) above the strained Si well: offset_per_ge * x.
    double cb_offset_per_ge_ev = 0.6;
    /// Effective masses (units of m0) of the lowest conduction valleys: x lateral, y growth,
    /// z along the translation-invariant direction.
    double mass_x = 0.19;
    double mass_y = 0.92;
    double mass_z = 0.19;
    /// Density-of-states mass for the bulk 3D conduction-band density.
    double mass_dos = 1.08;
    /// Schottky barrier of the Ti/Au gates (eV).
    double schottky_barrier_ev = 0.45;
    /// Barrier-height correction for individual electrodes, keyed by name (eV).
    std::vector<std::pair<std::string, double>> electrode_barrier_offsets;
    double fermi_level_ev = 0.0;

    double permittivity(const Material& m) const;
    double cb_offset(const Material& m) const;
    double schottky_barrier(const std::string& electrode) const;
    void validate() const;
};

enum class Region : unsigned char { Quantum, Bulk };

/// Cell-centred tensor-product grid with per-cell material tags.
struct Grid {
    int nx = 0;
    int ny = 0;
    double dx = 1.0;  // nm
    double dy = 1.0;  // nm
    std::vector<int> layer;  // layer index per cell
    std::vector<Region> region;
    std::vector<Material> material;
    /// Per top-surface column: index of the electrode covering it, or -1.
    std::vector<int> top_electrode;
    /// Per side row: true where the ohmic contact touches the side boundary.
    std::vector<bool> contact_row;
    std::vector<std::string> electrode_names;
    double temperature_k = 1.5;

    int size() const { return nx * ny; }
    int index(int i, int j) const { return j * nx + i; }
    double x(int i) const { return (i + 0.5) * dx; }
    double y(int j) const { return (j + 0.5) * dy; }
    double cell_area() const { return dx * dy; }
    int quantum_cell_count() const;
};

Grid build_grid(const DeviceSpec& spec);

/// Scalar field on the cell centres of a grid (row-major, j*nx + i).
struct GridField {
    int nx = 0;
    int ny = 0;
    double dx = 1.0;
    double dy = 1.0;
    Eigen::VectorXd values;

    GridField() = default;
    GridField(const Grid& g, double fill = 0.0)
        : nx(g.nx), ny(g.ny), dx(g.dx), dy(g.dy), values(Eigen::VectorXd::Constant(g.size(), fill)) {}
    double operator()(int i, int j) const { return values[j * nx + i]; }
    double& operator()(int i, int j) { return values[j * nx + i]; }
    bool matches(const Grid& g) const { return nx == g.nx && ny == g.ny && values.size() == g.size(); }
};

/// Electron potential energy (eV), conduction band edge minus the material offset.
using PotentialField = GridField;
/// Electron density (cm^-3).
using ChargeDensityField = GridField;

/// Writes `x_nm,y_nm,<value_name>` rows.
void write_field_csv(std::ostream& os, const GridField& f, const std::string& value_name);

DeviceSpec device_spec_from_json(const nlohmann::json& j);
MaterialParams material_params_from_json(const nlohmann::json& j);
DeviceBiases biases_from_json(const nlohmann::json& j);
nlohmann::json to_json(const DeviceSpec& spec);
nlohmann::json to_json(const MaterialParams& mat);

/// A device description file holds `device`, optional `materials` and optional `biases`.
struct DeviceFile {
    DeviceSpec spec;
    MaterialParams materials;
    DeviceBiases biases;
};

DeviceFile load_device_file(const std::filesystem::path& path);
void save_device_file(const std::filesystem::path& path, const DeviceFile& file);

}  // namespace dqd
