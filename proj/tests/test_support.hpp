#pragma once

#include <filesystem>
#include <memory>

#include "dqd/device.hpp"
#include "dqd/scf.hpp"

namespace dqd::test {

inline std::filesystem::path source_path(const char* rel) { return std::filesystem::path(DQD_SOURCE_DIR) / rel; }

/// Uniform Si grid whose cells are all in one region.
inline Grid box_grid(int nx, int ny, double dx, double dy, Region region = Region::Quantum) {
    Grid g;
    g.nx = nx;
    g.ny = ny;
    g.dx = dx;
    g.dy = dy;
    g.layer.assign(g.size(), 0);
    g.region.assign(g.size(), region);
    g.material.assign(g.size(), Material{});
    g.top_electrode.assign(nx, -1);
    g.contact_row.assign(ny, false);
    return g;
}

inline const DeviceFile& reference_device() {
    static const DeviceFile f = load_device_file(source_path("configs/device.json"));
    return f;
}

/// Converged solution of the calibrated device at its initialization point, solved once per
/// test binary.
inline const ConvergedSolution& pinit_solution() {
    static const ConvergedSolution s = [] {
        const auto& f = reference_device();
        return self_consistent_solve(f.spec, f.materials, f.biases);
    }();
    return s;
}

}  // namespace dqd::test
