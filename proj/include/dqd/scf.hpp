#pragma once

#include <filesystem>
#include <functional>
#include <vector>

#include "dqd/device.hpp"
#include "dqd/poisson.hpp"
#include "dqd/schrodinger.hpp"

namespace dqd {

/// Electron density (cm^-3) of the occupied subbands: each state contributes |psi|^2 times
/// the line density of a 1D subband along the translation-invariant direction.
ChargeDensityField quantum_charge(const Grid& g, const Spectrum& spectrum, double fermi_level_ev,
                                  double temperature_k, double mass_z);

struct ScfOptions {
    int n_states = 8;
    /// Damping of the potential update, U <- U + mixing * (U_out - U).
    double mixing = 0.5;
    /// Anderson acceleration over this many previous iterates; 0 gives plain damped mixing.
    int anderson_depth = 5;
    /// Converged when max |U_out - U| <= tolerance (eV).
    double tolerance_ev = 1e-6;
    int max_iterations = 400;
    PoissonOptions poisson;
    EigenOptions eigen;
    /// Optional starting potential U (eV, full grid), e.g. a neighbouring bias point; empty
    /// starts from the semiclassical solution without quantum charge.
    Eigen::VectorXd initial_potential;
    /// Called after every outer iteration with (iteration, update norm in eV).
    std::function<void(int, double)> progress;
};

struct ConvergedSolution {
    DeviceSpec spec;
    MaterialParams materials;
    DeviceBiases biases;
    Grid grid;
    PotentialField potential;     // electron potential energy U (eV)
    ChargeDensityField charge;    // total electron density (cm^-3)
    Spectrum spectrum;            // Quantum-region states of E_c = U + offset
    int iterations = 0;
    double final_update_norm = 0.0;
    std::vector<double> update_history;

    /// Conduction-band edge seen by the Schroedinger equation.
    Eigen::VectorXd band_edge() const;
};

/// Alternates the Poisson solve with the bulk and quantum charge until the potential update
/// falls below the tolerance. Each outer step solves the nonlinear Poisson equation with the
/// quantum density predicted from the current states under a rigid local shift, which keeps
/// the iteration stable for the step-like occupations at low temperature.
/// Throws NumericalError (with the update history) at the iteration cap.
ConvergedSolution self_consistent_solve(const DeviceSpec& spec, const MaterialParams& mat, const DeviceBiases& b,
                                        const ScfOptions& opts = {});

/// One more Poisson + charge cycle from a converged solution; returns max |U_out - U| (eV).
double self_consistency_residual(const ConvergedSolution& s, const ScfOptions& opts = {});

/// Versioned binary snapshot (magic, version, JSON header, raw little-endian doubles).
void save_snapshot(const std::filesystem::path& path, const ConvergedSolution& s);
ConvergedSolution load_snapshot(const std::filesystem::path& path);

}  // namespace dqd
