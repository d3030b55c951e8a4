#pragma once

// Physical constants (CODATA 2018) and the unit conventions used across the library.
//
// Energies inside the device layer are electron potential energies in eV.
// Lengths are nm. Charge densities are cm^-3. Spin-layer frequencies are Hz.

namespace dqd::units {

inline constexpr double pi = 3.14159265358979323846;

inline constexpr double q = 1.602176634e-19;          // C
inline constexpr double h = 6.62607015e-34;           // J s
inline constexpr double hbar = 1.054571817e-34;       // J s
inline constexpr double kB = 1.380649e-23;            // J/K
inline constexpr double kB_eV = 8.617333262e-5;       // eV/K
inline constexpr double m0 = 9.1093837015e-31;        // kg
inline constexpr double eps0 = 8.8541878128e-12;      // F/m
inline constexpr double mu_B = 9.2740100783e-24;      // J/T

/// hbar^2 / (2 m0) in eV nm^2.
inline constexpr double hbar2_over_2m0_eVnm2 = hbar * hbar / (2.0 * m0) / q * 1e18;

/// div(eps_r grad U)[eV/nm^2] = -poisson_coeff * n[cm^-3] for electron potential energy U.
inline constexpr double poisson_coeff = q / eps0 * 1e6 * 1e-18;

/// e^2 / (4 pi eps0) in eV nm.
inline constexpr double coulomb_eVnm = q / (4.0 * pi * eps0) * 1e9;

/// Electron g-factor in silicon.
inline constexpr double g_si = 2.0;

/// g mu_B / h in Hz/T.
inline constexpr double zeeman_hz_per_tesla = g_si * mu_B / h;

inline constexpr double eV_to_Hz = q / h;

}  // namespace dqd::units
