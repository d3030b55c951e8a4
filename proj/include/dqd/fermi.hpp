#pragma once

namespace dqd {

/// Normalized complete Fermi-Dirac integral
///   F_j(eta) = 1/Gamma(j+1) * int_0^inf x^j / (1 + exp(x - eta)) dx,   j >= -1/2,
/// so that F_j(eta) -> exp(eta) for eta -> -inf.
double fermi_dirac_integral(double j, double eta);

/// dF_j/deta (= F_{j-1} for j > 0), valid for j >= -1/2.
double fermi_dirac_integral_derivative(double j, double eta);

/// Effective conduction-band density of states N_c = 2 (m kT / 2 pi hbar^2)^{3/2} in cm^-3.
double effective_dos_cm3(double mass_dos, double temperature_k);

/// 3D electron density (cm^-3) of a parabolic band whose edge lies `ec_minus_ef` eV above
/// the Fermi level.
double bulk_density_cm3(double ec_minus_ef, double mass_dos, double temperature_k);

/// Line density (nm^-1, spin-degenerate) of a 1D subband with edge `e_minus_ef` eV above the
/// Fermi level and free motion of mass `mass` along the third direction.
double subband_line_density(double e_minus_ef, double mass, double temperature_k);

/// d(subband_line_density)/d(e_minus_ef), in nm^-1 eV^-1 (non-positive).
double subband_line_density_derivative(double e_minus_ef, double mass, double temperature_k);

}  // namespace dqd
