#pragma once

#include "dqd/dots.hpp"

namespace dqd {

/// Screened Coulomb interaction between two charge distributions on the grid,
///   sum_a sum_b rho1[a] rho2[b] dA^2 e^2 / (4 pi eps0 eps_r |r_a - r_b|)   (eV),
/// with densities in nm^-2 (e.g. |psi|^2 or products of orbitals). The singular self-cell term
/// uses the average of 1/r over the cell seen from its centre.
double coulomb_integral(const Grid& g, const Eigen::VectorXd& rho1, const Eigen::VectorXd& rho2, double eps_r);

struct ExchangeResult {
    double j_hz = 0.0;
    double tunnel_ev = 0.0;
    double u_left_ev = 0.0;   // on-site Coulomb energy of each dot
    double u_right_ev = 0.0;
    double u_ev = 0.0;        // mean on-site energy used in the two-site model
    double v_ev = 0.0;        // inter-site Coulomb energy
    double detuning_ev = 0.0; // eps_left - eps_right
};

/// Hund-Mulliken (two-site Hubbard) exchange of the two localized orbitals:
///   J = 4 t^2 (U - V) / ((U - V)^2 - eps^2),
/// which reduces to 4 t^2 / (U - V) at zero detuning eps. Throws ModelError when U - V <= 0 or
/// when |eps| >= U - V (the (1,1) charge state is not the ground state).
ExchangeResult exchange_energy(const Grid& g, const Spectrum& spectrum, const DotRegions& dots, double eps_r);
ExchangeResult exchange_energy(const ConvergedSolution& s);

}  // namespace dqd
