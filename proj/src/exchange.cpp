#include "dqd/exchange.hpp"

#include <cmath>
#include <vector>

#include "dqd/errors.hpp"
#include "dqd/units.hpp"

namespace dqd {

double coulomb_integral(const Grid& g, const Eigen::VectorXd& rho1, const Eigen::VectorXd& rho2, double eps_r) {
    if (rho1.size() != g.size() || rho2.size() != g.size()) throw ConfigError("density does not match the grid");
    if (!(eps_r > 0.0)) throw ConfigError("relative permittivity must be positive");
    struct Charge {
        double x, y, q;
    };
    const double area = g.cell_area();
    auto collect = [&](const Eigen::VectorXd& rho) {
        std::vector<Charge> out;
        for (int c = 0; c < g.size(); ++c)
            if (rho[c] != 0.0) out.push_back({g.x(c % g.nx), g.y(c / g.nx), rho[c] * area});
        return out;
    };
    const auto a = collect(rho1);
    const auto b = collect(rho2);
    const double dx = g.dx, dy = g.dy;
    const double self = 2.0 * (dx * std::asinh(dy / dx) + dy * std::asinh(dx / dy)) / area;
    double sum = 0.0;
    for (const auto& p : a) {
        double row = 0.0;
        for (const auto& s : b) {
            const double rx = p.x - s.x, ry = p.y - s.y;
            const double r2 = rx * rx + ry * ry;
            row += s.q * (r2 == 0.0 ? self : 1.0 / std::sqrt(r2));
        }
        sum += p.q * row;
    }
    return units::coulomb_eVnm / eps_r * sum;
}

ExchangeResult exchange_energy(const Grid& g, const Spectrum& spectrum, const DotRegions& dots, double eps_r) {
    const LocalizedPair pair = localize_pair(g, spectrum, dots);
    const Eigen::VectorXd rho_l = pair.left.cwiseAbs2();
    const Eigen::VectorXd rho_r = pair.right.cwiseAbs2();
    ExchangeResult res;
    res.tunnel_ev = pair.tunnel;
    res.u_left_ev = coulomb_integral(g, rho_l, rho_l, eps_r);
    res.u_right_ev = coulomb_integral(g, rho_r, rho_r, eps_r);
    res.u_ev = 0.5 * (res.u_left_ev + res.u_right_ev);
    res.v_ev = coulomb_integral(g, rho_l, rho_r, eps_r);
    res.detuning_ev = pair.eps_left - pair.eps_right;
    const double gap = res.u_ev - res.v_ev;
    if (!(gap > 0.0))
        throw ModelError("Hund-Mulliken exchange needs U > V (U = " + std::to_string(res.u_ev) +
                         " eV, V = " + std::to_string(res.v_ev) + " eV)");
    if (std::abs(res.detuning_ev) >= gap)
        throw ModelError("dot detuning " + std::to_string(res.detuning_ev) + " eV exceeds U - V = " +
                         std::to_string(gap) + " eV; the (1,1) charge state is not the ground state");
    const double t = res.tunnel_ev;
    res.j_hz = 4.0 * t * t * gap / (gap * gap - res.detuning_ev * res.detuning_ev) * units::eV_to_Hz;
    return res;
}

ExchangeResult exchange_energy(const ConvergedSolution& s) {
    return exchange_energy(s.grid, s.spectrum, find_dots(s), s.materials.eps_si);
}

}  // namespace dqd
