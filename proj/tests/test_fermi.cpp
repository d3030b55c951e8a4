#include <gtest/gtest.h>

#include <cmath>

#include "dqd/fermi.hpp"
#include "dqd/units.hpp"

using namespace dqd;

namespace {

/// F_j by brute-force quadrature: x = t^2 removes the x^-1/2 singularity, then composite
/// Simpson on [0, sqrt(max(eta, 0) + 60)].
double fd_quadrature(double j, double eta) {
    const double tmax = std::sqrt(std::max(eta, 0.0) + 60.0);
    const int n = 200000;
    const double h = tmax / n;
    auto f = [&](double t) {
        const double x = t * t;
        const double occ = 1.0 / (1.0 + std::exp(x - eta));
        return 2.0 * std::pow(t, 2.0 * j + 1.0) * occ;
    };
    double s = f(0.0) + f(tmax);
    for (int k = 1; k < n; ++k) s += (k % 2 ? 4.0 : 2.0) * f(k * h);
    return s * h / 3.0 / std::tgamma(j + 1.0);
}

}  // namespace

TEST(FermiDirac, ZeroOrderHasClosedForm) {
    for (double eta : {-30.0, -5.0, -1.0, 0.0, 0.5, 3.0, 20.0, 60.0})
        EXPECT_NEAR(fermi_dirac_integral(0.0, eta), std::log1p(std::exp(eta)), 1e-10 * std::max(1.0, eta)) << eta;
}

TEST(FermiDirac, MatchesQuadrature) {
    for (double j : {-0.5, 0.5, 1.0})
        for (double eta : {-10.0, -2.0, -0.3, 0.0, 1.0, 4.0, 12.0, 35.0}) {
            const double ref = fd_quadrature(j, eta);
            EXPECT_NEAR(fermi_dirac_integral(j, eta), ref, 1e-8 * ref) << "j=" << j << " eta=" << eta;
        }
}

TEST(FermiDirac, NondegenerateLimitIsBoltzmann) {
    for (double j : {-0.5, 0.5})
        for (double eta : {-40.0, -25.0, -15.0})
            EXPECT_NEAR(fermi_dirac_integral(j, eta) / std::exp(eta), 1.0, 1e-6) << j << " " << eta;
}

TEST(FermiDirac, DerivativeMatchesFiniteDifference) {
    for (double j : {-0.5, 0.5})
        for (double eta : {-6.0, -1.0, 0.0, 2.0, 9.0}) {
            const double h = 1e-4;
            const double fd = (fermi_dirac_integral(j, eta + h) - fermi_dirac_integral(j, eta - h)) / (2 * h);
            EXPECT_NEAR(fermi_dirac_integral_derivative(j, eta), fd, 1e-6 * std::max(1.0, std::abs(fd)))
                << j << " " << eta;
        }
    // d F_{1/2} / d eta = F_{-1/2}
    EXPECT_NEAR(fermi_dirac_integral_derivative(0.5, 1.3), fermi_dirac_integral(-0.5, 1.3), 1e-10);
}

TEST(FermiDirac, MonotoneInEta) {
    double prev = 0.0;
    for (double eta = -20.0; eta <= 20.0; eta += 0.25) {
        const double v = fermi_dirac_integral(-0.5, eta);
        EXPECT_GT(v, prev);
        prev = v;
    }
}

TEST(CarrierDensity, EffectiveDensityOfStates) {
    // N_c = 2 (m kT / 2 pi hbar^2)^{3/2}, evaluated directly in SI units.
    const double m = 1.08 * units::m0, kt = units::kB * 300.0;
    const double nc_m3 = 2.0 * std::pow(m * kt / (2.0 * units::pi * units::hbar * units::hbar), 1.5);
    EXPECT_NEAR(effective_dos_cm3(1.08, 300.0), nc_m3 * 1e-6, 1e-9 * nc_m3 * 1e-6);
    EXPECT_NEAR(effective_dos_cm3(1.08, 300.0) / 2.8e19, 1.0, 0.02);
}

TEST(CarrierDensity, BulkDensityFollowsFermiIntegral) {
    const double t = 1.5, kt = units::kB_eV * t;
    for (double de : {-0.01, 0.0, 0.002, 0.02}) {
        const double ref = effective_dos_cm3(1.08, t) * fermi_dirac_integral(0.5, -de / kt);
        EXPECT_NEAR(bulk_density_cm3(de, 1.08, t), ref, 1e-12 * ref + 1e-300);
    }
}

TEST(CarrierDensity, SubbandLineDensity) {
    // n_1D = sqrt(2 m kT / (pi hbar^2)) F_{-1/2}(-(E - E_F)/kT), spin-degenerate, per nm.
    const double t = 1.5, m = 0.19;
    const double kt_j = units::kB * t, kt = units::kB_eV * t;
    const double pref = std::sqrt(2.0 * m * units::m0 * kt_j / (units::pi * units::hbar * units::hbar)) * 1e-9;
    for (double de : {-2e-3, -1e-4, 0.0, 1e-4, 1e-3}) {
        const double ref = pref * fd_quadrature(-0.5, -de / kt);
        EXPECT_NEAR(subband_line_density(de, m, t), ref, 1e-7 * ref) << de;
    }
    // Degenerate limit: n = (2/pi) k_F with k_F = sqrt(2 m (E_F - E)) / hbar.
    const double depth = 5e-3;
    const double kf = std::sqrt(2.0 * m * units::m0 * depth * units::q) / units::hbar * 1e-9;
    EXPECT_NEAR(subband_line_density(-depth, m, t), 2.0 / units::pi * kf, 1e-3 * kf);
}

TEST(CarrierDensity, SubbandDerivativeIsConsistent) {
    const double t = 1.5, m = 0.19, h = 1e-7;
    for (double de : {-1e-3, 0.0, 5e-4}) {
        const double fd = (subband_line_density(de + h, m, t) - subband_line_density(de - h, m, t)) / (2 * h);
        EXPECT_NEAR(subband_line_density_derivative(de, m, t), fd, 1e-5 * std::abs(fd));
        EXPECT_LE(subband_line_density_derivative(de, m, t), 0.0);
    }
}
