#include "dqd/fermi.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "dqd/errors.hpp"
#include "dqd/units.hpp"

namespace dqd {

namespace {

constexpr double kSeriesBelow = -1.0;
constexpr double kAsymptoticAbove = 60.0;

// 1 / (1 + e^{s}) without overflow.
double fermi(double s) { return s > 0.0 ? std::exp(-s) / (1.0 + std::exp(-s)) : 1.0 / (1.0 + std::exp(s)); }

// F_j for eta < -1: sum_k (-1)^{k+1} e^{k eta} / k^{j+1}.
double series(double j, double eta, bool derivative) {
    const double z = std::exp(eta);
    if (z == 0.0) return 0.0;
    double sum = 0.0, zk = 1.0;
    for (int k = 1; k < 200; ++k) {
        zk *= z;
        const double term = zk / std::pow(k, derivative ? j : j + 1.0);
        sum += (k % 2 ? term : -term);
        if (term < 1e-17 * std::abs(sum)) break;
    }
    return sum;
}

// Sommerfeld expansion for strongly degenerate occupation (eta >> 1); the exponentially small
// remainder is below double precision for eta > 60.
double sommerfeld(double j, double eta) {
    const double c2 = units::pi * units::pi / 6.0;
    const double c4 = 7.0 * std::pow(units::pi, 4) / 360.0;
    const double c6 = 31.0 * std::pow(units::pi, 6) / 15120.0;
    const double a = j + 1.0;
    const double e2 = 1.0 / (eta * eta);
    const double t2 = c2 * a * j * e2;
    const double t4 = c4 * a * j * (j - 1.0) * (j - 2.0) * e2 * e2;
    const double t6 = c6 * a * j * (j - 1.0) * (j - 2.0) * (j - 3.0) * (j - 4.0) * e2 * e2 * e2;
    return std::pow(eta, a) / std::tgamma(a + 1.0) * (1.0 + t2 + t4 + t6);
}

// With x = t^2 the integrand 2 t^{2j+1} f(t^2 - eta) is smooth for j >= -1/2.
double quadrature(double j, double eta, bool derivative) {
    using boost::math::quadrature::gauss_kronrod;
    const double p = 2.0 * j + 1.0;
    auto integrand = [&](double t) {
        const double f = fermi(t * t - eta);
        const double w = derivative ? f * (1.0 - f) : f;
        return 2.0 * (p == 0.0 ? 1.0 : std::pow(t, p)) * w;
    };
    const double edge = std::sqrt(std::max(eta, 0.0));
    const double upper = std::sqrt(std::max(eta, 0.0) + 60.0);
    double sum = 0.0;
    // Split at the Fermi edge so each piece is smooth on the scale of the subinterval.
    const double a = std::max(0.0, edge - 3.0 / (1.0 + edge));
    const double b = std::min(upper, edge + 3.0 / (1.0 + edge));
    if (a > 0.0) sum += gauss_kronrod<double, 31>::integrate(integrand, 0.0, a, 10, 1e-12);
    sum += gauss_kronrod<double, 31>::integrate(integrand, a, b, 10, 1e-12);
    sum += gauss_kronrod<double, 31>::integrate(integrand, b, upper, 10, 1e-12);
    return sum / std::tgamma(j + 1.0);
}

void check_order(double j) {
    if (!(j >= -0.5)) throw ModelError("Fermi-Dirac integral order must be >= -1/2");
}

// The orders used by the device solvers are tabulated on [-1, 60] and evaluated by cubic
// Hermite interpolation (relative error ~1e-11 at this spacing).
class Table {
public:
    static constexpr double kLo = kSeriesBelow;
    static constexpr double kHi = kAsymptoticAbove;
    static constexpr double kStep = 1.0 / 128.0;

    template <class F, class D>
    Table(F value, D slope) {
        const int n = static_cast<int>(std::lround((kHi - kLo) / kStep)) + 1;
        v_.resize(n);
        d_.resize(n);
        for (int k = 0; k < n; ++k) {
            const double eta = kLo + k * kStep;
            v_[k] = value(eta);
            d_[k] = slope(eta);
        }
    }
    double operator()(double eta) const {
        const double s = (eta - kLo) / kStep;
        const int k = std::min(static_cast<int>(s), static_cast<int>(v_.size()) - 2);
        const double t = s - k;
        const double t2 = t * t, t3 = t2 * t;
        return (2 * t3 - 3 * t2 + 1) * v_[k] + (t3 - 2 * t2 + t) * kStep * d_[k] + (-2 * t3 + 3 * t2) * v_[k + 1] +
               (t3 - t2) * kStep * d_[k + 1];
    }

private:
    std::vector<double> v_, d_;
};

const Table& table_half() {
    static const Table t([](double e) { return quadrature(0.5, e, false); },
                         [](double e) { return quadrature(0.5, e, true); });
    return t;
}

const Table& table_minus_half() {
    static const Table t([](double e) { return quadrature(-0.5, e, false); },
                         [](double e) { return quadrature(-0.5, e, true); });
    return t;
}

const Table& table_minus_half_slope() {
    constexpr double h = 1e-3;
    static const Table t([](double e) { return quadrature(-0.5, e, true); },
                         [](double e) { return (quadrature(-0.5, e + h, true) - quadrature(-0.5, e - h, true)) / (2 * h); });
    return t;
}

bool tabulated(double j, double eta) { return (j == 0.5 || j == -0.5) && eta >= Table::kLo && eta <= Table::kHi; }

}  // namespace

double fermi_dirac_integral(double j, double eta) {
    check_order(j);
    if (std::isnan(eta)) return std::numeric_limits<double>::quiet_NaN();
    if (eta < kSeriesBelow) return series(j, eta, false);
    if (eta > kAsymptoticAbove) return sommerfeld(j, eta);
    if (tabulated(j, eta)) return j > 0.0 ? table_half()(eta) : table_minus_half()(eta);
    return quadrature(j, eta, false);
}

double fermi_dirac_integral_derivative(double j, double eta) {
    check_order(j);
    if (std::isnan(eta)) return std::numeric_limits<double>::quiet_NaN();
    if (eta < kSeriesBelow) return series(j, eta, true);
    if (eta > kAsymptoticAbove) return sommerfeld(j - 1.0, eta);
    if (tabulated(j, eta)) return j > 0.0 ? table_minus_half()(eta) : table_minus_half_slope()(eta);
    return quadrature(j, eta, true);
}

double effective_dos_cm3(double mass_dos, double temperature_k) {
    const double kt = units::kB_eV * temperature_k;
    const double e0 = units::hbar2_over_2m0_eVnm2 / mass_dos;  // hbar^2/2m in eV nm^2
    return 2.0 * std::pow(kt / (4.0 * units::pi * e0), 1.5) * 1e21;
}

double bulk_density_cm3(double ec_minus_ef, double mass_dos, double temperature_k) {
    const double kt = units::kB_eV * temperature_k;
    return effective_dos_cm3(mass_dos, temperature_k) * fermi_dirac_integral(0.5, -ec_minus_ef / kt);
}

namespace {
double line_prefactor(double mass, double temperature_k) {
    const double kt = units::kB_eV * temperature_k;
    return std::sqrt(kt / (units::pi * units::hbar2_over_2m0_eVnm2 / mass));
}
}  // namespace

double subband_line_density(double e_minus_ef, double mass, double temperature_k) {
    const double kt = units::kB_eV * temperature_k;
    return line_prefactor(mass, temperature_k) * fermi_dirac_integral(-0.5, -e_minus_ef / kt);
}

double subband_line_density_derivative(double e_minus_ef, double mass, double temperature_k) {
    const double kt = units::kB_eV * temperature_k;
    return -line_prefactor(mass, temperature_k) * fermi_dirac_integral_derivative(-0.5, -e_minus_ef / kt) / kt;
}

}  // namespace dqd
