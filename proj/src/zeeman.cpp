#include "dqd/zeeman.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>

// Boost 1.74's pchip.hpp calls isnan unqualified.
#include <math.h>

#include <boost/math/interpolators/pchip.hpp>

#include "dqd/errors.hpp"
#include "dqd/units.hpp"

namespace dqd {

struct MagnetFieldMap::Interp {
    // Boost's PCHIP needs four nodes; with fewer the monotone cubic reduces to linear anyway.
    std::optional<boost::math::interpolators::pchip<std::vector<double>>> cubic;
};

MagnetFieldMap::MagnetFieldMap(std::vector<double> x_nm, std::vector<double> b_tesla)
    : x_(std::move(x_nm)), b_(std::move(b_tesla)) {
    if (x_.size() != b_.size()) throw ConfigError("field map needs the same number of x and B samples");
    if (x_.size() < 2) throw ConfigError("field map needs at least two samples");
    for (std::size_t k = 0; k < x_.size(); ++k) {
        if (!std::isfinite(x_[k]) || !std::isfinite(b_[k])) throw ConfigError("field map contains non-finite values");
        if (!(b_[k] > 0.0)) throw ConfigError("field map B_Z must be positive");
        if (k > 0 && !(x_[k] > x_[k - 1])) throw ConfigError("field map x must be strictly increasing");
    }
    auto interp = std::make_shared<Interp>();
    if (x_.size() >= 4) interp->cubic.emplace(std::vector<double>(x_), std::vector<double>(b_));
    interp_ = std::move(interp);
}

MagnetFieldMap MagnetFieldMap::linear(double b0, double gradient, double x_min, double x_max, int samples) {
    if (!(x_max > x_min) || samples < 2) throw ConfigError("linear field map needs x_max > x_min and two samples");
    std::vector<double> x(samples), b(samples);
    for (int k = 0; k < samples; ++k) {
        x[k] = x_min + (x_max - x_min) * k / (samples - 1);
        b[k] = b0 + gradient * x[k];
    }
    return MagnetFieldMap(std::move(x), std::move(b));
}

MagnetFieldMap MagnetFieldMap::uniform(double b, double x_min, double x_max) { return linear(b, 0.0, x_min, x_max, 2); }

MagnetFieldMap MagnetFieldMap::parse(std::istream& is, const std::string& source) {
    std::vector<double> x, b;
    std::string line;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        double xv = 0.0, bv = 0.0;
        if (!(ls >> xv)) {
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            throw ConfigError(source + ":" + std::to_string(line_no) + ": expected two numbers");
        }
        std::string rest;
        if (!(ls >> bv) || (ls >> rest))
            throw ConfigError(source + ":" + std::to_string(line_no) + ": expected two numbers");
        x.push_back(xv);
        b.push_back(bv);
    }
    return MagnetFieldMap(std::move(x), std::move(b));
}

MagnetFieldMap MagnetFieldMap::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open field map " + path.string());
    return parse(in, path.string());
}

void MagnetFieldMap::save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write field map " + path.string());
    out << "# x_nm B_tesla\n";
    out.precision(12);
    for (std::size_t k = 0; k < x_.size(); ++k) out << x_[k] << ' ' << b_[k] << '\n';
    if (!out) throw ConfigError("failed writing field map " + path.string());
}

bool MagnetFieldMap::covers(double lo, double hi) const {
    const double slack = 1e-9 * std::max(1.0, x_.back() - x_.front());
    return lo >= x_.front() - slack && hi <= x_.back() + slack;
}

double MagnetFieldMap::operator()(double x) const {
    if (!covers(x, x)) throw ConfigError("field map does not cover x = " + std::to_string(x) + " nm");
    x = std::clamp(x, x_.front(), x_.back());
    if (interp_->cubic) return (*interp_->cubic)(x);
    const auto k = std::min<std::size_t>(std::upper_bound(x_.begin(), x_.end(), x) - x_.begin(), x_.size() - 1);
    const double f = (x - x_[k - 1]) / (x_[k] - x_[k - 1]);
    return b_[k - 1] + f * (b_[k] - b_[k - 1]);
}

double MagnetFieldMap::b_min() const { return *std::min_element(b_.begin(), b_.end()); }
double MagnetFieldMap::b_max() const { return *std::max_element(b_.begin(), b_.end()); }

double zeeman_splitting(const Grid& g, const Eigen::VectorXd& psi, const MagnetFieldMap& map) {
    if (psi.size() != g.size()) throw ConfigError("wavefunction does not match the grid");
    std::vector<double> column(g.nx, 0.0);
    for (int c = 0; c < g.size(); ++c) column[c % g.nx] += psi[c] * psi[c];
    double lo = 0.0, hi = -1.0;
    for (int i = 0; i < g.nx; ++i)
        if (column[i] != 0.0) {
            if (hi < lo) lo = g.x(i);
            hi = g.x(i);
        }
    if (hi < lo) throw ConfigError("wavefunction vanishes everywhere");
    if (!map.covers(lo, hi))
        throw ConfigError("field map [" + std::to_string(map.x_min()) + ", " + std::to_string(map.x_max()) +
                          "] nm does not cover the orbital support [" + std::to_string(lo) + ", " +
                          std::to_string(hi) + "] nm");
    double avg = 0.0;
    for (int i = 0; i < g.nx; ++i)
        if (column[i] != 0.0) avg += column[i] * map(g.x(i));
    return units::zeeman_hz_per_tesla * avg * g.cell_area();
}

std::pair<double, double> zeeman_splittings(const Grid& g, const Spectrum& spectrum, const DotRegions& dots,
                                            const MagnetFieldMap& map) {
    const LocalizedPair pair = localize_pair(g, spectrum, dots);
    return {zeeman_splitting(g, pair.left, map), zeeman_splitting(g, pair.right, map)};
}

std::pair<double, double> zeeman_splittings(const ConvergedSolution& s, const MagnetFieldMap& map) {
    return zeeman_splittings(s.grid, s.spectrum, find_dots(s), map);
}

}  // namespace dqd
