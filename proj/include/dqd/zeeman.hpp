#pragma once

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <utility>
#include <vector>

#include "dqd/dots.hpp"

namespace dqd {

/// Out-of-plane micromagnet field B_Z(x) (tesla) tabulated along the lateral coordinate (nm)
/// and interpolated with a monotone piecewise-cubic Hermite (PCHIP) curve.
class MagnetFieldMap {
public:
    /// Strictly increasing x, finite positive B; at least two samples.
    MagnetFieldMap(std::vector<double> x_nm, std::vector<double> b_tesla);

    /// B(x) = b0 + gradient * x sampled on [x_min, x_max] (the field must stay positive).
    static MagnetFieldMap linear(double b0_tesla, double gradient_tesla_per_nm, double x_min_nm, double x_max_nm,
                                 int samples = 65);
    static MagnetFieldMap uniform(double b_tesla, double x_min_nm, double x_max_nm);

    /// Two whitespace-separated columns (x_nm, B_tesla); '#' starts a comment.
    static MagnetFieldMap load(const std::filesystem::path& path);
    static MagnetFieldMap parse(std::istream& is, const std::string& source = "field map");
    void save(const std::filesystem::path& path) const;

    /// Throws ConfigError outside the tabulated range.
    double operator()(double x_nm) const;
    bool covers(double x_lo_nm, double x_hi_nm) const;
    double x_min() const { return x_.front(); }
    double x_max() const { return x_.back(); }
    double b_min() const;
    double b_max() const;
    const std::vector<double>& x() const { return x_; }
    const std::vector<double>& b() const { return b_; }

private:
    std::vector<double> x_, b_;
    struct Interp;
    std::shared_ptr<const Interp> interp_;
};

/// E_Z = (g mu_B / h) * integral |psi|^2 B_Z(x) dx dy for one orbital (Hz).
/// Throws ConfigError when the map does not cover the orbital's support.
double zeeman_splitting(const Grid& g, const Eigen::VectorXd& psi, const MagnetFieldMap& map);

/// Zeeman splittings (Hz) of the localized ground orbitals of the left and right dot
/// (see localize_pair). Throws ModelError unless two populated dots are present.
std::pair<double, double> zeeman_splittings(const Grid& g, const Spectrum& spectrum, const DotRegions& dots,
                                            const MagnetFieldMap& map);
std::pair<double, double> zeeman_splittings(const ConvergedSolution& s, const MagnetFieldMap& map);

}  // namespace dqd
