#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "dqd/scf.hpp"

namespace dqd {

enum class DotSide { Left, Right };

struct Dot {
    DotSide side = DotSide::Left;
    int minimum_column = -1;   // grid column of the band-edge minimum along the well
    double minimum_x_nm = 0.0;
    double minimum_ev = 0.0;   // lowest conduction-band edge in that column
    double prominence_ev = 0.0;
    std::vector<int> orbitals; // spectrum indices assigned to this dot, ascending energy
    int occupation = 0;        // states below E_F, split between the dots by barrier-side weight
};

/// Potential valleys along the well and the orbitals they hold.
struct DotRegions {
    std::vector<Dot> dots;     // 0, 1 or 2 dots ordered left to right
    int barrier_column = -1;   // inter-dot barrier maximum; -1 with fewer than two dots
    double barrier_x_nm = 0.0;
    double barrier_ev = 0.0;
    std::vector<int> orbital_dot;  // per spectrum state: index into `dots`, -1 if unassigned
    std::vector<double> centroid_x_nm;
    std::vector<double> left_mass;  // probability left of the barrier (1 or 0 without a barrier)

    const Dot* left() const;
    const Dot* right() const;
    int n_left() const;
    int n_right() const;
};

struct DotOptions {
    /// Minimum topographic prominence (eV) for a band-edge minimum to count as a dot.
    double min_prominence_ev = 1e-3;
};

/// Lowest conduction-band edge of each grid column over the Quantum region (eV).
std::vector<double> well_profile(const Grid& g, const Eigen::VectorXd& band_edge);

/// Finds up to two valleys in the well profile, splits the region at the barrier maximum
/// between them and assigns every orbital by its density centroid (by the majority of its
/// probability when the centroid sits within one cell of the barrier). A single valley is
/// labelled left or right by its position relative to the centre of the M gate.
/// Throws ModelError when more than two valleys are present.
DotRegions find_dots(const Grid& g, const Eigen::VectorXd& band_edge, const Spectrum& spectrum,
                     double fermi_level_ev, double m_gate_centre_nm, const DotOptions& opts = {});
DotRegions find_dots(const ConvergedSolution& s, const DotOptions& opts = {});

/// Two orthonormal orbitals localized in the left and right dot and the one-body matrix
/// elements between them.
struct LocalizedPair {
    Eigen::VectorXd left, right;  // full grid, normalized like Spectrum wavefunctions
    double eps_left = 0.0;        // <L|H|L> (eV)
    double eps_right = 0.0;
    double tunnel = 0.0;          // |<L|H|R>| (eV)
    std::pair<int, int> states{-1, -1};  // spectrum indices spanning the pair
};

/// Picks the lowest-energy pair of states whose span contains one orbital with >= 90% of its
/// weight left of the inter-dot barrier and one with <= 10%, and rotates the pair into those
/// two orbitals (eigenvectors of the left projector in the span). Throws ModelError without
/// two dots or without such a pair.
LocalizedPair localize_pair(const Grid& g, const Spectrum& spectrum, const DotRegions& dots);

// ---------------------------------------------------------------------------------------------
// Charge stability

struct StabilityWindow {
    double v_l_min = 0.52, v_l_max = 0.56, v_l_step = 0.005;
    double v_r_min = 0.55, v_r_max = 0.59, v_r_step = 0.005;
    double v_m = 0.400;
    double v_b = 0.200;
    double drain = 1e-4;

    std::vector<double> v_l_values() const;
    std::vector<double> v_r_values() const;
};

struct StabilityBoundary {
    std::string label;  // e.g. "n_L 0->1"
    std::vector<std::pair<double, double>> points;  // (V_L, V_R) midpoints between grid points
};

struct StabilityDiagram {
    std::vector<double> v_l;  // columns
    std::vector<double> v_r;  // rows
    std::vector<int> n_l;     // row-major [row * v_l.size() + col]
    std::vector<int> n_r;
    std::vector<StabilityBoundary> boundaries;

    int left_at(int row, int col) const { return n_l[static_cast<std::size_t>(row) * v_l.size() + col]; }
    int right_at(int row, int col) const { return n_r[static_cast<std::size_t>(row) * v_l.size() + col]; }
    /// Distinct (n_L, n_R) pairs present, sorted.
    std::vector<std::pair<int, int>> regimes() const;
};

/// Occupation map over the (V_L, V_R) window. Rows of constant V_R are solved in parallel on
/// `threads` workers, each row warm-started along V_L, so the result does not depend on the
/// thread count. A failing bias point is rethrown as NumericalError naming the point.
StabilityDiagram charge_stability(const DeviceSpec& spec, const MaterialParams& mat, const StabilityWindow& w,
                                  const ScfOptions& opts = {}, int threads = 1, const DotOptions& dot_opts = {});

/// Boundary polylines between neighbouring grid points with different occupations.
std::vector<StabilityBoundary> stability_boundaries(const StabilityDiagram& d);

/// CSV with columns V_L,V_R,n_L,n_R (volts), one row per bias point.
void write_stability_csv(std::ostream& os, const StabilityDiagram& d);

}  // namespace dqd
