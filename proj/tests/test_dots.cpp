#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "dqd/dots.hpp"
#include "dqd/errors.hpp"
#include "dqd/schrodinger.hpp"
#include "test_support.hpp"

using namespace dqd;
using dqd::test::box_grid;

namespace {

const MaterialParams kMat{};

struct Well {
    double start, end, depth_ev;
};

/// 5 meV plateau, gently peaked at the centre of the grid, with square wells cut into it.
/// The grid has an odd column count so the potential is mirror symmetric about one column.
Eigen::VectorXd wells(const Grid& g, const std::vector<Well>& ws) {
    Eigen::VectorXd v(g.size());
    const double centre = 0.5 * g.nx * g.dx;
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            double e = 5e-3 + 1e-5 * (1.0 - std::abs(g.x(i) - centre) / centre);
            for (const auto& w : ws)
                if (g.x(i) >= w.start && g.x(i) < w.end) e = 5e-3 - w.depth_ev;
            v[g.index(i, j)] = e;
        }
    return v;
}

struct WellCase {
    Grid g = box_grid(161, 8, 1.0, 1.0);
    Eigen::VectorXd edge;
    Spectrum spectrum;
};

WellCase double_well(double left_depth = 5e-3, double right_depth = 5e-3) {
    WellCase s;
    s.edge = wells(s.g, {{40, 70, left_depth}, {91, 121, right_depth}});
    s.spectrum = solve_eigenstates(s.edge, s.g, kMat, 6);
    return s;
}

}  // namespace

TEST(WellProfile, TakesTheColumnMinimumOverQuantumCells) {
    Grid g = box_grid(4, 3, 1.0, 1.0);
    g.region[g.index(2, 1)] = Region::Bulk;
    Eigen::VectorXd v(g.size());
    for (int j = 0; j < 3; ++j)
        for (int i = 0; i < 4; ++i) v[g.index(i, j)] = 10.0 * i + (j == 1 ? -1.0 : 0.0);
    const auto p = well_profile(g, v);
    ASSERT_EQ(p.size(), 4u);
    EXPECT_DOUBLE_EQ(p[0], -1.0);
    EXPECT_DOUBLE_EQ(p[1], 9.0);
    EXPECT_DOUBLE_EQ(p[2], 20.0);  // the deeper cell is not quantum
    EXPECT_DOUBLE_EQ(p[3], 29.0);
}

TEST(FindDots, SymmetricDoubleWell) {
    const WellCase s = double_well();
    const double ef = 0.5 * (s.spectrum.energies[1] + s.spectrum.energies[2]);
    const DotRegions d = find_dots(s.g, s.edge, s.spectrum, ef, 80.0);
    ASSERT_EQ(d.dots.size(), 2u);
    EXPECT_EQ(d.left()->side, DotSide::Left);
    EXPECT_EQ(d.right()->side, DotSide::Right);
    EXPECT_LT(d.left()->minimum_x_nm, 70.0);
    EXPECT_GT(d.right()->minimum_x_nm, 91.0);
    EXPECT_DOUBLE_EQ(d.barrier_x_nm, 80.5);
    EXPECT_NEAR(d.left()->prominence_ev, 5e-3, 2e-5);
    // Bonding and antibonding states are occupied: one electron per dot.
    EXPECT_EQ(d.n_left(), 1);
    EXPECT_EQ(d.n_right(), 1);
    EXPECT_NEAR(d.left_mass[0], 0.5, 1e-6);
    EXPECT_NEAR(d.left_mass[1], 0.5, 1e-6);
    // Every state is assigned to one of the dots.
    for (int k = 0; k < s.spectrum.n_states(); ++k) EXPECT_GE(d.orbital_dot[k], 0) << k;
}

TEST(FindDots, DetunedDoubleWellFillsTheDeeperDotFirst) {
    const WellCase s = double_well(5.5e-3, 5e-3);
    const double ef = 0.5 * (s.spectrum.energies[0] + s.spectrum.energies[1]);
    const DotRegions d = find_dots(s.g, s.edge, s.spectrum, ef, 80.0);
    EXPECT_EQ(d.n_left(), 1);
    EXPECT_EQ(d.n_right(), 0);
    EXPECT_EQ(d.orbital_dot[0], 0);
    EXPECT_GT(d.left_mass[0], 0.99);
}

TEST(FindDots, SingleValleyIsLabelledByTheMiddleGate) {
    WellCase s;
    s.edge = wells(s.g, {{20, 60, 5e-3}});
    s.spectrum = solve_eigenstates(s.edge, s.g, kMat, 3);
    const double ef = s.spectrum.energies[0] + 1e-4;
    const DotRegions left = find_dots(s.g, s.edge, s.spectrum, ef, 80.0);
    ASSERT_EQ(left.dots.size(), 1u);
    EXPECT_EQ(left.dots[0].side, DotSide::Left);
    EXPECT_EQ(left.n_left(), 1);
    EXPECT_EQ(left.n_right(), 0);
    EXPECT_EQ(left.barrier_column, -1);
    const DotRegions right = find_dots(s.g, s.edge, s.spectrum, ef, 10.0);
    EXPECT_EQ(right.dots[0].side, DotSide::Right);
    EXPECT_EQ(right.n_right(), 1);
}

TEST(FindDots, ShallowRipplesAreNotDots) {
    WellCase s;
    // A 0.5 meV notch in the middle of the barrier is below the prominence threshold.
    s.edge = wells(s.g, {{40, 70, 5e-3}, {78, 84, 0.5e-3}, {91, 121, 5e-3}});
    s.spectrum = solve_eigenstates(s.edge, s.g, kMat, 4);
    const DotRegions d = find_dots(s.g, s.edge, s.spectrum, -1.0, 80.0);
    EXPECT_EQ(d.dots.size(), 2u);
}

TEST(FindDots, MoreThanTwoValleysIsAModelError) {
    WellCase s;
    s.edge = wells(s.g, {{20, 45, 5e-3}, {65, 95, 5e-3}, {115, 140, 5e-3}});
    s.spectrum = solve_eigenstates(s.edge, s.g, kMat, 4);
    EXPECT_THROW(find_dots(s.g, s.edge, s.spectrum, 0.0, 80.0), ModelError);
}

TEST(LocalizePair, SymmetricPairSplitsIntoMirrorOrbitals) {
    const WellCase s = double_well();
    const DotRegions d = find_dots(s.g, s.edge, s.spectrum, -1.0, 80.0);
    const LocalizedPair p = localize_pair(s.g, s.spectrum, d);
    EXPECT_EQ(p.states, std::make_pair(0, 1));
    const double a = s.g.cell_area();
    EXPECT_NEAR(p.left.squaredNorm() * a, 1.0, 1e-10);
    EXPECT_NEAR(p.right.squaredNorm() * a, 1.0, 1e-10);
    EXPECT_NEAR(p.left.dot(p.right) * a, 0.0, 1e-10);
    EXPECT_NEAR(p.eps_left, p.eps_right, 1e-9);
    // Two-level oracle: the tunnel coupling is half the bonding-antibonding splitting.
    EXPECT_NEAR(p.tunnel, 0.5 * (s.spectrum.energies[1] - s.spectrum.energies[0]), 1e-12);
    EXPECT_NEAR(p.eps_left, 0.5 * (s.spectrum.energies[0] + s.spectrum.energies[1]), 1e-12);
    double left_weight = 0.0;
    for (int j = 0; j < s.g.ny; ++j)
        for (int i = 0; i < s.g.nx; ++i)
            if (s.g.x(i) < d.barrier_x_nm) left_weight += p.left[s.g.index(i, j)] * p.left[s.g.index(i, j)] * a;
    EXPECT_GT(left_weight, 0.9);
}

TEST(LocalizePair, DetunedPairKeepsTheTwoLevelInvariants) {
    const WellCase s = double_well(5.2e-3, 5e-3);
    const DotRegions d = find_dots(s.g, s.edge, s.spectrum, -1.0, 80.0);
    const LocalizedPair p = localize_pair(s.g, s.spectrum, d);
    // Trace and determinant of the 2x2 block equal those of the diagonal eigenbasis.
    const double e0 = s.spectrum.energies[p.states.first], e1 = s.spectrum.energies[p.states.second];
    EXPECT_NEAR(p.eps_left + p.eps_right, e0 + e1, 1e-12);
    EXPECT_NEAR(p.eps_left * p.eps_right - p.tunnel * p.tunnel, e0 * e1, 1e-15);
    EXPECT_LT(p.eps_left, p.eps_right);
}

TEST(LocalizePair, NeedsTwoDots) {
    WellCase s;
    s.edge = wells(s.g, {{20, 60, 5e-3}});
    s.spectrum = solve_eigenstates(s.edge, s.g, kMat, 3);
    const DotRegions d = find_dots(s.g, s.edge, s.spectrum, -1.0, 80.0);
    EXPECT_THROW(localize_pair(s.g, s.spectrum, d), ModelError);
}

TEST(Stability, BoundariesAndExport) {
    StabilityDiagram d;
    d.v_l = {0.50, 0.51};
    d.v_r = {0.55, 0.56};
    d.n_l = {0, 1, 0, 1};
    d.n_r = {0, 0, 1, 1};
    const auto regimes = d.regimes();
    EXPECT_EQ(regimes.size(), 4u);
    const auto bounds = stability_boundaries(d);
    ASSERT_EQ(bounds.size(), 2u);
    for (const auto& b : bounds) EXPECT_EQ(b.points.size(), 2u) << b.label;
    std::ostringstream os;
    write_stability_csv(os, d);
    const std::string csv = os.str();
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "V_L,V_R,n_L,n_R");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
}

TEST(Stability, WindowValidation) {
    StabilityWindow w;
    EXPECT_EQ(w.v_l_values().size(), 9u);
    w.v_l_step = 0.0;
    EXPECT_THROW(w.v_l_values(), ConfigError);
    w = StabilityWindow{};
    w.v_r_max = w.v_r_min - 0.01;
    EXPECT_THROW(w.v_r_values(), ConfigError);
}
