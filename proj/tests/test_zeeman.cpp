#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "dqd/errors.hpp"
#include "dqd/units.hpp"
#include "dqd/zeeman.hpp"
#include "test_support.hpp"

using namespace dqd;
using dqd::test::box_grid;

namespace {

/// Normalized Gaussian orbital centred at (x0, y0).
Eigen::VectorXd gaussian(const Grid& g, double x0, double y0, double sx, double sy) {
    Eigen::VectorXd psi(g.size());
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            const double dx = (g.x(i) - x0) / sx, dy = (g.y(j) - y0) / sy;
            psi[g.index(i, j)] = std::exp(-0.25 * (dx * dx + dy * dy));
        }
    return psi / std::sqrt(psi.squaredNorm() * g.cell_area());
}

double centroid_x(const Grid& g, const Eigen::VectorXd& psi) {
    double s = 0.0;
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) s += g.x(i) * psi[g.index(i, j)] * psi[g.index(i, j)];
    return s * g.cell_area();
}

}  // namespace

TEST(Zeeman, UniformFieldGivesTheFreeElectronSplitting) {
    // g mu_B B / h with g = 2 from CODATA constants.
    const double oracle = 2.0 * 9.2740100783e-24 * 0.6585 / 6.62607015e-34;
    const Grid g = box_grid(100, 8, 2.0, 1.0);
    const Eigen::VectorXd psi = gaussian(g, 100.0, 4.0, 10.0, 1.5);
    const double ez = zeeman_splitting(g, psi, MagnetFieldMap::uniform(0.6585, 0.0, 200.0));
    EXPECT_NEAR(ez, oracle, 1e-6 * oracle);
    // The quoted 0.6585 T reference splitting of 18.438 GHz, to within g = 2 rounding.
    EXPECT_NEAR(ez / 18.438e9, 1.0, 5e-4);
}

TEST(Zeeman, LinearFieldSamplesTheOrbitalCentroid) {
    const Grid g = box_grid(150, 8, 2.0, 1.0);
    const double b0 = 0.64, grad = 6.3e-5;
    const MagnetFieldMap map = MagnetFieldMap::linear(b0, grad, 0.0, 300.0);
    for (double x0 : {60.0, 150.0, 231.0}) {
        const Eigen::VectorXd psi = gaussian(g, x0, 4.0, 12.0, 1.5);
        const double expected = units::zeeman_hz_per_tesla * (b0 + grad * centroid_x(g, psi));
        EXPECT_NEAR(zeeman_splitting(g, psi, map), expected, 1e-9 * expected) << x0;
    }
}

TEST(Zeeman, OrbitalOutsideTheMapIsRejected) {
    const Grid g = box_grid(100, 8, 2.0, 1.0);
    const Eigen::VectorXd psi = gaussian(g, 100.0, 4.0, 10.0, 1.5);
    EXPECT_THROW(zeeman_splitting(g, psi, MagnetFieldMap::uniform(0.6, 50.0, 150.0)), ConfigError);
}

TEST(Zeeman, CalibratedDeviceAtTheInitializationPoint) {
    const auto map = MagnetFieldMap::load(test::source_path("configs/bz_map.txt"));
    const auto [ezl, ezr] = zeeman_splittings(test::pinit_solution(), map);
    EXPECT_NEAR(ezl, 18.309e9, 2e6);
    EXPECT_NEAR(ezr, 18.453e9, 2e6);
    EXPECT_NEAR(ezr - ezl, 144e6, 2e6);
}

TEST(FieldMap, InterpolatesWithoutOvershoot) {
    const MagnetFieldMap map({0.0, 10.0, 20.0, 30.0, 40.0}, {0.5, 0.5, 0.7, 0.7, 0.7});
    EXPECT_DOUBLE_EQ(map(10.0), 0.5);
    EXPECT_DOUBLE_EQ(map(20.0), 0.7);
    for (double x = 0.0; x <= 40.0; x += 0.25) {
        EXPECT_GE(map(x), 0.5 - 1e-15) << x;
        EXPECT_LE(map(x), 0.7 + 1e-15) << x;
    }
    EXPECT_DOUBLE_EQ(map(5.0), 0.5);  // flat segments stay flat
    EXPECT_DOUBLE_EQ(map.b_min(), 0.5);
    EXPECT_DOUBLE_EQ(map.b_max(), 0.7);
    EXPECT_TRUE(map.covers(0.0, 40.0));
    EXPECT_FALSE(map.covers(-1.0, 40.0));
    EXPECT_THROW(map(40.5), ConfigError);
    EXPECT_THROW(map(-0.5), ConfigError);
}

TEST(FieldMap, LinearDataIsReproducedExactly) {
    const MagnetFieldMap map = MagnetFieldMap::linear(0.64, 6.3e-5, 0.0, 400.0, 41);
    for (double x = 0.0; x <= 400.0; x += 3.7) EXPECT_NEAR(map(x), 0.64 + 6.3e-5 * x, 1e-14) << x;
}

TEST(FieldMap, ParseAndRoundTrip) {
    std::istringstream is("# x_nm B_tesla\n0 0.6\n\n  50 0.61  # inline comment\n100\t0.62\n");
    const MagnetFieldMap map = MagnetFieldMap::parse(is);
    ASSERT_EQ(map.x().size(), 3u);
    EXPECT_DOUBLE_EQ(map(50.0), 0.61);
    const auto path = std::filesystem::temp_directory_path() / "dqd_field_map_test.txt";
    map.save(path);
    const MagnetFieldMap back = MagnetFieldMap::load(path);
    EXPECT_EQ(back.x(), map.x());
    EXPECT_EQ(back.b(), map.b());
    std::filesystem::remove(path);
}

TEST(FieldMap, InvalidInputIsAConfigError) {
    for (const char* text : {"0 0.6\n", "0 0.6\n10 abc\n", "0 0.6\n0 0.7\n", "10 0.6\n0 0.7\n", "0 0.6\n10 -0.1\n",
                             "0 0.6 7\n10 0.6\n", ""}) {
        std::istringstream is(text);
        EXPECT_THROW(MagnetFieldMap::parse(is), ConfigError) << text;
    }
    EXPECT_THROW(MagnetFieldMap::load("/nonexistent/bz.txt"), ConfigError);
    EXPECT_THROW(MagnetFieldMap::linear(0.1, -0.01, 0.0, 100.0), ConfigError);
}
