#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

#include "dqd/dots.hpp"
#include "dqd/errors.hpp"
#include "dqd/scf.hpp"
#include "test_support.hpp"

using namespace dqd;

TEST(SelfConsistent, ConvergesAtTheInitializationPoint) {
    const ConvergedSolution& s = test::pinit_solution();
    const ScfOptions o;
    EXPECT_LE(s.final_update_norm, o.tolerance_ev);
    EXPECT_LT(s.iterations, o.max_iterations);
    EXPECT_EQ(static_cast<int>(s.update_history.size()), s.iterations);
    // An independent Poisson + charge cycle from the converged potential barely moves it.
    EXPECT_LE(self_consistency_residual(s), 2.0 * o.tolerance_ev);
    const DotRegions d = find_dots(s);
    EXPECT_EQ(d.n_left(), 1);
    EXPECT_EQ(d.n_right(), 1);
}

TEST(SelfConsistent, DampingDoesNotChangeTheFixedPoint) {
    const auto& f = test::reference_device();
    ScfOptions o;
    o.mixing = 0.3;
    o.anderson_depth = 3;
    o.tolerance_ev = 1e-7;
    const ConvergedSolution a = self_consistent_solve(f.spec, f.materials, f.biases, o);
    const ConvergedSolution& b = test::pinit_solution();
    EXPECT_LT((a.potential.values - b.potential.values).cwiseAbs().maxCoeff(), 2e-5);
    EXPECT_NEAR(a.spectrum.energies[0], b.spectrum.energies[0], 2e-5);
}

TEST(SelfConsistent, WarmStartFromAConvergedPotential) {
    const auto& f = test::reference_device();
    const ConvergedSolution& cold = test::pinit_solution();
    ScfOptions o;
    o.initial_potential = cold.potential.values;
    const ConvergedSolution warm = self_consistent_solve(f.spec, f.materials, f.biases, o);
    EXPECT_LE(warm.iterations, 3);
    EXPECT_LT((warm.potential.values - cold.potential.values).cwiseAbs().maxCoeff(), 2e-6);

    o.initial_potential = Eigen::VectorXd::Zero(7);
    EXPECT_THROW(self_consistent_solve(f.spec, f.materials, f.biases, o), ConfigError);
}

TEST(SelfConsistent, DepletedDeviceHoldsNoElectrons) {
    const auto& f = test::reference_device();
    DeviceBiases b;
    b.v_b = b.v_l = b.v_m = b.v_r = 0.0;
    const ConvergedSolution s = self_consistent_solve(f.spec, f.materials, b);
    double quantum = 0.0;
    for (int c = 0; c < s.grid.size(); ++c)
        if (s.grid.region[c] == Region::Quantum) quantum = std::max(quantum, s.charge.values[c]);
    EXPECT_LT(quantum, 1e10);  // cm^-3
    EXPECT_GT(s.spectrum.energies[0], s.materials.fermi_level_ev + 0.01);
    const DotRegions d = find_dots(s);
    EXPECT_EQ(d.n_left() + d.n_right(), 0);
}

TEST(SelfConsistent, RejectsInvalidBiases) {
    const auto& f = test::reference_device();
    DeviceBiases b;
    b.v_m = NAN;
    EXPECT_THROW(self_consistent_solve(f.spec, f.materials, b), ConfigError);
    b = DeviceBiases{};
    b.drain = -1.0;
    EXPECT_THROW(self_consistent_solve(f.spec, f.materials, b), ConfigError);
}

TEST(Snapshot, RoundTripIsExact) {
    const ConvergedSolution& s = test::pinit_solution();
    const auto path = std::filesystem::temp_directory_path() / "dqd_snapshot_test.bin";
    save_snapshot(path, s);
    const ConvergedSolution back = load_snapshot(path);
    EXPECT_EQ(back.potential.values, s.potential.values);
    EXPECT_EQ(back.charge.values, s.charge.values);
    EXPECT_EQ(back.spectrum.energies, s.spectrum.energies);
    ASSERT_EQ(back.spectrum.n_states(), s.spectrum.n_states());
    for (int k = 0; k < s.spectrum.n_states(); ++k)
        EXPECT_EQ(back.spectrum.wavefunctions[k], s.spectrum.wavefunctions[k]);
    EXPECT_EQ(back.biases, s.biases);
    EXPECT_EQ(back.iterations, s.iterations);
    std::filesystem::remove(path);

    std::ofstream(path) << "not a snapshot";
    EXPECT_THROW(load_snapshot(path), ConfigError);
    std::filesystem::remove(path);
}
