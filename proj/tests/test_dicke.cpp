// test_dicke.cpp - Unit tests for the Campbell-Hausdorff factors, spin field and purity kernels

#include "spinorbit/experiments.hpp"

#include <gtest/gtest.h>

using namespace spinorbit;

TEST(CampbellHausdorff, ConstantCoefficientsHaveNoCorrection) {
    const CHFactors f = ch_factorize([](double) { return 0.7; }, [](double) { return -0.4; }, uniform_grid(0, 2, 4));
    EXPECT_NEAR(f.a.back(), 1.4, 1e-14);
    EXPECT_NEAR(f.b.back(), -0.8, 1e-14);
    EXPECT_NEAR(f.c.back(), 0.5 * 0.7 * -0.4 * 4.0, 1e-13);
    EXPECT_NEAR(f.c_tilde.back(), 0.0, 1e-13);
}

TEST(CampbellHausdorff, DickeCoefficientsInClosedForm) {
    const double g = 1.3, T = 0.9;
    const CHFactors f = ch_factorize([g](double t) { return g * std::cos(t); }, [g](double t) { return g * std::sin(t); },
                                     {0.0, T}, 200);
    EXPECT_NEAR(f.a.back(), g * std::sin(T), 1e-12);
    EXPECT_NEAR(f.b.back(), g * (1 - std::cos(T)), 1e-12);
    EXPECT_NEAR(f.c.back(), g * g * (std::sin(T) - 0.5 * T - 0.25 * std::sin(2 * T)), 1e-9);
}

TEST(CampbellHausdorff, FactorizationsMatchDirectPropagator) {
    const CHMatrixCheck c = ch_matrix_check([](double t) { return 0.6 + 0.3 * t; }, [](double t) { return -0.2 + 0.5 * t * t; },
                                            1.0, 12, SpinQuantumNumber(1), 1.0, 3, 200);
    EXPECT_LT(c.err_ch1, 1e-8);
    EXPECT_LT(c.err_ch2, 1e-8);
}

TEST(SpinField, SeparationFollowsChordLength) {
    const SphereDirection n0 = dicke_initial_direction(pi / 4);
    const double rho = std::hypot(n0[1], n0[2]);
    for (double d : {0.1, 0.5, 1.3})
        EXPECT_NEAR(spin_field_separation(n0, 2.0, d, 0.0), 2 * rho * std::abs(std::sin(d)), 1e-14);
    EXPECT_THROW(spin_field_separation(n0, 2.0, 1.0, 0.0, 0.0, 0.5), std::invalid_argument);
}

TEST(SpinField, HypothesisFailsOnRotationAxis) {
    EXPECT_FALSE(separation_hypothesis_holds(SphereDirection(Vec3(1, 0, 0))));
    EXPECT_TRUE(separation_hypothesis_holds(dicke_initial_direction(pi / 4)));
}

TEST(SpinField, ThetaAdvancesLinearly) {
    const SpinField f = classical_spin_field(SphereDirection(Vec3(0, 0.6, 0.8)), 0.5, {0.0, 0.4, 0.8});
    EXPECT_NEAR(f.theta[2] - f.theta[0], 0.4, 1e-14);
    EXPECT_NEAR(f.gamma[1], 0.0, 1e-15);
    EXPECT_LT((f.n[1].vec() - rotate_about_e1(Vec3(0, 0.6, 0.8), 0.2)).norm(), 1e-15);
}

TEST(KernelPurity, MatchesDiscreteOracle) {
    const SimulationScales sc(0.05, SpinQuantumNumber(10));
    const SphereDirection n0 = dicke_initial_direction(pi / 4);
    for (double a : {0.3, 1.0, 2.5}) {
        const KernelPurity kp = reduced_kernel_purity(PhasePoint(0.5, 0.1), n0, sc, a, 0.4 * a);
        EXPECT_NEAR(kp.purity, discrete_purity(n0, sc, kp.a_tilde), 1e-10);
        EXPECT_LT(kp.doubling_change, 1e-8);
        EXPECT_LE(kp.purity, 1.0 + 1e-12);
    }
}

TEST(KernelPurity, NarrowWindowIsRejected) {
    KernelPurityOptions o;
    o.window = 1.0;
    EXPECT_THROW(reduced_kernel_purity(PhasePoint(0, 0), SphereDirection::north(), SimulationScales(0.1, SpinQuantumNumber(2)),
                                       1.0, 0.0, o),
                 QuadratureError);
}

TEST(KernelPurity, ZeroCouplingIsPure) {
    const KernelPurity kp = reduced_kernel_purity(PhasePoint(0.2, 0), dicke_initial_direction(0.5),
                                                  SimulationScales(0.05, SpinQuantumNumber(4)), 0.0, 0.0);
    EXPECT_DOUBLE_EQ(kp.purity, 1.0);
}

TEST(DickeExperiment, SmallSystemAgreesWithClosedForm) {
    DickeExperimentConfig cfg;
    cfg.hbar = 0.1;
    cfg.spin = SpinQuantumNumber(10);
    cfg.M = 48;
    cfg.t_grid = uniform_grid(0, 1, 5);
    const DickeResult res = dicke_purity_experiment(cfg);
    EXPECT_NEAR(res.rows.front().purity_exact, 1.0, 1e-9);
    EXPECT_LT(res.max_closed_exact_diff, 1e-6);
    for (const auto& r : res.rows) EXPECT_NEAR(r.purity_oracle, r.purity_closed, 1e-9);
    EXPECT_GT(res.fit.coefficient, 0.0);
}

TEST(DickeExperiment, InteractionPictureGivesSamePurity) {
    DickeExperimentConfig cfg;
    cfg.hbar = 0.1;
    cfg.spin = SpinQuantumNumber(6);
    cfg.M = 40;
    cfg.t_grid = uniform_grid(0, 0.6, 3);
    DickeExperimentConfig ip = cfg;
    ip.interaction_picture = true;
    const DickeResult a = dicke_purity_experiment(cfg), b = dicke_purity_experiment(ip);
    for (std::size_t i = 0; i < a.rows.size(); ++i) EXPECT_NEAR(a.rows[i].purity_exact, b.rows[i].purity_exact, 1e-7);
}
