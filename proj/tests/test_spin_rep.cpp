// test_spin_rep.cpp - Unit tests for spin matrices, coherent states and adjoint actions

#include "spinorbit/experiments.hpp"

#include <gtest/gtest.h>

using namespace spinorbit;

TEST(SpinQuantumNumber, ValidatesHalfIntegers) {
    EXPECT_EQ(SpinQuantumNumber::from_value(1.5).twice_s(), 3);
    EXPECT_EQ(SpinQuantumNumber(4).dim(), 5);
    EXPECT_THROW(SpinQuantumNumber::from_value(0.3), std::invalid_argument);
    EXPECT_THROW(SpinQuantumNumber(0), std::invalid_argument);
    EXPECT_THROW(build_spin_representation(SpinQuantumNumber(20), 11), std::exception);
}

TEST(SpinRepresentation, DickeBasisIsDescending) {
    const SpinQuantumNumber sq(3);
    const SpinRepresentation r = build_spin_representation(sq);
    EXPECT_EQ(sq.index_of(3), 0);
    EXPECT_EQ(sq.index_of(-3), 3);
    EXPECT_NEAR(r.S3(0, 0).real(), 1.5, 1e-15);
    EXPECT_NEAR(r.S3(3, 3).real(), -1.5, 1e-15);
}

TEST(SpinRepresentation, AlgebraAcrossSpins) {
    const auto dirs = cli::random_directions(8, 3);
    for (double s : {0.5, 1.0, 1.5, 2.0, 5.0}) {
        const cli::SpinCheckRow row = cli::spin_check_row(SpinQuantumNumber::from_value(s), dirs);
        EXPECT_LT(row.worst(), 1e-10 * row.N) << "s = " << s;
    }
}

TEST(SpinRepresentation, CasimirEqualsSSPlusOne) {
    const SpinQuantumNumber sq(7);
    const SpinRepresentation r = build_spin_representation(sq);
    const Matrix c = r.S1 * r.S1 + r.S2 * r.S2 + r.S3 * r.S3;
    EXPECT_LT(max_abs(c - sq.s() * (sq.s() + 1) * Matrix::Identity(sq.dim(), sq.dim())), 1e-12);
}

TEST(SphereDirection, RejectsNonUnitAndRoundTripsEta) {
    EXPECT_THROW(SphereDirection(Vec3(1, 1, 0)), std::invalid_argument);
    const SphereDirection n = SphereDirection::from_angles(0.7, 1.9);
    const SphereDirection m = SphereDirection::from_eta(n.eta());
    EXPECT_LT((n.vec() - m.vec()).norm(), 1e-13);
}

TEST(CoherentState, NorthPoleIsLowestWeight) {
    const SpinQuantumNumber sq(5);
    const Vector psi = coherent_amplitudes(sq, SphereDirection::north());
    EXPECT_NEAR(std::abs(psi(sq.dim() - 1)), 1.0, 1e-14);
    EXPECT_NEAR(psi.norm(), 1.0, 1e-14);
}

TEST(CoherentState, ExpectationIsMinusSN) {
    const SpinQuantumNumber sq(9);
    const SpinRepresentation r = build_spin_representation(sq);
    for (const auto& n : cli::random_directions(5, 11)) {
        const Vector psi = coherent_amplitudes(sq, n);
        for (int k = 0; k < 3; ++k)
            EXPECT_NEAR(psi.dot(r.component(k) * psi).real(), -sq.s() * n[k], 1e-12);
    }
}

TEST(CoherentState, OverlapLawAndOrthogonalCase) {
    const cli::OverlapCheck c = cli::overlap_check(SpinQuantumNumber(20), 30, 5);
    EXPECT_LT(c.max_error, 1e-10);
    EXPECT_LT(c.orthogonal_error, 1e-12);
}

TEST(CoherentState, OverlapPhaseMatchesInnerProduct) {
    const SpinQuantumNumber sq(6);
    const auto a = cli::random_directions(5, 21), b = cli::random_directions(5, 22);
    for (int i = 0; i < 5; ++i) {
        const cplx direct = coherent_amplitudes(sq, a[i]).dot(coherent_amplitudes(sq, b[i]));
        EXPECT_LT(std::abs(coherent_overlap(sq, a[i], b[i]) - direct), 1e-12);
    }
}

TEST(CoherentState, AntipodesAreOrthogonal) {
    const SpinQuantumNumber sq(4);
    const SphereDirection n = SphereDirection::from_angles(1.1, 0.3);
    EXPECT_LT(overlap_magnitude(sq, n, n.antipode()), 1e-14);
}

TEST(CoherentState, TwoTermDecompositionHasNoRemainder) {
    const SpinRepresentation r = build_spin_representation(SpinQuantumNumber(10));
    for (const auto& n : cli::random_directions(6, 9)) {
        const SpinOnCoherent d = apply_spin_to_coherent(r, n);
        EXPECT_LT(d.residual, 1e-11);
        EXPECT_LT(d.beyond_two_terms, 1e-11);
    }
}

TEST(CovariantSymbol, EtaAndVectorFormsAgree) {
    const Vec3 g(0.3, -1.2, 0.8);
    for (const auto& n : cli::random_directions(6, 4))
        EXPECT_NEAR(covariant_symbol(g, n.eta()), covariant_symbol(g, n), 1e-12);
}

TEST(SphereDirection, SouthPoleChartIsRefused) {
    const SphereDirection south(Vec3(0, 0, -1));
    EXPECT_TRUE(south.near_south_pole());
    EXPECT_THROW((void)south.eta(), ChartError);
}
