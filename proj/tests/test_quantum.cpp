// test_quantum.cpp - Unit tests for Fock truncation, exact propagation and reduced densities

#include "spinorbit/experiments.hpp"

#include <gtest/gtest.h>

using namespace spinorbit;

namespace {

double ansatz_error(const HamiltonianSpec& spec, double T) {
    const SpinQuantumNumber sq(16);
    const SimulationScales sc(0.05, sq);
    const FockTruncation tr(32, 0.05);
    const PhasePoint z0(0.3, 0.2);
    const SphereDirection n0 = SphereDirection::from_angles(0.9, 0.4);
    const auto grid = uniform_grid(0, T, 10);
    const auto traj = integrate_trajectory(field_from_spec(spec), sc, z0, n0, grid);
    const auto exact = propagate_exact(spec, tr, build_spin_representation(sq), initial_product_state(tr, sq, z0, n0), grid);
    double worst = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) worst = std::max(worst, norm_error(assemble_ansatz(traj, i, tr, sq), exact[i]));
    return worst;
}

}  // namespace

TEST(Fock, CanonicalCommutatorAwayFromTheEdge) {
    const FockTruncation tr(20, 0.1);
    const OrbitalOperators ops = build_orbital_operators(tr);
    const Matrix x = Matrix(ops.x), p = Matrix(ops.hbarD);
    const Matrix c = commutator(x, p).topLeftCorner(19, 19);
    EXPECT_LT(max_abs(c - I_unit * 0.1 * Matrix::Identity(19, 19)), 1e-13);
}

TEST(Fock, CoherentStateMoments) {
    const FockTruncation tr(64, 0.02);
    const OrbitalOperators ops = build_orbital_operators(tr);
    const Vector v = coherent_state_fock(tr, PhasePoint(0.4, -0.3));
    EXPECT_NEAR(v.norm(), 1.0, 1e-12);
    EXPECT_NEAR(v.dot(ops.x * v).real(), 0.4, 1e-12);
    EXPECT_NEAR(v.dot(ops.hbarD * v).real(), -0.3, 1e-12);
}

TEST(Fock, LocalizationGuardNamesRequiredSize) {
    const FockTruncation tr(16, 0.01);
    try {
        (void)coherent_state_fock(tr, PhasePoint(1.0, 0.0));
        FAIL() << "expected TruncationError";
    } catch (const TruncationError& e) {
        EXPECT_NE(std::string(e.what()).find("M/4"), std::string::npos);
        EXPECT_GT(e.required_M, 16);
    }
}

TEST(Hamiltonian, AssembledOperatorIsHermitian) {
    const SpinQuantumNumber sq(6);
    const FockTruncation tr(24, 0.05);
    const HamiltonianAssembler as(dicke_spec(DickeParameters{1.0, 0.5, 1.0, 0}, 0.05, sq), tr, build_spin_representation(sq));
    EXPECT_EQ(as.dim(), 24 * 7);
    EXPECT_LT(hermiticity_residual(as.at(0.3)), 1e-12);
}

TEST(Propagation, AnsatzIsExactForTimeOnlyFields) {
    EXPECT_LT(ansatz_error(time_only_spec(Vec3(0, 0, 1.3)), 2.0), 1e-6);
    EXPECT_LT(ansatz_error(time_only_spec([](double t) { return Vec3(0.7 * std::cos(2 * t), 0.7 * std::sin(2 * t), 1.0); }), 1.0),
              1e-6);
    EXPECT_LT(ansatz_error(linear_coupling_spec(Vec3(0, 0, 1), Vec3::Zero(), Vec3::Zero(), 1.0), 2.0), 1e-6);
}

TEST(Propagation, DenseAndChebyshevAgree) {
    const SpinQuantumNumber sq(4);
    const FockTruncation tr(32, 0.05);
    const SpinRepresentation srep = build_spin_representation(sq);
    const HamiltonianSpec spec = linear_coupling_spec(Vec3(0, 0, 1), Vec3(1, 0, 0), Vec3::Zero(), 1.0);
    const HybridState psi0 = initial_product_state(tr, sq, PhasePoint(0.3, 0), SphereDirection::from_angles(1.0, 0.0));
    const auto grid = uniform_grid(0, 1, 4);
    PropagationOptions dense, cheb;
    cheb.dense_limit = 0;
    const auto a = propagate_exact(spec, tr, srep, psi0, grid, dense);
    const auto b = propagate_exact(spec, tr, srep, psi0, grid, cheb);
    EXPECT_LT(norm_error(a.back(), b.back()), 1e-10);
}

TEST(Propagation, TailGuardTriggers) {
    const SpinQuantumNumber sq(2);
    const FockTruncation tr(12, 0.1);
    const HybridState psi0 = initial_product_state(tr, sq, PhasePoint(0.3, 0), SphereDirection::from_angles(1.2, 0.0));
    EXPECT_THROW(propagate_exact(linear_coupling_spec(Vec3(0, 0, 1), Vec3(5, 0, 0), Vec3::Zero(), 1.0), tr,
                                 build_spin_representation(sq), psi0, uniform_grid(0, 2, 4)),
                 TruncationError);
}

TEST(ReducedDensity, ProductStateIsPure) {
    const SpinQuantumNumber sq(5);
    const FockTruncation tr(32, 0.05);
    const HybridState s = initial_product_state(tr, sq, PhasePoint(0.2, 0.1), SphereDirection::from_angles(0.7, 2.0));
    const PurityReport r = purity_and_entropy(partial_trace_orbital(s));
    EXPECT_NEAR(r.purity, 1.0, 1e-12);
    EXPECT_NEAR(r.vn_entropy, 0.0, 1e-8);
    EXPECT_EQ(r.count_above(1e-3), 1);
}

TEST(ReducedDensity, MaximallyEntangledPair) {
    Vector v = Vector::Zero(8 * 2);
    v(0 * 2 + 0) = v(1 * 2 + 1) = 1.0 / std::sqrt(2.0);
    const HybridState s(v, 8, 2, 0.1, 1);
    const PurityReport spin = purity_and_entropy(partial_trace_orbital(s));
    const PurityReport orb = purity_and_entropy(partial_trace_spin(s));
    EXPECT_NEAR(spin.purity, 0.5, 1e-14);
    EXPECT_NEAR(orb.purity, 0.5, 1e-14);
    EXPECT_NEAR(spin.vn_entropy, std::log(2.0), 1e-12);
}

TEST(Residual, VanishesForTimeOnlyField) {
    const SpinQuantumNumber sq(8);
    const SimulationScales sc(0.05, sq);
    const FockTruncation tr(32, 0.05);
    const ResidualReport r = ansatz_residual(time_only_spec(Vec3(0.2, 0, 1.0)), sc, PhasePoint(0.3, 0.2),
                                             SphereDirection::from_angles(0.8, 0.1), tr, build_spin_representation(sq), 0.5);
    EXPECT_LT(r.residual, 1e-6);
}

TEST(Scan, RowIsSkippedWhenFockCapIsTooSmall) {
    ScanCase c;
    c.spec = linear_coupling_spec(Vec3(0, 0, 1), Vec3(1, 0, 0), Vec3::Zero());
    c.z0 = PhasePoint(0.5, 0.0);
    c.M_min = 16;
    c.M_max = 16;
    const ScanRow row = ansatz_error_row(c, scales_for_delta(0.005, 0.5));
    EXPECT_TRUE(row.skipped);
    EXPECT_FALSE(row.reason.empty());
}
