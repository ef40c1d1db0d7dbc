// precession.cpp - Semiclassical ansatz against exact propagation for a linearly coupled spin

#include "spinorbit/quantum.hpp"

#include <cstdio>

int main() {
    using namespace spinorbit;
    const double hbar = 0.02;
    const SimulationScales scales = scales_for_delta(hbar, 0.5);
    const HamiltonianSpec spec = linear_coupling_spec(Vec3(0, 0, 1), Vec3(1, 0, 0), Vec3::Zero(), 0.0);
    const PhasePoint z0(0.5, 0.0);
    const SphereDirection n0(Vec3(0.6, 0.0, 0.8));
    const auto grid = uniform_grid(0.0, 1.0, 10);

    const SemiclassicalTrajectory traj = integrate_trajectory(field_from_spec(spec), scales, z0, n0, grid);
    const FockTruncation tr(required_fock_size(traj, hbar, 64), hbar);
    const SpinRepresentation srep = build_spin_representation(scales.spin);
    const auto exact = propagate_exact(spec, tr, srep, initial_product_state(tr, scales.spin, z0, n0), grid);

    std::printf("hbar = %g, s = %g, kappa = %g, M = %d\n", hbar, scales.s(), scales.kappa(), tr.M);
    std::printf("%6s %10s %10s %10s %12s\n", "t", "q", "p", "n3", "infidelity");
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const HybridState ansatz = assemble_ansatz(traj, i, tr, scales.spin);
        std::printf("%6.2f %10.5f %10.5f %10.5f %12.3e\n", grid[i], traj.z[i].q(0), traj.z[i].p(0), traj.n[i][2],
                    infidelity(ansatz, exact[i]));
    }
}
