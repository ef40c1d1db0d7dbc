// dicke.hpp - Campbell-Hausdorff factors, x-dependent spin field and orbital purity for the Dicke coupling
//
// In the interaction picture the Dicke propagator solves
//     i dU/dt = (alpha(t) x + beta(t) hbarD) A U,   [x, hbarD] = i hbar,
// with a time-independent spin operator A (A = S1 when omega3 = 0). Then
//     U = exp(-i hbar c A^2) exp(-i b hbarD A) exp(-i a x A)
//       = exp(-i hbar c~ A^2) exp(-i (b hbarD + a x) A),
// a = int alpha, b = int beta, c = int alpha b, c~ = c - a b / 2.

#pragma once

#include "spinorbit/fitting.hpp"
#include "spinorbit/linalg.hpp"
#include "spinorbit/quadrature.hpp"
#include "spinorbit/quantum.hpp"
#include "spinorbit/spin_rep.hpp"

#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

namespace spinorbit {

struct QuadratureError : NumericalError {
    using NumericalError::NumericalError;
};

// --------------------------- Campbell-Hausdorff -------------------------------

struct CHFactors {
    std::vector<double> t;
    std::vector<double> a;
    std::vector<double> b;
    std::vector<double> c;
    std::vector<double> c_tilde;
};

using ScalarFn = std::function<double(double)>;

// (a, b, c)' = (alpha, beta, alpha b) by RK4 substeps; on a and b this is
// composite Simpson quadrature.
inline CHFactors ch_factorize(const ScalarFn& alpha, const ScalarFn& beta, const std::vector<double>& t_grid,
                              int substeps = 16) {
    if (t_grid.empty()) throw std::invalid_argument("ch_factorize: empty grid");
    CHFactors f;
    double a = 0.0, b = 0.0, c = 0.0;
    auto push = [&](double t) {
        f.t.push_back(t);
        f.a.push_back(a);
        f.b.push_back(b);
        f.c.push_back(c);
        f.c_tilde.push_back(c - 0.5 * a * b);
    };
    push(t_grid.front());
    for (std::size_t i = 1; i < t_grid.size(); ++i) {
        const double h = (t_grid[i] - t_grid[i - 1]) / substeps;
        for (int k = 0; k < substeps; ++k) {
            const double t0 = t_grid[i - 1] + k * h;
            const double al0 = alpha(t0), alm = alpha(t0 + 0.5 * h), al1 = alpha(t0 + h);
            const double be0 = beta(t0), bem = beta(t0 + 0.5 * h), be1 = beta(t0 + h);
            // RK4 stages for c' = alpha(t) b(t), with b advanced by the same stages
            const double k1 = al0 * b;
            const double k2 = alm * (b + 0.5 * h * be0);
            const double k3 = alm * (b + 0.5 * h * bem);
            const double k4 = al1 * (b + h * bem);
            c += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            a += quad::simpson(al0, alm, al1, h);
            b += quad::simpson(be0, bem, be1, h);
        }
        push(t_grid[i]);
    }
    return f;
}

struct CHMatrixCheck {
    double err_ch1 = 0.0;       // || P (U_direct - U_CH1) P ||
    double err_ch2 = 0.0;       // || P (U_direct - U_CH2) P ||
    double err_ch1_ch2 = 0.0;   // || P (U_CH1 - U_CH2) P ||
};

// Compares both factorizations with a directly integrated propagator for
// A = S1 of spin `sq`. Everything is computed on a Fock space padded to
// `pad` * M levels and compressed to the first M levels, where the truncated
// x and hbarD still satisfy the canonical relation. The check runs per S1
// eigenvalue mu >= 0; the spin-space operator norm is the largest of these.
inline CHMatrixCheck ch_matrix_check(const ScalarFn& alpha, const ScalarFn& beta, double T, int M,
                                     const SpinQuantumNumber& sq, double hbar = 1.0, int pad = 3,
                                     int direct_steps = 400) {
    const FockTruncation big(pad * M, hbar);
    const OrbitalOperators ops = build_orbital_operators(big);
    const Matrix x = Matrix(ops.x), p = Matrix(ops.hbarD);
    const CHFactors f = ch_factorize(alpha, beta, {0.0, T}, 64);
    const double a = f.a.back(), b = f.b.back(), c = f.c.back(), ct = f.c_tilde.back();

    const SpinRepresentation srep = build_spin_representation(sq);
    Eigen::SelfAdjointEigenSolver<Matrix> es(srep.S1, Eigen::EigenvaluesOnly);
    CHMatrixCheck out;
    const double g1 = 0.5 - std::sqrt(3.0) / 6.0, g2 = 0.5 + std::sqrt(3.0) / 6.0;
    for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k) {
        const double mu = es.eigenvalues()(k);
        if (mu < -1e-12) continue;  // parity maps mu to -mu and commutes with the compression
        // fourth-order Magnus for i U' = mu (alpha x + beta p) U
        Matrix u = Matrix::Identity(big.M, big.M);
        const double h = T / direct_steps;
        for (int n = 0; n < direct_steps; ++n) {
            const double t1 = (n + g1) * h, t2 = (n + g2) * h;
            const Matrix h1 = mu * (alpha(t1) * x + beta(t1) * p);
            const Matrix h2 = mu * (alpha(t2) * x + beta(t2) * p);
            const Matrix kmat = -0.5 * h * (h1 + h2) - I_unit * (std::sqrt(3.0) / 12.0) * h * h * commutator(h1, h2);
            u = expi_hermitian(kmat, 1.0) * u;
        }
        const Matrix ch1 = std::exp(-I_unit * hbar * c * mu * mu) * expi_hermitian(p, -b * mu) * expi_hermitian(x, -a * mu);
        const Matrix ch2 = std::exp(-I_unit * hbar * ct * mu * mu) * expi_hermitian(b * p + a * x, -mu);
        auto comp = [M](const Matrix& m) { return Matrix(m.topLeftCorner(M, M)); };
        out.err_ch1 = std::max(out.err_ch1, operator_norm(comp(u - ch1)));
        out.err_ch2 = std::max(out.err_ch2, operator_norm(comp(u - ch2)));
        out.err_ch1_ch2 = std::max(out.err_ch1_ch2, operator_norm(comp(ch1 - ch2)));
    }
    return out;
}

// --------------------------- classical spin field -----------------------------

// n(x) = R_{e1}(a x) n0: rotation about e1 by the angle a x, i.e. the
// direction of exp(-i a x S1) psi_{n0}. In the (e2, e3) plane
// n = (n0_1, rho cos(theta), rho sin(theta)), theta(x) = theta_0 + a x.
struct SpinField {
    double a = 0.0;
    std::vector<double> x;
    std::vector<SphereDirection> n;
    std::vector<double> theta;
    std::vector<double> gamma;  // phase, logged only
};

inline Vec3 rotate_about_e1(const Vec3& v, double angle) {
    const double c = std::cos(angle), s = std::sin(angle);
    return Vec3(v(0), c * v(1) - s * v(2), s * v(1) + c * v(2));
}

// gamma(x) = n1 int_0^{a x} dpsi / (1 + n3(psi)) along the e1 rotation.
inline double spin_field_phase(const SphereDirection& n0, double angle, int order = 64) {
    if (angle == 0.0) return 0.0;
    const Vec3 v = n0.vec();
    const double rho = std::hypot(v(1), v(2)), th0 = std::atan2(v(2), v(1));
    const int pieces = std::max(1, static_cast<int>(std::ceil(std::abs(angle) / 0.5)));
    double sum = 0.0;
    for (int k = 0; k < pieces; ++k) {
        const double lo = angle * k / pieces, hi = angle * (k + 1) / pieces;
        sum += quad::integrate(
            [&](double psi) {
                const double d = 1.0 + rho * std::sin(th0 + psi);
                if (d < 1e-12) throw ChartError("spin_field_phase: rotation passes through the south pole");
                return 1.0 / d;
            },
            lo, hi, static_cast<std::size_t>(order));
    }
    return v(0) * sum;
}

inline SpinField classical_spin_field(const SphereDirection& n0, double a, const std::vector<double>& x_grid,
                                      bool with_phase = true) {
    SpinField f;
    f.a = a;
    f.x = x_grid;
    const Vec3 v = n0.vec();
    const double th0 = std::atan2(v(2), v(1));
    for (double x : x_grid) {
        f.n.emplace_back(rotate_about_e1(v, a * x));
        f.theta.push_back(th0 + a * x);
        f.gamma.push_back(with_phase ? spin_field_phase(n0, a * x) : 0.0);
    }
    return f;
}

// The separation lemma needs n0 off the rotation axis.
inline bool separation_hypothesis_holds(const SphereDirection& n0, double tol = 1e-12) {
    return std::hypot(n0[1], n0[2]) > tol;
}

// |n(x) - n(y)| = 2 rho |sin(a (x - y) / 2)|, rho the distance of n0 from the e1 axis.
inline double spin_field_separation(const SphereDirection& n0, double a, double x, double y,
                                    double x0 = 0.0, double r0 = std::numeric_limits<double>::infinity()) {
    if (std::abs(x - x0) + std::abs(y - x0) > r0)
        throw std::invalid_argument("spin_field_separation: (x, y) outside the trust region");
    return (rotate_about_e1(n0.vec(), a * x) - rotate_about_e1(n0.vec(), a * y)).norm();
}

// --------------------------- reduced kernel purity ----------------------------

struct KernelPurityOptions {
    int order = 96;
    double window = 6.0;  // half-width in units of sqrt(hbar)
    bool check_doubling = true;
};

struct KernelPurity {
    double purity = 1.0;
    double doubling_change = 0.0;
    double boundary_mass = 0.0;
    double diagonal_mass = 1.0;  // int K(x, x) dx
    double center = 0.0;
    double a_tilde = 0.0;
};

namespace detail {

inline double kernel_purity_sum(double center, double hbar, double rho2, double a_tilde, int twice_s, int order,
                                double half, double* diag_mass) {
    const quad::Rule r = quad::gauss_legendre(static_cast<std::size_t>(order), center - half, center + half);
    const std::size_t n = r.nodes.size();
    std::vector<double> w(n);
    double mass = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = r.nodes[i] - center;
        w[i] = r.weights[i] * std::exp(-d * d / hbar) / std::sqrt(pi * hbar);
        mass += w[i];
    }
    if (diag_mass) *diag_mass = mass;
    const double n1sq = 1.0 - rho2;
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double dot = n1sq + rho2 * std::cos(a_tilde * (r.nodes[i] - r.nodes[j]));
            const double base = std::max(0.0, 0.5 * (1.0 + dot));
            row += w[j] * std::pow(base, twice_s);
        }
        sum += w[i] * row;
    }
    return sum;
}

}  // namespace detail

// P = int int w(x) w(y) ((1 + n(x).n(y)) / 2)^{2s} dx dy with the Gaussian
// orbital density w of variance hbar/2 centred on the generalized coordinate
// (a q0 + b p0) / a~ and n(x) = R_{e1}(a~ x) n0, a~ = sqrt(a^2 + b^2).
inline KernelPurity reduced_kernel_purity(const PhasePoint& z0, const SphereDirection& n0,
                                          const SimulationScales& scales, double a, double b,
                                          const KernelPurityOptions& opts = {}) {
    KernelPurity out;
    out.a_tilde = std::hypot(a, b);
    out.center = out.a_tilde > 0 ? (a * z0.q(0) + b * z0.p(0)) / out.a_tilde : z0.q(0);
    const double hbar = scales.hbar;
    const double half = opts.window * std::sqrt(hbar);
    out.boundary_mass = std::erfc(half / std::sqrt(hbar));
    if (out.boundary_mass > 1e-10)
        throw QuadratureError("reduced_kernel_purity: quadrature window leaves boundary mass " +
                              std::to_string(out.boundary_mass));
    if (out.a_tilde == 0.0) return out;
    const double rho2 = n0[1] * n0[1] + n0[2] * n0[2];
    out.purity = detail::kernel_purity_sum(out.center, hbar, rho2, out.a_tilde, scales.spin.twice_s(), opts.order,
                                           half, &out.diagonal_mass);
    if (opts.check_doubling) {
        const double p2 = detail::kernel_purity_sum(out.center, hbar, rho2, out.a_tilde, scales.spin.twice_s(),
                                                    2 * opts.order, half, nullptr);
        out.doubling_change = std::abs(p2 - out.purity);
    }
    return out;
}

// K~(x, y) = conj(phi(x)) phi(y) <psi_{n(x)}, psi_{n(y)}> on the given nodes,
// with phi the Gaussian amplitude along the generalized coordinate.
inline Matrix reduced_kernel_matrix(const PhasePoint& z0, const SphereDirection& n0, const SimulationScales& scales,
                                    double a, double b, const std::vector<double>& nodes) {
    const double at = std::hypot(a, b);
    const double center = at > 0 ? (a * z0.q(0) + b * z0.p(0)) / at : z0.q(0);
    const double momentum = at > 0 ? (-b * z0.q(0) + a * z0.p(0)) / at : z0.p(0);
    const double hbar = scales.hbar;
    const std::size_t n = nodes.size();
    std::vector<cplx> phi(n);
    std::vector<SphereDirection> dirs;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = nodes[i] - center;
        phi[i] = std::pow(pi * hbar, -0.25) * std::exp(-d * d / (2 * hbar)) * std::exp(I_unit * momentum * nodes[i] / hbar);
        dirs.emplace_back(rotate_about_e1(n0.vec(), at * nodes[i]));
    }
    Matrix k(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            k(i, j) = std::conj(phi[i]) * phi[j] * coherent_overlap(scales.spin, dirs[i], dirs[j]);
    return k;
}

// Exact purity for A = S1 from the S1 weights p_m of psi_{n0}:
// P = sum p_m p_m' exp(-hbar a~^2 (m - m')^2 / 2).
inline double discrete_purity(const SphereDirection& n0, const SimulationScales& scales, double a_tilde) {
    const SpinRepresentation srep = build_spin_representation(scales.spin);
    Eigen::SelfAdjointEigenSolver<Matrix> es(srep.S1);
    const Vector psi = coherent_amplitudes(scales.spin, n0);
    const Vector c = es.eigenvectors().adjoint() * psi;
    const RealVector m = es.eigenvalues();
    double p = 0.0;
    for (Eigen::Index i = 0; i < c.size(); ++i)
        for (Eigen::Index j = 0; j < c.size(); ++j) {
            const double d = m(i) - m(j);
            p += std::norm(c(i)) * std::norm(c(j)) * std::exp(-0.5 * scales.hbar * a_tilde * a_tilde * d * d);
        }
    return p;
}

// n0 = (cos th, sin th cos th, sin^2 th), the initial spin used for the decoherence bound.
inline SphereDirection dicke_initial_direction(double theta0) {
    return SphereDirection(Vec3(std::cos(theta0), std::sin(theta0) * std::cos(theta0),
                                std::sin(theta0) * std::sin(theta0)));
}

// --------------------------- purity experiment --------------------------------

struct DickeExperimentConfig {
    DickeParameters params;
    double hbar = 0.01;
    SpinQuantumNumber spin{100};
    PhasePoint z0{0.5, 0.0};
    SphereDirection n0 = dicke_initial_direction(pi / 4);
    std::vector<double> t_grid = uniform_grid(0.0, 1.0, 20);
    int M = 256;
    bool exact = true;
    bool interaction_picture = false;  // propagate in the interaction picture (Magnus) instead of the full picture
    KernelPurityOptions quadrature;
    PropagationOptions propagation;
};

struct DickeRow {
    double t = 0.0;
    double a = 0.0;
    double b = 0.0;
    double purity_exact = std::numeric_limits<double>::quiet_NaN();
    double purity_closed = std::numeric_limits<double>::quiet_NaN();
    double purity_oracle = std::numeric_limits<double>::quiet_NaN();
    double envelope = std::numeric_limits<double>::quiet_NaN();
    int eigenvalues_above = 0;  // reduced-density eigenvalues above 1e-3
    double quadrature_change = 0.0;
};

struct DickeResult {
    std::vector<DickeRow> rows;
    double g = 0.0;
    double kappa = 0.0;
    fit::ProportionalFit fit;  // P^{-2} - 1 ~ c0 kappa t^2
    double c0_envelope = 0.0;  // largest c0 with P <= (1 + c0 kappa t^2)^{-1/2} on every row
    double max_closed_exact_diff = 0.0;
    double max_tail_mass = 0.0;
};

inline double measured_purity(const DickeRow& r) {
    return std::isnan(r.purity_exact) ? r.purity_closed : r.purity_exact;
}

inline DickeResult dicke_purity_experiment(const DickeExperimentConfig& cfg) {
    const SimulationScales scales(cfg.hbar, cfg.spin);
    DickeResult res;
    res.g = dicke_coupling(cfg.params, cfg.hbar, cfg.spin);
    res.kappa = scales.kappa();
    const double g = res.g, wc = cfg.params.omega_c;
    const bool closed_form = cfg.params.omega3 == 0.0;
    const CHFactors ch = ch_factorize([g, wc](double t) { return g * std::cos(wc * t); },
                                      [g, wc](double t) { return g * std::sin(wc * t); }, cfg.t_grid);

    std::vector<HybridState> states;
    if (cfg.exact) {
        const FockTruncation tr(cfg.M, cfg.hbar);
        const SpinRepresentation srep = build_spin_representation(cfg.spin);
        const HybridState psi0 = initial_product_state(tr, cfg.spin, cfg.z0, cfg.n0);
        const HamiltonianSpec spec = cfg.interaction_picture ? dicke_interaction_spec(cfg.params, cfg.hbar, cfg.spin)
                                                             : dicke_spec(cfg.params, cfg.hbar, cfg.spin);
        PropagationDiagnostics diag;
        states = propagate_exact(spec, tr, srep, psi0, cfg.t_grid, cfg.propagation, &diag);
        res.max_tail_mass = diag.max_tail_mass;
    }

    for (std::size_t i = 0; i < cfg.t_grid.size(); ++i) {
        DickeRow row;
        row.t = cfg.t_grid[i];
        row.a = ch.a[i];
        row.b = ch.b[i];
        if (cfg.exact) {
            const PurityReport pr = purity_and_entropy(partial_trace_spin(states[i]));
            row.purity_exact = pr.purity;
            row.eigenvalues_above = pr.count_above(1e-3);
        }
        if (closed_form) {
            const KernelPurity kp = reduced_kernel_purity(cfg.z0, cfg.n0, scales, row.a, row.b, cfg.quadrature);
            row.purity_closed = kp.purity;
            row.quadrature_change = kp.doubling_change;
            row.purity_oracle = discrete_purity(cfg.n0, scales, kp.a_tilde);
            if (cfg.exact)
                res.max_closed_exact_diff = std::max(res.max_closed_exact_diff, std::abs(row.purity_closed - row.purity_exact));
        }
        res.rows.push_back(row);
    }

    std::vector<double> xs, ys;
    double c0_env = std::numeric_limits<double>::infinity();
    for (const auto& r : res.rows) {
        if (r.t <= 0.0) continue;
        const double p = measured_purity(r);
        const double y = 1.0 / (p * p) - 1.0;
        const double x = res.kappa * r.t * r.t;
        xs.push_back(x);
        ys.push_back(y);
        c0_env = std::min(c0_env, y / x);
    }
    if (!xs.empty()) {
        res.fit = fit::proportional(xs, ys);
        res.c0_envelope = c0_env;
    }
    for (auto& r : res.rows) r.envelope = 1.0 / std::sqrt(1.0 + res.c0_envelope * res.kappa * r.t * r.t);
    return res;
}

}  // namespace spinorbit
