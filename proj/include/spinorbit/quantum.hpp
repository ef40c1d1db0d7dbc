// quantum.hpp - Exact Fock x spin propagation, semiclassical ansatz states and error scans
//
// The hybrid basis is orbital (Fock, M levels) tensor spin (Dicke, N = 2s+1
// levels); a state vector stores coefficient (i, k) at index i * N + k.

#pragma once

#include "spinorbit/classical.hpp"
#include "spinorbit/fitting.hpp"
#include "spinorbit/linalg.hpp"
#include "spinorbit/spin_rep.hpp"

#include <atomic>
#include <chrono>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace spinorbit {

struct TruncationError : NumericalError {
    int required_M = 0;
    TruncationError(const std::string& what, int required) : NumericalError(what), required_M(required) {}
};

struct AssemblyError : NumericalError {
    using NumericalError::NumericalError;
};

struct CapabilityError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct StepError : NumericalError {
    using NumericalError::NumericalError;
};

// --------------------------- orbital basis ------------------------------------

struct FockTruncation {
    int M;
    double hbar;
    double omega_ref = 1.0;

    FockTruncation(int M_, double hbar_, double omega_ref_ = 1.0) : M(M_), hbar(hbar_), omega_ref(omega_ref_) {
        if (M_ < 8) throw std::invalid_argument("FockTruncation: M must be >= 8");
        if (!(hbar_ > 0.0)) throw std::invalid_argument("FockTruncation: hbar must be positive");
        if (!(omega_ref_ > 0.0)) throw std::invalid_argument("FockTruncation: omega_ref must be positive");
    }

    // Number of top Fock levels used by the tail-mass guard.
    int tail_levels() const { return std::max(1, (M + 9) / 10); }
};

struct OrbitalOperators {
    SparseMatrix a;
    SparseMatrix adag;
    SparseMatrix x;
    SparseMatrix hbarD;  // momentum operator -i hbar d/dx
    SparseMatrix number;
};

inline OrbitalOperators build_orbital_operators(const FockTruncation& tr) {
    const int M = tr.M;
    std::vector<Eigen::Triplet<cplx>> ta, tn;
    for (int n = 1; n < M; ++n) ta.emplace_back(n - 1, n, std::sqrt(static_cast<double>(n)));
    for (int n = 0; n < M; ++n) tn.emplace_back(n, n, static_cast<double>(n));
    OrbitalOperators ops;
    ops.a.resize(M, M);
    ops.a.setFromTriplets(ta.begin(), ta.end());
    ops.adag = SparseMatrix(ops.a.adjoint());
    ops.number.resize(M, M);
    ops.number.setFromTriplets(tn.begin(), tn.end());
    const double xs = std::sqrt(tr.hbar / (2.0 * tr.omega_ref));
    const double ps = std::sqrt(tr.hbar * tr.omega_ref / 2.0);
    ops.x = SparseMatrix(xs * (ops.a + ops.adag));
    ops.hbarD = SparseMatrix(cplx(0.0, ps) * (ops.adag - ops.a));
    return ops;
}

// (omega/2)(x^2 + (hbar D)^2) written through the ladder operators so that the
// truncation acts on a^2 and a^dag^2 instead of on products of truncated x, p.
inline SparseMatrix oscillator_hamiltonian(const FockTruncation& tr, const OrbitalOperators& ops, double omega) {
    const double r = tr.omega_ref;
    SparseMatrix id = sparse_identity(tr.M);
    SparseMatrix a2 = ops.a * ops.a;
    SparseMatrix ad2 = ops.adag * ops.adag;
    SparseMatrix h = (omega * tr.hbar / 4.0) * ((r + 1.0 / r) * (2.0 * ops.number + id) + (1.0 / r - r) * (a2 + ad2));
    return h;
}

// Coefficients exp(-|zeta|^2/2) zeta^n / sqrt(n!) with zeta = (sqrt(r) q + i p / sqrt(r)) / sqrt(2 hbar).
inline Vector coherent_state_fock(const FockTruncation& tr, const PhasePoint& z) {
    if (z.dim() != 1) throw CapabilityError("coherent_state_fock: orbital dimension must be 1");
    const double r = tr.omega_ref;
    const cplx zeta = cplx(std::sqrt(r) * z.q(0), z.p(0) / std::sqrt(r)) / std::sqrt(2.0 * tr.hbar);
    const double z2 = std::norm(zeta);
    if (!(z2 < tr.M / 4.0)) {
        const int need = static_cast<int>(std::ceil(4.0 * z2)) + 1;
        throw TruncationError("coherent_state_fock: localization guard |zeta|^2 < M/4 violated (|zeta|^2 = " +
                                  std::to_string(z2) + ", M = " + std::to_string(tr.M) + "); need M >= " +
                                  std::to_string(need),
                              need);
    }
    Vector v = Vector::Zero(tr.M);
    if (z2 == 0.0) {
        v(0) = 1.0;
        return v;
    }
    const double lz = 0.5 * std::log(z2);
    const double arg = std::arg(zeta);
    for (int n = 0; n < tr.M; ++n) {
        const double logmag = -0.5 * z2 + n * lz - 0.5 * std::lgamma(n + 1.0);
        v(n) = std::polar(std::exp(logmag), n * arg);
    }
    const double missing = 1.0 - v.squaredNorm();
    if (missing > 1e-10) {
        const int need = static_cast<int>(std::ceil(4.0 * z2)) + 1;
        throw TruncationError("coherent_state_fock: tail mass " + std::to_string(missing) + " exceeds 1e-10", need);
    }
    return v;
}

// --------------------------- hybrid state -------------------------------------

struct HybridState {
    Vector psi;
    int M = 0;
    int N = 0;
    double hbar = 1.0;
    int twice_s = 1;

    HybridState() = default;
    HybridState(Vector v, int M_, int N_, double hbar_, int twice_s_)
        : psi(std::move(v)), M(M_), N(N_), hbar(hbar_), twice_s(twice_s_) {
        if (psi.size() != static_cast<Eigen::Index>(M) * N) throw std::invalid_argument("HybridState: size mismatch");
    }

    cplx coefficient(int i, int k) const { return psi(static_cast<Eigen::Index>(i) * N + k); }

    // M x N coefficient array (orbital rows, spin columns).
    Matrix coefficients() const {
        return Eigen::Map<const Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(psi.data(), M, N);
    }

    double norm() const { return psi.norm(); }

    // Probability carried by the top `levels` Fock levels.
    double tail_mass(int levels) const {
        double m = 0.0;
        for (int i = std::max(0, M - levels); i < M; ++i)
            for (int k = 0; k < N; ++k) m += std::norm(coefficient(i, k));
        return m;
    }
};

inline HybridState product_state(const Vector& orbital, const Vector& spin, double hbar, int twice_s) {
    Vector v(orbital.size() * spin.size());
    for (Eigen::Index i = 0; i < orbital.size(); ++i) v.segment(i * spin.size(), spin.size()) = orbital(i) * spin;
    return HybridState(std::move(v), static_cast<int>(orbital.size()), static_cast<int>(spin.size()), hbar, twice_s);
}

inline cplx inner(const HybridState& a, const HybridState& b) { return a.psi.dot(b.psi); }

// 1 - |<a, b>|, insensitive to global phase.
inline double infidelity(const HybridState& a, const HybridState& b) { return 1.0 - std::abs(inner(a, b)); }

inline double norm_error(const HybridState& a, const HybridState& b) { return (a.psi - b.psi).norm(); }

// --------------------------- Hamiltonians -------------------------------------

struct DickeParameters {
    double omega_c = 1.0;
    double omega3 = 0.0;
    double lambda = 1.0;
    int n_atoms = 0;  // 0 means N = 2s + 1
};

// g = 2 lambda / sqrt(N hbar)
inline double dicke_coupling(const DickeParameters& p, double hbar, const SpinQuantumNumber& sq) {
    const double n = p.n_atoms > 0 ? p.n_atoms : sq.dim();
    return 2.0 * p.lambda / std::sqrt(n * hbar);
}

// H = (omega0/2)(x^2 + (hbar D)^2) + hbar sum_k (c_k(t) + alpha_k(t) x + beta_k(t) hbar D) S_k
struct HamiltonianSpec {
    enum class Kind { dicke, dicke_interaction, linear_coupling, time_only, custom };

    Kind kind = Kind::custom;
    double omega0 = 0.0;
    std::function<Vec3(double)> c = [](double) { return Vec3::Zero().eval(); };
    std::function<Vec3(double)> alpha = [](double) { return Vec3::Zero().eval(); };
    std::function<Vec3(double)> beta = [](double) { return Vec3::Zero().eval(); };
    bool autonomous = true;
    DickeParameters dicke;
    std::string description;
};

inline const char* to_string(HamiltonianSpec::Kind k) {
    switch (k) {
        case HamiltonianSpec::Kind::dicke: return "dicke";
        case HamiltonianSpec::Kind::dicke_interaction: return "dicke_interaction";
        case HamiltonianSpec::Kind::linear_coupling: return "linear_coupling";
        case HamiltonianSpec::Kind::time_only: return "time_only";
        case HamiltonianSpec::Kind::custom: return "custom";
    }
    return "custom";
}

inline HamiltonianSpec time_only_spec(std::function<Vec3(double)> c, bool autonomous = false) {
    HamiltonianSpec h;
    h.kind = HamiltonianSpec::Kind::time_only;
    h.c = std::move(c);
    h.autonomous = autonomous;
    h.description = "time_only";
    return h;
}

inline HamiltonianSpec time_only_spec(const Vec3& c) {
    return time_only_spec([c](double) { return c; }, true);
}

inline HamiltonianSpec linear_coupling_spec(const Vec3& c, const Vec3& alpha, const Vec3& beta, double omega0 = 0.0) {
    HamiltonianSpec h;
    h.kind = HamiltonianSpec::Kind::linear_coupling;
    h.omega0 = omega0;
    h.c = [c](double) { return c; };
    h.alpha = [alpha](double) { return alpha; };
    h.beta = [beta](double) { return beta; };
    h.autonomous = true;
    h.description = "linear_coupling";
    return h;
}

inline HamiltonianSpec dicke_spec(const DickeParameters& p, double hbar, const SpinQuantumNumber& sq) {
    const double g = dicke_coupling(p, hbar, sq);
    HamiltonianSpec h;
    h.kind = HamiltonianSpec::Kind::dicke;
    h.omega0 = p.omega_c;
    const double w3 = p.omega3;
    h.c = [w3](double) { return Vec3(0.0, 0.0, w3); };
    h.alpha = [g](double) { return Vec3(g, 0.0, 0.0); };
    h.autonomous = true;
    h.dicke = p;
    h.description = "dicke";
    return h;
}

// Interaction picture with respect to H_osc + hbar omega3 S3:
// hbar g (cos(wc t) x + sin(wc t) hbar D)(cos(w3 t) S1 - sin(w3 t) S2).
inline HamiltonianSpec dicke_interaction_spec(const DickeParameters& p, double hbar, const SpinQuantumNumber& sq) {
    const double g = dicke_coupling(p, hbar, sq);
    const double wc = p.omega_c, w3 = p.omega3;
    HamiltonianSpec h;
    h.kind = HamiltonianSpec::Kind::dicke_interaction;
    h.alpha = [g, wc, w3](double t) { return Vec3(g * std::cos(wc * t) * Vec3(std::cos(w3 * t), -std::sin(w3 * t), 0.0)); };
    h.beta = [g, wc, w3](double t) { return Vec3(g * std::sin(wc * t) * Vec3(std::cos(w3 * t), -std::sin(w3 * t), 0.0)); };
    h.autonomous = false;
    h.dicke = p;
    h.description = "dicke_interaction";
    return h;
}

// Classical coupling field G(t, X) = c(t) + alpha(t) q + beta(t) p with H0 = (omega0/2)|X|^2.
inline CouplingField field_from_spec(const HamiltonianSpec& spec) {
    CouplingField f;
    switch (spec.kind) {
        case HamiltonianSpec::Kind::time_only: f.kind = CouplingField::Kind::time_only; break;
        case HamiltonianSpec::Kind::linear_coupling: f.kind = CouplingField::Kind::linear; break;
        case HamiltonianSpec::Kind::dicke:
        case HamiltonianSpec::Kind::dicke_interaction: f.kind = CouplingField::Kind::dicke; break;
        default: f.kind = CouplingField::Kind::custom; break;
    }
    f.orbital_dim = 1;
    auto c = spec.c, a = spec.alpha, b = spec.beta;
    f.value = [c, a, b](double t, const RealVector& x) -> Vec3 { return c(t) + a(t) * x(0) + b(t) * x(1); };
    f.gradient = [a, b](double t, const RealVector&) {
        Mat3X g(3, 2);
        g.col(0) = a(t);
        g.col(1) = b(t);
        return g;
    };
    f.description = spec.description;
    if (spec.omega0 != 0.0) f = with_harmonic_h0(f, spec.omega0);
    return f;
}

inline SparseMatrix to_sparse(const Matrix& m, double drop = 0.0) {
    std::vector<Eigen::Triplet<cplx>> t;
    for (Eigen::Index j = 0; j < m.cols(); ++j)
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            if (std::abs(m(i, j)) > drop) t.emplace_back(static_cast<int>(i), static_cast<int>(j), m(i, j));
    SparseMatrix s(m.rows(), m.cols());
    s.setFromTriplets(t.begin(), t.end());
    return s;
}

// Precomputed Kronecker pieces; at(t) forms the linear combination.
class HamiltonianAssembler {
public:
    HamiltonianAssembler(HamiltonianSpec spec, const FockTruncation& tr, const SpinRepresentation& srep)
        : spec_(std::move(spec)), hbar_(tr.hbar), M_(tr.M), N_(srep.spin.dim()) {
        const OrbitalOperators ops = build_orbital_operators(tr);
        const SparseMatrix idM = sparse_identity(tr.M);
        const SparseMatrix idN = sparse_identity(N_);
        h0_ = sparse_kron(oscillator_hamiltonian(tr, ops, spec_.omega0), idN);
        for (int k = 0; k < 3; ++k) {
            const SparseMatrix sk = to_sparse(srep.component(k));
            is_[k] = sparse_kron(idM, sk);
            xs_[k] = sparse_kron(ops.x, sk);
            ps_[k] = sparse_kron(ops.hbarD, sk);
        }
    }

    SparseMatrix at(double t, double herm_tol = 1e-10) const {
        SparseMatrix h = h0_;
        const Vec3 c = spec_.c(t), a = spec_.alpha(t), b = spec_.beta(t);
        for (int k = 0; k < 3; ++k) {
            if (c(k) != 0.0) h += cplx(hbar_ * c(k)) * is_[k];
            if (a(k) != 0.0) h += cplx(hbar_ * a(k)) * xs_[k];
            if (b(k) != 0.0) h += cplx(hbar_ * b(k)) * ps_[k];
        }
        h.prune(cplx(0.0));
        const double res = hermiticity_residual(h);
        if (res > herm_tol) throw AssemblyError("assemble_hamiltonian: Hermiticity residual " + std::to_string(res));
        return h;
    }

    const HamiltonianSpec& spec() const { return spec_; }
    int dim() const { return M_ * N_; }
    double hbar() const { return hbar_; }

private:
    HamiltonianSpec spec_;
    double hbar_;
    int M_, N_;
    SparseMatrix h0_;
    SparseMatrix is_[3], xs_[3], ps_[3];
};

inline SparseMatrix assemble_hamiltonian(const HamiltonianSpec& spec, const FockTruncation& tr,
                                         const SpinRepresentation& srep, double t) {
    return HamiltonianAssembler(spec, tr, srep).at(t);
}

inline double expectation(const SparseMatrix& h, const HybridState& s) { return s.psi.dot(h * s.psi).real(); }

// --------------------------- exact propagation --------------------------------

struct PropagationOptions {
    double max_step = 0.01;       // Magnus step for time-dependent specs
    double self_check_tol = 1e-8;  // endpoint change allowed when halving the step
    int max_halvings = 8;
    bool self_check = true;
    Eigen::Index dense_limit = 768;  // autonomous specs up to this dimension use a dense eigendecomposition
    double tail_tol = 1e-8;
    double norm_tol = 1e-9;
};

struct PropagationDiagnostics {
    double step_used = 0.0;
    double self_check_change = 0.0;
    double max_tail_mass = 0.0;
    double max_norm_drift = 0.0;
};

namespace detail {

inline void guard_state(const HybridState& s, const FockTruncation& tr, const PropagationOptions& o,
                        PropagationDiagnostics& d, double t) {
    const double tail = s.tail_mass(tr.tail_levels());
    d.max_tail_mass = std::max(d.max_tail_mass, tail);
    if (tail > o.tail_tol)
        throw TruncationError("propagate_exact: tail mass " + std::to_string(tail) + " in the top Fock levels at t = " +
                                  std::to_string(t) + "; increase M (currently " + std::to_string(tr.M) + ")",
                              2 * tr.M);
    const double drift = std::abs(s.norm() - 1.0);
    d.max_norm_drift = std::max(d.max_norm_drift, drift);
    if (drift > o.norm_tol) throw NumericalError("propagate_exact: norm drift " + std::to_string(drift));
}

inline std::vector<Vector> magnus_path(const HamiltonianAssembler& as, const Vector& v0, const std::vector<double>& grid,
                                       double max_step) {
    std::vector<Vector> out{v0};
    Vector v = v0;
    for (std::size_t i = 1; i < grid.size(); ++i) {
        const double span = grid[i] - grid[i - 1];
        const int steps = std::max(1, static_cast<int>(std::ceil(span / max_step - 1e-9)));
        const double h = span / steps;
        for (int k = 0; k < steps; ++k) {
            const double tm = grid[i - 1] + (k + 0.5) * h;
            v = chebyshev_evolve(as.at(tm), v, h / as.hbar());
        }
        out.push_back(v);
    }
    return out;
}

}  // namespace detail

inline std::vector<HybridState> propagate_exact(const HamiltonianAssembler& as, const FockTruncation& tr,
                                                const HybridState& psi0, const std::vector<double>& t_grid,
                                                const PropagationOptions& opts = {},
                                                PropagationDiagnostics* diag = nullptr) {
    if (t_grid.empty()) throw std::invalid_argument("propagate_exact: empty time grid");
    for (std::size_t i = 1; i < t_grid.size(); ++i)
        if (!(t_grid[i] > t_grid[i - 1])) throw std::invalid_argument("propagate_exact: grid not increasing");
    if (psi0.psi.size() != as.dim()) throw std::invalid_argument("propagate_exact: state dimension mismatch");

    PropagationDiagnostics d;
    detail::guard_state(psi0, tr, opts, d, t_grid.front());
    auto wrap = [&](const Vector& v) { return HybridState(v, psi0.M, psi0.N, psi0.hbar, psi0.twice_s); };

    std::vector<HybridState> out;
    if (as.spec().autonomous) {
        const SparseMatrix h = as.at(t_grid.front());
        if (as.dim() <= opts.dense_limit) {
            const HermitianSpectrum spec{Matrix(h)};
            for (double t : t_grid) out.push_back(wrap(spec.evolve(psi0.psi, (t - t_grid.front()) / tr.hbar)));
        } else {
            const SpectralBounds b = gershgorin_bounds(h);
            Vector v = psi0.psi;
            out.push_back(wrap(v));
            for (std::size_t i = 1; i < t_grid.size(); ++i) {
                v = chebyshev_evolve(h, v, (t_grid[i] - t_grid[i - 1]) / tr.hbar, b);
                out.push_back(wrap(v));
            }
        }
        for (std::size_t i = 0; i < out.size(); ++i) detail::guard_state(out[i], tr, opts, d, t_grid[i]);
    } else {
        double step = opts.max_step;
        std::vector<Vector> path = detail::magnus_path(as, psi0.psi, t_grid, step);
        d.step_used = step;
        if (opts.self_check) {
            bool ok = false;
            for (int k = 0; k < opts.max_halvings; ++k) {
                std::vector<Vector> finer = detail::magnus_path(as, psi0.psi, t_grid, step / 2);
                d.self_check_change = (finer.back() - path.back()).norm();
                path = std::move(finer);
                step /= 2;
                d.step_used = step;
                if (d.self_check_change < opts.self_check_tol) {
                    ok = true;
                    break;
                }
            }
            if (!ok)
                throw StepError("propagate_exact: Magnus step halving did not settle below " +
                                std::to_string(opts.self_check_tol));
        }
        for (std::size_t i = 0; i < path.size(); ++i) {
            out.push_back(wrap(path[i]));
            detail::guard_state(out.back(), tr, opts, d, t_grid[i]);
        }
    }
    if (diag) *diag = d;
    return out;
}

inline std::vector<HybridState> propagate_exact(const HamiltonianSpec& spec, const FockTruncation& tr,
                                                const SpinRepresentation& srep, const HybridState& psi0,
                                                const std::vector<double>& t_grid, const PropagationOptions& opts = {},
                                                PropagationDiagnostics* diag = nullptr) {
    return propagate_exact(HamiltonianAssembler(spec, tr, srep), tr, psi0, t_grid, opts, diag);
}

// --------------------------- ansatz -------------------------------------------

// exp((i/hbar) S + i s alpha) N(t) phi_z ⊗ psi_n at trajectory node i.
inline HybridState assemble_ansatz(const SemiclassicalTrajectory& traj, std::size_t i, const FockTruncation& tr,
                                   const SpinQuantumNumber& sq, double gamma_tol = 1e-8) {
    if (i >= traj.size()) throw std::out_of_range("assemble_ansatz: node index");
    const Matrix& g = traj.Gamma[i];
    if (g.rows() != 1 || std::abs(g(0, 0) - cplx(0.0, tr.omega_ref)) > gamma_tol)
        throw CapabilityError("assemble_ansatz: only the standard Gaussian Gamma = i * omega_ref is supported");
    if (std::abs(traj.scales.hbar - tr.hbar) > 1e-15 * tr.hbar)
        throw std::invalid_argument("assemble_ansatz: trajectory and truncation use different hbar");
    const Vector orb = coherent_state_fock(tr, traj.z[i]);
    const Vector spin = coherent_amplitudes(sq, traj.n[i]);
    const cplx phase = std::exp(I_unit * traj.total_phase(i) + traj.log_prefactor[i]);
    HybridState s = product_state(orb, spin, tr.hbar, sq.twice_s());
    s.psi *= phase;
    return s;
}

inline HybridState initial_product_state(const FockTruncation& tr, const SpinQuantumNumber& sq, const PhasePoint& z0,
                                         const SphereDirection& n0) {
    return product_state(coherent_state_fock(tr, z0), coherent_amplitudes(sq, n0), tr.hbar, sq.twice_s());
}

// --------------------------- error scans --------------------------------------

struct ScanCase {
    HamiltonianSpec spec;
    PhasePoint z0{0.5, 0.0};
    SphereDirection n0 = SphereDirection::north();
    double T = 1.0;
    int intervals = 50;
    int M_min = 64;
    int M_max = 256;
    double classical_step = 1e-3;
    PropagationOptions propagation;
};

struct ScanRow {
    double hbar = 0.0;
    double s = 0.0;
    double kappa = 0.0;
    int M = 0;
    int N = 0;
    double max_infidelity = 0.0;
    double final_infidelity = 0.0;
    double max_norm_error = 0.0;
    double final_norm_error = 0.0;
    double runtime_s = 0.0;
    bool skipped = false;
    std::string reason;
};

struct ScanResult {
    std::vector<ScanRow> rows;
    std::optional<fit::LineFit> slope;  // log max_infidelity against log hbar
};

// Smallest multiple of 16 that keeps the whole classical orbit inside the
// coherent-state localization guard with 25% margin.
inline int required_fock_size(const SemiclassicalTrajectory& traj, double hbar, int M_min) {
    double z2 = 0.0;
    for (const auto& z : traj.z) z2 = std::max(z2, (z.q.squaredNorm() + z.p.squaredNorm()) / (2.0 * hbar));
    const int need = static_cast<int>(std::ceil(5.0 * z2)) + 16;
    return std::max(M_min, (need + 15) / 16 * 16);
}

inline ScanRow ansatz_error_row(const ScanCase& sc, const SimulationScales& scales) {
    const auto start = std::chrono::steady_clock::now();
    ScanRow row;
    row.hbar = scales.hbar;
    row.s = scales.s();
    row.kappa = scales.kappa();
    row.N = scales.spin.dim();
    try {
        const std::vector<double> grid = uniform_grid(0.0, sc.T, static_cast<std::size_t>(sc.intervals));
        IntegrationOptions io;
        io.max_step = sc.classical_step;
        const SemiclassicalTrajectory traj =
            integrate_trajectory(field_from_spec(sc.spec), scales, sc.z0, sc.n0, grid, io);
        row.M = required_fock_size(traj, scales.hbar, sc.M_min);
        if (row.M > sc.M_max) {
            row.skipped = true;
            row.reason = "truncation guard needs M = " + std::to_string(row.M) + " > M_max";
            return row;
        }
        const FockTruncation tr(row.M, scales.hbar);
        const SpinRepresentation srep = build_spin_representation(scales.spin);
        const HybridState psi0 = initial_product_state(tr, scales.spin, sc.z0, sc.n0);
        const std::vector<HybridState> exact = propagate_exact(sc.spec, tr, srep, psi0, grid, sc.propagation);
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const HybridState ans = assemble_ansatz(traj, i, tr, scales.spin);
            const double inf = infidelity(ans, exact[i]);
            const double ne = norm_error(ans, exact[i]);
            row.max_infidelity = std::max(row.max_infidelity, inf);
            row.max_norm_error = std::max(row.max_norm_error, ne);
            row.final_infidelity = inf;
            row.final_norm_error = ne;
        }
    } catch (const NumericalError& e) {
        row.skipped = true;
        row.reason = e.what();
    }
    row.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return row;
}

// Runs rows on up to `threads` workers; row order follows `scales`.
inline ScanResult ansatz_error_scan(const ScanCase& sc, const std::vector<SimulationScales>& scales, int threads = 1) {
    ScanResult res;
    res.rows.resize(scales.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (std::size_t i = next++; i < scales.size(); i = next++) res.rows[i] = ansatz_error_row(sc, scales[i]);
    };
    const int nt = std::max(1, std::min<int>(threads, static_cast<int>(scales.size())));
    std::vector<std::thread> pool;
    for (int k = 1; k < nt; ++k) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();

    std::vector<double> h, e;
    for (const auto& r : res.rows)
        if (!r.skipped && r.max_infidelity > 0.0) {
            h.push_back(r.hbar);
            e.push_back(r.max_infidelity);
        }
    if (h.size() >= 2) res.slope = fit::loglog(h, e);
    return res;
}

// --------------------------- residual -----------------------------------------

struct ResidualReport {
    double residual = 0.0;           // || i hbar dPsi/dt - H Psi ||
    double residual_over_hbar = 0.0;
    double fd_error_estimate = 0.0;  // hbar * || Richardson - central ||
};

// Central differences at t +- dt and t +- 2 dt combined by Richardson extrapolation.
inline ResidualReport ansatz_residual(const HamiltonianSpec& spec, const SimulationScales& scales, const PhasePoint& z0,
                                      const SphereDirection& n0, const FockTruncation& tr,
                                      const SpinRepresentation& srep, double t, double dt = 1e-4,
                                      double classical_step = 1e-4) {
    if (!(dt > 0.0) || t - 2 * dt < 0.0) throw std::invalid_argument("ansatz_residual: need t >= 2 dt > 0");
    std::vector<double> grid;
    if (t - 2 * dt > 0.0) grid.push_back(0.0);
    for (int k = -2; k <= 2; ++k) grid.push_back(t + k * dt);
    IntegrationOptions io;
    io.max_step = std::min(classical_step, dt);
    const SemiclassicalTrajectory traj = integrate_trajectory(field_from_spec(spec), scales, z0, n0, grid, io);
    const std::size_t base = grid.size() - 5;
    auto psi = [&](int k) { return assemble_ansatz(traj, base + 2 + k, tr, scales.spin).psi; };
    const Vector d1 = (psi(1) - psi(-1)) / (2 * dt);
    const Vector d2 = (psi(2) - psi(-2)) / (4 * dt);
    const Vector d = (4.0 * d1 - d2) / 3.0;
    const SparseMatrix h = assemble_hamiltonian(spec, tr, srep, t);
    ResidualReport r;
    r.residual = (I_unit * tr.hbar * d - h * psi(0)).norm();
    r.residual_over_hbar = r.residual / tr.hbar;
    r.fd_error_estimate = tr.hbar * (d - d1).norm();
    if (r.fd_error_estimate > std::max(0.1 * r.residual, 1e-6))
        throw StepError("ansatz_residual: finite-difference step too coarse (Richardson estimate " +
                        std::to_string(r.fd_error_estimate) + ")");
    return r;
}

// --------------------------- reduced density ----------------------------------

// rho_O[i, j] = sum_m c[i, m] conj(c[j, m])
inline Matrix partial_trace_spin(const HybridState& s) {
    const Matrix c = s.coefficients();
    Matrix rho = c * c.adjoint();
    const double tr = rho.trace().real();
    if (std::abs(tr - 1.0) > 1e-8) throw NumericalError("partial_trace_spin: trace " + std::to_string(tr));
    return rho;
}

// Spin-side reduced density, same convention.
inline Matrix partial_trace_orbital(const HybridState& s) {
    const Matrix c = s.coefficients();
    return (c.transpose() * c.conjugate());
}

struct PurityReport {
    double purity = 0.0;
    double linear_entropy = 0.0;
    double vn_entropy = 0.0;
    RealVector eigenvalues;  // descending

    int count_above(double threshold) const {
        return static_cast<int>((eigenvalues.array() > threshold).count());
    }
};

inline PurityReport purity_and_entropy(const Matrix& rho, double psd_tol = 1e-10, double trace_tol = 1e-8) {
    if (rho.rows() != rho.cols()) throw std::invalid_argument("purity_and_entropy: matrix not square");
    if (hermiticity_residual(rho) > 1e-10) throw std::invalid_argument("purity_and_entropy: matrix not Hermitian");
    Eigen::SelfAdjointEigenSolver<Matrix> es(rho, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw NumericalError("purity_and_entropy: eigensolver failed");
    RealVector ev = es.eigenvalues().reverse();
    if (ev.size() && ev.minCoeff() < -psd_tol)
        throw std::invalid_argument("purity_and_entropy: not positive semidefinite (min eigenvalue " +
                                    std::to_string(ev.minCoeff()) + ")");
    const double tr = ev.sum();
    if (std::abs(tr - 1.0) > trace_tol) throw std::invalid_argument("purity_and_entropy: trace " + std::to_string(tr));
    PurityReport r;
    r.eigenvalues = ev;
    r.purity = ev.squaredNorm();
    r.linear_entropy = 1.0 - r.purity;
    for (Eigen::Index k = 0; k < ev.size(); ++k) {
        const double l = std::max(ev(k), 1e-14);
        if (ev(k) > 1e-14) r.vn_entropy -= l * std::log(l);
    }
    if (r.vn_entropy < r.linear_entropy - 1e-12)
        throw NumericalError("purity_and_entropy: S_vN < 1 - purity violated");
    return r;
}

}  // namespace spinorbit
