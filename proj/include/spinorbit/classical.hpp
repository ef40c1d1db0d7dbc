// classical.hpp - Coupled orbital/spin classical system, spin action and Gaussian data
//
// The orbital motion follows Hamilton's equations for H_eff = H0 - kappa G.n
// (the covariant symbol of hbar G.S on a spin coherent state is -kappa G.n),
// the spin follows the Landau-Lifshitz equation n' = G(t, z) ^ n.

#pragma once

#include "spinorbit/linalg.hpp"
#include "spinorbit/spin_rep.hpp"

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace spinorbit {

struct IntegrationError : NumericalError {
    using NumericalError::NumericalError;
};

using Mat3X = Eigen::Matrix<double, 3, Eigen::Dynamic>;

// --------------------------- phase space --------------------------------------

struct PhasePoint {
    RealVector q;
    RealVector p;

    PhasePoint() : q(RealVector::Zero(1)), p(RealVector::Zero(1)) {}
    PhasePoint(RealVector q_, RealVector p_) : q(std::move(q_)), p(std::move(p_)) {
        if (q.size() != p.size()) throw std::invalid_argument("PhasePoint: q and p dimensions differ");
    }
    PhasePoint(double q_, double p_) : q(RealVector::Constant(1, q_)), p(RealVector::Constant(1, p_)) {}

    int dim() const { return static_cast<int>(q.size()); }

    RealVector X() const {
        RealVector x(2 * q.size());
        x << q, p;
        return x;
    }

    static PhasePoint from_X(const RealVector& x) {
        const Eigen::Index d = x.size() / 2;
        return PhasePoint(x.head(d), x.tail(d));
    }

    bool finite() const { return q.allFinite() && p.allFinite(); }
};

// --------------------------- coupling field -----------------------------------

// G_k(t, X), their X-gradients (3 x 2d, columns d/dq_j then d/dp_j) and an
// optional scalar H0 with gradient and Hessian.
struct CouplingField {
    enum class Kind { time_only, linear, dicke, custom };

    Kind kind = Kind::custom;
    int orbital_dim = 1;
    std::function<Vec3(double, const RealVector&)> value;
    std::function<Mat3X(double, const RealVector&)> gradient;
    std::function<double(double, const RealVector&)> h0;
    std::function<RealVector(double, const RealVector&)> h0_gradient;
    std::function<RealMatrix(double, const RealVector&)> h0_hessian;
    std::string description;

    bool has_h0() const { return static_cast<bool>(h0); }

    double h0_value(double t, const RealVector& x) const { return h0 ? h0(t, x) : 0.0; }
    RealVector h0_grad(double t, const RealVector& x) const {
        return h0_gradient ? h0_gradient(t, x) : RealVector::Zero(2 * orbital_dim);
    }
    RealMatrix h0_hess(double t, const RealVector& x) const {
        return h0_hessian ? h0_hessian(t, x) : RealMatrix::Zero(2 * orbital_dim, 2 * orbital_dim);
    }
};

inline const char* to_string(CouplingField::Kind k) {
    switch (k) {
        case CouplingField::Kind::time_only: return "time_only";
        case CouplingField::Kind::linear: return "linear";
        case CouplingField::Kind::dicke: return "dicke";
        case CouplingField::Kind::custom: return "custom";
    }
    return "custom";
}

// G depends on t only.
inline CouplingField time_only_field(std::function<Vec3(double)> g, int orbital_dim = 1) {
    CouplingField f;
    f.kind = CouplingField::Kind::time_only;
    f.orbital_dim = orbital_dim;
    f.value = [g](double t, const RealVector&) { return g(t); };
    f.gradient = [orbital_dim](double, const RealVector&) { return Mat3X::Zero(3, 2 * orbital_dim); };
    f.description = "time_only";
    return f;
}

inline CouplingField constant_field(const Vec3& g, int orbital_dim = 1) {
    return time_only_field([g](double) { return g; }, orbital_dim);
}

// G(t, X) = offset(t) + slope(t) X.
inline CouplingField linear_field(std::function<Vec3(double)> offset, std::function<Mat3X(double)> slope,
                                  int orbital_dim = 1) {
    CouplingField f;
    f.kind = CouplingField::Kind::linear;
    f.orbital_dim = orbital_dim;
    f.value = [offset, slope](double t, const RealVector& x) -> Vec3 { return offset(t) + slope(t) * x; };
    f.gradient = [slope](double t, const RealVector&) { return slope(t); };
    f.description = "linear";
    return f;
}

inline CouplingField linear_field(const Vec3& offset, const Mat3X& slope) {
    return linear_field([offset](double) { return offset; }, [slope](double) { return slope; },
                        static_cast<int>(slope.cols() / 2));
}

// Adds H0 = (omega/2)|X|^2.
inline CouplingField with_harmonic_h0(CouplingField f, double omega) {
    const int n = 2 * f.orbital_dim;
    f.h0 = [omega](double, const RealVector& x) { return 0.5 * omega * x.squaredNorm(); };
    f.h0_gradient = [omega](double, const RealVector& x) -> RealVector { return omega * x; };
    f.h0_hessian = [omega, n](double, const RealVector&) -> RealMatrix { return omega * RealMatrix::Identity(n, n); };
    f.description += "+harmonic";
    return f;
}

// Largest relative mismatch between gradient() and central differences of value().
inline double field_gradient_mismatch(const CouplingField& f, double t, const RealVector& x, double h = 1e-5) {
    const Mat3X g = f.gradient(t, x);
    double worst = 0.0;
    for (Eigen::Index j = 0; j < x.size(); ++j) {
        RealVector xp = x, xm = x;
        xp(j) += h;
        xm(j) -= h;
        const Vec3 fd = (f.value(t, xp) - f.value(t, xm)) / (2 * h);
        for (int k = 0; k < 3; ++k) {
            const double scale = std::max(1.0, std::abs(g(k, j)));
            worst = std::max(worst, std::abs(fd(k) - g(k, j)) / scale);
        }
    }
    return worst;
}

// --------------------------- scales -------------------------------------------

struct SimulationScales {
    double hbar;
    SpinQuantumNumber spin;

    SimulationScales(double hbar_, SpinQuantumNumber s_) : hbar(hbar_), spin(s_) {
        if (!(hbar_ > 0.0)) throw std::invalid_argument("SimulationScales: hbar must be positive");
    }

    double s() const { return spin.s(); }
    double kappa() const { return hbar * spin.s(); }
    // Exponent in s = c hbar^{-delta} with c = 1; diagnostic only.
    double delta() const { return hbar == 1.0 ? 0.0 : -std::log(spin.s()) / std::log(hbar); }
};

// s = floor(hbar^{-delta}) (at least 1/2 when the floor vanishes).
inline SimulationScales scales_for_delta(double hbar, double delta) {
    const double s = std::floor(std::pow(hbar, -delta) + 1e-9);
    if (s < 1.0) return SimulationScales(hbar, SpinQuantumNumber(1));
    return SimulationScales(hbar, SpinQuantumNumber(static_cast<int>(2 * s)));
}

// s with hbar s = kappa rounded to the nearest half-integer.
inline SimulationScales scales_for_kappa(double hbar, double kappa) {
    const int twice = std::max(1, static_cast<int>(std::lround(2.0 * kappa / hbar)));
    return SimulationScales(hbar, SpinQuantumNumber(twice));
}

// --------------------------- trajectory ---------------------------------------

// Where the kappa G.n energy is booked. Both give the same total phase
// (i/hbar) S + i s alpha.
enum class ActionSplit { spin_carries_coupling, orbit_carries_coupling };

struct SemiclassicalTrajectory {
    std::vector<double> t;
    std::vector<PhasePoint> z;
    std::vector<SphereDirection> n;
    std::vector<double> S;
    std::vector<double> alpha;
    std::vector<Matrix> Gamma;
    std::vector<cplx> log_prefactor;  // Gaussian amplitude phase, d log N = -1/2 tr(H_pq + H_pp Gamma) dt
    SimulationScales scales;
    ActionSplit split = ActionSplit::spin_carries_coupling;
    bool orbit_coupled = true;
    std::string field_description;
    double max_norm_drift = 0.0;  // largest | |n| - 1 | seen before renormalization

    explicit SemiclassicalTrajectory(SimulationScales sc) : scales(sc) {}

    std::size_t size() const { return t.size(); }

    // Total phase (1/hbar) S + s alpha at node i.
    double total_phase(std::size_t i) const { return S[i] / scales.hbar + scales.s() * alpha[i]; }

    std::size_t node_at(double time, double tol = 1e-12) const {
        for (std::size_t i = 0; i < t.size(); ++i)
            if (std::abs(t[i] - time) <= tol * std::max(1.0, std::abs(time))) return i;
        throw std::out_of_range("SemiclassicalTrajectory::node_at: time not on the grid");
    }
};

struct IntegrationOptions {
    double max_step = 1e-3;
    bool couple_orbit = true;  // false drops the kappa terms from the orbital equations
    ActionSplit split = ActionSplit::spin_carries_coupling;
    std::optional<Matrix> gamma0;  // defaults to i * Identity
    double drift_tol = 1e-6;
};

// --------------------------- right-hand sides ---------------------------------

inline Vec3 landau_lifshitz_rhs(const Vec3& c, const Vec3& n) { return c.cross(n); }

struct CoupledDerivative {
    RealVector zdot;  // (qdot, pdot)
    Vec3 ndot;
};

inline CoupledDerivative coupled_rhs(const CouplingField& field, const SimulationScales& scales, double t,
                                     const PhasePoint& z, const Vec3& n, bool couple_orbit = true) {
    const RealVector x = z.X();
    const int d = z.dim();
    const Vec3 g = field.value(t, x);
    if (!g.allFinite()) throw IntegrationError("coupled_rhs: non-finite field value");
    const RealVector gh = field.h0_grad(t, x);
    RealVector force = field.gradient(t, x).transpose() * n;  // grad_X (G . n)
    const double kappa = couple_orbit ? scales.kappa() : 0.0;
    CoupledDerivative out;
    out.zdot.resize(2 * d);
    out.zdot.head(d) = gh.tail(d) - kappa * force.tail(d);
    out.zdot.tail(d) = -gh.head(d) + kappa * force.head(d);
    out.ndot = landau_lifshitz_rhs(g, n);
    if (!out.zdot.allFinite()) throw IntegrationError("coupled_rhs: non-finite orbital derivative");
    return out;
}

// Berry term of the spin action in the n chart, 2 Im(eta conj(eta)') / (1 + |eta|^2).
inline double spin_geometric_rate(const Vec3& n, const Vec3& ndot) {
    const double denom = 1.0 + n(2);
    if (denom < 1e-10) throw ChartError("spin action: trajectory reached the south pole of the chart");
    return (n(0) * ndot(1) - n(1) * ndot(0)) / denom;
}

// --------------------------- integrator ---------------------------------------

namespace detail {

struct PackedLayout {
    int d;
    int iq() const { return 0; }
    int ip() const { return d; }
    int in() const { return 2 * d; }
    int iS() const { return 2 * d + 3; }
    int ia() const { return 2 * d + 4; }
    int ig() const { return 2 * d + 5; }  // Gamma real then imaginary parts, column-major
    int il() const { return 2 * d + 5 + 2 * d * d; }
    int size() const { return il() + 2; }
};

inline Matrix unpack_gamma(const RealVector& y, const PackedLayout& L) {
    Matrix g(L.d, L.d);
    for (int j = 0; j < L.d * L.d; ++j) g.data()[j] = cplx(y(L.ig() + j), y(L.ig() + L.d * L.d + j));
    return g;
}

inline void pack_gamma(RealVector& y, const PackedLayout& L, const Matrix& g) {
    for (int j = 0; j < L.d * L.d; ++j) {
        y(L.ig() + j) = g.data()[j].real();
        y(L.ig() + L.d * L.d + j) = g.data()[j].imag();
    }
}

inline RealVector packed_rhs(const CouplingField& field, const SimulationScales& scales, const IntegrationOptions& opt,
                             const PackedLayout& L, double t, const RealVector& y) {
    const int d = L.d;
    PhasePoint z(y.segment(L.iq(), d), y.segment(L.ip(), d));
    const Vec3 n = y.segment<3>(L.in());
    const CoupledDerivative cd = coupled_rhs(field, scales, t, z, n, opt.couple_orbit);
    const RealVector x = z.X();
    const Vec3 g = field.value(t, x);

    RealVector dy = RealVector::Zero(L.size());
    dy.segment(L.iq(), 2 * d) = cd.zdot;
    dy.segment<3>(L.in()) = cd.ndot;

    const RealVector qd = cd.zdot.head(d), pd = cd.zdot.tail(d);
    double sdot = 0.5 * (z.p.dot(qd) - z.q.dot(pd)) - field.h0_value(t, x);
    double adot = spin_geometric_rate(n, cd.ndot);
    if (opt.split == ActionSplit::spin_carries_coupling) adot += g.dot(n);
    else sdot += scales.kappa() * g.dot(n);
    dy(L.iS()) = sdot;
    dy(L.ia()) = adot;

    const RealMatrix hess = field.h0_hess(t, x);
    const Matrix hqq = hess.topLeftCorner(d, d).cast<cplx>();
    const Matrix hqp = hess.topRightCorner(d, d).cast<cplx>();
    const Matrix hpq = hess.bottomLeftCorner(d, d).cast<cplx>();
    const Matrix hpp = hess.bottomRightCorner(d, d).cast<cplx>();
    const Matrix gam = unpack_gamma(y, L);
    const Matrix gdot = -hqq - gam * hpq - hqp * gam - gam * hpp * gam;
    pack_gamma(dy, L, gdot);
    const cplx ldot = -0.5 * (hpq + hpp * gam).trace();
    dy(L.il()) = ldot.real();
    dy(L.il() + 1) = ldot.imag();
    return dy;
}

}  // namespace detail

// Fixed-step RK4 with renormalization of n after every step. Each grid
// interval is split into equal substeps no longer than opts.max_step.
inline SemiclassicalTrajectory integrate_trajectory(const CouplingField& field, const SimulationScales& scales,
                                                    const PhasePoint& z0, const SphereDirection& n0,
                                                    const std::vector<double>& t_grid,
                                                    const IntegrationOptions& opts = {}) {
    if (t_grid.empty()) throw std::invalid_argument("integrate_trajectory: empty time grid");
    for (std::size_t i = 1; i < t_grid.size(); ++i)
        if (!(t_grid[i] > t_grid[i - 1])) throw std::invalid_argument("integrate_trajectory: grid not increasing");
    if (z0.dim() != field.orbital_dim) throw std::invalid_argument("integrate_trajectory: orbital dimension mismatch");
    if (!(opts.max_step > 0.0)) throw std::invalid_argument("integrate_trajectory: max_step must be positive");

    const detail::PackedLayout L{z0.dim()};
    RealVector y = RealVector::Zero(L.size());
    y.segment(L.iq(), L.d) = z0.q;
    y.segment(L.ip(), L.d) = z0.p;
    y.segment<3>(L.in()) = n0.vec();
    const Matrix gamma0 = opts.gamma0 ? *opts.gamma0 : Matrix(I_unit * Matrix::Identity(L.d, L.d));
    detail::pack_gamma(y, L, gamma0);

    SemiclassicalTrajectory traj(scales);
    traj.split = opts.split;
    traj.orbit_coupled = opts.couple_orbit;
    traj.field_description = field.description;

    auto record = [&](double t) {
        traj.t.push_back(t);
        traj.z.emplace_back(y.segment(L.iq(), L.d), y.segment(L.ip(), L.d));
        traj.n.emplace_back(Vec3(y.segment<3>(L.in())));
        traj.S.push_back(y(L.iS()));
        traj.alpha.push_back(y(L.ia()));
        traj.Gamma.push_back(detail::unpack_gamma(y, L));
        traj.log_prefactor.emplace_back(y(L.il()), y(L.il() + 1));
    };

    auto f = [&](double t, const RealVector& v) { return detail::packed_rhs(field, scales, opts, L, t, v); };

    double t = t_grid.front();
    record(t);
    for (std::size_t i = 1; i < t_grid.size(); ++i) {
        const double span = t_grid[i] - t_grid[i - 1];
        const int steps = std::max(1, static_cast<int>(std::ceil(span / opts.max_step - 1e-9)));
        const double h = span / steps;
        for (int k = 0; k < steps; ++k) {
            const double tk = t_grid[i - 1] + k * h;
            const RealVector k1 = f(tk, y);
            const RealVector k2 = f(tk + 0.5 * h, y + 0.5 * h * k1);
            const RealVector k3 = f(tk + 0.5 * h, y + 0.5 * h * k2);
            const RealVector k4 = f(tk + h, y + h * k3);
            y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            if (!y.allFinite()) throw IntegrationError("integrate_trajectory: non-finite state at t = " + std::to_string(tk + h));
            const double norm = y.segment<3>(L.in()).norm();
            const double drift = std::abs(norm - 1.0);
            traj.max_norm_drift = std::max(traj.max_norm_drift, drift);
            if (drift > opts.drift_tol)
                throw IntegrationError("integrate_trajectory: step rejected, |n| drifted by " + std::to_string(drift));
            y.segment<3>(L.in()) /= norm;
        }
        t = t_grid[i];
        record(t);
    }
    return traj;
}

inline std::vector<double> uniform_grid(double t0, double t1, std::size_t intervals) {
    std::vector<double> g(intervals + 1);
    for (std::size_t i = 0; i <= intervals; ++i)
        g[i] = t0 + (t1 - t0) * static_cast<double>(i) / static_cast<double>(intervals);
    return g;
}

// --------------------------- complex chart ------------------------------------

// eta' = (i/2) (1+|eta|^2)^2 d H_c / d conj(eta), with H_c = G . n written in eta.
// (The sign makes the flow agree with n' = G ^ n.)
inline cplx complex_landau_rhs(const Vec3& g, cplx eta) {
    const cplx gp(g(0), g(1)), gm(g(0), -g(1));
    const double a2 = std::norm(eta);
    const cplx num = g(2) * (1.0 - a2) - gm * std::conj(eta) - gp * eta;
    const cplx dnum = -g(2) * eta - gm;
    return 0.5 * I_unit * (dnum * (1.0 + a2) - num * eta);
}

inline std::vector<cplx> integrate_complex_landau(const CouplingField& field, cplx eta0,
                                                  const std::vector<double>& t_grid, double max_step = 1e-3,
                                                  const RealVector& x_fixed = RealVector()) {
    if (t_grid.empty()) throw std::invalid_argument("integrate_complex_landau: empty grid");
    const RealVector x = x_fixed.size() ? x_fixed : RealVector::Zero(2 * field.orbital_dim);
    auto f = [&](double t, cplx e) { return complex_landau_rhs(field.value(t, x), e); };
    std::vector<cplx> out{eta0};
    cplx eta = eta0;
    for (std::size_t i = 1; i < t_grid.size(); ++i) {
        const double span = t_grid[i] - t_grid[i - 1];
        const int steps = std::max(1, static_cast<int>(std::ceil(span / max_step - 1e-9)));
        const double h = span / steps;
        for (int k = 0; k < steps; ++k) {
            const double tk = t_grid[i - 1] + k * h;
            const cplx k1 = f(tk, eta);
            const cplx k2 = f(tk + 0.5 * h, eta + 0.5 * h * k1);
            const cplx k3 = f(tk + 0.5 * h, eta + 0.5 * h * k2);
            const cplx k4 = f(tk + h, eta + h * k3);
            eta += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            if (!std::isfinite(std::abs(eta)) || std::abs(eta) > 1e6)
                throw ChartError("integrate_complex_landau: chart blow-up (|eta| > 1e6)");
        }
        out.push_back(eta);
    }
    return out;
}

// --------------------------- perturbation comparison --------------------------

using VectorField = std::function<RealVector(double, const RealVector&)>;

struct PerturbationReport {
    std::vector<double> t;
    std::vector<double> separation;
    double fitted_slope = 0.0;    // least squares of separation ~ slope * t for t <= fit_window
    double expected_slope = 0.0;  // kappa ||G(0, X0)||
    double relative_error = 0.0;  // |fitted - expected| / expected
};

// Integrates Y' = F and X' = F + kappa G from the same X0 and reports ||X - Y||
// (optionally on the first `measured` components only).
inline PerturbationReport perturbation_divergence(const VectorField& F, const VectorField& G, double kappa,
                                                  const RealVector& x0, const std::vector<double>& t_grid,
                                                  double max_step = 1e-4, double fit_window = 0.1,
                                                  Eigen::Index measured = 0) {
    if (!(kappa >= 0.0)) throw std::invalid_argument("perturbation_divergence: kappa must be non-negative");
    const Eigen::Index m = measured > 0 ? measured : x0.size();
    auto step_rk4 = [&](const VectorField& rhs, double t, const RealVector& y, double h) {
        const RealVector k1 = rhs(t, y);
        const RealVector k2 = rhs(t + 0.5 * h, y + 0.5 * h * k1);
        const RealVector k3 = rhs(t + 0.5 * h, y + 0.5 * h * k2);
        const RealVector k4 = rhs(t + h, y + h * k3);
        return RealVector(y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
    };
    VectorField perturbed = [&](double t, const RealVector& y) -> RealVector { return F(t, y) + kappa * G(t, y); };

    PerturbationReport rep;
    RealVector x = x0, y = x0;
    double t = t_grid.front();
    rep.t.push_back(t);
    rep.separation.push_back(0.0);
    for (std::size_t i = 1; i < t_grid.size(); ++i) {
        const double span = t_grid[i] - t_grid[i - 1];
        const int steps = std::max(1, static_cast<int>(std::ceil(span / max_step - 1e-9)));
        const double h = span / steps;
        for (int k = 0; k < steps; ++k) {
            const double tk = t_grid[i - 1] + k * h;
            y = step_rk4(F, tk, y, h);
            x = step_rk4(perturbed, tk, x, h);
        }
        t = t_grid[i];
        rep.t.push_back(t);
        rep.separation.push_back((x.head(m) - y.head(m)).norm());
    }
    rep.expected_slope = kappa * G(t_grid.front(), x0).head(m).norm();
    double stt = 0.0, sty = 0.0;
    for (std::size_t i = 0; i < rep.t.size(); ++i) {
        const double tt = rep.t[i] - t_grid.front();
        if (tt <= fit_window + 1e-12) {
            stt += tt * tt;
            sty += tt * rep.separation[i];
        }
    }
    rep.fitted_slope = stt > 0 ? sty / stt : 0.0;
    rep.relative_error = rep.expected_slope > 0 ? std::abs(rep.fitted_slope - rep.expected_slope) / rep.expected_slope
                                                : std::abs(rep.fitted_slope);
    return rep;
}

// Splits the coupled system on X = (q, p, n) into the kappa = 0 flow F and the
// orbital coupling direction G, so that X' = F + kappa G is the coupled system.
inline std::pair<VectorField, VectorField> spin_orbit_perturbation_fields(const CouplingField& field) {
    const int d = field.orbital_dim;
    VectorField F = [field, d](double t, const RealVector& y) -> RealVector {
        const RealVector x = y.head(2 * d);
        const Vec3 n = y.segment<3>(2 * d);
        const RealVector gh = field.h0_grad(t, x);
        RealVector out(2 * d + 3);
        out.head(d) = gh.tail(d);
        out.segment(d, d) = -gh.head(d);
        out.segment<3>(2 * d) = field.value(t, x).cross(n);
        return out;
    };
    VectorField G = [field, d](double t, const RealVector& y) -> RealVector {
        const RealVector x = y.head(2 * d);
        const Vec3 n = y.segment<3>(2 * d);
        const RealVector force = field.gradient(t, x).transpose() * n;
        RealVector out = RealVector::Zero(2 * d + 3);
        out.head(d) = -force.tail(d);
        out.segment(d, d) = force.head(d);
        return out;
    };
    return {F, G};
}

}  // namespace spinorbit
