// spin_rep.hpp - Spin-s irreducible representation, SU(2) coherent states and sphere charts
//
// Dicke basis ordering: basis index k holds the weight m = s - k, so S3 is
// diag(s, s-1, ..., -s) and for s = 1/2 the matrices are exactly sigma_k / 2.
// The minimal-weight state D_{-s} is the last basis vector.

#pragma once

#include "spinorbit/linalg.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <optional>
#include <string>

namespace spinorbit {

struct ChartError : NumericalError {
    using NumericalError::NumericalError;
};

inline constexpr int default_max_spin_dim = 4097;

// --------------------------- spin quantum number ------------------------------

class SpinQuantumNumber {
public:
    explicit SpinQuantumNumber(int twice_s) : twice_s_(twice_s) {
        if (twice_s < 1) throw std::invalid_argument("SpinQuantumNumber: twice_s must be >= 1");
    }

    // Accepts s = 0.5, 1, 1.5, ...; anything else is rejected.
    static SpinQuantumNumber from_value(double s) {
        const double twice = 2.0 * s;
        const double rounded = std::round(twice);
        if (std::abs(twice - rounded) > 1e-12 || rounded < 1.0)
            throw std::invalid_argument("SpinQuantumNumber: s must be a positive half-integer, got " + std::to_string(s));
        return SpinQuantumNumber(static_cast<int>(rounded));
    }

    int twice_s() const { return twice_s_; }
    double s() const { return 0.5 * twice_s_; }
    int dim() const { return twice_s_ + 1; }

    // Index of D_m in the basis, m given as 2m.
    int index_of(int twice_m) const {
        if ((twice_s_ - twice_m) % 2 != 0 || twice_m < -twice_s_ || twice_m > twice_s_)
            throw std::out_of_range("SpinQuantumNumber::index_of: invalid weight");
        return (twice_s_ - twice_m) / 2;
    }

    bool operator==(const SpinQuantumNumber&) const = default;

private:
    int twice_s_;
};

// --------------------------- representation ----------------------------------

struct SpinRepresentation {
    SpinQuantumNumber spin;
    Matrix S1, S2, S3, Splus, Sminus;

    int dim() const { return spin.dim(); }

    Vector dicke_state(int twice_m) const {
        Vector v = Vector::Zero(dim());
        v(spin.index_of(twice_m)) = 1.0;
        return v;
    }

    const Matrix& component(int k) const {
        switch (k) {
            case 0: return S1;
            case 1: return S2;
            case 2: return S3;
            default: throw std::out_of_range("SpinRepresentation::component: k must be 0, 1 or 2");
        }
    }

    // G . S for a real 3-vector G.
    Matrix dot(const Vec3& g) const { return g(0) * S1 + g(1) * S2 + g(2) * S3; }

    SparseMatrix sparse_dot(const Vec3& g) const { return dot(g).sparseView(); }
};

// Ladder coefficient <m+1| S+ |m> = sqrt((s-m)(s+m+1)).
inline double ladder_coefficient(const SpinQuantumNumber& sq, int twice_m) {
    const double s = sq.s(), m = 0.5 * twice_m;
    return std::sqrt((s - m) * (s + m + 1.0));
}

inline SpinRepresentation build_spin_representation(SpinQuantumNumber sq, int max_dim = default_max_spin_dim) {
    const int n = sq.dim();
    if (n > max_dim)
        throw SizeError("build_spin_representation: dimension " + std::to_string(n) + " exceeds maximum " +
                        std::to_string(max_dim));
    Matrix sp = Matrix::Zero(n, n);
    Matrix s3 = Matrix::Zero(n, n);
    for (int k = 0; k < n; ++k) {
        const int twice_m = sq.twice_s() - 2 * k;
        s3(k, k) = 0.5 * twice_m;
        if (k > 0) sp(k - 1, k) = ladder_coefficient(sq, twice_m);  // D_m -> D_{m+1}
    }
    Matrix sm = sp.adjoint();
    return SpinRepresentation{sq, 0.5 * (sp + sm), (sp - sm) / (2.0 * I_unit), s3, sp, sm};
}

// Largest entrywise residual of [S_k, S_l] - i eps_klm S_m and [S3, S±] = ±S±.
inline double su2_residual(const SpinRepresentation& r) {
    double res = 0.0;
    res = std::max(res, max_abs(commutator(r.S1, r.S2) - I_unit * r.S3));
    res = std::max(res, max_abs(commutator(r.S2, r.S3) - I_unit * r.S1));
    res = std::max(res, max_abs(commutator(r.S3, r.S1) - I_unit * r.S2));
    res = std::max(res, max_abs(commutator(r.S3, r.Splus) - r.Splus));
    res = std::max(res, max_abs(commutator(r.S3, r.Sminus) + r.Sminus));
    return res;
}

// Column-major complex CSV dump ("re,im" pairs, one column of the matrix per line).
inline void dump_matrix_csv(const Matrix& m, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("dump_matrix_csv: cannot open " + path);
    out.precision(17);
    out << "# rows=" << m.rows() << " cols=" << m.cols() << " layout=column-major re,im\n";
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            if (i) out << ',';
            out << m(i, j).real() << ',' << m(i, j).imag();
        }
        out << '\n';
    }
}

// --------------------------- sphere directions -------------------------------

// Point on S^2. The unit vector is primary; (theta, phi) and the stereographic
// coordinate eta = -tan(theta/2) e^{-i phi} = (i n2 - n1)/(1 + n3) are views.
class SphereDirection {
public:
    static constexpr double south_pole_tol = 1e-6;

    SphereDirection() : n_(0.0, 0.0, 1.0) {}

    explicit SphereDirection(const Vec3& n) {
        const double norm = n.norm();
        if (!std::isfinite(norm) || std::abs(norm - 1.0) > 1e-9)
            throw std::invalid_argument("SphereDirection: vector is not unit length");
        n_ = n / norm;
    }

    static SphereDirection from_angles(double theta, double phi) {
        return SphereDirection(Vec3(std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta)));
    }

    static SphereDirection from_eta(cplx eta) {
        const double d = 1.0 + std::norm(eta);
        return SphereDirection(Vec3(-2.0 * eta.real() / d, 2.0 * eta.imag() / d, (1.0 - std::norm(eta)) / d));
    }

    static SphereDirection north() { return SphereDirection(); }

    const Vec3& vec() const { return n_; }
    double operator[](int k) const { return n_(k); }

    double theta() const { return std::acos(std::clamp(n_(2), -1.0, 1.0)); }

    // phi in [0, 2 pi); 0 on the polar axis.
    double phi() const {
        if (std::hypot(n_(0), n_(1)) < 1e-14) return 0.0;
        double p = std::atan2(n_(1), n_(0));
        if (p < 0.0) p += 2.0 * pi;
        if (p >= 2.0 * pi) p -= 2.0 * pi;
        return p;
    }

    // cos(theta/2), sin(theta/2) and e^{-i phi} without going through acos.
    double cos_half() const { return std::sqrt(std::max(0.0, 0.5 * (1.0 + n_(2)))); }
    double sin_half() const { return std::sqrt(std::max(0.0, 0.5 * (1.0 - n_(2)))); }
    cplx phase_minus_phi() const {
        const double rho = std::hypot(n_(0), n_(1));
        if (rho < 1e-14) return 1.0;
        return cplx(n_(0), -n_(1)) / rho;
    }

    bool near_south_pole(double tol = south_pole_tol) const { return n_(2) < -1.0 + 0.5 * tol * tol; }

    cplx eta() const {
        if (1.0 + n_(2) < 1e-300) throw ChartError("SphereDirection::eta: south pole has no finite chart value");
        return cplx(-n_(0), n_(1)) / (1.0 + n_(2));
    }

    SphereDirection antipode() const { return SphereDirection(Vec3(-n_)); }

private:
    Vec3 n_;
};

// --------------------------- rotations and coherent states -------------------

// L = e^{i phi} S- - e^{-i phi} S+, anti-Hermitian; D(g_n) = exp(theta/2 L).
inline Matrix rotation_generator(const SpinRepresentation& r, double phi) {
    return std::exp(I_unit * phi) * r.Sminus - std::exp(-I_unit * phi) * r.Splus;
}

// D(g_n) from chart angles. The chart excludes theta >= pi - tol.
inline Matrix rotation_matrix(const SpinRepresentation& r, double theta, double phi,
                              double tol = SphereDirection::south_pole_tol) {
    if (!(theta >= 0.0) || theta >= pi - tol)
        throw ChartError("rotation_matrix: theta outside the chart [0, pi - tol)");
    Matrix herm = -I_unit * rotation_generator(r, phi);  // Hermitian
    return expi_hermitian(herm, 0.5 * theta);
}

// D(g_n) for any direction. Near the south pole the rotation is the square of
// the half rotation to the equator-side point (theta/2, phi), with phi := 0 on
// the axis.
inline Matrix rotation_matrix(const SpinRepresentation& r, const SphereDirection& n) {
    const double theta = n.theta(), phi = n.phi();
    Matrix herm = -I_unit * rotation_generator(r, phi);
    if (theta > pi - SphereDirection::south_pole_tol) {
        Matrix half = expi_hermitian(herm, 0.25 * theta);
        return half * half;
    }
    return expi_hermitian(herm, 0.5 * theta);
}

struct SpinCoherentState {
    SpinQuantumNumber spin;
    SphereDirection n;
    Vector vec;
};

namespace detail {

inline double log_binomial(int n, int k) {
    return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

}  // namespace detail

// Closed form of D(g_n) D_{-s}: amplitude on D_{-s+k} is
// (-1)^k sqrt(C(2s,k)) sin^k(theta/2) cos^{2s-k}(theta/2) e^{-i k phi}.
// Equivalent to (1+|eta|^2)^{-s} exp(eta S+) D_{-s} and finite at the south pole.
inline Vector coherent_amplitudes(const SpinQuantumNumber& sq, const SphereDirection& n) {
    const int ts = sq.twice_s();
    const double c = n.cos_half(), s = n.sin_half();
    const double lc = c > 0 ? std::log(c) : -std::numeric_limits<double>::infinity();
    const double ls = s > 0 ? std::log(s) : -std::numeric_limits<double>::infinity();
    const cplx e = n.phase_minus_phi();
    Vector v = Vector::Zero(sq.dim());
    cplx phase = 1.0;
    for (int k = 0; k <= ts; ++k) {
        double mag;
        if (k == 0 && s == 0.0) mag = std::exp(ts * lc);
        else if (k == ts && c == 0.0) mag = std::exp(ts * ls);
        else mag = std::exp(0.5 * detail::log_binomial(ts, k) + k * ls + (ts - k) * lc);
        const double sign = (k % 2) ? -1.0 : 1.0;
        v(ts - k) = sign * mag * phase;
        phase *= e;
    }
    return v;
}

inline SpinCoherentState spin_coherent_state(const SpinQuantumNumber& sq, const SphereDirection& n) {
    return {sq, n, coherent_amplitudes(sq, n)};
}

inline SpinCoherentState spin_coherent_state(const SpinRepresentation& r, const SphereDirection& n) {
    return spin_coherent_state(r.spin, n);
}

// psi_{1,n} = D(g_n) D_{1-s}.
inline Vector excited_coherent_state(const SpinRepresentation& r, const SphereDirection& n) {
    Matrix rot = rotation_matrix(r, n);
    return rot.col(r.spin.index_of(2 - r.spin.twice_s()));
}

// |<psi_n, psi_m>| = (1 - |n-m|^2/4)^s; exactly 0 for antipodes.
inline double overlap_magnitude(const SpinQuantumNumber& sq, const SphereDirection& n, const SphereDirection& m) {
    const double d2 = (n.vec() - m.vec()).squaredNorm();
    const double arg = 1.0 - 0.25 * d2;
    if (arg <= 0.0) return 0.0;
    return std::exp(sq.s() * std::log(arg));
}

// Full complex overlap <psi_n, psi_m> from the closed amplitudes:
// (cos_n cos_m + sin_n sin_m e^{i(phi_n - phi_m)})^{2s}.
inline cplx coherent_overlap(const SpinQuantumNumber& sq, const SphereDirection& n, const SphereDirection& m) {
    const cplx base = n.cos_half() * m.cos_half() +
                      n.sin_half() * m.sin_half() * std::conj(n.phase_minus_phi()) * m.phase_minus_phi();
    if (std::abs(base) == 0.0) return 0.0;
    return std::exp(static_cast<double>(sq.twice_s()) * std::log(base));
}

// --------------------------- adjoint action ----------------------------------

struct AdjointAction {
    Matrix S1, S2, S3;
};

// D(g_n)^* S_k D(g_n) by explicit conjugation.
inline AdjointAction adjoint_action(const SpinRepresentation& r, const SphereDirection& n) {
    Matrix rot = rotation_matrix(r, n);
    Matrix rinv = rot.adjoint();
    return {rinv * r.S1 * rot, rinv * r.S2 * rot, rinv * r.S3 * rot};
}

// Closed linear combinations of (S1, S2, S3) in the chart angles.
inline AdjointAction adjoint_action_closed(const SpinRepresentation& r, double theta, double phi) {
    const double c = std::cos(theta), s = std::sin(theta);
    const double cp = 0.5 * (c + 1.0), cm = 0.5 * (c - 1.0);
    AdjointAction a;
    a.S1 = (cp + cm * std::cos(2 * phi)) * r.S1 + cm * std::sin(2 * phi) * r.S2 + std::cos(phi) * s * r.S3;
    a.S2 = cm * std::sin(2 * phi) * r.S1 + (cp - cm * std::cos(2 * phi)) * r.S2 + s * std::sin(phi) * r.S3;
    a.S3 = c * r.S3 - s * 0.5 * (std::exp(I_unit * phi) * r.Sminus + std::exp(-I_unit * phi) * r.Splus);
    return a;
}

struct LadderAdjoint {
    Matrix S3, Splus, Sminus;
};

inline LadderAdjoint adjoint_action_ladder_closed(const SpinRepresentation& r, double theta, double phi) {
    const double c = std::cos(theta), s = std::sin(theta);
    LadderAdjoint a;
    a.S3 = c * r.S3 - s * 0.5 * (std::exp(I_unit * phi) * r.Sminus + std::exp(-I_unit * phi) * r.Splus);
    a.Splus = std::exp(I_unit * phi) * s * r.S3 + 0.5 * (c + 1.0) * r.Splus +
              0.5 * (c - 1.0) * std::exp(2.0 * I_unit * phi) * r.Sminus;
    a.Sminus = std::exp(-I_unit * phi) * s * r.S3 + 0.5 * (c + 1.0) * r.Sminus +
               0.5 * (c - 1.0) * std::exp(-2.0 * I_unit * phi) * r.Splus;
    return a;
}

// Same operators in the stereographic coordinate.
inline LadderAdjoint adjoint_action_riemann(const SpinRepresentation& r, cplx eta) {
    const double d = 1.0 + std::norm(eta);
    const cplx eb = std::conj(eta);
    LadderAdjoint a;
    a.S3 = (1.0 - std::norm(eta)) / d * r.S3 + (eta * r.Splus + eb * r.Sminus) / d;
    a.Splus = -2.0 * eb / d * r.S3 + r.Splus / d - eb * eb / d * r.Sminus;
    a.Sminus = -2.0 * eta / d * r.S3 + r.Sminus / d - eta * eta / d * r.Splus;
    return a;
}

// --------------------------- S psi_n decomposition ---------------------------

// v(n) with components
//   v1 = (cos t + 1)/2 + (cos t - 1)/2 e^{-2i phi}
//   v2 = (cos t + 1)/(2i) - (cos t - 1)/(2i) e^{-2i phi}
//   v3 = -sin t e^{-i phi}
inline CVec3 tangent_coefficient(const SphereDirection& n) {
    const double c = n.vec()(2);
    const double s = std::sqrt(std::max(0.0, 1.0 - c * c));
    const cplx e1 = n.phase_minus_phi();
    const cplx e2 = e1 * e1;
    return CVec3(0.5 * (c + 1.0) + 0.5 * (c - 1.0) * e2, (0.5 * (c + 1.0) - 0.5 * (c - 1.0) * e2) / I_unit, -s * e1);
}

struct SpinOnCoherent {
    Vec3 leading;      // -s n
    CVec3 correction;  // v(n), coefficient of sqrt(s/2) psi_{1,n}
    double residual;   // max over k of |S_k psi_n - (leading_k psi_n + sqrt(s/2) v_k psi_{1,n})|
    double beyond_two_terms;  // largest component of S psi_n on rotated D_m, m >= 2 - s
};

inline SpinOnCoherent apply_spin_to_coherent(const SpinRepresentation& r, const SphereDirection& n) {
    const double s = r.spin.s();
    Matrix rot = rotation_matrix(r, n);
    const int i0 = r.spin.index_of(-r.spin.twice_s());
    const Vector psi = rot.col(i0);
    const Vector psi1 = r.dim() > 1 ? Vector(rot.col(i0 - 1)) : Vector::Zero(r.dim());
    SpinOnCoherent out;
    out.leading = -s * n.vec();
    out.correction = tangent_coefficient(n);
    out.residual = 0.0;
    out.beyond_two_terms = 0.0;
    const double amp = std::sqrt(0.5 * s);
    for (int k = 0; k < 3; ++k) {
        Vector lhs = r.component(k) * psi;
        Vector rhs = out.leading(k) * psi + amp * out.correction(k) * psi1;
        out.residual = std::max(out.residual, (lhs - rhs).cwiseAbs().maxCoeff());
        Vector rotated = rot.adjoint() * lhs;  // components on D(g_n) D_m
        for (int idx = 0; idx < i0 - 1; ++idx)
            out.beyond_two_terms = std::max(out.beyond_two_terms, std::abs(rotated(idx)));
    }
    return out;
}

// --------------------------- covariant symbol --------------------------------

// Normalized covariant symbol H_c(eta) = (G3 (1 - |eta|^2) - G- conj(eta) - G+ eta) / (1 + |eta|^2),
// G± = G1 ± i G2. Equals G . n; the matrix expectation <psi_eta, G.S psi_eta> is -s H_c.
inline double covariant_symbol(const Vec3& g, cplx eta) {
    const cplx gp(g(0), g(1)), gm(g(0), -g(1));
    const double a2 = std::norm(eta);
    const cplx num = g(2) * (1.0 - a2) - gm * std::conj(eta) - gp * eta;
    return num.real() / (1.0 + a2);
}

// Same symbol on the sphere (covers the south pole, where it tends to -G3).
inline double covariant_symbol(const Vec3& g, const SphereDirection& n) { return g.dot(n.vec()); }

}  // namespace spinorbit
