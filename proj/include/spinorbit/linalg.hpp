// linalg.hpp - Shared Eigen aliases, Hermitian exponentials and a Chebyshev propagator

#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace spinorbit {

using cplx = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<cplx, Eigen::RowMajor>;
using Vec3 = Eigen::Vector3d;
using CVec3 = Eigen::Vector3cd;

inline constexpr cplx I_unit{0.0, 1.0};
inline constexpr double pi = 3.14159265358979323846;

// --------------------------- error types ------------------------------------

// Numerical guard failures (truncation, chart, integration) share this base so
// callers can map them to one exit path.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SizeError : NumericalError {
    using NumericalError::NumericalError;
};

// --------------------------- small helpers ----------------------------------

inline double max_abs(const Matrix& m) {
    return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

inline Matrix commutator(const Matrix& a, const Matrix& b) { return a * b - b * a; }

inline double hermiticity_residual(const Matrix& m) { return max_abs(m - m.adjoint()); }

inline double hermiticity_residual(const SparseMatrix& m) {
    SparseMatrix d = m - SparseMatrix(m.adjoint());
    double r = 0.0;
    for (int k = 0; k < d.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(d, k); it; ++it) r = std::max(r, std::abs(it.value()));
    return r;
}

inline Matrix kron(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

inline SparseMatrix sparse_kron(const SparseMatrix& a, const SparseMatrix& b) {
    std::vector<Eigen::Triplet<cplx>> trip;
    trip.reserve(static_cast<std::size_t>(a.nonZeros() * b.nonZeros()));
    for (int ka = 0; ka < a.outerSize(); ++ka)
        for (SparseMatrix::InnerIterator ia(a, ka); ia; ++ia)
            for (int kb = 0; kb < b.outerSize(); ++kb)
                for (SparseMatrix::InnerIterator ib(b, kb); ib; ++ib)
                    trip.emplace_back(static_cast<int>(ia.row() * b.rows() + ib.row()),
                                      static_cast<int>(ia.col() * b.cols() + ib.col()),
                                      ia.value() * ib.value());
    SparseMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
    out.setFromTriplets(trip.begin(), trip.end());
    return out;
}

inline SparseMatrix sparse_identity(Eigen::Index n) {
    SparseMatrix id(n, n);
    id.setIdentity();
    return id;
}

// --------------------------- Hermitian exponentials --------------------------

// exp(i * scale * H) for Hermitian H via eigendecomposition.
inline Matrix expi_hermitian(const Matrix& h, double scale) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(h);
    if (es.info() != Eigen::Success) throw NumericalError("expi_hermitian: eigensolver failed");
    Vector phases = (I_unit * scale * es.eigenvalues().cast<cplx>()).array().exp().matrix();
    return es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
}

// Cached spectral form of a Hermitian matrix; evolve(v, tau) = exp(-i tau H) v.
class HermitianSpectrum {
public:
    explicit HermitianSpectrum(const Matrix& h) {
        Eigen::SelfAdjointEigenSolver<Matrix> es(h);
        if (es.info() != Eigen::Success) throw NumericalError("HermitianSpectrum: eigensolver failed");
        values_ = es.eigenvalues();
        vectors_ = es.eigenvectors();
    }

    Vector evolve(const Vector& v, double tau) const {
        Vector c = vectors_.adjoint() * v;
        for (Eigen::Index k = 0; k < c.size(); ++k) c(k) *= std::exp(-I_unit * tau * values_(k));
        return vectors_ * c;
    }

    const RealVector& values() const { return values_; }
    const Matrix& vectors() const { return vectors_; }

private:
    RealVector values_;
    Matrix vectors_;
};

// --------------------------- Chebyshev propagator ----------------------------

struct SpectralBounds {
    double lo;
    double hi;
};

// Gershgorin enclosure of the (real) spectrum of a Hermitian sparse matrix.
inline SpectralBounds gershgorin_bounds(const SparseMatrix& h) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (int k = 0; k < h.outerSize(); ++k) {
        double diag = 0.0, radius = 0.0;
        for (SparseMatrix::InnerIterator it(h, k); it; ++it) {
            if (it.row() == it.col()) diag = it.value().real();
            else radius += std::abs(it.value());
        }
        lo = std::min(lo, diag - radius);
        hi = std::max(hi, diag + radius);
    }
    if (h.outerSize() == 0) lo = hi = 0.0;
    return {lo, hi};
}

// exp(-i tau H) v by Chebyshev expansion. Terms are added until the Bessel
// coefficients fall below `tol` past the spectral radius.
inline Vector chebyshev_evolve(const SparseMatrix& h, const Vector& v, double tau,
                               SpectralBounds bounds, double tol = 1e-15) {
    if (tau == 0.0) return v;
    const double centre = 0.5 * (bounds.hi + bounds.lo);
    const double half_width = std::max(0.5 * (bounds.hi - bounds.lo), 1e-300);
    const double r = half_width * tau;
    const cplx global = std::exp(-I_unit * centre * tau);
    if (std::abs(r) < 1e-14) return global * v;

    const double rr = std::abs(r);
    const int sign = r < 0 ? -1 : 1;
    auto apply = [&](const Vector& x) -> Vector { return (h * x - centre * x) / half_width; };

    // (-i)^k J_k(r) ; J_k(-r) = (-1)^k J_k(r)
    auto coeff = [&](int k) {
        double jk = std::cyl_bessel_j(static_cast<double>(k), rr);
        if (sign < 0 && (k % 2)) jk = -jk;
        cplx ik = std::pow(-I_unit, k);
        return (k == 0 ? 1.0 : 2.0) * ik * jk;
    };

    Vector t_prev = v;
    Vector t_curr = apply(v);
    Vector out = coeff(0) * t_prev + coeff(1) * t_curr;
    const int kmax = static_cast<int>(rr) + 200 + static_cast<int>(10.0 * std::cbrt(rr + 1.0));
    int small_run = 0;
    for (int k = 2; k < kmax; ++k) {
        Vector t_next = 2.0 * apply(t_curr) - t_prev;
        cplx c = coeff(k);
        out += c * t_next;
        t_prev.swap(t_curr);
        t_curr.swap(t_next);
        if (k > rr && std::abs(c) < tol) {
            if (++small_run >= 3) break;
        } else {
            small_run = 0;
        }
    }
    return global * out;
}

inline Vector chebyshev_evolve(const SparseMatrix& h, const Vector& v, double tau) {
    return chebyshev_evolve(h, v, tau, gershgorin_bounds(h));
}

// --------------------------- spectral norm -----------------------------------

inline double operator_norm(const Matrix& m) {
    if (m.size() == 0) return 0.0;
    Eigen::JacobiSVD<Matrix> svd(m);
    return svd.singularValues()(0);
}

}  // namespace spinorbit
