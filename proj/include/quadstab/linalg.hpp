#pragma once

#include <Eigen/Dense>
#include <complex>
#include <vector>

#include "quadstab/common.hpp"

namespace quadstab {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat2 = Eigen::Matrix2d;
using Mat4 = Eigen::Matrix4d;
using MatX = Eigen::MatrixXd;
using VecX = Eigen::VectorXd;
using Complex = std::complex<double>;

// Largest eigenvalue of a symmetric matrix.
inline double max_eig_sym(const MatX& s)
{
    Eigen::SelfAdjointEigenSolver<MatX> es(s, Eigen::EigenvaluesOnly);
    return es.eigenvalues().maxCoeff();
}

// Eigenvalues of a general real matrix.
inline std::vector<Complex> eigenvalues(const MatX& a)
{
    Eigen::EigenSolver<MatX> es(a, false);
    std::vector<Complex> out(static_cast<std::size_t>(a.rows()));
    for (Eigen::Index i = 0; i < a.rows(); ++i) out[static_cast<std::size_t>(i)] = es.eigenvalues()(i);
    return out;
}

// Monic polynomial from its roots; coeffs[k] multiplies s^k, coeffs.back() = 1.
// Imaginary residue is dropped, so roots must come in conjugate pairs.
inline std::vector<double> poly_from_roots(const std::vector<Complex>& roots)
{
    std::vector<Complex> c{1.0};
    for (const Complex& r : roots) {
        std::vector<Complex> next(c.size() + 1, Complex(0.0));
        for (std::size_t i = 0; i < c.size(); ++i) {
            next[i + 1] += c[i];
            next[i] -= r * c[i];
        }
        c = std::move(next);
    }
    std::vector<double> out(c.size());
    for (std::size_t i = 0; i < c.size(); ++i) out[i] = c[i].real();
    return out;
}

// Companion matrix of the monic polynomial s^n + c[n-1] s^(n-1) + ... + c[0].
// coeffs holds c[0..n-1] (the monic leading 1 is implicit).
inline MatX companion(const std::vector<double>& coeffs)
{
    const auto n = static_cast<Eigen::Index>(coeffs.size());
    MatX a = MatX::Zero(n, n);
    for (Eigen::Index i = 0; i + 1 < n; ++i) a(i, i + 1) = 1.0;
    for (Eigen::Index j = 0; j < n; ++j) a(n - 1, j) = -coeffs[static_cast<std::size_t>(j)];
    return a;
}

// Roots of the monic polynomial with low-order coefficients c[0..n-1].
inline std::vector<Complex> poly_roots(const std::vector<double>& coeffs)
{
    return eigenvalues(companion(coeffs));
}

// Routh array test: true iff all roots of the monic polynomial lie strictly in
// the open left half-plane. Marginal cases (a zero pivot) report false.
inline bool polynomial_is_hurwitz(const std::vector<double>& monic_low_coeffs)
{
    const std::size_t n = monic_low_coeffs.size();
    if (n == 0) return false;
    // full coefficient list, highest power first
    std::vector<double> c(n + 1);
    c[0] = 1.0;
    for (std::size_t i = 0; i < n; ++i) c[i + 1] = monic_low_coeffs[n - 1 - i];
    for (double v : c) {
        if (!(v > 0.0)) return false;  // necessary for Hurwitz with positive leading coeff
    }
    const std::size_t cols = n / 2 + 1;
    std::vector<std::vector<double>> rows(n + 1, std::vector<double>(cols + 1, 0.0));
    for (std::size_t j = 0; j < cols; ++j) {
        if (2 * j < c.size()) rows[0][j] = c[2 * j];
        if (2 * j + 1 < c.size()) rows[1][j] = c[2 * j + 1];
    }
    for (std::size_t i = 2; i <= n; ++i) {
        const double pivot = rows[i - 1][0];
        if (pivot == 0.0) return false;
        for (std::size_t j = 0; j + 1 < cols + 1; ++j) {
            rows[i][j] = (pivot * rows[i - 2][j + 1] - rows[i - 2][0] * rows[i - 1][j + 1]) / pivot;
        }
    }
    for (std::size_t i = 0; i <= n; ++i) {
        if (!(rows[i][0] > 0.0)) return false;
    }
    return true;
}

// Product of two polynomials given as low-to-high coefficient lists.
inline std::vector<double> poly_mul(const std::vector<double>& a, const std::vector<double>& b)
{
    std::vector<double> out(a.size() + b.size() - 1, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
    return out;
}

}  // namespace quadstab
