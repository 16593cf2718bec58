#pragma once

// Random structured data and small matrix builders shared by the tests.

#include "kamforge/fourier_field.hpp"
#include "kamforge/revlin.hpp"

#include <initializer_list>
#include <random>

namespace kamforge::testing {

using Rng = std::mt19937_64;

inline Matrix diag(std::initializer_list<double> d) {
    Vector v(static_cast<Eigen::Index>(d.size()));
    Eigen::Index i = 0;
    for (double x : d) v(i++) = x;
    return v.asDiagonal();
}

inline Matrix gaussian(Rng& rng, Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
    std::normal_distribution<double> nd(0.0, scale);
    Matrix m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = nd(rng);
    return m;
}

inline Matrix random_near_identity(Rng& rng, Eigen::Index n, double scale) {
    return Matrix::Identity(n, n) + gaussian(rng, n, n, scale);
}

/// diag(1,-1,1,-1,...), the block form of R used throughout the examples.
inline Matrix alternating_r(int p) {
    Vector d(2 * p);
    for (int i = 0; i < 2 * p; ++i) d(i) = i % 2 == 0 ? 1.0 : -1.0;
    return d.asDiagonal();
}

inline Matrix random_minus(Rng& rng, const ReversingStructure& rs, double scale = 1.0) {
    const Matrix m = gaussian(rng, rs.dim(), rs.dim(), scale);
    return 0.5 * (m - rs.R() * m * rs.R());
}

inline Matrix random_plus(Rng& rng, const ReversingStructure& rs, double scale = 1.0) {
    const Matrix m = gaussian(rng, rs.dim(), rs.dim(), scale);
    return 0.5 * (m + rs.R() * m * rs.R());
}

inline Matrix random_plus_near_identity(Rng& rng, const ReversingStructure& rs, double scale) {
    return Matrix::Identity(rs.dim(), rs.dim()) + random_plus(rng, rs, scale);
}

/// blockdiag(J2^T, ..., J2^T): multiplication by i on each complex pair.
inline Matrix blockdiag_j2t(int p) {
    Matrix m = Matrix::Zero(2 * p, 2 * p);
    for (int b = 0; b < p; ++b) m.block(2 * b, 2 * b, 2, 2) = j2().transpose();
    return m;
}

/// Floquet matrix of the 2:1 covering example, a = 1 + mu1.
inline Matrix example_omega(double mu1, double mu2) {
    const double a = 1.0 + mu1;
    return (Matrix(4, 4) << 0, -a, 1, 0,
                            a, 0, 0, 1,
                            -mu2, 0, 0, -a,
                            0, -mu2, a, 0).finished();
}

/// Involution for which example_omega is infinitesimally reversible.
inline Matrix example_rhat() { return diag({1, -1, -1, 1}); }

inline CMatrix complex_gaussian(Rng& rng, Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
    return gaussian(rng, rows, cols, scale).cast<Complex>() + Complex(0, 1) * gaussian(rng, rows, cols, scale).cast<Complex>();
}

/// Field with every mode |k|_1 <= K filled with complex noise (not real, not symmetric).
inline FourierField random_field(Rng& rng, int n, int m, int p, int K, double scale = 1.0) {
    FourierField fld(n, m, p, K);
    const int d = 2 * p;
    Mode k(static_cast<std::size_t>(n), -K);
    while (true) {
        if (l1(k) <= K) {
            Jets& j = fld.at(k);
            j.f = complex_gaussian(rng, n, 1, scale);
            j.f_eta = complex_gaussian(rng, n, m, scale);
            j.f_zeta = complex_gaussian(rng, n, d, scale);
            j.g = complex_gaussian(rng, m, 1, scale);
            j.g_eta = complex_gaussian(rng, m, m, scale);
            j.g_zeta = complex_gaussian(rng, m, d, scale);
            j.h = complex_gaussian(rng, d, 1, scale);
            j.h_eta = complex_gaussian(rng, d, m, scale);
            j.h_zeta = complex_gaussian(rng, d, d, scale);
        }
        std::size_t i = 0;
        while (i < k.size() && k[i] == K) k[i++] = -K;
        if (i == k.size()) break;
        ++k[i];
    }
    return fld;
}

}  // namespace kamforge::testing
