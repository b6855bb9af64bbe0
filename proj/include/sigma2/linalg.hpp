// linalg.hpp - small dense kernels for symmetric 3x3 tensors: inverses,
// Cholesky factors, congruence transforms, eigenvalues and the first two
// elementary symmetric functions of a metric pencil.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

namespace sigma2 {

using Vec3 = std::array<double, 3>;

/// Symmetric 3x3 matrix stored as (11, 22, 33, 12, 13, 23).
struct Sym3 {
    double a11 = 0.0, a22 = 0.0, a33 = 0.0;
    double a12 = 0.0, a13 = 0.0, a23 = 0.0;

    static constexpr int kComponents = 6;

    static Sym3 identity() { return {1.0, 1.0, 1.0, 0.0, 0.0, 0.0}; }
    static Sym3 diag(double x, double y, double z) { return {x, y, z, 0.0, 0.0, 0.0}; }

    double operator()(int i, int j) const {
        if (i == j) return i == 0 ? a11 : (i == 1 ? a22 : a33);
        const int s = i + j;  // 1 -> 12, 2 -> 13, 3 -> 23
        return s == 1 ? a12 : (s == 2 ? a13 : a23);
    }

    double comp(int k) const {
        switch (k) {
            case 0: return a11;
            case 1: return a22;
            case 2: return a33;
            case 3: return a12;
            case 4: return a13;
            default: return a23;
        }
    }
    double& comp(int k) {
        switch (k) {
            case 0: return a11;
            case 1: return a22;
            case 2: return a33;
            case 3: return a12;
            case 4: return a13;
            default: return a23;
        }
    }

    Sym3& operator+=(const Sym3& o) {
        a11 += o.a11; a22 += o.a22; a33 += o.a33;
        a12 += o.a12; a13 += o.a13; a23 += o.a23;
        return *this;
    }
    Sym3& operator-=(const Sym3& o) {
        a11 -= o.a11; a22 -= o.a22; a33 -= o.a33;
        a12 -= o.a12; a13 -= o.a13; a23 -= o.a23;
        return *this;
    }
    Sym3& operator*=(double s) {
        a11 *= s; a22 *= s; a33 *= s;
        a12 *= s; a13 *= s; a23 *= s;
        return *this;
    }
    friend Sym3 operator+(Sym3 a, const Sym3& b) { return a += b; }
    friend Sym3 operator-(Sym3 a, const Sym3& b) { return a -= b; }
    friend Sym3 operator*(double s, Sym3 a) { return a *= s; }
    friend Sym3 operator*(Sym3 a, double s) { return a *= s; }
    Sym3 operator-() const { return -1.0 * (*this); }

    bool finite() const {
        return std::isfinite(a11) && std::isfinite(a22) && std::isfinite(a33) &&
               std::isfinite(a12) && std::isfinite(a13) && std::isfinite(a23);
    }
};

/// Component index -> (row, col) pair, shared with the grid axis-pair tables.
inline constexpr std::array<std::array<int, 2>, 6> kSymPairs = {{
    {0, 0}, {1, 1}, {2, 2}, {0, 1}, {0, 2}, {1, 2},
}};

inline int sym_pair_index(int a, int b) {
    if (a == b) return a;
    const int s = a + b;
    return s == 1 ? 3 : (s == 2 ? 4 : 5);
}

inline double det(const Sym3& m) {
    return m.a11 * (m.a22 * m.a33 - m.a23 * m.a23) -
           m.a12 * (m.a12 * m.a33 - m.a23 * m.a13) +
           m.a13 * (m.a12 * m.a23 - m.a22 * m.a13);
}

inline double frobenius_sq(const Sym3& m) {
    return m.a11 * m.a11 + m.a22 * m.a22 + m.a33 * m.a33 +
           2.0 * (m.a12 * m.a12 + m.a13 * m.a13 + m.a23 * m.a23);
}

/// Adjugate-based inverse. Throws on a numerically singular input.
inline Sym3 inverse(const Sym3& m) {
    const double d = det(m);
    const double scale = std::max({std::abs(m.a11), std::abs(m.a22), std::abs(m.a33),
                                   std::abs(m.a12), std::abs(m.a13), std::abs(m.a23)});
    if (!(std::abs(d) > 1e-14 * scale * scale * scale) || scale == 0.0)
        throw std::runtime_error("sigma2::inverse: singular 3x3 matrix");
    const double id = 1.0 / d;
    Sym3 r;
    r.a11 = (m.a22 * m.a33 - m.a23 * m.a23) * id;
    r.a22 = (m.a11 * m.a33 - m.a13 * m.a13) * id;
    r.a33 = (m.a11 * m.a22 - m.a12 * m.a12) * id;
    r.a12 = (m.a13 * m.a23 - m.a12 * m.a33) * id;
    r.a13 = (m.a12 * m.a23 - m.a13 * m.a22) * id;
    r.a23 = (m.a12 * m.a13 - m.a11 * m.a23) * id;
    return r;
}

/// v^T m v for a symmetric matrix.
inline double quad_form(const Sym3& m, const Vec3& v) {
    return m.a11 * v[0] * v[0] + m.a22 * v[1] * v[1] + m.a33 * v[2] * v[2] +
           2.0 * (m.a12 * v[0] * v[1] + m.a13 * v[0] * v[2] + m.a23 * v[1] * v[2]);
}

/// (m v)_i
inline Vec3 mat_vec(const Sym3& m, const Vec3& v) {
    return {m.a11 * v[0] + m.a12 * v[1] + m.a13 * v[2],
            m.a12 * v[0] + m.a22 * v[1] + m.a23 * v[2],
            m.a13 * v[0] + m.a23 * v[1] + m.a33 * v[2]};
}

/// Symmetric part of a * b * a for symmetric a, b (used for g^{-1} A g^{-1}).
inline Sym3 sandwich(const Sym3& a, const Sym3& b) {
    double ab[3][3];
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            double s = 0.0;
            for (int k = 0; k < 3; ++k) s += a(i, k) * b(k, j);
            ab[i][j] = s;
        }
    Sym3 r;
    for (int k = 0; k < 6; ++k) {
        const int i = kSymPairs[k][0], j = kSymPairs[k][1];
        double s = 0.0;
        for (int l = 0; l < 3; ++l) s += ab[i][l] * a(l, j);
        r.comp(k) = s;
    }
    return r;
}

/// tr(a b) for symmetric a, b.
inline double trace_product(const Sym3& a, const Sym3& b) {
    return a.a11 * b.a11 + a.a22 * b.a22 + a.a33 * b.a33 +
           2.0 * (a.a12 * b.a12 + a.a13 * b.a13 + a.a23 * b.a23);
}

/// Lower Cholesky factor of a positive definite Sym3.
struct Chol3 {
    double l11, l21, l22, l31, l32, l33;
    bool ok = false;
};

inline Chol3 cholesky(const Sym3& g) {
    Chol3 c{};
    if (!(g.a11 > 0.0)) return c;
    c.l11 = std::sqrt(g.a11);
    c.l21 = g.a12 / c.l11;
    c.l31 = g.a13 / c.l11;
    const double d22 = g.a22 - c.l21 * c.l21;
    if (!(d22 > 0.0)) return c;
    c.l22 = std::sqrt(d22);
    c.l32 = (g.a23 - c.l31 * c.l21) / c.l22;
    const double d33 = g.a33 - c.l31 * c.l31 - c.l32 * c.l32;
    if (!(d33 > 0.0)) return c;
    c.l33 = std::sqrt(d33);
    c.ok = true;
    return c;
}

/// M = L^{-1} A L^{-T}: the symmetric matrix similar to g^{-1}A when g = L L^T.
/// Keeps the pencil spectrum real by construction.
inline Sym3 congruence(const Sym3& A, const Chol3& L) {
    // Solve L X = A columnwise, then M = X L^{-T} row-wise (same back-substitution).
    double X[3][3];
    for (int j = 0; j < 3; ++j) {
        const double a0 = A(0, j), a1 = A(1, j), a2 = A(2, j);
        X[0][j] = a0 / L.l11;
        X[1][j] = (a1 - L.l21 * X[0][j]) / L.l22;
        X[2][j] = (a2 - L.l31 * X[0][j] - L.l32 * X[1][j]) / L.l33;
    }
    double M[3][3];
    for (int i = 0; i < 3; ++i) {
        M[i][0] = X[i][0] / L.l11;
        M[i][1] = (X[i][1] - L.l21 * M[i][0]) / L.l22;
        M[i][2] = (X[i][2] - L.l31 * M[i][0] - L.l32 * M[i][1]) / L.l33;
    }
    Sym3 r;
    r.a11 = M[0][0];
    r.a22 = M[1][1];
    r.a33 = M[2][2];
    r.a12 = 0.5 * (M[0][1] + M[1][0]);
    r.a13 = 0.5 * (M[0][2] + M[2][0]);
    r.a23 = 0.5 * (M[1][2] + M[2][1]);
    return r;
}

/// First two elementary symmetric functions of the eigenvalues of a symmetric M,
/// evaluated through trace invariants (exact algebra, no eigensolver).
struct SigmaPair {
    double s1 = 0.0;
    double s2 = 0.0;
};

inline SigmaPair sigma12(const Sym3& m) {
    const double tr = m.a11 + m.a22 + m.a33;
    const double tr2 = frobenius_sq(m);  // tr(M^2) for symmetric M
    return {tr, 0.5 * (tr * tr - tr2)};
}

/// sigma_1, sigma_2 of the pencil eigenvalues of g^{-1} A, given g^{-1}.
/// tr((g^{-1}A)^2) is formed from the full nonsymmetric product.
inline SigmaPair sigma12_pencil(const Sym3& A, const Sym3& gi) {
    double W[3][3];
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            double s = 0.0;
            for (int k = 0; k < 3; ++k) s += gi(i, k) * A(k, j);
            W[i][j] = s;
        }
    const double tr = W[0][0] + W[1][1] + W[2][2];
    double tr2 = 0.0;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) tr2 += W[i][j] * W[j][i];
    return {tr, 0.5 * (tr * tr - tr2)};
}

/// Eigenvalues of a symmetric 3x3 matrix, ascending. A closed-form
/// trigonometric solve locates the roots; the best-separated extreme root is
/// Newton-polished against the exact characteristic invariants and the other
/// two recovered by polynomial deflation. The deflation keeps the sum and
/// pairwise-product sum of the returned triple exactly equal to the trace
/// invariants, and double roots come out to machine precision.
inline Vec3 eig_sym3(const Sym3& m) {
    const double q = (m.a11 + m.a22 + m.a33) / 3.0;
    Sym3 b = m;
    b.a11 -= q;
    b.a22 -= q;
    b.a33 -= q;
    const double p2 = frobenius_sq(b);
    if (p2 < 1e-300 || p2 < 1e-30 * (1.0 + q * q)) return {q, q, q};

    const double p = std::sqrt(p2 / 6.0);
    Sym3 bn = (1.0 / p) * b;
    const double r = std::clamp(0.5 * det(bn), -1.0, 1.0);
    const double phi = std::acos(r) / 3.0;

    const double lam_hi = q + 2.0 * p * std::cos(phi);
    const double lam_lo = q + 2.0 * p * std::cos(phi + 2.0943951023931953);  // + 2 pi / 3
    const double lam_mid = 3.0 * q - lam_hi - lam_lo;

    const double i1 = m.a11 + m.a22 + m.a33;
    const double i2 = sigma12(m).s2;
    const double i3 = det(m);

    // the extreme root farther from the middle one is the best conditioned
    double star = (lam_hi - lam_mid >= lam_mid - lam_lo) ? lam_hi : lam_lo;
    for (int it = 0; it < 3; ++it) {
        const double f = ((star - i1) * star + i2) * star - i3;
        const double df = (3.0 * star - 2.0 * i1) * star + i2;
        if (std::abs(df) < 1e-14 * (1.0 + star * star)) break;
        star -= f / df;
    }

    // deflate: x^3 - i1 x^2 + i2 x - i3 = (x - star)(x^2 - s x + c)
    const double s = i1 - star;
    const double c = i2 - star * s;
    const double disc = std::max(s * s - 4.0 * c, 0.0);
    const double sq = std::sqrt(disc);
    const double r1 = 0.5 * (s + (s >= 0.0 ? sq : -sq));
    const double r2 = (r1 != 0.0) ? c / r1 : 0.5 * (s - sq);

    Vec3 out{star, r1, r2};
    std::sort(out.begin(), out.end());
    return out;
}

/// Eigenvalues of the pencil (A, g): the spectrum of g^{-1}A through the
/// Cholesky congruence L^{-1} A L^{-T}. Throws if g is not positive definite.
inline Vec3 generalized_eig(const Sym3& A, const Sym3& g) {
    const Chol3 L = cholesky(g);
    if (!L.ok) throw std::runtime_error("sigma2::generalized_eig: metric not positive definite");
    return eig_sym3(congruence(A, L));
}

/// Smallest pencil eigenvalue of (A, g); the quadratic-form margin of A against g.
inline double min_generalized_eig(const Sym3& A, const Sym3& g) {
    return generalized_eig(A, g)[0];
}

}  // namespace sigma2
