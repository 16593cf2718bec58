#pragma once

// Co-rotating coordinates: unimodular normalisation of resonance vectors,
// Van der Pol transformations and l:1 coverings with their deck maps.

#include "kamforge/fourier_field.hpp"
#include "kamforge/revlin.hpp"

#include <numeric>
#include <sstream>

namespace kamforge {

// ---------------------------------------------------------------------------
// Unimodular transforms

/// x -> sigma x on frequencies, k -> sigma^{-T} k on integer covectors.
struct UnimodularTransform {
    IntMatrix sigma;
    IntMatrix sigma_inv;

    Vector apply_frequency(const Vector& omega) const { return sigma.cast<double>() * omega; }
    IntVector apply_covector(const IntVector& k) const { return sigma_inv.transpose() * k; }
    std::int64_t determinant() const;
};

/// Exact integer determinant by fraction-free elimination (Bareiss).
inline std::int64_t integer_determinant(IntMatrix a) {
    const auto n = a.rows();
    require(n == a.cols(), ErrorCode::dimension_mismatch, "determinant of a non-square matrix");
    if (n == 0) return 1;
    std::int64_t sign = 1, prev = 1;
    for (Eigen::Index k = 0; k + 1 < n; ++k) {
        if (a(k, k) == 0) {
            Eigen::Index swap = -1;
            for (Eigen::Index i = k + 1; i < n; ++i)
                if (a(i, k) != 0) {
                    swap = i;
                    break;
                }
            if (swap < 0) return 0;
            a.row(k).swap(a.row(swap));
            sign = -sign;
        }
        for (Eigen::Index i = k + 1; i < n; ++i)
            for (Eigen::Index j = k + 1; j < n; ++j) a(i, j) = (a(i, j) * a(k, k) - a(i, k) * a(k, j)) / prev;
        prev = a(k, k);
    }
    return sign * a(n - 1, n - 1);
}

inline std::int64_t UnimodularTransform::determinant() const { return integer_determinant(sigma); }

/// (g, a, b) with a x + b y = g = gcd(x, y) >= 0.
inline std::tuple<std::int64_t, std::int64_t, std::int64_t> extended_gcd(std::int64_t x, std::int64_t y) {
    std::int64_t a0 = 1, b0 = 0, a1 = 0, b1 = 1;
    while (y != 0) {
        const std::int64_t q = x / y;
        std::tie(x, y) = std::make_pair(y, x - q * y);
        std::tie(a0, a1) = std::make_pair(a1, a0 - q * a1);
        std::tie(b0, b1) = std::make_pair(b1, b0 - q * b1);
    }
    if (x < 0) return {-x, -a0, -b0};
    return {x, a0, b0};
}

struct NormalizedResonance {
    UnimodularTransform transform;
    std::int64_t k1 = 0;
};

/// sigma in SL(n,Z) with sigma^{-T} k = (k1, 0, ..., 0), k1 = gcd(k) (k1 = k for n = 1).
///
/// Row operations U built from 2x2 extended-gcd blocks reduce k to (g,0,..,0);
/// then sigma^{-T} = U, i.e. sigma = U^{-T}.
inline NormalizedResonance normalize_resonance(const IntVector& k) {
    const auto n = k.size();
    require(n >= 1, ErrorCode::dimension_mismatch, "resonance vector is empty");
    require(k.cwiseAbs().maxCoeff() > 0, ErrorCode::invalid_argument, "resonance vector must be nonzero");
    NormalizedResonance out;
    if (n == 1) {
        out.transform.sigma = IntMatrix::Identity(1, 1);
        out.transform.sigma_inv = IntMatrix::Identity(1, 1);
        out.k1 = k(0);
        return out;
    }
    IntMatrix u = IntMatrix::Identity(n, n);
    IntMatrix u_inv = IntMatrix::Identity(n, n);
    IntVector w = k;
    for (Eigen::Index i = n - 1; i >= 1; --i) {
        if (w(i) == 0) continue;
        const auto [g, a, b] = extended_gcd(w(0), w(i));
        // [[a, b], [-w_i/g, w_0/g]] has determinant 1
        const std::int64_t c = -w(i) / g, d = w(0) / g;
        const IntVector r0 = u.row(0), ri = u.row(i);
        u.row(0) = a * r0 + b * ri;
        u.row(i) = c * r0 + d * ri;
        // inverse block [[d, -b], [-c, a]] applied on the right
        const IntVector c0 = u_inv.col(0), ci = u_inv.col(i);
        u_inv.col(0) = d * c0 - c * ci;
        u_inv.col(i) = -b * c0 + a * ci;
        w(0) = g;
        w(i) = 0;
    }
    if (w(0) < 0) {
        // flip two rows to keep determinant +1
        u.row(0) *= -1;
        u.row(1) *= -1;
        u_inv.col(0) *= -1;
        u_inv.col(1) *= -1;
        w(0) = -w(0);
    }
    out.k1 = w(0);
    out.transform.sigma = u_inv.transpose();
    out.transform.sigma_inv = u.transpose();
    require(out.transform.sigma * out.transform.sigma_inv == IntMatrix::Identity(n, n), ErrorCode::ill_conditioned,
            "unimodular completion overflowed");
    return out;
}

// ---------------------------------------------------------------------------
// Co-rotations on resonant pairs

/// Descriptor {l, pairs, k1, sigma}. `pairs` lists the zero-based indices j of
/// the planes (z_{2j}, z_{2j+1}) that co-rotate.
struct CoveringData {
    int l = 2;
    std::vector<int> pairs;
    int k1 = 1;
    IntMatrix sigma;
};

namespace detail {

/// Real 2p x 2p generator J of the rotation on the selected pairs.
inline Matrix rotation_generator(int dim, const std::vector<int>& pairs) {
    Matrix j = Matrix::Zero(dim, dim);
    for (int q : pairs) {
        require(q >= 0 && 2 * q + 1 < dim, ErrorCode::invalid_argument, "resonant pair index out of range");
        j(2 * q, 2 * q + 1) = -1;
        j(2 * q + 1, 2 * q) = 1;
    }
    return j;
}

/// rot(theta) = E0 + e^{i theta} E+ + e^{-i theta} E-.
struct RotationParts {
    CMatrix e0, plus, minus;
};

inline RotationParts rotation_parts(int dim, const std::vector<int>& pairs) {
    const Matrix j = rotation_generator(dim, pairs);
    Matrix pr = Matrix::Zero(dim, dim);
    for (int q : pairs) {
        pr(2 * q, 2 * q) = 1;
        pr(2 * q + 1, 2 * q + 1) = 1;
    }
    const Complex i(0, 1);
    RotationParts r;
    r.e0 = (Matrix::Identity(dim, dim) - pr).cast<Complex>();
    r.plus = 0.5 * (pr.cast<Complex>() - i * j.cast<Complex>());
    r.minus = 0.5 * (pr.cast<Complex>() + i * j.cast<Complex>());
    return r;
}

inline Matrix rotation(int dim, const std::vector<int>& pairs, double theta) {
    const Matrix j = rotation_generator(dim, pairs);
    Matrix pr = Matrix::Zero(dim, dim);
    for (int q : pairs) {
        pr(2 * q, 2 * q) = 1;
        pr(2 * q + 1, 2 * q + 1) = 1;
    }
    return Matrix::Identity(dim, dim) - pr + std::cos(theta) * pr + std::sin(theta) * j;
}

inline Mode shifted(Mode k, int d) {
    k[0] += d;
    return k;
}

/// Maps the field through z = P(theta) zeta with theta = rate * x1 / l, where
/// `field` is already indexed in units of 1/l on x1. sign = +1 lifts (divides
/// by P), sign = -1 pushes forward (multiplies by P).
inline FourierField corotate(const FourierField& field, const std::vector<int>& pairs, int rate, int l, int sign) {
    const int dim = field.dim_z();
    const auto parts = rotation_parts(dim, pairs);
    // P(theta) as a mode list (shift in units of 1/l, matrix)
    const std::vector<std::pair<int, CMatrix>> P{{0, parts.e0}, {rate, parts.plus}, {-rate, parts.minus}};
    const std::vector<std::pair<int, CMatrix>> Pinv{{0, parts.e0}, {-rate, parts.plus}, {rate, parts.minus}};
    const auto& right = sign > 0 ? P : Pinv;  // multiplies z-columns
    const auto& left = sign > 0 ? Pinv : P;   // multiplies z-rows
    const CMatrix jc = rotation_generator(dim, pairs).cast<Complex>();
    const double coef = static_cast<double>(rate) / l;

    FourierField out(field.n(), field.m(), field.p(), field.K());
    out.set_cover_order(field.cover_order());
    for (const auto& [k, jets] : field.modes()) {
        {
            Jets& o = out.at(k);
            o.f += jets.f;
            o.f_eta += jets.f_eta;
            o.g += jets.g;
            o.g_eta += jets.g_eta;
            // co-rotating frame: subtract (or add back) rate/l * xdot_1 * J
            o.h_zeta -= static_cast<double>(sign) * coef * jets.f(0) * jc;
        }
        for (const auto& [s, m] : right) {
            if (m.norm() == 0.0) continue;
            Jets& o = out.at(shifted(k, s));
            o.f_zeta += jets.f_zeta * m;
            o.g_zeta += jets.g_zeta * m;
        }
        for (const auto& [s, m] : left) {
            if (m.norm() == 0.0) continue;
            Jets& o = out.at(shifted(k, s));
            o.h += m * jets.h;
            o.h_eta += m * jets.h_eta;
        }
        for (const auto& [sl, ml] : left)
            for (const auto& [sr, mr] : right) {
                if (ml.norm() == 0.0 || mr.norm() == 0.0) continue;
                Jets& o = out.at(shifted(k, sl + sr));
                o.h_zeta += ml * jets.h_zeta * mr;
            }
    }
    out.prune(0.0);
    return out;
}

}  // namespace detail

/// Van der Pol transformation z_II -> e^{i k1 x1} z_II on the selected pairs.
/// The resonant block's Floquet matrix shifts by -k1 * omega_1 * J.
inline FourierField vanderpol(const FourierField& field, const std::vector<int>& pairs, int k1) {
    require(field.cover_order() == 1, ErrorCode::invalid_argument, "vanderpol acts on base fields");
    detail::rotation_generator(field.dim_z(), pairs);  // range check
    if (k1 == 0) return field;
    return detail::corotate(field, pairs, k1, 1, +1);
}

/// True when Omega commutes with the rotation generator of the pairs, so the
/// transformed field stays in Floquet form.
inline bool floquet_compatible(const Matrix& Omega, const std::vector<int>& pairs, double tol = 1e-12) {
    const Matrix j = detail::rotation_generator(static_cast<int>(Omega.rows()), pairs);
    return commutator(Omega, j).norm() <= tol * std::max(1.0, Omega.norm());
}

/// Deck map generator S = rotation by 2 pi k1 / l on the pairs.
inline Matrix deck_matrix(const CoveringData& cov, int dim) {
    return detail::rotation(dim, cov.pairs, 2.0 * std::numbers::pi * cov.k1 / cov.l);
}

inline void validate(const CoveringData& cov, int dim) {
    require(cov.l >= 1, ErrorCode::invalid_argument, "covering order l must be >= 1");
    require(!cov.pairs.empty(), ErrorCode::invalid_argument, "covering needs at least one resonant pair");
    require(std::gcd(cov.k1, cov.l) == 1, ErrorCode::invalid_argument,
            "k1 must be coprime to l (k1 odd for l = 2)");
    detail::rotation_generator(dim, cov.pairs);
}

/// Lift of a base field to the l:1 cover xi1 in R/(2 pi l Z).
///
/// The cover field is indexed in units of 1/l on xi1 and satisfies
/// Pi_* X^ = X (on the affine jets) and F_* X^ = X^.
inline FourierField lift_to_cover(const FourierField& field, const CoveringData& cov) {
    require(field.cover_order() == 1, ErrorCode::invalid_argument, "lift_to_cover expects a base field");
    require(cov.l >= 2, ErrorCode::invalid_argument, "lift_to_cover needs l >= 2");
    validate(cov, field.dim_z());
    FourierField scaled(field.n(), field.m(), field.p(), field.K() * cov.l + cov.k1 * 2);
    scaled.set_cover_order(cov.l);
    for (const auto& [k, j] : field.modes()) {
        Mode kk = k;
        kk[0] *= cov.l;
        scaled.set(kk, j);
    }
    return detail::corotate(scaled, cov.pairs, cov.k1, cov.l, +1);
}

/// Push-forward of an F-equivariant cover field to the base.
inline FourierField push_to_base(const FourierField& cover, const CoveringData& cov, double tol = 1e-12) {
    require(cover.cover_order() == cov.l, ErrorCode::invalid_argument, "cover order mismatch");
    validate(cov, cover.dim_z());
    const FourierField back = detail::corotate(cover, cov.pairs, cov.k1, cov.l, -1);
    FourierField out(cover.n(), cover.m(), cover.p(), (cover.K() + cov.l - 1) / cov.l);
    for (const auto& [k, j] : back.modes()) {
        if (k[0] % cov.l != 0) {
            require(j.max_abs() <= tol, ErrorCode::invalid_argument,
                    "cover field is not deck-equivariant: fractional base mode");
            continue;
        }
        Mode kk = k;
        kk[0] /= cov.l;
        out.set(kk, j);
    }
    return out;
}

/// Covering projection Pi and deck map F on points.
inline PhasePoint cover_project(const PhasePoint& pt, const CoveringData& cov) {
    PhasePoint out = pt;
    const double two_pi = 2.0 * std::numbers::pi;
    out.x(0) = std::fmod(pt.x(0), two_pi);
    if (out.x(0) < 0) out.x(0) += two_pi;
    out.z = detail::rotation(static_cast<int>(pt.z.size()), cov.pairs, cov.k1 * pt.x(0) / cov.l) * pt.z;
    return out;
}

inline PhasePoint deck(const PhasePoint& pt, const CoveringData& cov) {
    PhasePoint out = pt;
    const double period = 2.0 * std::numbers::pi * cov.l;
    out.x(0) = std::fmod(pt.x(0) - 2.0 * std::numbers::pi, period);
    if (out.x(0) < 0) out.x(0) += period;
    out.z = deck_matrix(cov, static_cast<int>(pt.z.size())) * pt.z;
    return out;
}

/// Differential of Pi applied to a cover field value at a cover point.
inline FieldValue push_value(const PhasePoint& pt, const FieldValue& v, const CoveringData& cov) {
    const int dim = static_cast<int>(pt.z.size());
    const double theta = cov.k1 * pt.x(0) / cov.l;
    const Matrix p = detail::rotation(dim, cov.pairs, theta);
    const Matrix j = detail::rotation_generator(dim, cov.pairs);
    FieldValue out = v;
    out.dz = p * v.dz + (static_cast<double>(cov.k1) / cov.l) * v.dx(0) * j * p * pt.z;
    return out;
}

// ---------------------------------------------------------------------------
// Symmetry checks on Fourier data

struct SymmetryViolation {
    std::string check;
    Mode k;
    std::string jet;
    double defect = 0.0;
};

struct SymmetryReport {
    bool ok = true;
    std::vector<SymmetryViolation> violations;

    std::string summary() const {
        std::ostringstream os;
        for (const auto& v : violations) {
            os << v.check << " at k=(";
            for (std::size_t i = 0; i < v.k.size(); ++i) os << (i ? "," : "") << v.k[i];
            os << ") " << v.jet << " defect " << v.defect << "\n";
        }
        return os.str();
    }
};

namespace detail {

inline void note(SymmetryReport& rep, const std::string& check, const Mode& k, const std::string& jet,
                 double defect, double tol) {
    if (defect > tol) {
        rep.ok = false;
        rep.violations.push_back({check, k, jet, defect});
    }
}

template <class A>
double sup(const A& a) {
    return a.size() ? a.cwiseAbs().maxCoeff() : 0.0;
}

}  // namespace detail

/// G-reversibility for G(x, y, z) = (-x, y, R z): X(G p) = -DG X(p).
inline SymmetryReport check_reversibility(const FourierField& field, const Matrix& R, double tol = 1e-12) {
    require(R.rows() == field.dim_z(), ErrorCode::dimension_mismatch, "R does not match the field");
    SymmetryReport rep;
    const CMatrix r = R.cast<Complex>();
    const std::string c = "G-reversibility";
    for (const auto& [k, j] : field.modes()) {
        const Jets o = field.get(negate(k));
        detail::note(rep, c, k, "f", detail::sup(j.f - o.f), tol);
        detail::note(rep, c, k, "f_eta", detail::sup(j.f_eta - o.f_eta), tol);
        detail::note(rep, c, k, "f_zeta", detail::sup(j.f_zeta - o.f_zeta * r), tol);
        detail::note(rep, c, k, "g", detail::sup(j.g + o.g), tol);
        detail::note(rep, c, k, "g_eta", detail::sup(j.g_eta + o.g_eta), tol);
        detail::note(rep, c, k, "g_zeta", detail::sup(j.g_zeta + o.g_zeta * r), tol);
        detail::note(rep, c, k, "h", detail::sup(j.h + r * o.h), tol);
        detail::note(rep, c, k, "h_eta", detail::sup(j.h_eta + r * o.h_eta), tol);
        detail::note(rep, c, k, "h_zeta", detail::sup(j.h_zeta + r * o.h_zeta * r), tol);
    }
    return rep;
}

/// Equivariance X(F p) = DF X(p) for the deck map F(xi1) = xi1 - 2 pi, zeta -> S zeta,
/// with modes in units of 1/l on xi1.
inline SymmetryReport check_deck_equivariance(const FourierField& field, const Matrix& S, int l,
                                              double tol = 1e-12) {
    SymmetryReport rep;
    const CMatrix s = S.cast<Complex>();
    const std::string c = "F-equivariance";
    for (const auto& [k, j] : field.modes()) {
        const Complex phi = std::polar(1.0, -2.0 * std::numbers::pi * k[0] / l);
        detail::note(rep, c, k, "f", detail::sup(phi * j.f - j.f), tol);
        detail::note(rep, c, k, "f_eta", detail::sup(phi * j.f_eta - j.f_eta), tol);
        detail::note(rep, c, k, "f_zeta", detail::sup(phi * j.f_zeta * s - j.f_zeta), tol);
        detail::note(rep, c, k, "g", detail::sup(phi * j.g - j.g), tol);
        detail::note(rep, c, k, "g_eta", detail::sup(phi * j.g_eta - j.g_eta), tol);
        detail::note(rep, c, k, "g_zeta", detail::sup(phi * j.g_zeta * s - j.g_zeta), tol);
        detail::note(rep, c, k, "h", detail::sup(phi * j.h - s * j.h), tol);
        detail::note(rep, c, k, "h_eta", detail::sup(phi * j.h_eta - s * j.h_eta), tol);
        detail::note(rep, c, k, "h_zeta", detail::sup(phi * j.h_zeta * s - s * j.h_zeta), tol);
    }
    return rep;
}

/// Sigma-reversibility: G-reversibility, F-equivariance for a twist, the
/// derived z_II parities of the x-independent part, and g = 0 on Fix(R) and
/// Fix(S R). With no twist (l = 1) only G-reversibility is checked.
inline SymmetryReport check_sigma_reversibility(const FourierField& field, const ReversingStructure& rs,
                                                double tol = 1e-12) {
    SymmetryReport rep = check_reversibility(field, rs.R(), tol);
    if (!rs.twist() || rs.twist()->order < 2) return rep;
    const Matrix& S = rs.twist()->S;
    const int l = rs.twist()->order;
    auto merge = [&rep](const SymmetryReport& other) {
        if (!other.ok) rep.ok = false;
        rep.violations.insert(rep.violations.end(), other.violations.begin(), other.violations.end());
    };
    merge(check_deck_equivariance(field, S, l, tol));

    // x-independent part: f, g even and h odd in z_II, i.e. invariant under z -> S z
    const Jets j0 = field.get(field.zero_mode());
    const Mode k0 = field.zero_mode();
    const int d = field.dim_z();
    const CMatrix s = S.cast<Complex>();
    const CMatrix id = CMatrix::Identity(d, d);
    const std::string par = "z_II parity";
    detail::note(rep, par, k0, "f_zeta", detail::sup(j0.f_zeta * (s - id)), tol);
    detail::note(rep, par, k0, "g_zeta", detail::sup(j0.g_zeta * (s - id)), tol);
    detail::note(rep, par, k0, "h", detail::sup((s - id) * j0.h), tol);
    detail::note(rep, par, k0, "h_zeta", detail::sup(s * j0.h_zeta - j0.h_zeta * s), tol);

    const CMatrix r = rs.R().cast<Complex>();
    const std::string van = "g on fixed spaces";
    detail::note(rep, van, k0, "g", detail::sup(j0.g), tol);
    detail::note(rep, van, k0, "g_zeta|Fix(R)", detail::sup(j0.g_zeta * (id + r)), tol);
    detail::note(rep, van, k0, "g_zeta|Fix(SR)", detail::sup(j0.g_zeta * (id + s * r)), tol);
    return rep;
}

}  // namespace kamforge
