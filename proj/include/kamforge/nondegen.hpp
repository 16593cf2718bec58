#pragma once

// Non-degeneracy conditions for families (omega(lambda), Omega(lambda)).

#include "kamforge/revlin.hpp"

#include <optional>
#include <string>

namespace kamforge {

/// Verdict record {condition, verdict, margin, witness?}.
struct ConditionRecord {
    std::string condition;
    Verdict verdict = Verdict::indeterminate;
    double margin = 0.0;     // smallest singular value (injectivity) or log gap (rank)
    double threshold = 0.0;  // decision threshold the margin is compared against
    int deficit = 0;         // rank deficit for transversality tests
    std::optional<Vector> witness;
    /// Perturbation size below which an injectivity verdict cannot flip.
    double stable_radius = 0.0;

    bool holds() const { return verdict == Verdict::holds; }
};

namespace detail {

/// Injectivity of `op` restricted to the span of the orthonormal columns of `basis`.
inline ConditionRecord injective_on(const std::string& name, const Matrix& op, const Matrix& basis,
                                    const Tolerances& tol) {
    ConditionRecord rec;
    rec.condition = name;
    if (basis.cols() == 0) {
        rec.verdict = Verdict::holds;
        rec.margin = std::numeric_limits<double>::infinity();
        rec.stable_radius = std::numeric_limits<double>::infinity();
        return rec;
    }
    const Matrix restricted = op * basis;
    Eigen::JacobiSVD<Matrix> svd(restricted, Eigen::ComputeFullV);
    const Vector s = svd.singularValues();
    const double smin = s.size() == basis.cols() ? s(s.size() - 1) : 0.0;
    const double scale = std::max(op_norm(op), 1.0);
    rec.margin = smin;
    rec.threshold = tol.rank_tol * scale;
    if (smin > tol.indeterminate_band * rec.threshold) rec.verdict = Verdict::holds;
    else if (smin < rec.threshold / tol.indeterminate_band) rec.verdict = Verdict::fails;
    else rec.verdict = Verdict::indeterminate;
    if (rec.verdict == Verdict::holds) {
        rec.stable_radius = 0.5 * smin;
    } else {
        Vector w = basis * svd.matrixV().col(basis.cols() - 1);
        // deterministic sign: largest entry positive
        Eigen::Index imax = 0;
        w.cwiseAbs().maxCoeff(&imax);
        if (w(imax) < 0) w = -w;
        rec.witness = w;
    }
    return rec;
}

}  // namespace detail

/// BHT(i): Omega0 is injective on B+ = Fix(R) (intersected with Fix(S) under a twist).
inline ConditionRecord bht_i(const Matrix& omega0, const ReversingStructure& rs, const Tolerances& tol = {}) {
    require(omega0.rows() == rs.dim() && omega0.cols() == rs.dim(), ErrorCode::dimension_mismatch,
            "bht_i: matrix does not match dim_z");
    require(check_membership(omega0, rs, Parity::minus, tol.membership_tol).member,
            ErrorCode::invalid_argument, "bht_i: matrix is not in gl-");
    Matrix basis = rs.b_plus();
    if (basis.cols() > 0) basis = range_basis(basis);  // orthonormalize
    return detail::injective_on("bht_i", omega0, basis, tol);
}

/// Family data at lambda0: omega, Omega and their first derivatives in s parameters.
struct FamilyAtPoint {
    Vector omega0;
    Matrix Omega0;
    Matrix d_omega;                // n x s
    std::vector<Matrix> d_Omega;   // s matrices in gl-
    ReversingStructure symmetry;

    int n() const { return static_cast<int>(omega0.size()); }
    int s() const { return static_cast<int>(d_Omega.size()); }
};

inline void validate(const FamilyAtPoint& fam, const Tolerances& tol = {}) {
    require(fam.d_omega.rows() == fam.n() && fam.d_omega.cols() == fam.s(), ErrorCode::dimension_mismatch,
            "family: d_omega must be n x s");
    require(fam.Omega0.rows() == fam.symmetry.dim() && fam.Omega0.cols() == fam.symmetry.dim(),
            ErrorCode::dimension_mismatch, "family: Omega0 does not match dim_z");
    require(fam.s() >= fam.n(), ErrorCode::invalid_argument, "family: need s >= n parameters");
    require(check_membership(fam.Omega0, fam.symmetry, Parity::minus, tol.membership_tol).member,
            ErrorCode::invalid_argument, "family: Omega0 is not in gl-");
    for (const auto& d : fam.d_Omega) {
        require(d.rows() == fam.symmetry.dim() && d.cols() == fam.symmetry.dim(),
                ErrorCode::dimension_mismatch, "family: d_Omega size");
        require(d.norm() == 0.0 || check_membership(d, fam.symmetry, Parity::minus, tol.membership_tol).member,
                ErrorCode::invalid_argument, "family: d_Omega entry is not in gl-");
    }
}

/// BHT(ii): lambda -> (omega, Omega) is transverse to R^n x orbit(Omega0).
inline ConditionRecord bht_ii(const FamilyAtPoint& fam, const Tolerances& tol = {}) {
    validate(fam, tol);
    StructuredSpaces sp(fam.symmetry);
    const int n = fam.n();
    const int s = fam.s();
    const int dm = sp.dimension(Parity::minus);
    const Matrix ad = adjoint_matrix(fam.Omega0, Parity::plus, sp);
    Matrix big = Matrix::Zero(n + dm, s + ad.cols());
    big.topLeftCorner(n, s) = fam.d_omega;
    for (int i = 0; i < s; ++i)
        big.block(n, i, dm, 1) = sp.coords(fam.d_Omega[static_cast<std::size_t>(i)], Parity::minus);
    big.bottomRightCorner(dm, ad.cols()) = ad;

    ConditionRecord rec;
    rec.condition = "bht_ii";
    Eigen::JacobiSVD<Matrix> svd(big);
    const auto decision = decide_rank(svd.singularValues(), tol.rank_tol, tol.indeterminate_band);
    rec.deficit = n + dm - decision.rank;
    rec.margin = decision.log_gap;
    rec.threshold = decision.threshold;
    if (!decision.stable) rec.verdict = Verdict::indeterminate;
    else rec.verdict = rec.deficit == 0 ? Verdict::holds : Verdict::fails;
    return rec;
}

enum class CorollaryCase { plain, covering_l2, zero_kernel };

inline const char* to_string(CorollaryCase c) {
    switch (c) {
        case CorollaryCase::plain: return "plain";
        case CorollaryCase::covering_l2: return "covering_l2";
        case CorollaryCase::zero_kernel: return "zero_kernel";
    }
    return "?";
}

struct GateReport {
    Verdict verdict = Verdict::indeterminate;
    ConditionRecord hypothesis;
    ConditionRecord transversality;
};

/// Kernel of Omega0 contained in Fix(-R).
inline ConditionRecord kernel_in_fix_minus(const Matrix& omega0, const ReversingStructure& rs,
                                           const Tolerances& tol = {}) {
    ConditionRecord rec;
    rec.condition = "zero_kernel";
    const double scale = std::max(op_norm(omega0), 1.0);
    Eigen::JacobiSVD<Matrix> svd(omega0);
    const auto decision = decide_rank(svd.singularValues(), tol.rank_tol, tol.indeterminate_band, scale);
    const Matrix ker = null_space(omega0, tol.rank_tol, scale);
    const Matrix id = Matrix::Identity(rs.dim(), rs.dim());
    // largest component of a kernel vector along Fix(R)
    const Matrix along = 0.5 * (id + rs.R()) * ker;
    rec.margin = ker.cols() ? op_norm(along) : 0.0;
    rec.threshold = 1e-8;
    if (!decision.stable) rec.verdict = Verdict::indeterminate;
    else rec.verdict = rec.margin <= rec.threshold ? Verdict::holds : Verdict::fails;
    if (rec.verdict == Verdict::fails) {
        Eigen::JacobiSVD<Matrix> s2(along, Eigen::ComputeFullV);
        rec.witness = ker * s2.matrixV().col(0);
    }
    return rec;
}

/// Extra hypothesis of each corollary combined with BHT(ii).
inline GateReport corollary_gate(const FamilyAtPoint& fam, CorollaryCase which, const Tolerances& tol = {}) {
    GateReport out;
    const int d = fam.symmetry.dim();
    switch (which) {
        case CorollaryCase::plain:
            out.hypothesis = detail::injective_on("invertible", fam.Omega0, Matrix::Identity(d, d), tol);
            break;
        case CorollaryCase::covering_l2: {
            require(fam.symmetry.twist().has_value(), ErrorCode::invalid_argument,
                    "covering_l2 gate needs a twist S in the symmetry");
            const Matrix& s = fam.symmetry.twist()->S;
            const Matrix fix_s = null_space(s - Matrix::Identity(d, d), 1e-10, std::max(1.0, op_norm(s)));
            out.hypothesis = detail::injective_on("invertible_on_fix_s", fam.Omega0, fix_s, tol);
            break;
        }
        case CorollaryCase::zero_kernel:
            out.hypothesis = kernel_in_fix_minus(fam.Omega0, fam.symmetry, tol);
            break;
    }
    out.transversality = bht_ii(fam, tol);
    out.verdict = both(out.hypothesis.verdict, out.transversality.verdict);
    return out;
}

/// Forced oscillator family: lambda = (omega1, omega2, mu), Omega(mu) = [[0,1],[a(mu),0]],
/// R = diag(-1,1). Reversibility forces the (2,2) entry to vanish.
inline FamilyAtPoint forced_oscillator_family(const Vector& omega, double a, double da_dmu) {
    require(omega.size() == 2, ErrorCode::dimension_mismatch, "forced oscillator has n = 2");
    FamilyAtPoint fam;
    fam.omega0 = omega;
    fam.Omega0 = (Matrix(2, 2) << 0, 1, a, 0).finished();
    fam.d_omega = Matrix::Zero(2, 3);
    fam.d_omega.leftCols(2) = Matrix::Identity(2, 2);
    fam.d_Omega = {Matrix::Zero(2, 2), Matrix::Zero(2, 2), (Matrix(2, 2) << 0, 0, da_dmu, 0).finished()};
    fam.symmetry = ReversingStructure((Matrix(2, 2) << -1, 0, 0, 1).finished());
    return fam;
}

/// Family lambda = (omega, mu) with omega the identity map and Omega(mu) a linear unfolding.
inline FamilyAtPoint unfolding_family(const Vector& omega, const LinearUnfolding& u, const ReversingStructure& rs) {
    FamilyAtPoint fam;
    const int n = static_cast<int>(omega.size());
    const int c = u.codimension();
    fam.omega0 = omega;
    fam.Omega0 = u.base;
    fam.d_omega = Matrix::Zero(n, n + c);
    fam.d_omega.leftCols(n) = Matrix::Identity(n, n);
    for (int i = 0; i < n; ++i) fam.d_Omega.push_back(Matrix::Zero(rs.dim(), rs.dim()));
    for (const auto& d : u.directions) fam.d_Omega.push_back(d);
    fam.symmetry = rs;
    return fam;
}

}  // namespace kamforge
