#pragma once

// Structured linear algebra over the infinitesimally reversible (gl-) and
// equivariant (gl+) matrix spaces of a linear involution R.

#include "kamforge/core.hpp"

#include <Eigen/Eigenvalues>

#include <map>
#include <optional>
#include <sstream>

namespace kamforge {

inline Matrix kron(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

/// Matrix of X -> A X - X B acting on column-major vec(X).
inline Matrix sylvester_operator(const Matrix& a, const Matrix& b) {
    const auto n = a.rows();
    const auto m = b.rows();
    return kron(Matrix::Identity(m, m), a) - kron(b.transpose(), Matrix::Identity(n, n));
}

/// Optional l-fold twist S_l of the reversing symmetry group.
struct Twist {
    Matrix S;
    int order = 1;
};

/// The involution R (plus optional twist and extra commuting structure)
/// defining gl+ and gl-.
///
/// All structured computations run in working coordinates where R is
/// diag(I_p, -I_p); the change of basis is computed here and stored. For a
/// symmetric R the change of basis is orthogonal, so transposes agree with
/// the original coordinates.
class ReversingStructure {
public:
    ReversingStructure() = default;

    explicit ReversingStructure(Matrix r, std::optional<Twist> twist = std::nullopt,
                                std::vector<Matrix> commutant = {})
        : r_(std::move(r)), twist_(std::move(twist)), commutant_(std::move(commutant)) {
        validate();
        build_frame();
    }

    int dim() const { return static_cast<int>(r_.rows()); }
    int p() const { return dim() / 2; }
    const Matrix& R() const { return r_; }
    const std::optional<Twist>& twist() const { return twist_; }
    const std::vector<Matrix>& commutant() const { return commutant_; }
    bool orthogonal_frame() const { return orthogonal_; }

    /// Columns: basis of Fix(R) (sign +1) or Fix(-R) (sign -1), original coordinates.
    Matrix fixed_space(int sign) const {
        return sign > 0 ? frame_.leftCols(p()) : frame_.rightCols(p());
    }

    /// Constant equivariant vectors: Fix(R), intersected with Fix(S) under a twist.
    Matrix b_plus() const {
        Matrix fix = fixed_space(+1);
        if (!twist_ || twist_->order < 2) return fix;
        const Matrix constraint = (twist_->S - Matrix::Identity(dim(), dim())) * fix;
        const Matrix coeff = null_space(constraint, 1e-10, std::max(1.0, op_norm(fix)));
        return fix * coeff;
    }

    Matrix to_work(const Matrix& m) const { return frame_inv_ * m * frame_; }
    Matrix from_work(const Matrix& m) const { return frame_ * m * frame_inv_; }
    const Matrix& frame() const { return frame_; }

private:
    void validate() {
        const auto n = r_.rows();
        require(n == r_.cols() && n > 0 && n % 2 == 0, ErrorCode::dimension_mismatch,
                "R must be a non-empty square matrix of even size");
        const Matrix id = Matrix::Identity(n, n);
        const double scale = 1.0 + r_.squaredNorm();
        require((r_ * r_ - id).norm() <= 1e-10 * scale, ErrorCode::invalid_argument,
                "R is not an involution");
        const int fix_dim = static_cast<int>(null_space(r_ - id, 1e-10, std::max(1.0, op_norm(r_))).cols());
        require(fix_dim == n / 2, ErrorCode::invalid_argument,
                "dim Fix(R) must equal half the dimension");
        if (twist_) {
            const Matrix& s = twist_->S;
            require(s.rows() == n && s.cols() == n, ErrorCode::dimension_mismatch, "twist size");
            require(twist_->order >= 1, ErrorCode::invalid_argument, "twist order must be >= 1");
            Matrix pow = id;
            for (int i = 0; i < twist_->order; ++i) pow = pow * s;
            require((pow - id).norm() <= 1e-9 * (1.0 + s.squaredNorm()), ErrorCode::invalid_argument,
                    "S_l^l != Id");
            // dihedral relation R S R = S^{-1}
            require((r_ * s * r_ * s - id).norm() <= 1e-9 * (1.0 + s.squaredNorm()),
                    ErrorCode::invalid_argument, "twist is not compatible with R (R S R != S^-1)");
        }
        for (const auto& c : commutant_)
            require(c.rows() == n && c.cols() == n, ErrorCode::dimension_mismatch, "commutant size");
    }

    void build_frame() {
        const auto n = r_.rows();
        const Matrix id = Matrix::Identity(n, n);
        orthogonal_ = (r_ - r_.transpose()).norm() <= 1e-12 * (1.0 + r_.norm());
        Matrix plus, minus;
        if (orthogonal_) {
            Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (r_ + r_.transpose()));
            // eigenvalues sorted ascending: -1 block first
            minus = es.eigenvectors().leftCols(n / 2);
            plus = es.eigenvectors().rightCols(n / 2);
            // prefer the identity frame when R is already diagonal in the standard basis
            if (r_.isDiagonal(1e-14)) {
                plus.setZero(n, n / 2);
                minus.setZero(n, n / 2);
                int ip = 0, im = 0;
                for (Eigen::Index i = 0; i < n; ++i) {
                    if (r_(i, i) > 0) plus(i, ip++) = 1.0;
                    else minus(i, im++) = 1.0;
                }
            }
        } else {
            plus = null_space(r_ - id, 1e-10, std::max(1.0, op_norm(r_)));
            minus = null_space(r_ + id, 1e-10, std::max(1.0, op_norm(r_)));
        }
        frame_.resize(n, n);
        frame_ << plus, minus;
        frame_inv_ = frame_.inverse();
    }

    Matrix r_;
    std::optional<Twist> twist_;
    std::vector<Matrix> commutant_;
    Matrix frame_;
    Matrix frame_inv_;
    bool orthogonal_ = true;
};

/// A square matrix tagged with its parity.
struct StructuredMatrix {
    Matrix entries;
    Parity parity = Parity::minus;
};

struct Membership {
    bool member = false;
    double defect = 0.0;
};

/// Tests M R = -R M (parity minus) or M R = R M (parity plus).
inline Membership check_membership(const Matrix& m, const ReversingStructure& rs, Parity parity,
                                   double tol = 1e-9) {
    require(m.rows() == rs.dim() && m.cols() == rs.dim(), ErrorCode::dimension_mismatch,
            "matrix does not match dim_z");
    const Matrix& r = rs.R();
    const Matrix d = parity == Parity::minus ? Matrix(m * r + r * m) : Matrix(m * r - r * m);
    Membership out;
    out.defect = d.norm();
    out.member = out.defect <= tol * m.norm();
    return out;
}

inline StructuredMatrix make_structured(const Matrix& m, const ReversingStructure& rs, Parity parity,
                                        double tol = 1e-9) {
    const auto mem = check_membership(m, rs, parity, tol);
    require(mem.member, ErrorCode::invalid_argument,
            std::string("matrix is not in gl") + (parity == Parity::minus ? "-" : "+") +
                " (defect " + std::to_string(mem.defect) + ")");
    return {m, parity};
}

/// Orthonormal coordinate systems on gl+ and gl- (working coordinates).
///
/// Without twist or commutant constraints the bases are the elementary
/// matrices of the diagonal blocks (gl+) and off-diagonal blocks (gl-), so
/// both spaces have dimension 2p^2.
class StructuredSpaces {
public:
    explicit StructuredSpaces(ReversingStructure rs) : rs_(std::move(rs)) {
        const int n = rs_.dim();
        const int p = rs_.p();
        Matrix plus(n * n, 2 * p * p), minus(n * n, 2 * p * p);
        int ip = 0, im = 0;
        for (int j = 0; j < n; ++j) {
            for (int i = 0; i < n; ++i) {
                const bool same_block = (i < p) == (j < p);
                Vector e = Vector::Zero(n * n);
                e(j * n + i) = 1.0;
                if (same_block) plus.col(ip++) = e;
                else minus.col(im++) = e;
            }
        }
        std::vector<Matrix> constraints;
        if (rs_.twist() && rs_.twist()->order >= 2) constraints.push_back(rs_.to_work(rs_.twist()->S));
        for (const auto& c : rs_.commutant()) constraints.push_back(rs_.to_work(c));
        plus_ = restrict_to_commutant(plus, constraints);
        minus_ = restrict_to_commutant(minus, constraints);
    }

    const ReversingStructure& structure() const { return rs_; }
    int dim_z() const { return rs_.dim(); }
    const Matrix& basis(Parity parity) const { return parity == Parity::plus ? plus_ : minus_; }
    int dimension(Parity parity) const { return static_cast<int>(basis(parity).cols()); }

    /// Coordinates of a matrix given in working coordinates.
    Vector coords_work(const Matrix& mw, Parity parity) const { return basis(parity).transpose() * vec(mw); }
    Matrix from_coords_work(const Vector& c, Parity parity) const {
        return unvec(basis(parity) * c, dim_z(), dim_z());
    }

    Vector coords(const Matrix& m, Parity parity) const { return coords_work(rs_.to_work(m), parity); }
    Matrix from_coords(const Vector& c, Parity parity) const {
        return rs_.from_work(from_coords_work(c, parity));
    }

    /// Orthogonal projection (working coordinates) onto gl+/-.
    Matrix project(const Matrix& m, Parity parity) const { return from_coords(coords(m, parity), parity); }

    /// Transpose taken in working coordinates (equals the plain transpose for symmetric R).
    Matrix transpose(const Matrix& m) const { return rs_.from_work(rs_.to_work(m).transpose()); }

    /// Matrix of A -> X A - A X from gl_from into gl_{-from}, X given in working coordinates.
    Matrix ad_work(const Matrix& xw, Parity from) const {
        const Parity to = opposite(from);
        const Matrix& bf = basis(from);
        Matrix out(dimension(to), bf.cols());
        const int n = dim_z();
        for (Eigen::Index j = 0; j < bf.cols(); ++j) {
            const Matrix a = unvec(bf.col(j), n, n);
            out.col(j) = coords_work(xw * a - a * xw, to);
        }
        return out;
    }

private:
    static Matrix restrict_to_commutant(const Matrix& basis, const std::vector<Matrix>& cs) {
        if (cs.empty()) return basis;
        const auto n = cs.front().rows();
        Matrix stacked(0, basis.cols());
        for (const auto& c : cs) {
            const Matrix op = sylvester_operator(c, c) * basis;  // vec(CA - AC)
            Matrix next(stacked.rows() + op.rows(), basis.cols());
            next << stacked, op;
            stacked = next;
        }
        (void)n;
        const Matrix coeff = null_space(stacked, 1e-10, std::max(1.0, op_norm(stacked)));
        return basis * coeff;
    }

    ReversingStructure rs_;
    Matrix plus_;
    Matrix minus_;
};

/// Matrix of A -> Omega A - A Omega from gl_from to gl_{-from}.
/// Omega must be in gl-, so the image lands in the opposite parity.
inline Matrix adjoint_matrix(const Matrix& omega, Parity from, const StructuredSpaces& spaces) {
    require(omega.rows() == spaces.dim_z() && omega.cols() == spaces.dim_z(),
            ErrorCode::dimension_mismatch, "adjoint_matrix: size mismatch");
    return spaces.ad_work(spaces.structure().to_work(omega), from);
}

// ---------------------------------------------------------------------------
// Spectrum and Jordan-Chevalley decomposition

struct EigenCluster {
    Complex center;
    int multiplicity = 0;
};

inline std::vector<Complex> eigenvalues(const Matrix& m) {
    std::vector<Complex> out;
    if (m.size() == 0) return out;
    Eigen::EigenSolver<Matrix> es(m, false);
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) out.push_back(es.eigenvalues()(i));
    std::sort(out.begin(), out.end(), [](Complex a, Complex b) {
        if (a.imag() != b.imag()) return a.imag() < b.imag();
        return a.real() < b.real();
    });
    return out;
}

/// Merge radius for a cluster of `size` eigenvalues: defective eigenvalues of
/// multiplicity m split by about eps^(1/m) under rounding.
inline double cluster_radius(int size, double scale, const Tolerances& tol) {
    constexpr double kEps = std::numeric_limits<double>::epsilon();
    constexpr double kSafety = 30.0;
    return std::max(tol.cluster_tol, kSafety * std::pow(kEps, 1.0 / size)) * scale;
}

/// Groups computed eigenvalues into clusters of (numerically) equal eigenvalues.
/// Throws ill_conditioned when two clusters come within merge distance of each
/// other without satisfying the merge rule.
inline std::vector<EigenCluster> cluster_eigenvalues(const Matrix& m, const Tolerances& tol = {}) {
    const auto ev = eigenvalues(m);
    const double scale = std::max(op_norm(m), std::numeric_limits<double>::min());
    const int n = static_cast<int>(ev.size());
    auto min_dist = [](const std::vector<Complex>& a, const std::vector<Complex>& b) {
        double d = std::numeric_limits<double>::infinity();
        for (auto x : a)
            for (auto y : b) d = std::min(d, std::abs(x - y));
        return d;
    };
    auto mean = [](const std::vector<Complex>& g) {
        Complex c = 0;
        for (auto z : g) c += z;
        return c / static_cast<double>(g.size());
    };

    // Grow each cluster to the largest k such that k unassigned eigenvalues lie
    // within cluster_radius(k) of its current center.
    std::vector<bool> used(ev.size(), false);
    std::vector<std::vector<Complex>> groups;
    for (std::size_t i = 0; i < ev.size(); ++i) {
        if (used[i]) continue;
        std::vector<std::size_t> members{i};
        bool grew = true;
        while (grew) {
            grew = false;
            std::vector<Complex> current;
            for (auto m : members) current.push_back(ev[m]);
            const Complex c = mean(current);
            for (int k = n; k > static_cast<int>(members.size()); --k) {
                std::vector<std::size_t> near;
                for (std::size_t j = 0; j < ev.size(); ++j)
                    if (!used[j] && std::abs(ev[j] - c) <= cluster_radius(k, scale, tol)) near.push_back(j);
                if (static_cast<int>(near.size()) >= k) {
                    for (auto m : members)
                        if (std::find(near.begin(), near.end(), m) == near.end()) near.push_back(m);
                    members = near;
                    grew = true;
                    break;
                }
            }
        }
        std::vector<Complex> g;
        for (auto m : members) {
            used[m] = true;
            g.push_back(ev[m]);
        }
        groups.push_back(g);
    }
    for (std::size_t i = 0; i < groups.size(); ++i)
        for (std::size_t j = i + 1; j < groups.size(); ++j) {
            const int size = static_cast<int>(groups[i].size() + groups[j].size());
            if (min_dist(groups[i], groups[j]) <= cluster_radius(size, scale, tol)) {
                std::ostringstream os;
                os << "ambiguous eigenvalue clustering near " << groups[i].front() << " and "
                   << groups[j].front();
                throw Error(ErrorCode::ill_conditioned, os.str());
            }
        }

    std::vector<EigenCluster> out;
    for (const auto& g : groups) out.push_back({mean(g), static_cast<int>(g.size())});
    // make conjugate clusters exact conjugates
    for (auto& c : out) {
        if (std::abs(c.center.imag()) <= cluster_radius(c.multiplicity + 1, scale, tol))
            c.center = c.center.real();
    }
    std::sort(out.begin(), out.end(), [](const EigenCluster& a, const EigenCluster& b) {
        if (a.center.imag() != b.center.imag()) return a.center.imag() < b.center.imag();
        return a.center.real() < b.center.real();
    });
    return out;
}

/// Imaginary parts of all eigenvalues, with multiplicity, in ascending order.
inline Vector normal_frequencies(const Matrix& omega, const Tolerances& tol = {}) {
    std::vector<double> im;
    for (const auto& c : cluster_eigenvalues(omega, tol))
        for (int i = 0; i < c.multiplicity; ++i) im.push_back(c.center.imag());
    std::sort(im.begin(), im.end());
    Vector out(static_cast<Eigen::Index>(im.size()));
    for (std::size_t i = 0; i < im.size(); ++i) out(static_cast<Eigen::Index>(i)) = im[i];
    return out;
}

struct JordanChevalley {
    Matrix semisimple;
    Matrix nilpotent;
    std::vector<EigenCluster> clusters;
};

namespace detail {

/// Real coefficients (ascending powers) of prod (x - c_j).
inline std::vector<double> squarefree_polynomial(const std::vector<EigenCluster>& clusters) {
    std::vector<Complex> coeff{1.0};
    for (const auto& c : clusters) {
        std::vector<Complex> next(coeff.size() + 1, 0.0);
        for (std::size_t i = 0; i < coeff.size(); ++i) {
            next[i + 1] += coeff[i];
            next[i] -= c.center * coeff[i];
        }
        coeff = next;
    }
    std::vector<double> out;
    for (auto z : coeff) out.push_back(z.real());
    return out;
}

inline Matrix eval_polynomial(const std::vector<double>& coeff, const Matrix& x) {
    const auto n = x.rows();
    Matrix acc = Matrix::Zero(n, n);
    for (auto it = coeff.rbegin(); it != coeff.rend(); ++it)
        acc = acc * x + (*it) * Matrix::Identity(n, n);
    return acc;
}

inline std::vector<double> derivative(const std::vector<double>& coeff) {
    std::vector<double> out;
    for (std::size_t i = 1; i < coeff.size(); ++i) out.push_back(static_cast<double>(i) * coeff[i]);
    if (out.empty()) out.push_back(0.0);
    return out;
}

}  // namespace detail

/// Number of independent eigenvectors of `m` for eigenvalue `lambda`.
inline int eigenvector_count(const Matrix& m, Complex lambda, double rel_tol = 1e-7) {
    const auto n = m.rows();
    CMatrix shifted = m.cast<Complex>() - lambda * CMatrix::Identity(n, n);
    Eigen::JacobiSVD<CMatrix> svd(shifted);
    const double scale = std::max(1.0, op_norm(m));
    int count = 0;
    for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
        if (svd.singularValues()(i) <= rel_tol * scale) ++count;
    return count;
}

/// Semisimple + nilpotent split Omega0 = S0 + N0 with [S0, N0] = 0.
///
/// S0 is the limit of the Newton iteration S <- S - q(S) q'(S)^{-1}, where q
/// is the squarefree polynomial with the clustered eigenvalues as roots; both
/// parts are therefore polynomials in Omega0 and inherit its symmetry.
inline JordanChevalley jordan_chevalley(const Matrix& omega0, const Tolerances& tol = {}) {
    require(omega0.rows() == omega0.cols(), ErrorCode::dimension_mismatch, "square matrix required");
    const auto n = omega0.rows();
    JordanChevalley jc;
    const double scale = op_norm(omega0);
    if (scale == 0.0) {
        jc.semisimple = Matrix::Zero(n, n);
        jc.nilpotent = Matrix::Zero(n, n);
        jc.clusters = {{0.0, static_cast<int>(n)}};
        return jc;
    }
    jc.clusters = cluster_eigenvalues(omega0, tol);
    const bool all_simple = std::all_of(jc.clusters.begin(), jc.clusters.end(),
                                        [](const EigenCluster& c) { return c.multiplicity == 1; });
    if (all_simple) {
        jc.semisimple = omega0;
        jc.nilpotent = Matrix::Zero(n, n);
        return jc;
    }
    const auto q = detail::squarefree_polynomial(jc.clusters);
    const auto dq = detail::derivative(q);
    Matrix s = omega0;
    constexpr double kEps = std::numeric_limits<double>::epsilon();
    for (int it = 0; it < 64; ++it) {
        const Matrix qs = detail::eval_polynomial(q, s);
        const Matrix dqs = detail::eval_polynomial(dq, s);
        Eigen::PartialPivLU<Matrix> lu(dqs);
        const Matrix step = lu.solve(qs);
        require(step.allFinite(), ErrorCode::ill_conditioned, "Jordan-Chevalley iteration diverged");
        s -= step;
        if (step.norm() <= 8 * kEps * scale) break;
    }
    Matrix nil = omega0 - s;
    if (nil.norm() <= 1e-12 * scale) {
        s = omega0;
        nil.setZero();
    }
    if (s.norm() <= 1e-12 * scale) {
        s.setZero();
        nil = omega0;
    }
    // validation: commuting, nilpotent, semisimple
    int max_mult = 1;
    for (const auto& c : jc.clusters) max_mult = std::max(max_mult, c.multiplicity);
    Matrix pow = Matrix::Identity(n, n);
    for (int i = 0; i < max_mult; ++i) pow = pow * nil;
    const bool commuting = commutator(s, nil).norm() <= 1e-8 * scale * scale;
    const bool nilpotent = pow.norm() <= 1e-8 * std::pow(scale, max_mult);
    bool semisimple = true;
    for (const auto& c : jc.clusters)
        if (eigenvector_count(s, c.center) != c.multiplicity) semisimple = false;
    if (!(commuting && nilpotent && semisimple))
        throw Error(ErrorCode::ill_conditioned, "Jordan-Chevalley decomposition is ill-conditioned");
    jc.semisimple = s;
    jc.nilpotent = nil;
    return jc;
}

// ---------------------------------------------------------------------------
// Unfoldings

/// Omega(mu) = base + sum_i mu_i directions[i].
struct LinearUnfolding {
    Matrix base;
    std::vector<Matrix> directions;
    bool rank_stable = true;

    int codimension() const { return static_cast<int>(directions.size()); }

    Matrix at(const Vector& mu) const {
        require(mu.size() == codimension(), ErrorCode::dimension_mismatch,
                "unfolding parameter count mismatch");
        Matrix out = base;
        for (int i = 0; i < codimension(); ++i) out += mu(i) * directions[static_cast<std::size_t>(i)];
        return out;
    }

    /// Columns vec(A_i).
    Matrix direction_columns() const {
        Matrix out(base.size(), codimension());
        for (int i = 0; i < codimension(); ++i) out.col(i) = vec(directions[static_cast<std::size_t>(i)]);
        return out;
    }
};

/// Linear centralizer unfolding: directions span
/// ker(ad S0) ∩ ker(ad N0^T) ∩ gl-, returned as an orthonormal basis in
/// working coordinates. The basis is not unique.
inline LinearUnfolding lcu(const Matrix& omega0, const StructuredSpaces& spaces, const Tolerances& tol = {}) {
    const auto& rs = spaces.structure();
    require(check_membership(omega0, rs, Parity::minus, tol.membership_tol).member,
            ErrorCode::invalid_argument, "lcu: base matrix is not in gl-");
    const auto jc = jordan_chevalley(omega0, tol);
    const Matrix sw = rs.to_work(jc.semisimple);
    const Matrix nw = rs.to_work(jc.nilpotent);
    const Matrix k1 = spaces.ad_work(sw, Parity::minus);
    const Matrix k2 = spaces.ad_work(nw.transpose(), Parity::minus);
    Matrix stacked(k1.rows() + k2.rows(), k1.cols());
    stacked << k1, k2;

    LinearUnfolding u;
    u.base = omega0;
    const int dim = spaces.dimension(Parity::minus);
    Matrix null;
    if (stacked.norm() == 0.0) {
        null = Matrix::Identity(dim, dim);
    } else {
        Eigen::JacobiSVD<Matrix> svd(stacked);
        const auto decision = decide_rank(svd.singularValues(), tol.rank_tol, tol.indeterminate_band);
        u.rank_stable = decision.stable;
        null = null_space(stacked, tol.rank_tol);
    }
    for (Eigen::Index j = 0; j < null.cols(); ++j)
        u.directions.push_back(rs.from_work(spaces.from_coords_work(null.col(j), Parity::minus)));

    // transversality: im ad+(Omega0) + span(directions) = gl-
    const Matrix ad_plus = adjoint_matrix(omega0, Parity::plus, spaces);
    Matrix joint(dim, ad_plus.cols() + null.cols());
    joint << ad_plus, null;
    const int joint_rank = numerical_rank(joint, tol.rank_tol).rank;
    const int image_rank = numerical_rank(ad_plus, tol.rank_tol).rank;
    if (joint_rank != dim || image_rank + static_cast<int>(null.cols()) != dim)
        throw Error(ErrorCode::splitting_failed,
                    "centralizer directions are not transversal to the orbit of the base matrix");
    return u;
}

enum class ClosedFormKind { p_fold_resonance, nilpotent_zero };

struct ClosedFormUnfolding {
    Matrix R;
    LinearUnfolding unfolding;
};

inline Matrix j2() { return (Matrix(2, 2) << 0, 1, -1, 0).finished(); }
inline Matrix r2() { return (Matrix(2, 2) << 1, 0, 0, -1).finished(); }

/// Explicit linear centralizer unfoldings.
///
/// p_fold_resonance: base has J2 on the block diagonal and block
/// superdiagonal, direction i carries J2 on the (i-1)-th block subdiagonal.
/// nilpotent_zero: base is the 2p x 2p Jordan block with ones above the
/// diagonal, direction j is (N0^T)^(2j-1). `fix_sign` > 0 puts ker N0 in
/// Fix(R), otherwise in Fix(-R).
inline ClosedFormUnfolding lcu_closed_form(ClosedFormKind kind, int p, int fix_sign = +1) {
    require(p >= 1, ErrorCode::invalid_argument, "p must be >= 1");
    const int n = 2 * p;
    ClosedFormUnfolding out;
    Matrix r = Matrix::Zero(n, n);
    for (int b = 0; b < p; ++b) r.block(2 * b, 2 * b, 2, 2) = r2();
    if (kind == ClosedFormKind::p_fold_resonance) {
        out.R = r;
        Matrix base = Matrix::Zero(n, n);
        for (int b = 0; b < p; ++b) {
            base.block(2 * b, 2 * b, 2, 2) = j2();
            if (b + 1 < p) base.block(2 * b, 2 * b + 2, 2, 2) = j2();
        }
        out.unfolding.base = base;
        for (int i = 1; i <= p; ++i) {
            Matrix d = Matrix::Zero(n, n);
            for (int b = i - 1; b < p; ++b) d.block(2 * b, 2 * (b - i + 1), 2, 2) = j2();
            out.unfolding.directions.push_back(d);
        }
    } else {
        out.R = fix_sign > 0 ? r : Matrix(-r);
        Matrix nil = Matrix::Zero(n, n);
        for (int i = 0; i + 1 < n; ++i) nil(i, i + 1) = 1.0;
        out.unfolding.base = nil;
        const Matrix nt = nil.transpose();
        Matrix pow = nt;
        for (int j = 1; j <= p; ++j) {
            out.unfolding.directions.push_back(pow);
            pow = pow * nt * nt;
        }
    }
    return out;
}

/// Projection of gl- onto ker(ad-(Omega0^T)) along im(ad+(Omega0)), in gl- coordinates.
struct SplittingProjector {
    Matrix projector;     // dim x dim
    Matrix image_basis;   // orthonormal, coordinates
    Matrix kernel_basis;  // orthonormal, coordinates
    const StructuredSpaces* spaces = nullptr;

    int rank() const { return static_cast<int>(kernel_basis.cols()); }

    Matrix apply(const Matrix& a) const {
        return spaces->from_coords(projector * spaces->coords(a, Parity::minus), Parity::minus);
    }
};

inline SplittingProjector splitting_projection(const Matrix& omega0, const StructuredSpaces& spaces,
                                               const Tolerances& tol = {}) {
    require(check_membership(omega0, spaces.structure(), Parity::minus, tol.membership_tol).member,
            ErrorCode::invalid_argument, "splitting_projection: matrix is not in gl-");
    const int dim = spaces.dimension(Parity::minus);
    SplittingProjector sp;
    sp.spaces = &spaces;
    const Matrix ad_plus = adjoint_matrix(omega0, Parity::plus, spaces);
    const Matrix ad_minus_t = spaces.ad_work(spaces.structure().to_work(omega0).transpose(), Parity::minus);
    sp.image_basis = range_basis(ad_plus, tol.rank_tol);
    sp.kernel_basis = ad_minus_t.norm() == 0.0 ? Matrix(Matrix::Identity(dim, dim))
                                               : null_space(ad_minus_t, tol.rank_tol);
    Matrix joint(dim, sp.image_basis.cols() + sp.kernel_basis.cols());
    joint << sp.image_basis, sp.kernel_basis;
    if (joint.cols() != dim || numerical_rank(joint, tol.rank_tol).rank != dim)
        throw Error(ErrorCode::splitting_failed, "im ad+(Omega0) and ker ad-(Omega0^T) do not split gl-");
    Matrix select = Matrix::Zero(dim, dim);
    for (Eigen::Index i = sp.image_basis.cols(); i < dim; ++i) select(i, i) = 1.0;
    sp.projector = joint * select * joint.inverse();
    return sp;
}

}  // namespace kamforge
