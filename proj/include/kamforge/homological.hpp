#pragma once

// Truncated-Fourier solver for the homological equation
//   ad N(X)(Psi) = L + N,  N(X) = sigma d_xi + Omega(nu) zeta d_zeta,
// with Psi = U d_xi + (V0 + V1 eta + V2 zeta) d_eta + (W0 + W1 eta + W2 zeta) d_zeta.

#include "kamforge/diophantine.hpp"
#include "kamforge/fourier_field.hpp"
#include "kamforge/nondegen.hpp"
#include "kamforge/revlin.hpp"

#include <Eigen/QR>

#include <sstream>

namespace kamforge {

/// Normal-linear data (sigma, Omega(nu)) plus the unfolding used for Lambda2.
struct NormalLinearData {
    Vector sigma;
    Matrix Omega;
    LinearUnfolding unfolding;
    ReversingStructure symmetry;
};

/// Psi is stored as a FourierField: U in f, (V0, V1, V2) in (g, g_eta, g_zeta),
/// (W0, W1, W2) in (h, h_eta, h_zeta). f_eta and f_zeta stay zero.
struct HomologicalSolution {
    FourierField psi;
    Vector lambda1;
    Vector lambda2;
    double residual = 0.0;
    /// min over checked k of (smallest divisor) / (gamma |k|^-tau)
    double min_divisor_ratio = std::numeric_limits<double>::infinity();
    Mode min_divisor_mode;
    std::vector<std::string> notes;
};

struct HomologicalOptions {
    double safety = 0.5;  // refuse below safety * gamma |k|^-tau
    double rho = 0.0;     // weight e^{rho |k|} in the residual norm
    Tolerances tol;
};

/// Norm of a field restricted to the components entering the homological system.
inline double system_norm(const FourierField& fld, double rho = 0.0) {
    double s = 0;
    for (const auto& [k, j] : fld.modes()) {
        double m = 0;
        j.visit([&m](const char* name, const auto& a) {
            const std::string nm(name);
            if (nm == "f_eta" || nm == "f_zeta") return;
            if (a.size()) m = std::max(m, a.cwiseAbs().maxCoeff());
        });
        s = std::max(s, std::exp(rho * l1(k)) * m);
    }
    return s;
}

/// Left-hand side ad N(X)(Psi) as a field, with N = Lambda1 d_xi + Omega(Lambda2) zeta d_zeta subtracted.
inline FourierField homological_lhs(const NormalLinearData& nx, const HomologicalSolution& sol) {
    const FourierField& psi = sol.psi;
    FourierField out(psi.n(), psi.m(), psi.p(), psi.K());
    out.set_cover_order(psi.cover_order());
    const CMatrix om = nx.Omega.cast<Complex>();
    const Complex i(0, 1);
    for (const auto& [k, j] : psi.modes()) {
        double s = 0;
        for (int a = 0; a < psi.n(); ++a) {
            const double ka = psi.cover_order() > 1 && a == 0 ? static_cast<double>(k[0]) / psi.cover_order()
                                                               : static_cast<double>(k[static_cast<std::size_t>(a)]);
            s += ka * nx.sigma(a);
        }
        const Complex is = i * s;
        Jets& o = out.at(k);
        o.f = is * j.f;
        o.g = is * j.g;
        o.g_eta = is * j.g_eta;
        o.g_zeta = j.g_zeta * (is * CMatrix::Identity(om.rows(), om.cols()) + om);
        o.h = is * j.h - om * j.h;
        o.h_eta = is * j.h_eta - om * j.h_eta;
        o.h_zeta = is * j.h_zeta - (om * j.h_zeta - j.h_zeta * om);
    }
    Jets& o0 = out.at(out.zero_mode());
    if (sol.lambda1.size()) o0.f -= sol.lambda1.cast<Complex>();
    if (sol.lambda2.size()) {
        Matrix a = Matrix::Zero(nx.Omega.rows(), nx.Omega.cols());
        for (Eigen::Index q = 0; q < sol.lambda2.size(); ++q)
            a += sol.lambda2(q) * nx.unfolding.directions[static_cast<std::size_t>(q)];
        o0.h_zeta -= a.cast<Complex>();
    }
    return out;
}

/// sup-norm defect of the homological system (weighted by e^{rho |k|}).
inline double residual(const NormalLinearData& nx, const HomologicalSolution& sol, const FourierField& rhs,
                       double rho = 0.0) {
    FourierField d = homological_lhs(nx, sol);
    d -= rhs;
    return system_norm(d, rho);
}

namespace detail {

inline double k_dot(const Mode& k, const Vector& sigma, int cover_order) {
    double s = 0;
    for (std::size_t a = 0; a < k.size(); ++a) {
        const double ka = (cover_order > 1 && a == 0) ? static_cast<double>(k[a]) / cover_order : k[a];
        s += ka * sigma(static_cast<Eigen::Index>(a));
    }
    return s;
}

/// Smallest of |is|, |is -+ lambda_j|, |is - (lambda_j - lambda_l)|.
inline double smallest_divisor(double s, const std::vector<Complex>& ev) {
    const Complex is(0, s);
    double d = std::abs(s);
    for (auto a : ev) {
        d = std::min(d, std::abs(is - a));
        d = std::min(d, std::abs(is + a));
        for (auto b : ev) d = std::min(d, std::abs(is - (a - b)));
    }
    return d;
}

/// Least-squares solve of `a x = b` on a subspace; returns (x, residual).
inline std::pair<Vector, double> restricted_solve(const Matrix& a, const Vector& b) {
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(a);
    cod.setThreshold(1e-12);
    const Vector x = cod.solve(b);
    return {x, (a * x - b).norm()};
}

}  // namespace detail

/// Solves the homological equation for `rhs` (the linearized defect L).
///
/// Throws small_divisor when a divisor at 0 < |k| <= K falls below
/// safety * gamma |k|^-tau, and unsolvable when a k = 0 component has no
/// solution in the symmetric subspace.
inline HomologicalSolution solve_homological(const NormalLinearData& nx, const FourierField& rhs,
                                             const DiophantineSpec& spec, const HomologicalOptions& opt = {}) {
    const int n = rhs.n();
    const int d = rhs.dim_z();
    require(nx.sigma.size() == n, ErrorCode::dimension_mismatch, "sigma does not match n");
    require(nx.Omega.rows() == d && nx.symmetry.dim() == d, ErrorCode::dimension_mismatch,
            "Omega does not match dim_z");
    validate(spec, n);

    const auto ev = eigenvalues(nx.Omega);
    HomologicalSolution sol;
    sol.psi = FourierField(n, rhs.m(), rhs.p(), rhs.K());
    sol.psi.set_cover_order(rhs.cover_order());
    sol.lambda1 = Vector::Zero(n);
    sol.lambda2 = Vector::Zero(nx.unfolding.codimension());

    // small-divisor guard over the whole truncation
    for_each_half_lattice(n, spec.K, [&](const IntVector& kv) {
        Mode k(kv.data(), kv.data() + kv.size());
        const double s = detail::k_dot(k, nx.sigma, rhs.cover_order());
        const double div = detail::smallest_divisor(s, ev);
        const double bound = spec.gamma * std::pow(knorm(kv, spec.norm), -spec.tau);
        const double ratio = div / bound;
        if (ratio < sol.min_divisor_ratio) {
            sol.min_divisor_ratio = ratio;
            sol.min_divisor_mode = k;
        }
        if (div < opt.safety * bound) {
            std::ostringstream os;
            os << "small divisor " << div << " at k=(";
            for (std::size_t a = 0; a < k.size(); ++a) os << (a ? "," : "") << k[a];
            os << ") below " << opt.safety << " * gamma |k|^-tau = " << opt.safety * bound;
            throw Error(ErrorCode::small_divisor, os.str());
        }
    });

    const CMatrix om = nx.Omega.cast<Complex>();
    const CMatrix id = CMatrix::Identity(d, d);
    const Complex i(0, 1);
    // vec(A W - W B) = (I (x) A - B^T (x) I) vec(W)
    const CMatrix ad_om = kron(Matrix::Identity(d, d), nx.Omega).cast<Complex>() -
                          kron(nx.Omega.transpose(), Matrix::Identity(d, d)).cast<Complex>();
    const CMatrix id2 = CMatrix::Identity(d * d, d * d);

    for (const auto& [k, r] : rhs.modes()) {
        if (is_zero(k)) continue;
        require(l1(k) <= spec.K * rhs.cover_order(), ErrorCode::invalid_argument,
                "rhs has modes beyond the Diophantine truncation");
        const double s = detail::k_dot(k, nx.sigma, rhs.cover_order());
        const Complex is = i * s;
        Jets& u = sol.psi.at(k);
        u.f = r.f / is;
        u.g = r.g / is;
        u.g_eta = r.g_eta / is;
        const Eigen::PartialPivLU<CMatrix> right((is * id + om).transpose());
        u.g_zeta = right.solve(r.g_zeta.transpose()).transpose();
        const Eigen::PartialPivLU<CMatrix> left(is * id - om);
        u.h = left.solve(r.h);
        u.h_eta = left.solve(r.h_eta);
        const Eigen::PartialPivLU<CMatrix> adop(is * id2 - ad_om);
        const CVector w2 = adop.solve(Eigen::Map<const CVector>(r.h_zeta.data(), d * d));
        u.h_zeta = Eigen::Map<const CMatrix>(w2.data(), d, d);
    }

    // k = 0
    const Jets r0 = rhs.get(rhs.zero_mode());
    sol.lambda1 = -r0.f.real();
    Jets& u0 = sol.psi.at(sol.psi.zero_mode());
    const double scale = std::max(1.0, system_norm(rhs));
    const double solve_tol = 1e-10 * scale;
    if (r0.g.size() && r0.g.norm() > solve_tol)
        sol.notes.push_back("constant g component is not removable (zero divisor)");
    if (r0.g_eta.size() && r0.g_eta.norm() > solve_tol)
        sol.notes.push_back("constant g_eta component is not removable (zero divisor)");

    const auto& rs = nx.symmetry;
    if (d > 0) {
        // W0, W1 in B+, solvable under BHT(i)
        const Matrix fix_plus = range_basis(rs.b_plus());
        const Matrix a_w = -nx.Omega * fix_plus;
        const bool need_w = r0.h.norm() > solve_tol || r0.h_eta.norm() > solve_tol;
        if (need_w) {
            const auto bht = bht_i(nx.Omega, rs, opt.tol);
            if (bht.verdict != Verdict::holds) {
                std::ostringstream os;
                os << "BHT(i) fails: Omega vanishes on Fix(R) along witness " << bht.witness->transpose();
                throw Error(ErrorCode::unsolvable, os.str());
            }
        }
        {
            const auto [c, res] = detail::restricted_solve(a_w, r0.h.real());
            require(res <= solve_tol, ErrorCode::unsolvable, "W0 at k = 0: rhs not in Omega(B+)");
            u0.h = (fix_plus * c).cast<Complex>();
        }
        for (Eigen::Index col = 0; col < r0.h_eta.cols(); ++col) {
            const auto [c, res] = detail::restricted_solve(a_w, r0.h_eta.col(col).real());
            require(res <= solve_tol, ErrorCode::unsolvable, "W1 at k = 0: rhs not in Omega(B+)");
            u0.h_eta.col(col) = (fix_plus * c).cast<Complex>();
        }
        // V2 rows v with v R = v:  v Omega = row of g_zeta
        const Matrix fix_rows = range_basis(null_space(rs.R().transpose() - Matrix::Identity(d, d)));
        const Matrix a_v = (fix_rows.transpose() * nx.Omega).transpose();
        for (Eigen::Index row = 0; row < r0.g_zeta.rows(); ++row) {
            const Vector target = r0.g_zeta.row(row).real().transpose();
            const auto [c, res] = detail::restricted_solve(a_v, target);
            if (res > solve_tol) {
                const Matrix ker = null_space(a_v, 1e-10);
                std::ostringstream os;
                os << "V2 at k = 0 has no solution: Omega^T is not injective on Fix(R^T)";
                if (ker.cols()) os << ", witness row " << (fix_rows * ker.col(0)).transpose();
                throw Error(ErrorCode::unsolvable, os.str());
            }
            u0.g_zeta.row(row) = (fix_rows * c).transpose().cast<Complex>();
        }
        // W2 in gl+ and Lambda2 from -[Omega, W2] - A(Lambda2) = h_zeta_0
        StructuredSpaces sp(rs);
        const Matrix ad = adjoint_matrix(nx.Omega, Parity::plus, sp);
        const int c = nx.unfolding.codimension();
        Matrix sys(sp.dimension(Parity::minus), ad.cols() + c);
        sys.leftCols(ad.cols()) = -ad;
        for (int q = 0; q < c; ++q)
            sys.col(ad.cols() + q) = -sp.coords(nx.unfolding.directions[static_cast<std::size_t>(q)], Parity::minus);
        const Matrix hz = r0.h_zeta.real();
        const Vector b = sp.coords(hz, Parity::minus);
        const double off = (hz - sp.project(hz, Parity::minus)).norm();
        require(off <= solve_tol, ErrorCode::invalid_argument, "constant h_zeta is not in gl- (rhs not reversible)");
        const auto [x, res] = detail::restricted_solve(sys, b);
        require(res <= solve_tol, ErrorCode::unsolvable,
                "W2/Lambda2 at k = 0: unfolding directions are not transverse to the orbit");
        u0.h_zeta = sp.from_coords(x.head(ad.cols()), Parity::plus).cast<Complex>();
        sol.lambda2 = x.tail(c);
    }
    sol.psi.prune(0.0);
    sol.residual = residual(nx, sol, rhs, opt.rho);
    return sol;
}

/// Lambda2 from the splitting projection: the unique Lambda2 with
/// pi(A(Lambda2)) = -pi(h_zeta_0).
inline Vector lambda2_by_splitting(const Matrix& Omega0, const LinearUnfolding& u, const StructuredSpaces& sp,
                                   const Matrix& h_zeta0) {
    const auto pi = splitting_projection(Omega0, sp);
    const int c = u.codimension();
    Matrix cols(sp.dimension(Parity::minus), c);
    for (int q = 0; q < c; ++q)
        cols.col(q) = pi.projector * sp.coords(u.directions[static_cast<std::size_t>(q)], Parity::minus);
    const Vector target = -(pi.projector * sp.coords(h_zeta0, Parity::minus));
    return cols.completeOrthogonalDecomposition().solve(target);
}

}  // namespace kamforge
