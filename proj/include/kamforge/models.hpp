#pragma once

// Integrable reversible fields with polynomial jets, scaling and
// localisation, one KAM step with an exact affine conjugation, and the
// response-solution solver for quasi-periodically forced oscillators.

#include "kamforge/diophantine.hpp"
#include "kamforge/homological.hpp"

#include <Eigen/LU>

#include <array>
#include <numbers>
#include <numeric>
#include <sstream>

namespace kamforge {

// ---------------------------------------------------------------------------
// Polynomials R^vars -> R^outputs

using Exponent = std::vector<int>;

class Polynomial {
public:
    Polynomial() = default;
    Polynomial(int vars, int outputs) : vars_(vars), outputs_(outputs) {}

    int vars() const { return vars_; }
    int outputs() const { return outputs_; }
    const std::map<Exponent, Vector>& terms() const { return terms_; }

    void add(const Exponent& e, const Vector& c) {
        require(static_cast<int>(e.size()) == vars_, ErrorCode::dimension_mismatch, "monomial has wrong arity");
        require(c.size() == outputs_, ErrorCode::dimension_mismatch, "coefficient has wrong length");
        require(std::all_of(e.begin(), e.end(), [](int v) { return v >= 0; }), ErrorCode::invalid_argument,
                "negative exponent");
        auto it = terms_.find(e);
        if (it == terms_.end()) terms_.emplace(e, c);
        else it->second += c;
    }

    void add(const Exponent& e, int output, double c) {
        Vector v = Vector::Zero(outputs_);
        v(output) = c;
        add(e, v);
    }

    int degree() const {
        int d = 0;
        for (const auto& [e, c] : terms_) d = std::max(d, total(e));
        return d;
    }

    static int total(const Exponent& e) { return std::accumulate(e.begin(), e.end(), 0); }

    Vector eval(const Vector& w) const {
        Vector out = Vector::Zero(outputs_);
        for (const auto& [e, c] : terms_) out += monomial(e, w) * c;
        return out;
    }

    /// outputs x vars Jacobian at w.
    Matrix gradient(const Vector& w) const {
        Matrix out = Matrix::Zero(outputs_, vars_);
        for (const auto& [e, c] : terms_)
            for (int i = 0; i < vars_; ++i) {
                if (e[static_cast<std::size_t>(i)] == 0) continue;
                Exponent d = e;
                d[static_cast<std::size_t>(i)] -= 1;
                out.col(i) += e[static_cast<std::size_t>(i)] * monomial(d, w) * c;
            }
        return out;
    }

    Polynomial& operator+=(const Polynomial& o) {
        require(o.vars_ == vars_ && o.outputs_ == outputs_, ErrorCode::dimension_mismatch, "polynomial shapes");
        for (const auto& [e, c] : o.terms_) add(e, c);
        return *this;
    }

    void prune(double tol = 0.0) {
        for (auto it = terms_.begin(); it != terms_.end();) {
            if (it->second.cwiseAbs().maxCoeff() <= tol) it = terms_.erase(it);
            else ++it;
        }
    }

    static double monomial(const Exponent& e, const Vector& w) {
        double v = 1.0;
        for (std::size_t i = 0; i < e.size(); ++i)
            for (int r = 0; r < e[i]; ++r) v *= w(static_cast<Eigen::Index>(i));
        return v;
    }

private:
    int vars_ = 0;
    int outputs_ = 0;
    std::map<Exponent, Vector> terms_;
};

// ---------------------------------------------------------------------------
// Integrable fields X = f(y,z) d_x + g(y,z) d_y + h(y,z) d_z

struct IntegrableField {
    int n = 1, m = 0, p = 0;
    Polynomial f, g, h;  // in w = (y, z)
    ReversingStructure symmetry;
    Vector nu;           // accumulated localisation y = nu + y_loc

    int dim_z() const { return 2 * p; }
    int vars() const { return m + 2 * p; }

    static IntegrableField empty(int n, int m, const ReversingStructure& rs) {
        IntegrableField x;
        x.n = n;
        x.m = m;
        x.p = rs.p();
        x.f = Polynomial(m + rs.dim(), n);
        x.g = Polynomial(m + rs.dim(), m);
        x.h = Polynomial(m + rs.dim(), rs.dim());
        x.symmetry = rs;
        x.nu = Vector::Zero(m);
        return x;
    }

    Vector w(const Vector& y, const Vector& z) const {
        Vector out(vars());
        out << y, z;
        return out;
    }

    FieldValue evaluate(const Vector& y, const Vector& z) const {
        const Vector ww = w(y, z);
        return {f.eval(ww), g.eval(ww), h.eval(ww)};
    }
};

inline Exponent exponent(int vars) { return Exponent(static_cast<std::size_t>(vars), 0); }

/// omega d_x + Omega z d_z as an integrable field.
inline IntegrableField normal_linear(const Vector& omega, int m, const Matrix& Omega, const ReversingStructure& rs) {
    IntegrableField x = IntegrableField::empty(static_cast<int>(omega.size()), m, rs);
    x.f.add(exponent(x.vars()), omega);
    for (int j = 0; j < rs.dim(); ++j) {
        Exponent e = exponent(x.vars());
        e[static_cast<std::size_t>(m + j)] = 1;
        x.h.add(e, Omega.col(j));
    }
    return x;
}

struct NormalLinearPart {
    Vector omega;
    Matrix Omega;
};

/// Scaling weight |a| + 2|b| of y^a z^b.
inline int scaling_weight(const Exponent& e, int m) {
    int w = 0;
    for (std::size_t i = 0; i < e.size(); ++i) w += (static_cast<int>(i) < m ? 1 : 2) * e[i];
    return w;
}

/// Push-forward under D_eps (x, y, z) -> (x, y / eps, z / eps^2):
/// f(eps y, eps^2 z), g(eps y, eps^2 z) / eps, h(eps y, eps^2 z) / eps^2.
inline IntegrableField scaled(const IntegrableField& x, double eps) {
    require(eps > 0, ErrorCode::invalid_argument, "scaling needs eps > 0");
    IntegrableField out = x;
    auto rescale = [&](const Polynomial& src, int shift) {
        Polynomial dst(src.vars(), src.outputs());
        for (const auto& [e, c] : src.terms())
            dst.add(e, std::pow(eps, scaling_weight(e, x.m) - shift) * c);
        return dst;
    };
    out.f = rescale(x.f, 0);
    out.g = rescale(x.g, 1);
    out.h = rescale(x.h, 2);
    return out;
}

/// Limit eps -> 0 of the scaled field, term by term. Terms of weight below
/// the component's shift would diverge and are rejected.
inline NormalLinearPart scaling_limit(const IntegrableField& x) {
    NormalLinearPart out;
    out.omega = Vector::Zero(x.n);
    out.Omega = Matrix::Zero(x.dim_z(), x.dim_z());
    auto check = [&](const Polynomial& poly, int shift, const char* name) {
        for (const auto& [e, c] : poly.terms())
            if (scaling_weight(e, x.m) < shift && c.cwiseAbs().maxCoeff() > 0)
                throw Error(ErrorCode::invalid_argument,
                            std::string("scaling limit diverges: low-order term in ") + name);
    };
    check(x.f, 0, "f");
    check(x.g, 1, "g");
    check(x.h, 2, "h");
    for (const auto& [e, c] : x.f.terms())
        if (scaling_weight(e, x.m) == 0) out.omega += c;
    for (const auto& [e, c] : x.h.terms()) {
        if (scaling_weight(e, x.m) != 2) continue;
        for (int j = 0; j < x.dim_z(); ++j)
            if (e[static_cast<std::size_t>(x.m + j)] == 1) out.Omega.col(j) += c;
        // y_i y_j terms have weight 2 too but violate h(y, 0) = 0
        for (int i = 0; i < x.m; ++i)
            require(e[static_cast<std::size_t>(i)] == 0 || c.cwiseAbs().maxCoeff() == 0, ErrorCode::invalid_argument,
                    "h(y, 0) != 0: the torus family is not invariant");
    }
    return out;
}

/// Largest coefficient of (D_eps)_* X - N(X); O(eps) for a valid field.
inline double scaling_distance(const IntegrableField& x, double eps) {
    const IntegrableField s = scaled(x, eps);
    const auto lim = scaling_limit(x);
    double d = 0;
    auto acc = [&](const Polynomial& poly, int shift) {
        for (const auto& [e, c] : poly.terms())
            if (scaling_weight(e, x.m) > shift) d = std::max(d, c.cwiseAbs().maxCoeff());
    };
    acc(s.f, 0);
    acc(s.g, 1);
    acc(s.h, 2);
    (void)lim;
    return d;
}

/// omega = f(0,0), Omega = D_z h(0,0), cross-checked against the scaling limit.
inline NormalLinearPart dominant_part(const IntegrableField& x) {
    const Vector w0 = Vector::Zero(x.vars());
    NormalLinearPart out;
    out.omega = x.f.eval(w0);
    out.Omega = x.h.gradient(w0).rightCols(x.dim_z());
    const auto lim = scaling_limit(x);
    const double scale = 1.0 + out.omega.norm() + out.Omega.norm();
    require((lim.omega - out.omega).norm() <= 1e-12 * scale && (lim.Omega - out.Omega).norm() <= 1e-12 * scale,
            ErrorCode::ill_conditioned, "dominant part disagrees with the scaling limit");
    return out;
}

/// Re-expansion y = nu + y_loc.
inline IntegrableField localize(const IntegrableField& x, const Vector& nu) {
    require(nu.size() == x.m, ErrorCode::dimension_mismatch, "localisation point must lie in R^m");
    IntegrableField out = x;
    auto shift = [&](const Polynomial& src) {
        Polynomial dst(src.vars(), src.outputs());
        for (const auto& [e, c] : src.terms()) {
            // expand prod_i (nu_i + y_i)^{a_i}
            std::vector<std::pair<Exponent, double>> partial{{e, 1.0}};
            for (int i = 0; i < x.m; ++i) {
                std::vector<std::pair<Exponent, double>> next;
                for (const auto& [ee, coef] : partial) {
                    const int a = e[static_cast<std::size_t>(i)];
                    double binom = 1.0;
                    for (int b = 0; b <= a; ++b) {
                        if (b > 0) binom = binom * (a - b + 1) / b;
                        Exponent t = ee;
                        t[static_cast<std::size_t>(i)] = a - b;  // keep y_i^{a-b}
                        next.emplace_back(t, coef * binom * std::pow(nu(i), b));
                    }
                }
                partial = std::move(next);
            }
            for (const auto& [ee, coef] : partial)
                if (coef != 0.0) dst.add(ee, coef * c);
        }
        dst.prune(0.0);
        return dst;
    };
    out.f = shift(x.f);
    out.g = shift(x.g);
    out.h = shift(x.h);
    out.nu = x.nu + nu;
    return out;
}

struct IntegrableCheck {
    double reversibility_defect = 0.0;
    double torus_family_defect = 0.0;  // sup of h(y, 0) coefficients
    bool ok(double tol = 1e-12) const { return reversibility_defect <= tol && torus_family_defect <= tol; }
};

/// f(y,Rz) = f, g(y,Rz) = -g, h(y,Rz) = -R h at deterministic sample points,
/// and h(y, 0) = 0 on the coefficients.
inline IntegrableCheck check_integrable(const IntegrableField& x, int samples = 64, std::uint64_t seed = 1) {
    IntegrableCheck out;
    Lcg64 rng(seed);
    const Matrix& R = x.symmetry.R();
    for (int s = 0; s < samples; ++s) {
        Vector y(x.m), z(x.dim_z());
        for (int i = 0; i < x.m; ++i) y(i) = rng.uniform(-1, 1);
        for (int i = 0; i < x.dim_z(); ++i) z(i) = rng.uniform(-1, 1);
        const FieldValue a = x.evaluate(y, z);
        const FieldValue b = x.evaluate(y, R * z);
        auto sup = [](const Vector& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; };
        out.reversibility_defect =
            std::max({out.reversibility_defect, sup(b.dx - a.dx), sup(b.dy + a.dy), sup(b.dz + R * a.dz)});
    }
    for (const auto& [e, c] : x.h.terms()) {
        bool z_free = true;
        for (int j = 0; j < x.dim_z(); ++j) z_free = z_free && e[static_cast<std::size_t>(x.m + j)] == 0;
        if (z_free) out.torus_family_defect = std::max(out.torus_family_defect, c.cwiseAbs().maxCoeff());
    }
    return out;
}

// ---------------------------------------------------------------------------
// One KAM step

/// Z = X + P with P a Fourier field of affine jets; the unfolding supplies the
/// Floquet directions used for the parameter shift Lambda2.
struct PerturbedField {
    IntegrableField base;
    LinearUnfolding unfolding;
    FourierField perturbation;
};

struct KamOptions {
    int grid = 64;      // points per angle
    int K_out = 0;      // modes kept after the step; 0 = min(10 K_P, grid/2 - 1)
    double rho = 0.0;   // weight in the remainder norm
    HomologicalOptions homological;
};

struct KamStepReport {
    Vector lambda1;
    Vector lambda2;
    double before = 0.0;
    double after = 0.0;
    double homological_residual = 0.0;
    double min_divisor_ratio = 0.0;
    int modes_kept = 0;
};

/// Norm of the jets in the defect classes O(1) d_x + O(1, z) d_y + O(1, z) d_z.
inline double remainder_norm(const FourierField& d, double rho = 0.0) {
    double s = 0;
    auto sup = [](const auto& a) { return a.size() ? a.cwiseAbs().maxCoeff() : 0.0; };
    for (const auto& [k, j] : d.modes()) {
        const double m = std::max({sup(j.f), sup(j.g), sup(j.g_zeta), sup(j.h), sup(j.h_zeta)});
        s = std::max(s, std::exp(rho * l1(k)) * m);
    }
    return s;
}

namespace detail {

/// Real jets of a field and their x-derivatives at angle x (cover order 1).
inline std::pair<Jets, std::vector<Jets>> jets_with_gradient(const FourierField& fld, const Vector& x) {
    Jets v = fld.zero_jets();
    std::vector<Jets> d(static_cast<std::size_t>(fld.n()), fld.zero_jets());
    const Complex i(0, 1);
    for (const auto& [k, j] : fld.modes()) {
        Jets t = j;
        t *= fld.phase(k, x);
        v += t;
        for (int a = 0; a < fld.n(); ++a) {
            if (k[static_cast<std::size_t>(a)] == 0) continue;
            Jets u = t;
            u *= i * static_cast<double>(k[static_cast<std::size_t>(a)]);
            d[static_cast<std::size_t>(a)] += u;
        }
    }
    auto real = [](Jets& jj) { jj.apply([](auto& a) { a = a.real().template cast<Complex>().eval(); }); };
    real(v);
    for (auto& jj : d) real(jj);
    return {v, d};
}

inline std::vector<Mode> modes_within(int n, int K) {
    std::vector<Mode> out;
    Mode k(static_cast<std::size_t>(n), -K);
    while (true) {
        if (l1(k) <= K) out.push_back(k);
        std::size_t i = 0;
        while (i < k.size() && k[i] == K) k[i++] = -K;
        if (i == k.size()) break;
        ++k[i];
    }
    return out;
}

}  // namespace detail

/// Jets at y = z = 0 of (Phi^{-1})_* Z', Phi = Id + Psi (affine in y, z), as a
/// Fourier field. Z' = X + lambda1 d_x + A z d_z + P.
inline FourierField conjugated_jets(const PerturbedField& zf, const FourierField& psi, const Vector& lambda1,
                                    const Matrix& A, const KamOptions& opt, int K_out) {
    const IntegrableField& X = zf.base;
    const FourierField& P = zf.perturbation;
    const int n = X.n, m = X.m, d = X.dim_z(), q = X.vars();
    const int N = n + m + d;
    const int G = opt.grid;
    require(G >= 2 * K_out + 1, ErrorCode::invalid_argument, "grid too coarse for the kept modes");
    const auto modes = detail::modes_within(n, K_out);
    const int L = N * (1 + q);
    std::vector<CVector> acc(modes.size(), CVector::Zero(L));

    long total = 1;
    for (int a = 0; a < n; ++a) total *= G;
    const double two_pi = 2.0 * std::numbers::pi;
    Vector x(n);
    Vector packed(L);
    for (long idx = 0; idx < total; ++idx) {
        long r = idx;
        for (int a = 0; a < n; ++a) {
            x(a) = two_pi * static_cast<double>(r % G) / G;
            r /= G;
        }
        const auto [ps, dps] = detail::jets_with_gradient(psi, x);
        const Vector U = ps.f.real();
        const Vector V0 = ps.g.real(), W0 = ps.h.real();
        const Matrix V1 = ps.g_eta.real(), V2 = ps.g_zeta.real();
        const Matrix W1 = ps.h_eta.real(), W2 = ps.h_zeta.real();

        // image point Phi(x, w) as first-order jet in w = (y, z)
        const Vector xp = x + U;
        Vector w0(q);
        w0 << V0, W0;
        Matrix Jw(q, q);
        Jw.topLeftCorner(m, m) = Matrix::Identity(m, m) + V1;
        Jw.topRightCorner(m, d) = V2;
        Jw.bottomLeftCorner(d, m) = W1;
        Jw.bottomRightCorner(d, d) = Matrix::Identity(d, d) + W2;

        // Z' at the image
        Vector z0(N);
        Matrix zJ(N, q);
        z0.segment(0, n) = X.f.eval(w0) + lambda1;
        z0.segment(n, m) = X.g.eval(w0);
        z0.segment(n + m, d) = X.h.eval(w0) + A * W0;
        zJ.middleRows(0, n) = X.f.gradient(w0) * Jw;
        zJ.middleRows(n, m) = X.g.gradient(w0) * Jw;
        zJ.middleRows(n + m, d) = X.h.gradient(w0) * Jw + A * Jw.bottomRows(d);
        const Jets pj = P.jets_at(xp);
        auto affine = [&](const CVector& c, const CMatrix& ce, const CMatrix& cz, int row, int rows) {
            Matrix lin(rows, q);
            lin << ce.real(), cz.real();
            z0.segment(row, rows) += c.real() + lin * w0;
            zJ.middleRows(row, rows) += lin * Jw;
        };
        affine(pj.f, pj.f_eta, pj.f_zeta, 0, n);
        affine(pj.g, pj.g_eta, pj.g_zeta, n, m);
        affine(pj.h, pj.h_eta, pj.h_zeta, n + m, d);

        // D Phi = M0 + sum_i M_i w_i; only the x-columns depend on w
        Matrix M0 = Matrix::Identity(N, N);
        for (int a = 0; a < n; ++a) {
            const auto& da = dps[static_cast<std::size_t>(a)];
            M0.block(0, a, n, 1) += da.f.real();
            M0.block(n, a, m, 1) = da.g.real();
            M0.block(n + m, a, d, 1) = da.h.real();
        }
        M0.block(n, n, m, m) += V1;
        M0.block(n, n + m, m, d) = V2;
        M0.block(n + m, n, d, m) = W1;
        M0.block(n + m, n + m, d, d) += W2;
        const Eigen::PartialPivLU<Matrix> lu(M0);
        const Vector y0 = lu.solve(z0);
        Matrix yJ(N, q);
        for (int i = 0; i < q; ++i) {
            Vector mi = Vector::Zero(N);
            for (int a = 0; a < n; ++a) {
                const auto& da = dps[static_cast<std::size_t>(a)];
                const double xa = y0(a);
                if (i < m) {
                    mi.segment(n, m) += xa * da.g_eta.real().col(i);
                    mi.segment(n + m, d) += xa * da.h_eta.real().col(i);
                } else {
                    mi.segment(n, m) += xa * da.g_zeta.real().col(i - m);
                    mi.segment(n + m, d) += xa * da.h_zeta.real().col(i - m);
                }
            }
            yJ.col(i) = lu.solve(zJ.col(i) - mi);
        }
        packed.head(N) = y0;
        packed.tail(N * q) = Eigen::Map<const Vector>(yJ.data(), N * q);
        for (std::size_t s = 0; s < modes.size(); ++s) {
            double ph = 0;
            for (int a = 0; a < n; ++a) ph -= modes[s][static_cast<std::size_t>(a)] * x(a);
            acc[s] += std::polar(1.0, ph) * packed.cast<Complex>();
        }
    }

    FourierField out(n, m, X.p, K_out);
    for (std::size_t s = 0; s < modes.size(); ++s) {
        const CVector c = acc[s] / static_cast<double>(total);
        const CMatrix cj = Eigen::Map<const CMatrix>(c.data() + N, N, q);
        Jets& j = out.at(modes[s]);
        j.f = c.segment(0, n);
        j.g = c.segment(n, m);
        j.h = c.segment(n + m, d);
        j.f_eta = cj.block(0, 0, n, m);
        j.f_zeta = cj.block(0, m, n, d);
        j.g_eta = cj.block(n, 0, m, m);
        j.g_zeta = cj.block(n, m, m, d);
        j.h_eta = cj.block(n + m, 0, d, m);
        j.h_zeta = cj.block(n + m, m, d, d);
    }
    return out;
}

/// 1-jets at the origin of an integrable field as the k = 0 mode of a Fourier field.
inline FourierField integrable_jets(const IntegrableField& x, int K = 0) {
    FourierField out(x.n, x.m, x.p, K);
    const Vector w0 = Vector::Zero(x.vars());
    Jets& j = out.at(out.zero_mode());
    const Matrix gf = x.f.gradient(w0), gg = x.g.gradient(w0), gh = x.h.gradient(w0);
    j.f = x.f.eval(w0).cast<Complex>();
    j.g = x.g.eval(w0).cast<Complex>();
    j.h = x.h.eval(w0).cast<Complex>();
    j.f_eta = gf.leftCols(x.m).cast<Complex>();
    j.f_zeta = gf.rightCols(x.dim_z()).cast<Complex>();
    j.g_eta = gg.leftCols(x.m).cast<Complex>();
    j.g_zeta = gg.rightCols(x.dim_z()).cast<Complex>();
    j.h_eta = gh.leftCols(x.m).cast<Complex>();
    j.h_zeta = gh.rightCols(x.dim_z()).cast<Complex>();
    return out;
}

/// Solves the homological equation for the perturbation, conjugates by
/// Phi = Id + Psi at the shifted parameter, and returns the new perturbation
/// (1-jets in (y, z) of the conjugated field minus X).
inline std::pair<PerturbedField, KamStepReport> kam_step(const PerturbedField& zf, const DiophantineSpec& spec,
                                                         const KamOptions& opt = {}) {
    const IntegrableField& X = zf.base;
    const FourierField& P = zf.perturbation;
    require(P.n() == X.n && P.m() == X.m && P.p() == X.p, ErrorCode::dimension_mismatch,
            "perturbation does not match the integrable field");
    require(P.cover_order() == 1, ErrorCode::invalid_argument, "kam_step works on base fields (cover order 1)");
    const auto np = dominant_part(X);
    const NormalLinearData nx{np.omega, np.Omega, zf.unfolding, X.symmetry};
    const auto sol = solve_homological(nx, P, spec, opt.homological);

    Matrix A = Matrix::Zero(X.dim_z(), X.dim_z());
    for (Eigen::Index i = 0; i < sol.lambda2.size(); ++i)
        A += sol.lambda2(i) * zf.unfolding.directions[static_cast<std::size_t>(i)];

    int kp = 1;
    for (const auto& [k, j] : P.modes()) kp = std::max(kp, l1(k));
    const int K_out = opt.K_out > 0 ? opt.K_out : std::min(10 * kp, opt.grid / 2 - 1);
    FourierField y = conjugated_jets(zf, sol.psi, sol.lambda1, A, opt, K_out);
    y -= integrable_jets(X, K_out);
    y.prune(0.0);

    KamStepReport rep;
    rep.lambda1 = sol.lambda1;
    rep.lambda2 = sol.lambda2;
    rep.before = remainder_norm(P, opt.rho);
    rep.after = remainder_norm(y, opt.rho);
    rep.homological_residual = sol.residual;
    rep.min_divisor_ratio = sol.min_divisor_ratio;
    rep.modes_kept = static_cast<int>(y.modes().size());
    PerturbedField next{X, zf.unfolding, std::move(y)};
    return {std::move(next), rep};
}

/// Least-squares slope of log(after) against log(eps).
inline double loglog_slope(const std::vector<double>& eps, const std::vector<double>& vals) {
    require(eps.size() == vals.size() && eps.size() >= 2, ErrorCode::invalid_argument, "slope needs >= 2 points");
    Matrix a(static_cast<Eigen::Index>(eps.size()), 2);
    Vector b(static_cast<Eigen::Index>(eps.size()));
    for (std::size_t i = 0; i < eps.size(); ++i) {
        require(eps[i] > 0 && vals[i] > 0, ErrorCode::invalid_argument, "slope needs positive data");
        a(static_cast<Eigen::Index>(i), 0) = std::log(eps[i]);
        a(static_cast<Eigen::Index>(i), 1) = 1.0;
        b(static_cast<Eigen::Index>(i)) = std::log(vals[i]);
    }
    return a.colPivHouseholderQr().solve(b)(0);
}

// ---------------------------------------------------------------------------
// Quasi-periodically forced oscillator  z'' = h_mu(x, z, z'),  x' = (1, omega)

/// (c0 + c1 mu) * trig(<k, x>) * z1^a * z2^b, trig = sin or cos.
struct OscillatorTerm {
    Mode k;
    bool sine = false;
    int a = 0;
    int b = 0;
    double c0 = 0.0;
    double c1 = 0.0;
};

struct ForcedOscillator {
    std::vector<OscillatorTerm> terms;

    /// h, dh/dz1, dh/dz2 at (x, z1, z2).
    std::array<double, 3> eval(const Vector& x, double z1, double z2, double mu) const {
        std::array<double, 3> out{0, 0, 0};
        for (const auto& t : terms) {
            double ph = 0;
            for (std::size_t i = 0; i < t.k.size(); ++i) ph += t.k[i] * x(static_cast<Eigen::Index>(i));
            const double tr = t.sine ? std::sin(ph) : std::cos(ph);
            const double c = (t.c0 + t.c1 * mu) * tr;
            out[0] += c * std::pow(z1, t.a) * std::pow(z2, t.b);
            if (t.a > 0) out[1] += c * t.a * std::pow(z1, t.a - 1) * std::pow(z2, t.b);
            if (t.b > 0) out[2] += c * t.b * std::pow(z1, t.a) * std::pow(z2, t.b - 1);
        }
        return out;
    }

    /// d/dz1 of the average at z = 0 (the entry of the averaged Floquet matrix).
    double averaged_slope(double mu) const {
        double s = 0;
        for (const auto& t : terms)
            if (is_zero(t.k) && !t.sine && t.a == 1 && t.b == 0) s += t.c0 + t.c1 * mu;
        return s;
    }

    int degree() const {
        int d = 1;
        for (const auto& t : terms) d = std::max(d, t.a + t.b);
        return d;
    }

    int forcing_order() const {
        int d = 0;
        for (const auto& t : terms)
            for (int v : t.k) d = std::max(d, std::abs(v));
        return d;
    }
};

/// Reversibility under (x, z1, z2) -> (-x, -z1, z2): each term must be odd in (x, z1).
inline void validate(const ForcedOscillator& osc) {
    for (const auto& t : osc.terms) {
        require(t.k.size() == 2, ErrorCode::dimension_mismatch, "forcing modes live in Z^2");
        require(t.a >= 0 && t.b >= 0, ErrorCode::invalid_argument, "negative power in forcing term");
        const bool trig_odd = t.sine;
        const bool z_odd = t.a % 2 == 1;
        require(trig_odd != z_odd, ErrorCode::invalid_argument,
                "forcing term is not reversible: trig(<k,x>) z1^a z2^b must be odd in (x, z1)");
        if (is_zero(t.k))
            require(!t.sine, ErrorCode::invalid_argument, "sin(0) term is identically zero");
    }
}

struct ResponseOptions {
    int K = 8;              // sine modes with |k|_1 <= K
    int grid = 0;           // 0 = automatic
    int max_iters = 40;
    double tol = 1e-10;
    DiophantineSpec spec{1e-4, 1.5, 8, 0, KNorm::l1};
};

struct ResponseSolution {
    double omega = 0.0;
    double mu = 0.0;
    std::vector<Mode> modes;   // half lattice
    Vector coeffs;             // z1 = sum a_k sin<k, x>
    double residual = 0.0;     // Galerkin residual (sup over modes)
    double grid_residual = 0.0;  // sup over grid points of |D^2 z1 - h|
    int iterations = 0;
    Matrix floquet;            // averaged linearisation [[0,1],[<h_z1>,<h_z2>]]
    std::vector<Complex> floquet_eigenvalues;
    double averaged_slope = 0.0;

    double coefficient(const Mode& k) const {
        for (std::size_t i = 0; i < modes.size(); ++i)
            if (modes[i] == k) return coeffs(static_cast<Eigen::Index>(i));
        return 0.0;
    }
    /// "elliptic" (imaginary pair), "hyperbolic" (real pair) or "degenerate".
    std::string floquet_type(double tol = 1e-12) const {
        const double c = floquet(1, 0);
        if (c < -tol) return "elliptic";
        if (c > tol) return "hyperbolic";
        return "degenerate";
    }
};

/// Newton iteration on the sine coefficients of the odd torus z1(x), z2 = D z1,
/// solving D^2 z1 = h_mu(x, z1, D z1) with D = d_x1 + omega d_x2.
inline ResponseSolution response_solve(const ForcedOscillator& osc, double omega, double mu,
                                       const ResponseOptions& opt = {}, const ResponseSolution* guess = nullptr) {
    validate(osc);
    require(opt.K >= 1, ErrorCode::invalid_argument, "response: K must be >= 1");
    const Vector sigma = (Vector(2) << 1.0, omega).finished();
    {
        DiophantineSpec ds = opt.spec;
        ds.K = std::max(ds.K, opt.K);
        const auto dr = dioph_check(sigma, Vector(), ds);
        if (!dr.satisfied) {
            std::ostringstream os;
            os << "small divisor: |<k,(1,omega)>| |k|^tau = " << dr.worst_ratio << " at k=(" << dr.worst_k(0) << ","
               << dr.worst_k(1) << ") below gamma " << ds.gamma;
            throw Error(ErrorCode::small_divisor, os.str());
        }
    }
    ResponseSolution sol;
    sol.omega = omega;
    sol.mu = mu;
    for_each_half_lattice(2, opt.K, [&](const IntVector& k) { sol.modes.push_back({int(k(0)), int(k(1))}); });
    const auto M = static_cast<Eigen::Index>(sol.modes.size());
    Vector s(M);
    for (Eigen::Index j = 0; j < M; ++j)
        s(j) = sol.modes[static_cast<std::size_t>(j)][0] + omega * sol.modes[static_cast<std::size_t>(j)][1];

    int G = opt.grid;
    if (G <= 0) {
        G = (osc.degree() + 1) * opt.K + osc.forcing_order() + 2;
        G += G % 2;
    }
    const long pts = static_cast<long>(G) * G;
    Matrix S(pts, M), C(pts, M);
    std::vector<Vector> xs(static_cast<std::size_t>(pts));
    const double two_pi = 2.0 * std::numbers::pi;
    for (long i = 0; i < pts; ++i) {
        Vector x(2);
        x << two_pi * static_cast<double>(i % G) / G, two_pi * static_cast<double>(i / G) / G;
        xs[static_cast<std::size_t>(i)] = x;
        for (Eigen::Index j = 0; j < M; ++j) {
            const double ph = sol.modes[static_cast<std::size_t>(j)][0] * x(0) + sol.modes[static_cast<std::size_t>(j)][1] * x(1);
            S(i, j) = std::sin(ph);
            C(i, j) = std::cos(ph);
        }
    }
    const double w = 2.0 / static_cast<double>(pts);  // <sin_j, sin_j> = 1/2

    Vector a = Vector::Zero(M);
    if (guess && guess->modes == sol.modes) a = guess->coeffs;

    Vector hz1(pts), hz2(pts), r(pts);
    auto evaluate = [&](const Vector& coef) {
        const Vector u = S * coef;
        const Vector du = C * (s.asDiagonal() * coef);
        const Vector d2u = -(S * (s.array().square().matrix().asDiagonal() * coef));
        for (long i = 0; i < pts; ++i) {
            const auto hv = osc.eval(xs[static_cast<std::size_t>(i)], u(i), du(i), mu);
            r(i) = d2u(i) - hv[0];
            hz1(i) = hv[1];
            hz2(i) = hv[2];
        }
    };

    for (int it = 0;; ++it) {
        evaluate(a);
        const Vector F = w * (S.transpose() * r);
        sol.residual = F.cwiseAbs().maxCoeff();
        sol.iterations = it;
        if (sol.residual <= opt.tol) break;
        if (it >= opt.max_iters) {
            std::ostringstream os;
            os << "response Newton did not converge: residual " << sol.residual << " after " << it
               << " iterations at mu=" << mu;
            throw Error(ErrorCode::not_converged, os.str());
        }
        const Matrix Jr = -(hz1.asDiagonal() * S) - (hz2.asDiagonal() * C) * s.asDiagonal();
        Matrix J = w * (S.transpose() * Jr);
        J.diagonal() -= s.array().square().matrix();
        const Vector delta = J.partialPivLu().solve(F);
        require(delta.allFinite(), ErrorCode::ill_conditioned, "response Jacobian is singular");
        a -= delta;
    }
    sol.coeffs = a;
    sol.grid_residual = r.cwiseAbs().maxCoeff();
    sol.floquet = Matrix::Zero(2, 2);
    sol.floquet(0, 1) = 1.0;
    sol.floquet(1, 0) = hz1.mean();
    sol.floquet(1, 1) = hz2.mean();
    sol.floquet_eigenvalues = eigenvalues(sol.floquet);
    sol.averaged_slope = osc.averaged_slope(mu);
    return sol;
}

/// Parameter sweep with natural continuation (each solve starts from the previous torus).
inline std::vector<ResponseSolution> response_sweep(const ForcedOscillator& osc, double omega,
                                                    const std::vector<double>& mus, const ResponseOptions& opt = {}) {
    std::vector<ResponseSolution> out;
    for (double mu : mus) out.push_back(response_solve(osc, omega, mu, opt, out.empty() ? nullptr : &out.back()));
    return out;
}

/// Closed-form response of z'' = -c z + eps sin(x1 + x2): z1 = eps sin(x1 + x2) / (c - (1 + omega)^2).
inline double linear_response_amplitude(double c, double eps, double omega) {
    return eps / (c - (1.0 + omega) * (1.0 + omega));
}

}  // namespace kamforge
