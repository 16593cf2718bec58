#pragma once

// Vector fields on T^n x R^m x R^2p, affine in (y, z), stored as truncated
// Fourier series of their jets at (x, 0, 0).

#include "kamforge/core.hpp"

#include <map>
#include <numbers>

namespace kamforge {

using Mode = std::vector<int>;

inline Mode negate(const Mode& k) {
    Mode out(k);
    for (auto& v : out) v = -v;
    return out;
}

inline int l1(const Mode& k) {
    int s = 0;
    for (int v : k) s += std::abs(v);
    return s;
}

inline bool is_zero(const Mode& k) {
    return std::all_of(k.begin(), k.end(), [](int v) { return v == 0; });
}

inline IntVector to_int_vector(const Mode& k) {
    IntVector v(static_cast<Eigen::Index>(k.size()));
    for (std::size_t i = 0; i < k.size(); ++i) v(static_cast<Eigen::Index>(i)) = k[i];
    return v;
}

/// Jet of a field at (x, 0, 0) for one Fourier mode:
/// xdot = f + f_eta y + f_zeta z, ydot = g + ..., zdot = h + h_eta y + h_zeta z.
struct Jets {
    CVector f;
    CMatrix f_eta, f_zeta;
    CVector g;
    CMatrix g_eta, g_zeta;
    CVector h;
    CMatrix h_eta, h_zeta;

    static Jets zero(int n, int m, int p) {
        const int d = 2 * p;
        Jets j;
        j.f = CVector::Zero(n);
        j.f_eta = CMatrix::Zero(n, m);
        j.f_zeta = CMatrix::Zero(n, d);
        j.g = CVector::Zero(m);
        j.g_eta = CMatrix::Zero(m, m);
        j.g_zeta = CMatrix::Zero(m, d);
        j.h = CVector::Zero(d);
        j.h_eta = CMatrix::Zero(d, m);
        j.h_zeta = CMatrix::Zero(d, d);
        return j;
    }

    /// Applies `op(name, a, b)` member-wise to (this, other).
    template <class Op>
    void zip(const Jets& other, Op op) {
        op("f", f, other.f);
        op("f_eta", f_eta, other.f_eta);
        op("f_zeta", f_zeta, other.f_zeta);
        op("g", g, other.g);
        op("g_eta", g_eta, other.g_eta);
        op("g_zeta", g_zeta, other.g_zeta);
        op("h", h, other.h);
        op("h_eta", h_eta, other.h_eta);
        op("h_zeta", h_zeta, other.h_zeta);
    }

    template <class Op>
    void visit(Op op) const {
        op("f", f);
        op("f_eta", f_eta);
        op("f_zeta", f_zeta);
        op("g", g);
        op("g_eta", g_eta);
        op("g_zeta", g_zeta);
        op("h", h);
        op("h_eta", h_eta);
        op("h_zeta", h_zeta);
    }

    template <class Op>
    void apply(Op op) {
        op(f);
        op(f_eta);
        op(f_zeta);
        op(g);
        op(g_eta);
        op(g_zeta);
        op(h);
        op(h_eta);
        op(h_zeta);
    }

    Jets& operator+=(const Jets& o) {
        zip(o, [](const char*, auto& a, const auto& b) { a += b; });
        return *this;
    }
    Jets& operator-=(const Jets& o) {
        zip(o, [](const char*, auto& a, const auto& b) { a -= b; });
        return *this;
    }
    Jets& operator*=(Complex s) {
        apply([s](auto& a) { a *= s; });
        return *this;
    }

    Jets conjugate() const {
        Jets out(*this);
        out.apply([](auto& a) { a = a.conjugate().eval(); });
        return out;
    }

    double max_abs() const {
        double m = 0;
        visit([&m](const char*, const auto& a) {
            if (a.size()) m = std::max(m, a.cwiseAbs().maxCoeff());
        });
        return m;
    }
};

/// Point of the phase space T^n x R^m x R^2p.
struct PhasePoint {
    Vector x, y, z;
};

/// Value of a field at a point.
struct FieldValue {
    Vector dx, dy, dz;

    double distance(const FieldValue& o) const {
        auto d = [](const Vector& a, const Vector& b) { return a.size() ? (a - b).cwiseAbs().maxCoeff() : 0.0; };
        return std::max({d(dx, o.dx), d(dy, o.dy), d(dz, o.dz)});
    }
};

/// Truncated Fourier representation of an affine-in-(y,z) vector field.
///
/// Modes are indexed by k in Z^n; the angle x1 may be scaled by
/// `cover_order` l so that mode k contributes exp(i (k1 x1 / l + k* . x*)).
class FourierField {
public:
    FourierField() = default;
    FourierField(int n, int m, int p, int K) : n_(n), m_(m), p_(p), K_(K) {
        require(n >= 1 && m >= 0 && p >= 0 && K >= 0, ErrorCode::invalid_argument, "FourierField dimensions");
    }

    int n() const { return n_; }
    int m() const { return m_; }
    int p() const { return p_; }
    int dim_z() const { return 2 * p_; }
    int K() const { return K_; }
    int cover_order() const { return cover_order_; }
    void set_cover_order(int l) {
        require(l >= 1, ErrorCode::invalid_argument, "cover order must be >= 1");
        cover_order_ = l;
    }
    void set_K(int K) { K_ = K; }

    const std::map<Mode, Jets>& modes() const { return coeffs_; }

    Jets zero_jets() const { return Jets::zero(n_, m_, p_); }
    Mode zero_mode() const { return Mode(static_cast<std::size_t>(n_), 0); }

    bool has(const Mode& k) const { return coeffs_.count(k) > 0; }

    Jets get(const Mode& k) const {
        auto it = coeffs_.find(k);
        return it == coeffs_.end() ? zero_jets() : it->second;
    }

    /// Mutable access, creating a zero entry when absent.
    Jets& at(const Mode& k) {
        require(static_cast<int>(k.size()) == n_, ErrorCode::dimension_mismatch, "mode has wrong length");
        auto it = coeffs_.find(k);
        if (it == coeffs_.end()) it = coeffs_.emplace(k, zero_jets()).first;
        return it->second;
    }

    void set(const Mode& k, const Jets& j) { at(k) = j; }

    /// Sets mode k and its conjugate partner -k.
    void set_real_pair(const Mode& k, const Jets& j) {
        at(k) = j;
        if (!is_zero(k)) at(negate(k)) = j.conjugate();
    }

    void erase(const Mode& k) { coeffs_.erase(k); }

    /// Drops modes with all coefficients below `tol`.
    void prune(double tol = 0.0) {
        for (auto it = coeffs_.begin(); it != coeffs_.end();) {
            if (it->second.max_abs() <= tol) it = coeffs_.erase(it);
            else ++it;
        }
    }

    /// Drops modes with |k|_1 > K.
    void truncate(int K) {
        for (auto it = coeffs_.begin(); it != coeffs_.end();) {
            if (l1(it->first) > K) it = coeffs_.erase(it);
            else ++it;
        }
    }

    FourierField& operator+=(const FourierField& o) {
        check_compatible(o);
        for (const auto& [k, j] : o.coeffs_) at(k) += j;
        return *this;
    }
    FourierField& operator-=(const FourierField& o) {
        check_compatible(o);
        for (const auto& [k, j] : o.coeffs_) at(k) -= j;
        return *this;
    }
    FourierField& operator*=(double s) {
        for (auto& [k, j] : coeffs_) j *= s;
        return *this;
    }
    friend FourierField operator+(FourierField a, const FourierField& b) { return a += b; }
    friend FourierField operator-(FourierField a, const FourierField& b) { return a -= b; }
    friend FourierField operator*(double s, FourierField a) { return a *= s; }

    /// Largest deviation from c_{-k} = conj(c_k).
    double reality_defect() const {
        double d = 0;
        for (const auto& [k, j] : coeffs_) {
            Jets diff = get(negate(k)).conjugate();
            diff -= j;
            d = std::max(d, diff.max_abs());
        }
        return d;
    }

    /// Replaces each pair by its conjugate-symmetric part.
    void symmetrize_reality() {
        std::map<Mode, Jets> out;
        for (const auto& [k, j] : coeffs_) {
            Jets s = j;
            s += get(negate(k)).conjugate();
            s *= 0.5;
            out[k] = s;
            out[negate(k)] = s.conjugate();
        }
        coeffs_ = std::move(out);
    }

    /// sup_k e^{rho |k|} max|coefficient|.
    double norm(double rho = 0.0) const {
        double s = 0;
        for (const auto& [k, j] : coeffs_) s = std::max(s, std::exp(rho * l1(k)) * j.max_abs());
        return s;
    }

    Complex phase(const Mode& k, const Vector& x) const {
        double a = 0;
        for (int i = 0; i < n_; ++i) {
            const double xi = i == 0 ? x(i) / cover_order_ : x(i);
            a += k[static_cast<std::size_t>(i)] * xi;
        }
        return std::polar(1.0, a);
    }

    /// Jets summed at angle x (real part taken).
    Jets jets_at(const Vector& x) const {
        Jets acc = zero_jets();
        for (const auto& [k, j] : coeffs_) {
            Jets t = j;
            t *= phase(k, x);
            acc += t;
        }
        acc.apply([](auto& a) { a = a.real().template cast<Complex>().eval(); });
        return acc;
    }

    FieldValue evaluate(const PhasePoint& pt) const {
        const Jets j = jets_at(pt.x);
        FieldValue v;
        v.dx = (j.f + j.f_eta * pt.y.cast<Complex>() + j.f_zeta * pt.z.cast<Complex>()).real();
        v.dy = (j.g + j.g_eta * pt.y.cast<Complex>() + j.g_zeta * pt.z.cast<Complex>()).real();
        v.dz = (j.h + j.h_eta * pt.y.cast<Complex>() + j.h_zeta * pt.z.cast<Complex>()).real();
        return v;
    }

private:
    void check_compatible(const FourierField& o) const {
        require(o.n_ == n_ && o.m_ == m_ && o.p_ == p_, ErrorCode::dimension_mismatch,
                "FourierField dimensions differ");
        require(o.cover_order_ == cover_order_, ErrorCode::invalid_argument, "FourierField cover orders differ");
    }

    int n_ = 1, m_ = 0, p_ = 0, K_ = 0;
    int cover_order_ = 1;
    std::map<Mode, Jets> coeffs_;
};

/// Push-forward G_* X under G(x, y, z) = (-x, y, R z). Reversible fields
/// satisfy G_* X = -X, equivariant generators G_* X = X.
inline FourierField g_pushforward(const FourierField& field, const Matrix& R) {
    require(R.rows() == field.dim_z() && R.cols() == field.dim_z(), ErrorCode::dimension_mismatch,
            "g_pushforward: R does not match dim_z");
    const CMatrix r = R.cast<Complex>();
    std::vector<Mode> keys;
    for (const auto& [k, j] : field.modes()) {
        keys.push_back(k);
        keys.push_back(negate(k));
    }
    FourierField out(field.n(), field.m(), field.p(), field.K());
    out.set_cover_order(field.cover_order());
    for (const auto& k : keys) {
        const Jets o = field.get(negate(k));
        Jets& t = out.at(k);
        t.f = -o.f;
        t.f_eta = -o.f_eta;
        t.f_zeta = -o.f_zeta * r;
        t.g = o.g;
        t.g_eta = o.g_eta;
        t.g_zeta = o.g_zeta * r;
        t.h = r * o.h;
        t.h_eta = r * o.h_eta;
        t.h_zeta = r * o.h_zeta * r;
    }
    return out;
}

/// (X - G_* X) / 2, made real.
inline FourierField reversible_part(const FourierField& field, const Matrix& R) {
    FourierField out = field - g_pushforward(field, R);
    out *= 0.5;
    out.symmetrize_reality();
    return out;
}

/// (X + G_* X) / 2, made real.
inline FourierField equivariant_part(const FourierField& field, const Matrix& R) {
    FourierField out = field + g_pushforward(field, R);
    out *= 0.5;
    out.symmetrize_reality();
    return out;
}

/// Normally affine field omega d_x + Omega z d_z as a single-mode FourierField.
inline FourierField normal_linear_field(const Vector& omega, int m, const Matrix& Omega, int K = 0) {
    const int n = static_cast<int>(omega.size());
    require(Omega.rows() == Omega.cols() && Omega.rows() % 2 == 0, ErrorCode::dimension_mismatch,
            "Floquet matrix must be square of even size");
    FourierField fld(n, m, static_cast<int>(Omega.rows() / 2), K);
    Jets& j = fld.at(fld.zero_mode());
    j.f = omega.cast<Complex>();
    j.h_zeta = Omega.cast<Complex>();
    return fld;
}

}  // namespace kamforge
