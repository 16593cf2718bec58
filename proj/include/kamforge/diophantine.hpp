#pragma once

// Diophantine conditions with Mel'nikov terms |l| <= 2, resonance
// classification and Monte-Carlo estimates of the Diophantine set.

#include "kamforge/revlin.hpp"

#include <functional>

namespace kamforge {

enum class KNorm { l1, l2, linf };

inline double knorm(const IntVector& k, KNorm norm) {
    switch (norm) {
        case KNorm::l1: return static_cast<double>(k.cwiseAbs().sum());
        case KNorm::l2: return std::sqrt(static_cast<double>(k.squaredNorm()));
        case KNorm::linf: return k.size() ? static_cast<double>(k.cwiseAbs().maxCoeff()) : 0.0;
    }
    return 0.0;
}

struct DiophantineSpec {
    double gamma = 1e-3;
    double tau = 1.5;
    int K = 20;
    int ell_max = 2;
    KNorm norm = KNorm::l1;
};

inline void validate(const DiophantineSpec& spec, int n) {
    require(spec.K >= 1, ErrorCode::invalid_argument, "Diophantine truncation K must be >= 1");
    require(spec.gamma > 0, ErrorCode::invalid_argument, "gamma must be positive");
    require(spec.tau > n - 1, ErrorCode::invalid_argument, "tau must exceed n - 1");
    require(spec.ell_max >= 0 && spec.ell_max <= 2, ErrorCode::invalid_argument, "|l| is limited to 2");
}

/// Calls `visit` for every k in Z^n with 0 < |k|_1 <= K whose first nonzero entry is positive.
inline void for_each_half_lattice(int n, int K, const std::function<void(const IntVector&)>& visit) {
    IntVector k = IntVector::Zero(n);
    std::function<void(int, int, bool)> rec = [&](int i, int budget, bool leading_zero) {
        if (i == n) {
            if (!leading_zero) visit(k);
            return;
        }
        const int lo = leading_zero ? 0 : -budget;
        for (int v = lo; v <= budget; ++v) {
            k(i) = v;
            rec(i + 1, budget - std::abs(v), leading_zero && v == 0);
        }
        k(i) = 0;
    };
    rec(0, K, true);
}

/// All l in Z^d with |l|_1 <= ell_max (ell_max <= 2).
inline std::vector<IntVector> melnikov_vectors(int d, int ell_max) {
    std::vector<IntVector> out{IntVector::Zero(d)};
    if (ell_max >= 1)
        for (int i = 0; i < d; ++i)
            for (int s : {1, -1}) {
                IntVector l = IntVector::Zero(d);
                l(i) = s;
                out.push_back(l);
            }
    if (ell_max >= 2)
        for (int i = 0; i < d; ++i) {
            for (int s : {2, -2}) {
                IntVector l = IntVector::Zero(d);
                l(i) = s;
                out.push_back(l);
            }
            for (int j = i + 1; j < d; ++j)
                for (int si : {1, -1})
                    for (int sj : {1, -1}) {
                        IntVector l = IntVector::Zero(d);
                        l(i) = si;
                        l(j) = sj;
                        out.push_back(l);
                    }
        }
    return out;
}

enum class ResonanceKind { internal, first_melnikov, sum_difference, doubling };

inline const char* to_string(ResonanceKind k) {
    switch (k) {
        case ResonanceKind::internal: return "internal";
        case ResonanceKind::first_melnikov: return "first_melnikov";
        case ResonanceKind::sum_difference: return "sum_difference";
        case ResonanceKind::doubling: return "doubling";
    }
    return "?";
}

inline ResonanceKind classify(const IntVector& ell) {
    const auto l1 = ell.cwiseAbs().sum();
    if (l1 == 0) return ResonanceKind::internal;
    if (l1 == 1) return ResonanceKind::first_melnikov;
    require(l1 == 2, ErrorCode::invalid_argument, "classify: |l| must be at most 2");
    return ell.cwiseAbs().maxCoeff() == 2 ? ResonanceKind::doubling : ResonanceKind::sum_difference;
}

struct ResonanceReport {
    IntVector k;
    IntVector ell;
    double value = 0.0;
    ResonanceKind kind = ResonanceKind::internal;
};

struct DiophantineResult {
    bool satisfied = false;
    bool truncated = true;  // the verdict only covers 0 < |k| <= K
    int K = 0;
    /// min over the truncation of |<k,omega> + <l,alpha>| |k|^tau; satisfied iff >= gamma
    double worst_ratio = std::numeric_limits<double>::infinity();
    double worst_residual = 0.0;
    IntVector worst_k;
    IntVector worst_ell;
};

namespace detail {

struct Shift {
    double value;
    std::size_t index;
};

inline std::vector<Shift> sorted_shifts(const Vector& alpha, const std::vector<IntVector>& ells) {
    std::vector<Shift> out;
    for (std::size_t i = 0; i < ells.size(); ++i)
        out.push_back({ells[i].size() ? (ells[i].cast<double>().dot(alpha)) : 0.0, i});
    std::sort(out.begin(), out.end(), [](const Shift& a, const Shift& b) {
        return a.value < b.value || (a.value == b.value && a.index < b.index);
    });
    return out;
}

/// Shift minimising |x + shift|.
inline const Shift& nearest(const std::vector<Shift>& shifts, double x) {
    auto it = std::lower_bound(shifts.begin(), shifts.end(), -x,
                               [](const Shift& s, double v) { return s.value < v; });
    if (it == shifts.end()) return shifts.back();
    if (it == shifts.begin()) return *it;
    auto prev = std::prev(it);
    return std::abs(x + prev->value) <= std::abs(x + it->value) ? *prev : *it;
}

}  // namespace detail

/// Exhaustive check of |<k,omega> + <l,alpha>| >= gamma |k|^-tau over the truncation.
inline DiophantineResult dioph_check(const Vector& omega, const Vector& alpha, const DiophantineSpec& spec) {
    const int n = static_cast<int>(omega.size());
    validate(spec, n);
    const auto ells = melnikov_vectors(static_cast<int>(alpha.size()), spec.ell_max);
    const auto shifts = detail::sorted_shifts(alpha, ells);
    DiophantineResult res;
    res.K = spec.K;
    for_each_half_lattice(n, spec.K, [&](const IntVector& k) {
        const double kw = k.cast<double>().dot(omega);
        const auto& sh = detail::nearest(shifts, kw);
        const double r = kw + sh.value;
        const double ratio = std::abs(r) * std::pow(knorm(k, spec.norm), spec.tau);
        if (ratio < res.worst_ratio) {
            res.worst_ratio = ratio;
            res.worst_residual = r;
            res.worst_k = k;
            res.worst_ell = ells[sh.index];
        }
    });
    res.satisfied = res.worst_ratio >= spec.gamma;
    return res;
}

/// All (k, l) with |<k,omega> + <l,alpha>| <= tol, 0 < |k|_1 <= K, sorted by |residual| then |k|.
inline std::vector<ResonanceReport> detect_resonances(const Vector& omega, const Vector& alpha, double tol, int K,
                                                      int ell_max = 2) {
    require(tol > 0, ErrorCode::invalid_argument, "detect_resonances: tol must be positive");
    require(K >= 1, ErrorCode::invalid_argument, "detect_resonances: K must be >= 1");
    const auto ells = melnikov_vectors(static_cast<int>(alpha.size()), ell_max);
    std::vector<ResonanceReport> out;
    for_each_half_lattice(static_cast<int>(omega.size()), K, [&](const IntVector& k) {
        const double kw = k.cast<double>().dot(omega);
        for (const auto& l : ells) {
            const double r = kw + (l.size() ? l.cast<double>().dot(alpha) : 0.0);
            if (std::abs(r) <= tol) out.push_back({k, l, r, classify(l)});
        }
    });
    std::stable_sort(out.begin(), out.end(), [](const ResonanceReport& a, const ResonanceReport& b) {
        if (std::abs(a.value) != std::abs(b.value)) return std::abs(a.value) < std::abs(b.value);
        return a.k.cwiseAbs().sum() < b.k.cwiseAbs().sum();
    });
    return out;
}

/// 64-bit linear congruential generator (Knuth MMIX constants); uniform
/// doubles from the top 53 bits.
class Lcg64 {
public:
    static constexpr std::uint64_t kMultiplier = 6364136223846793005ULL;
    static constexpr std::uint64_t kIncrement = 1442695040888963407ULL;

    explicit Lcg64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        state_ = state_ * kMultiplier + kIncrement;
        return state_;
    }
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

private:
    std::uint64_t state_;
};

struct ParameterBox {
    Vector omega_lo, omega_hi;
    Vector mu_lo, mu_hi;  // empty when there is no normal part
};

struct MeasureSample {
    Vector omega;
    Vector mu;
    bool in_gamma = false;
    IntVector worst_k;
    IntVector worst_ell;
    double margin = 0.0;
};

struct MeasureResult {
    int samples = 0;
    int hits = 0;
    double fraction = 0.0;
    double ci_low = 0.0;   // Wilson score interval, 95 %
    double ci_high = 0.0;
    std::vector<MeasureSample> points;
};

/// Wilson score interval for a binomial proportion.
inline std::pair<double, double> wilson_interval(int hits, int n, double z = 1.959963984540054) {
    if (n == 0) return {0.0, 1.0};
    const double ph = static_cast<double>(hits) / n;
    const double z2 = z * z;
    const double denom = 1 + z2 / n;
    const double center = (ph + z2 / (2.0 * n)) / denom;
    const double half = z * std::sqrt(ph * (1 - ph) / n + z2 / (4.0 * n * n)) / denom;
    return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

/// Normal frequencies, falling back to the raw spectrum when clustering is ambiguous.
inline Vector frequencies_for_sampling(const Matrix& omega) {
    try {
        return normal_frequencies(omega);
    } catch (const Error&) {
        const auto ev = eigenvalues(omega);
        Vector out(static_cast<Eigen::Index>(ev.size()));
        for (std::size_t i = 0; i < ev.size(); ++i) out(static_cast<Eigen::Index>(i)) = ev[i].imag();
        std::sort(out.data(), out.data() + out.size());
        return out;
    }
}

/// Fraction of the box in the (truncated) Diophantine set. Samples are drawn
/// as omega_1..omega_n then mu_1..mu_c for each point, in that order.
inline MeasureResult measure_estimate(const ParameterBox& box, const LinearUnfolding* unfolding,
                                      const DiophantineSpec& spec, int samples, std::uint64_t seed,
                                      bool keep_points = false) {
    require(samples >= 100, ErrorCode::invalid_argument, "measure_estimate: need at least 100 samples");
    const auto n = box.omega_lo.size();
    require(n >= 1 && box.omega_hi.size() == n, ErrorCode::dimension_mismatch, "box: omega bounds");
    require(box.mu_lo.size() == box.mu_hi.size(), ErrorCode::dimension_mismatch, "box: mu bounds");
    for (Eigen::Index i = 0; i < n; ++i)
        require(box.omega_hi(i) > box.omega_lo(i), ErrorCode::invalid_argument, "degenerate parameter box");
    for (Eigen::Index i = 0; i < box.mu_lo.size(); ++i)
        require(box.mu_hi(i) > box.mu_lo(i), ErrorCode::invalid_argument, "degenerate parameter box");
    const int c = unfolding ? unfolding->codimension() : 0;
    require(box.mu_lo.size() == c, ErrorCode::dimension_mismatch, "box: mu dimension must match the unfolding");
    validate(spec, static_cast<int>(n));

    Lcg64 rng(seed);
    MeasureResult out;
    out.samples = samples;
    for (int s = 0; s < samples; ++s) {
        MeasureSample pt;
        pt.omega.resize(n);
        for (Eigen::Index i = 0; i < n; ++i) pt.omega(i) = rng.uniform(box.omega_lo(i), box.omega_hi(i));
        pt.mu.resize(c);
        for (Eigen::Index i = 0; i < c; ++i) pt.mu(i) = rng.uniform(box.mu_lo(i), box.mu_hi(i));
        const Vector alpha = unfolding ? frequencies_for_sampling(unfolding->at(pt.mu)) : Vector();
        const auto r = dioph_check(pt.omega, alpha, spec);
        pt.in_gamma = r.satisfied;
        pt.worst_k = r.worst_k;
        pt.worst_ell = r.worst_ell;
        pt.margin = r.worst_ratio;
        if (pt.in_gamma) ++out.hits;
        if (keep_points) out.points.push_back(std::move(pt));
    }
    out.fraction = static_cast<double>(out.hits) / samples;
    std::tie(out.ci_low, out.ci_high) = wilson_interval(out.hits, samples);
    return out;
}

}  // namespace kamforge
