#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace kamforge {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using IntMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;
using IntVector = Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1>;

inline constexpr const char* kVersion = "0.3.1";

/// Sign tag of a structured matrix: `minus` anti-commutes with R, `plus` commutes.
enum class Parity { minus, plus };

inline Parity opposite(Parity p) { return p == Parity::minus ? Parity::plus : Parity::minus; }
inline const char* to_string(Parity p) { return p == Parity::minus ? "minus" : "plus"; }

/// Three-valued outcome for decisions taken against a numerical threshold.
enum class Verdict { holds, fails, indeterminate };

inline const char* to_string(Verdict v) {
    switch (v) {
        case Verdict::holds: return "holds";
        case Verdict::fails: return "fails";
        case Verdict::indeterminate: return "indeterminate";
    }
    return "?";
}

inline Verdict both(Verdict a, Verdict b) {
    if (a == Verdict::fails || b == Verdict::fails) return Verdict::fails;
    if (a == Verdict::indeterminate || b == Verdict::indeterminate) return Verdict::indeterminate;
    return Verdict::holds;
}

/// Numerical thresholds shared by all modules.
struct Tolerances {
    double rank_tol = 1e-9;        // relative to the largest singular value
    double cluster_tol = 1e-7;     // relative to ||Omega|| for eigenvalue pairs
    double membership_tol = 1e-9;  // relative defect for gl+/- membership
    double indeterminate_band = 10.0;  // factor around a threshold reported as indeterminate
};

enum class ErrorCode {
    dimension_mismatch,
    invalid_argument,
    ill_conditioned,
    unstable_rank,
    splitting_failed,
    small_divisor,
    unsolvable,
    not_converged,
    io,
};

inline const char* to_string(ErrorCode c) {
    switch (c) {
        case ErrorCode::dimension_mismatch: return "dimension_mismatch";
        case ErrorCode::invalid_argument: return "invalid_argument";
        case ErrorCode::ill_conditioned: return "ill_conditioned";
        case ErrorCode::unstable_rank: return "unstable_rank";
        case ErrorCode::splitting_failed: return "splitting_failed";
        case ErrorCode::small_divisor: return "small_divisor";
        case ErrorCode::unsolvable: return "unsolvable";
        case ErrorCode::not_converged: return "not_converged";
        case ErrorCode::io: return "io";
    }
    return "?";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

inline void require(bool cond, ErrorCode code, const std::string& what) {
    if (!cond) throw Error(code, what);
}

inline double op_norm(const Matrix& m) {
    if (m.size() == 0) return 0.0;
    Eigen::JacobiSVD<Matrix> svd(m);
    return svd.singularValues()(0);
}

/// Rank decision from a singular value list, with the gap to the threshold.
struct RankDecision {
    int rank = 0;
    double threshold = 0.0;
    /// min over singular values of |log10(s / threshold)|; small means the
    /// decision sits on the tolerance boundary.
    double log_gap = std::numeric_limits<double>::infinity();
    bool stable = true;
};

inline RankDecision decide_rank(const Vector& singular_values, double rel_tol, double band,
                                double scale = -1.0) {
    RankDecision d;
    const double top = scale > 0 ? scale : (singular_values.size() ? singular_values.maxCoeff() : 0.0);
    d.threshold = rel_tol * top;
    if (top <= 0.0) return d;
    for (Eigen::Index i = 0; i < singular_values.size(); ++i) {
        const double s = singular_values(i);
        if (s > d.threshold) ++d.rank;
        const double gap = s > 0 ? std::abs(std::log10(s / d.threshold)) : std::numeric_limits<double>::infinity();
        d.log_gap = std::min(d.log_gap, gap);
    }
    d.stable = d.log_gap > std::log10(band);
    return d;
}

inline RankDecision numerical_rank(const Matrix& a, double rel_tol = 1e-9, double band = 10.0) {
    if (a.size() == 0) return {};
    Eigen::JacobiSVD<Matrix> svd(a);
    return decide_rank(svd.singularValues(), rel_tol, band);
}

/// Orthonormal basis (columns) of the right null space of `a`.
inline Matrix null_space(const Matrix& a, double rel_tol = 1e-9, double scale = -1.0) {
    const auto cols = a.cols();
    if (a.rows() == 0) return Matrix::Identity(cols, cols);
    Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeFullV);
    const Vector s = svd.singularValues();
    const double top = scale > 0 ? scale : (s.size() ? s.maxCoeff() : 0.0);
    int rank = 0;
    if (top > 0)
        for (Eigen::Index i = 0; i < s.size(); ++i)
            if (s(i) > rel_tol * top) ++rank;
    return svd.matrixV().rightCols(cols - rank);
}

/// Orthonormal basis (columns) of the column span of `a`.
inline Matrix range_basis(const Matrix& a, double rel_tol = 1e-9) {
    if (a.cols() == 0) return Matrix(a.rows(), 0);
    Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeFullU);
    const Vector s = svd.singularValues();
    const double top = s.size() ? s.maxCoeff() : 0.0;
    int rank = 0;
    if (top > 0)
        for (Eigen::Index i = 0; i < s.size(); ++i)
            if (s(i) > rel_tol * top) ++rank;
    return svd.matrixU().leftCols(rank);
}

/// True when the column spans of `a` and `b` coincide.
inline bool same_span(const Matrix& a, const Matrix& b, double rel_tol = 1e-9) {
    if (a.rows() != b.rows()) return false;
    const int ra = numerical_rank(a, rel_tol).rank;
    const int rb = numerical_rank(b, rel_tol).rank;
    Matrix ab(a.rows(), a.cols() + b.cols());
    ab << a, b;
    return ra == rb && numerical_rank(ab, rel_tol).rank == ra;
}

inline Vector vec(const Matrix& m) { return Eigen::Map<const Vector>(m.data(), m.size()); }

inline Matrix unvec(const Vector& v, Eigen::Index rows, Eigen::Index cols) {
    return Eigen::Map<const Matrix>(v.data(), rows, cols);
}

inline Matrix commutator(const Matrix& a, const Matrix& b) { return a * b - b * a; }

inline Matrix to_matrix(const std::vector<std::vector<double>>& rows) {
    const auto r = static_cast<Eigen::Index>(rows.size());
    const auto c = r ? static_cast<Eigen::Index>(rows.front().size()) : 0;
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < r; ++i) {
        require(static_cast<Eigen::Index>(rows[i].size()) == c, ErrorCode::dimension_mismatch,
                "ragged matrix rows");
        for (Eigen::Index j = 0; j < c; ++j) m(i, j) = rows[i][j];
    }
    return m;
}

}  // namespace kamforge
