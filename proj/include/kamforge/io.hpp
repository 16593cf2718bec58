#pragma once

// Config parsing (JSON), deterministic CSV output and the config digest.

#include "kamforge/core.hpp"
#include "kamforge/diophantine.hpp"
#include "kamforge/revlin.hpp"

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace kamforge::io {

using Json = nlohmann::json;
namespace fs = std::filesystem;

inline constexpr const char* kVersion = "0.3.1";

/// FNV-1a 64-bit.
inline std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

/// Digest of the canonical dump (object keys are sorted by the json library).
inline std::string config_digest(const Json& cfg) { return hex64(fnv1a64(cfg.dump())); }

/// Shortest text that reads back to the same double.
inline std::string fmt(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    for (int prec = 15; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

inline std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    require(static_cast<bool>(in), ErrorCode::io, "cannot read " + p.string());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

inline void write_file(const fs::path& p, const std::string& text) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    require(static_cast<bool>(out), ErrorCode::io, "cannot write " + p.string());
    out << text;
    require(static_cast<bool>(out), ErrorCode::io, "write failed for " + p.string());
}

inline Json parse_json(const std::string& text, const std::string& where) {
    try {
        return Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw Error(ErrorCode::invalid_argument, where + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Typed access with config paths in the messages

class Node {
public:
    Node(const Json& j, std::string path, fs::path base) : j_(&j), path_(std::move(path)), base_(std::move(base)) {}

    const Json& json() const { return *j_; }
    const std::string& path() const { return path_; }
    const fs::path& base() const { return base_; }

    bool has(const std::string& key) const { return j_->is_object() && j_->contains(key); }

    Node at(const std::string& key) const {
        require(has(key), ErrorCode::invalid_argument, "config: missing " + path_ + "." + key);
        return {(*j_)[key], path_ + "." + key, base_};
    }

    Node at(std::size_t i) const {
        require(j_->is_array() && i < j_->size(), ErrorCode::invalid_argument, "config: " + path_ + " index");
        return {(*j_)[i], path_ + "[" + std::to_string(i) + "]", base_};
    }

    std::size_t size() const {
        require(j_->is_array(), ErrorCode::invalid_argument, "config: " + path_ + " must be an array");
        return j_->size();
    }

    double num() const {
        require(j_->is_number(), ErrorCode::invalid_argument, "config: " + path_ + " must be a number");
        return j_->get<double>();
    }

    long long integer() const {
        require(j_->is_number_integer() || j_->is_number_unsigned(), ErrorCode::invalid_argument,
                "config: " + path_ + " must be an integer");
        return j_->get<long long>();
    }

    std::string str() const {
        require(j_->is_string(), ErrorCode::invalid_argument, "config: " + path_ + " must be a string");
        return j_->get<std::string>();
    }

    double num(const std::string& key, double dflt) const { return has(key) ? at(key).num() : dflt; }
    long long integer(const std::string& key, long long dflt) const { return has(key) ? at(key).integer() : dflt; }
    std::string str(const std::string& key, const std::string& dflt) const { return has(key) ? at(key).str() : dflt; }

    /// Number range check with the config path in the message.
    double num_in(const std::string& key, double dflt, double lo, double hi) const {
        const double v = num(key, dflt);
        require(v >= lo && v <= hi, ErrorCode::invalid_argument,
                "config: " + path_ + "." + key + " = " + fmt(v) + " outside [" + fmt(lo) + ", " + fmt(hi) + "]");
        return v;
    }
    long long integer_in(const std::string& key, long long dflt, long long lo, long long hi) const {
        const long long v = integer(key, dflt);
        require(v >= lo && v <= hi, ErrorCode::invalid_argument,
                "config: " + path_ + "." + key + " = " + std::to_string(v) + " outside [" + std::to_string(lo) +
                    ", " + std::to_string(hi) + "]");
        return v;
    }

    Vector vector() const {
        Vector v(static_cast<Eigen::Index>(size()));
        for (std::size_t i = 0; i < size(); ++i) v(static_cast<Eigen::Index>(i)) = at(i).num();
        return v;
    }

    IntVector int_vector() const {
        IntVector v(static_cast<Eigen::Index>(size()));
        for (std::size_t i = 0; i < size(); ++i) v(static_cast<Eigen::Index>(i)) = at(i).integer();
        return v;
    }

    std::vector<int> ints() const {
        std::vector<int> out;
        for (std::size_t i = 0; i < size(); ++i) out.push_back(static_cast<int>(at(i).integer()));
        return out;
    }

    /// Row-major nested array, or a path to a CSV file relative to the config.
    Matrix matrix() const {
        if (j_->is_string()) return read_csv_matrix(resolve(str()));
        std::vector<std::vector<double>> rows;
        for (std::size_t i = 0; i < size(); ++i) {
            std::vector<double> r;
            const Node row = at(i);
            for (std::size_t c = 0; c < row.size(); ++c) r.push_back(row.at(c).num());
            rows.push_back(std::move(r));
        }
        return to_matrix(rows);
    }

    fs::path resolve(const std::string& rel) const {
        fs::path p(rel);
        if (p.is_relative()) p = base_ / p;
        require(fs::exists(p), ErrorCode::io, "config: " + path_ + " refers to missing file " + p.string());
        return p;
    }

    static Matrix read_csv_matrix(const fs::path& p) {
        std::istringstream in(read_file(p));
        std::vector<std::vector<double>> rows;
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty() || line[0] == '#') continue;
            std::vector<double> r;
            std::istringstream ls(line);
            std::string cell;
            while (std::getline(ls, cell, ',')) {
                char* end = nullptr;
                const double v = std::strtod(cell.c_str(), &end);
                require(end != cell.c_str(), ErrorCode::invalid_argument, "non-numeric cell in " + p.string());
                r.push_back(v);
            }
            rows.push_back(std::move(r));
        }
        return to_matrix(rows);
    }

private:
    const Json* j_;
    std::string path_;
    fs::path base_;
};

// ---------------------------------------------------------------------------
// Shared config sections

inline Tolerances tolerances(const Node& root) {
    Tolerances t;
    if (!root.has("tolerances")) return t;
    const Node n = root.at("tolerances");
    t.rank_tol = n.num_in("rank_tol", t.rank_tol, 0, 1);
    t.cluster_tol = n.num_in("cluster_tol", t.cluster_tol, 0, 1);
    t.membership_tol = n.num_in("membership_tol", t.membership_tol, 0, 1);
    t.indeterminate_band = n.num_in("indeterminate_band", t.indeterminate_band, 1, 1e6);
    return t;
}

inline KNorm knorm(const std::string& s) {
    if (s == "l1") return KNorm::l1;
    if (s == "l2") return KNorm::l2;
    if (s == "linf") return KNorm::linf;
    throw Error(ErrorCode::invalid_argument, "config: unknown norm '" + s + "' (l1, l2, linf)");
}

inline DiophantineSpec dioph_spec(const Node& root) {
    DiophantineSpec s;
    if (!root.has("dioph")) return s;
    const Node n = root.at("dioph");
    s.gamma = n.num_in("gamma", s.gamma, 0, 1e6);
    s.tau = n.num_in("tau", s.tau, 0, 1e3);
    s.K = static_cast<int>(n.integer_in("K", s.K, 1, 400));
    s.ell_max = static_cast<int>(n.integer_in("ell_max", s.ell_max, 0, 2));
    s.norm = knorm(n.str("norm", "l1"));
    return s;
}

/// {"R": matrix} or {"R_diag": [..]}, optional "twist": {"S", "order"} and "commutant": [matrix, ...].
inline ReversingStructure structure(const Node& n) {
    Matrix R;
    if (n.has("R")) R = n.at("R").matrix();
    else R = n.at("R_diag").vector().asDiagonal();
    std::optional<Twist> twist;
    if (n.has("twist")) {
        const Node t = n.at("twist");
        twist = Twist{t.at("S").matrix(), static_cast<int>(t.integer_in("order", 2, 1, 64))};
    }
    std::vector<Matrix> commutant;
    if (n.has("commutant"))
        for (std::size_t i = 0; i < n.at("commutant").size(); ++i)
            commutant.push_back(n.at("commutant").at(i).matrix());
    return ReversingStructure(R, twist, commutant);
}

inline ClosedFormKind closed_form_kind(const std::string& s) {
    if (s == "p_fold_resonance") return ClosedFormKind::p_fold_resonance;
    if (s == "nilpotent_zero") return ClosedFormKind::nilpotent_zero;
    throw Error(ErrorCode::invalid_argument, "config: unknown closed form '" + s + "'");
}

inline Json to_json(const Vector& v) {
    Json a = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

inline Json to_json(const IntVector& v) {
    Json a = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

inline Json to_json(const Matrix& m) {
    Json a = Json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        Json r = Json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
        a.push_back(r);
    }
    return a;
}

inline Json to_json(const std::vector<Complex>& v) {
    Json a = Json::array();
    for (const auto& c : v) a.push_back(Json::array({c.real(), c.imag()}));
    return a;
}

// ---------------------------------------------------------------------------
// CSV

class Table {
public:
    explicit Table(std::vector<std::string> header) : header_(std::move(header)) {}

    Table& row() {
        rows_.emplace_back();
        return *this;
    }
    Table& operator<<(double v) { return cell(fmt(v)); }
    Table& operator<<(int v) { return cell(std::to_string(v)); }
    Table& operator<<(long v) { return cell(std::to_string(v)); }
    Table& operator<<(long long v) { return cell(std::to_string(v)); }
    Table& operator<<(std::size_t v) { return cell(std::to_string(v)); }
    Table& operator<<(const std::string& v) { return cell(quote(v)); }
    Table& operator<<(const char* v) { return cell(quote(v)); }

    std::size_t rows() const { return rows_.size(); }

    /// First line "# kamforge <version> config=<digest>", then the header.
    std::string render(const std::string& digest) const {
        std::ostringstream os;
        os << "# kamforge " << kVersion << " config=" << digest << "\n";
        join(os, header_);
        for (const auto& r : rows_) {
            require(r.size() == header_.size(), ErrorCode::dimension_mismatch, "csv row width");
            join(os, r);
        }
        return os.str();
    }

    Json to_json_rows() const {
        Json a = Json::array();
        for (const auto& r : rows_) {
            Json o = Json::object();
            for (std::size_t i = 0; i < r.size(); ++i) o[header_[i]] = r[i];
            a.push_back(o);
        }
        return a;
    }

private:
    Table& cell(std::string s) {
        require(!rows_.empty(), ErrorCode::invalid_argument, "csv cell before row()");
        rows_.back().push_back(std::move(s));
        return *this;
    }
    static std::string quote(const std::string& s) {
        if (s.find_first_of(",\"\n") == std::string::npos) return s;
        std::string out = "\"";
        for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
        return out + "\"";
    }
    static void join(std::ostringstream& os, const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) os << (i ? "," : "") << cells[i];
        os << "\n";
    }

    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

}  // namespace kamforge::io
