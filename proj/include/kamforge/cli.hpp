#pragma once

// Batch driver: one config file in, deterministic artifacts out.
//
// Every artifact carries the tool version and the FNV-1a digest of the
// effective config (after merging inputs and applying flag overrides).

#include "kamforge/covering.hpp"
#include "kamforge/io.hpp"
#include "kamforge/nondegen.hpp"
#include "kamforge/svg.hpp"

#include <iostream>

namespace kamforge::cli {

namespace fs = std::filesystem;
using io::json;

inline const std::vector<std::string>& commands() {
    static const std::vector<std::string> c{"unfold",   "nondegen", "dioph",    "measure", "cover",
                                            "homsolve", "kamstep",  "response", "sweep"};
    return c;
}

/// Flag overrides; unset fields leave the config untouched.
struct Overrides {
    std::optional<std::string> out;
    std::optional<std::uint64_t> seed;
    std::optional<double> tol;
    std::optional<std::string> format;
};

/// What a command produces before it is written to disk.
struct Artifacts {
    json result = json::object();
    io::Csv table{{}};
    std::vector<std::pair<std::string, svg::Plot>> plots;
};

struct RunOutcome {
    int status = 0;
    std::vector<fs::path> files;
    json error;  // null on success
};

/// Exit statuses: 0 ok, 2 config or I/O error, 3 numerical/module error.
inline constexpr int kConfigError = 2;
inline constexpr int kModuleError = 3;

// ---------------------------------------------------------------------------
// config

/// Loads the config, merges "inputs" (paths relative to the config file;
/// keys in the config win) and applies the flag overrides.
inline json effective_config(const fs::path& path, const Overrides& ov) {
    json cfg = io::read_json(path);
    if (!cfg.is_object()) throw Error(ErrorCode::io, path.string() + ": top level must be an object");
    if (cfg.contains("inputs")) {
        json merged = json::object();
        for (const auto& rel : cfg.at("inputs")) {
            const fs::path p = path.parent_path() / rel.get<std::string>();
            if (!fs::exists(p)) throw Error(ErrorCode::io, "referenced input does not exist: " + p.string());
            json part = io::read_json(p);
            if (!part.is_object()) throw Error(ErrorCode::io, p.string() + ": top level must be an object");
            merged.merge_patch(part);
        }
        cfg.erase("inputs");
        merged.merge_patch(cfg);
        cfg = std::move(merged);
    }
    if (ov.out) cfg["out"] = *ov.out;
    if (ov.seed) cfg["seed"] = *ov.seed;
    if (ov.tol) cfg["tol"] = *ov.tol;
    if (ov.format) cfg["format"] = *ov.format;
    return cfg;
}

inline void validate_common(const json& cfg) {
    const std::string cmd = io::get_or<std::string>(cfg, "command", "");
    if (std::find(commands().begin(), commands().end(), cmd) == commands().end())
        io::bad("command", "one of unfold, nondegen, dioph, measure, cover, homsolve, kamstep, response, sweep");
    const std::string format = io::get_or<std::string>(cfg, "format", "json");
    if (format != "json" && format != "csv") io::bad("format", "csv or json");
    if (cfg.contains("tol")) {
        const double t = io::number(cfg.at("tol"), "tol");
        if (!(t > 0 && t < 1)) io::bad("tol", "must lie in (0, 1)");
    }
    if (cfg.contains("K")) {
        const int k = io::get_or(cfg, "K", 0);
        if (k < 1 || k > 200) io::bad("K", "must lie in [1, 200]");
    }
}

// ---------------------------------------------------------------------------
// commands

namespace detail {

inline std::string mode_str(const Mode& k) {
    std::string s;
    for (std::size_t i = 0; i < k.size(); ++i) s += (i ? ";" : "") + std::to_string(k[i]);
    return s;
}

inline std::string mode_str(const IntVector& k) {
    Mode m;
    for (Eigen::Index i = 0; i < k.size(); ++i) m.push_back(static_cast<int>(k(i)));
    return mode_str(m);
}

inline std::vector<Complex> sorted(std::vector<Complex> ev) {
    std::sort(ev.begin(), ev.end(), [](Complex a, Complex b) {
        return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
    });
    return ev;
}

inline LinearUnfolding unfolding_from(const json& cfg, ReversingStructure* rs_out = nullptr) {
    if (cfg.contains("closed_form")) {
        const json& c = cfg.at("closed_form");
        const std::string kind = io::get_or<std::string>(c, "kind", "");
        ClosedFormKind k;
        if (kind == "p_fold_resonance") k = ClosedFormKind::p_fold_resonance;
        else if (kind == "nilpotent_zero") k = ClosedFormKind::nilpotent_zero;
        else io::bad("closed_form.kind", "p_fold_resonance or nilpotent_zero");
        const auto cf = lcu_closed_form(k, io::get_or(c, "p", 1), io::get_or(c, "fix_sign", 1));
        if (rs_out) *rs_out = ReversingStructure(cf.R);
        return cf.unfolding;
    }
    const ReversingStructure rs = io::structure(io::need(cfg, "symmetry"));
    if (rs_out) *rs_out = rs;
    return lcu(io::matrix(io::need(cfg, "Omega"), "Omega"), StructuredSpaces(rs), io::tolerances(cfg));
}

inline Artifacts unfold(const json& cfg) {
    ReversingStructure rs;
    const LinearUnfolding u = unfolding_from(cfg, &rs);
    Artifacts a;
    a.result["codimension"] = u.codimension();
    a.result["rank_stable"] = u.rank_stable;
    a.result["base"] = io::to_json(u.base);
    a.result["R"] = io::to_json(rs.R());
    json dirs = json::array();
    for (const auto& d : u.directions) dirs.push_back(io::to_json(d));
    a.result["directions"] = dirs;
    a.result["normal_frequencies"] = io::to_json(normal_frequencies(u.base, io::tolerances(cfg)));
    a.result["eigenvalues"] = io::to_json(sorted(eigenvalues(u.base)));
    a.table = io::Csv({"direction", "row", "col", "value"});
    for (int i = 0; i < u.codimension(); ++i) {
        const Matrix& d = u.directions[static_cast<std::size_t>(i)];
        for (Eigen::Index r = 0; r < d.rows(); ++r)
            for (Eigen::Index c = 0; c < d.cols(); ++c)
                a.table.row() << i << static_cast<int>(r) << static_cast<int>(c) << d(r, c);
    }
    return a;
}

inline Artifacts nondegen(const json& cfg) {
    const Tolerances tol = io::tolerances(cfg);
    Artifacts a;
    a.table = io::Csv({"condition", "verdict", "margin", "threshold", "deficit"});
    auto record = [&](const std::string& key, const ConditionRecord& r) {
        a.result[key] = io::to_json(r);
        a.table.row() << r.condition << to_string(r.verdict) << r.margin << r.threshold << r.deficit;
    };
    std::optional<FamilyAtPoint> fam;
    if (cfg.contains("forced_oscillator")) {
        const json& f = cfg.at("forced_oscillator");
        fam = forced_oscillator_family(io::vector(io::need(f, "omega"), "forced_oscillator.omega"),
                                       io::number(io::need(f, "a"), "a"), io::get_or(f, "da", 0.0));
    } else {
        const ReversingStructure rs = io::structure(io::need(cfg, "symmetry"));
        const Matrix om = io::matrix(io::need(cfg, "Omega"), "Omega");
        record("bht_i", bht_i(om, rs, tol));
        if (cfg.contains("family")) {
            const json& f = cfg.at("family");
            const Vector omega = io::vector(io::need(f, "omega"), "family.omega");
            if (io::get_or<std::string>(f, "kind", "") == "unfolding") {
                fam = unfolding_family(omega, lcu(om, StructuredSpaces(rs), tol), rs);
            } else {
                FamilyAtPoint fp;
                fp.omega0 = omega;
                fp.Omega0 = om;
                fp.d_omega = io::matrix(io::need(f, "d_omega"), "family.d_omega");
                for (const auto& d : io::need(f, "d_Omega")) fp.d_Omega.push_back(io::matrix(d, "family.d_Omega"));
                fp.symmetry = rs;
                fam = fp;
            }
        }
    }
    if (fam) {
        if (!a.result.contains("bht_i")) record("bht_i", bht_i(fam->Omega0, fam->symmetry, tol));
        record("bht_ii", bht_ii(*fam, tol));
        if (cfg.contains("gate")) {
            const std::string g = cfg.at("gate").get<std::string>();
            CorollaryCase c;
            if (g == "plain") c = CorollaryCase::plain;
            else if (g == "covering_l2") c = CorollaryCase::covering_l2;
            else if (g == "zero_kernel") c = CorollaryCase::zero_kernel;
            else io::bad("gate", "plain, covering_l2 or zero_kernel");
            const GateReport rep = corollary_gate(*fam, c, tol);
            a.result["gate"] = {{"case", g},
                                {"verdict", to_string(rep.verdict)},
                                {"hypothesis", io::to_json(rep.hypothesis)},
                                {"transversality", io::to_json(rep.transversality)}};
            a.table.row() << "gate " + g << to_string(rep.verdict) << rep.hypothesis.margin << rep.hypothesis.threshold
                          << rep.transversality.deficit;
        }
    } else if (cfg.contains("gate")) {
        io::bad("gate", "needs a family");
    }
    return a;
}

inline Artifacts dioph(const json& cfg) {
    const DiophantineSpec spec = io::dioph_spec(cfg);
    const Vector omega = io::vector(io::need(cfg, "omega"), "omega");
    Vector alpha;
    if (cfg.contains("alpha")) alpha = io::vector(cfg.at("alpha"), "alpha");
    else if (cfg.contains("Omega"))
        alpha = normal_frequencies(io::matrix(cfg.at("Omega"), "Omega"), io::tolerances(cfg));
    const auto r = dioph_check(omega, alpha, spec);
    Artifacts a;
    a.result = {{"satisfied", r.satisfied},
                {"truncated", r.truncated},
                {"K", r.K},
                {"gamma", spec.gamma},
                {"tau", spec.tau},
                {"worst_ratio", r.worst_ratio},
                {"margin", r.worst_ratio - spec.gamma},
                {"worst_residual", r.worst_residual},
                {"worst_k", io::to_json(r.worst_k)},
                {"worst_ell", io::to_json(r.worst_ell)},
                {"alpha", io::to_json(alpha)}};
    a.table = io::Csv({"satisfied", "worst_ratio", "margin", "worst_residual", "worst_k", "worst_ell"});
    a.table.row() << (r.satisfied ? "true" : "false") << r.worst_ratio << r.worst_ratio - spec.gamma
                  << r.worst_residual << mode_str(r.worst_k) << mode_str(r.worst_ell);
    if (cfg.contains("resonance_tol")) {
        json res = json::array();
        for (const auto& rep : detect_resonances(omega, alpha, io::number(cfg.at("resonance_tol"), "resonance_tol"),
                                                 spec.K, spec.ell_max))
            res.push_back({{"k", io::to_json(rep.k)},
                           {"ell", io::to_json(rep.ell)},
                           {"value", rep.value},
                           {"kind", to_string(rep.kind)}});
        a.result["resonances"] = res;
    }
    return a;
}

inline Artifacts measure(const json& cfg) {
    const DiophantineSpec spec = io::dioph_spec(cfg);
    ParameterBox box;
    box.omega_lo = io::vector(io::need(cfg, "omega_lo"), "omega_lo");
    box.omega_hi = io::vector(io::need(cfg, "omega_hi"), "omega_hi");
    std::optional<LinearUnfolding> u;
    if (cfg.contains("mu_lo")) {
        box.mu_lo = io::vector(cfg.at("mu_lo"), "mu_lo");
        box.mu_hi = io::vector(io::need(cfg, "mu_hi"), "mu_hi");
        u = unfolding_from(cfg);
    }
    const int samples = io::get_or(cfg, "samples", 10000);
    const auto seed = io::get_or<std::uint64_t>(cfg, "seed", 1);
    const auto r = measure_estimate(box, u ? &*u : nullptr, spec, samples, seed, true);
    Artifacts a;
    a.result = {{"samples", r.samples}, {"hits", r.hits},       {"fraction", r.fraction},
                {"ci_low", r.ci_low},   {"ci_high", r.ci_high}, {"seed", seed}};
    if (cfg.contains("gammas")) {
        json sweep = json::array();
        for (const auto& g : cfg.at("gammas")) {
            DiophantineSpec s = spec;
            s.gamma = io::number(g, "gammas");
            const auto rg = measure_estimate(box, u ? &*u : nullptr, s, samples, seed, false);
            sweep.push_back({{"gamma", s.gamma}, {"hits", rg.hits}, {"fraction", rg.fraction}});
        }
        a.result["gamma_sweep"] = sweep;
    }
    std::vector<std::string> header{"sample"};
    for (Eigen::Index i = 0; i < box.omega_lo.size(); ++i) header.push_back("omega" + std::to_string(i + 1));
    for (Eigen::Index i = 0; i < box.mu_lo.size(); ++i) header.push_back("mu" + std::to_string(i + 1));
    header.insert(header.end(), {"in_gamma", "margin"});
    a.table = io::Csv(header);
    svg::Series in{"in Gamma_gamma", {}, {}, "#1f77b4", false, 1.5}, out{"resonant", {}, {}, "#d62728", false, 1.5};
    for (std::size_t s = 0; s < r.points.size(); ++s) {
        const auto& pt = r.points[s];
        auto& row = a.table.row() << static_cast<int>(s);
        for (Eigen::Index i = 0; i < pt.omega.size(); ++i) row << pt.omega(i);
        for (Eigen::Index i = 0; i < pt.mu.size(); ++i) row << pt.mu(i);
        row << (pt.in_gamma ? 1 : 0) << pt.margin;
        if (pt.omega.size() >= 2) {
            auto& ser = pt.in_gamma ? in : out;
            ser.x.push_back(pt.omega(0));
            ser.y.push_back(pt.omega(1));
        }
    }
    if (box.omega_lo.size() >= 2)
        a.plots.push_back({"dioph_slice", {"Diophantine set, (omega1, omega2) slice", "omega1", "omega2", false, false, {in, out}}});
    return a;
}

inline Artifacts cover(const json& cfg) {
    const FourierField base = io::field(io::need(cfg, "field"), "field");
    CoveringData cov;
    cov.l = io::get_or(cfg, "l", 2);
    cov.pairs = io::get_or<std::vector<int>>(cfg, "pairs", {});
    cov.k1 = io::get_or(cfg, "k1", 1);
    cov.sigma = IntMatrix::Identity(base.n(), base.n());
    Artifacts a;
    if (cfg.contains("k")) {
        const auto nr = normalize_resonance(io::int_vector(cfg.at("k"), "k"));
        cov.k1 = static_cast<int>(nr.k1);
        cov.sigma = nr.transform.sigma;
        Matrix s = nr.transform.sigma.cast<double>();
        a.result["sigma"] = io::to_json(s);
        a.result["sigma_det"] = nr.transform.determinant();
    }
    a.result["k1"] = cov.k1;
    const FourierField lifted = lift_to_cover(base, cov);
    const Jets j0 = lifted.get(lifted.zero_mode());
    a.result["lifted_omega"] = io::to_json(Vector(j0.f.real()));
    a.result["lifted_Omega"] = io::to_json(Matrix(j0.h_zeta.real()));
    const double roundtrip = (push_to_base(lifted, cov) - base).norm();

    // pointwise checks at deterministic sample points; the affine lift is
    // exact only when f does not depend on (y, z), so those jets are dropped
    FourierField affine = base;
    for (const auto& [k, j] : base.modes()) {
        affine.at(k).f_eta.setZero();
        affine.at(k).f_zeta.setZero();
    }
    const FourierField affine_lift = lift_to_cover(affine, cov);
    Lcg64 rng(io::get_or<std::uint64_t>(cfg, "seed", 1));
    const int samples = io::get_or(cfg, "samples", 100);
    double pif = 0, pushed = 0;
    for (int s = 0; s < samples; ++s) {
        PhasePoint pt;
        pt.x = Vector(base.n());
        pt.y = Vector(base.m());
        pt.z = Vector(base.dim_z());
        for (int i = 0; i < base.n(); ++i) pt.x(i) = rng.uniform(0, 2 * std::numbers::pi * cov.l);
        for (int i = 0; i < base.m(); ++i) pt.y(i) = rng.uniform(-1, 1);
        for (int i = 0; i < base.dim_z(); ++i) pt.z(i) = rng.uniform(-1, 1);
        const PhasePoint p1 = cover_project(pt, cov), p2 = cover_project(deck(pt, cov), cov);
        pif = std::max({pif, (p1.x - p2.x).cwiseAbs().maxCoeff(), (p1.z - p2.z).cwiseAbs().maxCoeff()});
        const FieldValue v = push_value(pt, affine_lift.evaluate(pt), cov);
        pushed = std::max(pushed, v.distance(affine.evaluate(p1)));
    }
    const auto eq = check_deck_equivariance(lifted, deck_matrix(cov, base.dim_z()), cov.l);
    a.result["roundtrip_error"] = roundtrip;
    a.result["projection_deck_defect"] = pif;
    a.result["pointwise_push_error"] = pushed;
    a.result["deck_equivariant"] = eq.ok;
    a.table = io::Csv({"check", "value"});
    a.table.row() << "roundtrip_error" << roundtrip;
    a.table.row() << "projection_deck_defect" << pif;
    a.table.row() << "pointwise_push_error" << pushed;
    a.table.row() << "deck_equivariant" << (eq.ok ? 1 : 0);
    if (cfg.contains("symmetry")) {
        const auto rep = check_sigma_reversibility(lifted, io::structure(cfg.at("symmetry")));
        a.result["sigma_reversible"] = rep.ok;
        a.result["sigma_violations"] = rep.summary();
        a.table.row() << "sigma_reversible" << (rep.ok ? 1 : 0);
    }
    return a;
}

inline Artifacts homsolve(const json& cfg) {
    const ReversingStructure rs = io::structure(io::need(cfg, "symmetry"));
    const Matrix om = io::matrix(io::need(cfg, "Omega"), "Omega");
    const Vector sigma = io::vector(cfg.contains("sigma") ? cfg.at("sigma") : io::need(cfg, "omega"), "sigma");
    const NormalLinearData nx{sigma, om, lcu(om, StructuredSpaces(rs), io::tolerances(cfg)), rs};
    const FourierField rhs = io::field(io::need(cfg, "rhs"), "rhs");
    HomologicalOptions opt;
    opt.safety = io::get_or(cfg, "safety", opt.safety);
    opt.rho = io::get_or(cfg, "rho", opt.rho);
    opt.tol = io::tolerances(cfg);
    const auto sol = solve_homological(nx, rhs, io::dioph_spec(cfg), opt);
    Artifacts a;
    const double rn = system_norm(rhs, opt.rho);
    a.result = {{"lambda1", io::to_json(sol.lambda1)},
                {"lambda2", io::to_json(sol.lambda2)},
                {"residual", sol.residual},
                {"relative_residual", rn > 0 ? sol.residual / rn : 0.0},
                {"rhs_norm", rn},
                {"psi_norm", sol.psi.norm(opt.rho)},
                {"min_divisor_ratio", sol.min_divisor_ratio},
                {"min_divisor_mode", sol.min_divisor_mode},
                {"notes", sol.notes}};
    a.table = io::Csv({"k", "psi_max_abs"});
    for (const auto& [k, j] : sol.psi.modes()) a.table.row() << mode_str(k) << j.max_abs();
    return a;
}

inline Artifacts kamstep(const json& cfg) {
    const IntegrableField X = io::integrable(io::need(cfg, "integrable"));
    const FourierField P = io::field(io::need(cfg, "perturbation"), "perturbation");
    const auto np = dominant_part(X);
    const LinearUnfolding u = lcu(np.Omega, StructuredSpaces(X.symmetry), io::tolerances(cfg));
    const auto eps = io::get_or<std::vector<double>>(cfg, "eps", {1.0});
    KamOptions opt;
    opt.grid = io::get_or(cfg, "grid", opt.grid);
    opt.K_out = io::get_or(cfg, "K_out", opt.K_out);
    opt.rho = io::get_or(cfg, "rho", opt.rho);
    opt.homological.safety = io::get_or(cfg, "safety", opt.homological.safety);
    const DiophantineSpec spec = io::dioph_spec(cfg);
    Artifacts a;
    a.table = io::Csv({"eps", "before", "after", "after_over_eps2", "homological_residual", "min_divisor_ratio"});
    json steps = json::array();
    std::vector<double> es, after;
    for (double e : eps) {
        FourierField pe = P;
        pe *= e;
        const auto [next, rep] = kam_step({X, u, pe}, spec, opt);
        steps.push_back({{"eps", e},
                         {"before", rep.before},
                         {"after", rep.after},
                         {"lambda1", io::to_json(rep.lambda1)},
                         {"lambda2", io::to_json(rep.lambda2)},
                         {"homological_residual", rep.homological_residual},
                         {"min_divisor_ratio", rep.min_divisor_ratio},
                         {"modes_kept", rep.modes_kept}});
        a.table.row() << e << rep.before << rep.after << rep.after / (e * e) << rep.homological_residual
                      << rep.min_divisor_ratio;
        es.push_back(e);
        after.push_back(rep.after);
    }
    a.result["steps"] = steps;
    a.result["omega"] = io::to_json(np.omega);
    a.result["Omega"] = io::to_json(np.Omega);
    if (es.size() >= 2) {
        a.result["slope"] = loglog_slope(es, after);
        std::vector<double> ref;
        for (double e : es) ref.push_back(after.front() * (e / es.front()) * (e / es.front()));
        a.plots.push_back({"remainder_decay",
                           {"Remainder after one step", "eps", "remainder", true, true,
                            {{"after", es, after, "#1f77b4", true}, {"slope 2", es, ref, "#999999", true}}}});
    }
    return a;
}

inline ResponseOptions response_options(const json& cfg) {
    ResponseOptions opt;
    opt.K = io::get_or(cfg, "K", opt.K);
    opt.grid = io::get_or(cfg, "grid", opt.grid);
    opt.max_iters = io::get_or(cfg, "max_iters", opt.max_iters);
    opt.tol = io::get_or(cfg, "tol", opt.tol);
    opt.spec.gamma = io::get_or(cfg, "gamma", opt.spec.gamma);
    opt.spec.tau = io::get_or(cfg, "tau", opt.spec.tau);
    return opt;
}

inline json solution_json(const ResponseSolution& s) {
    json coeffs = json::array();
    for (std::size_t i = 0; i < s.modes.size(); ++i)
        if (s.coeffs(static_cast<Eigen::Index>(i)) != 0.0)
            coeffs.push_back({{"k", s.modes[i]}, {"a", s.coeffs(static_cast<Eigen::Index>(i))}});
    return {{"mu", s.mu},
            {"omega", s.omega},
            {"residual", s.residual},
            {"grid_residual", s.grid_residual},
            {"iterations", s.iterations},
            {"floquet", io::to_json(s.floquet)},
            {"floquet_eigenvalues", io::to_json(sorted(s.floquet_eigenvalues))},
            {"floquet_type", s.floquet_type()},
            {"averaged_slope", s.averaged_slope},
            {"coefficients", coeffs}};
}

inline Artifacts response(const json& cfg) {
    const ForcedOscillator osc = io::oscillator(io::need(cfg, "oscillator"));
    const auto sol = response_solve(osc, io::number(io::need(cfg, "omega"), "omega"), io::get_or(cfg, "mu", 0.0),
                                    response_options(cfg));
    Artifacts a;
    a.result = solution_json(sol);
    a.table = io::Csv({"k1", "k2", "coefficient"});
    for (std::size_t i = 0; i < sol.modes.size(); ++i)
        a.table.row() << sol.modes[i][0] << sol.modes[i][1] << sol.coeffs(static_cast<Eigen::Index>(i));
    return a;
}

inline Artifacts sweep(const json& cfg) {
    const ForcedOscillator osc = io::oscillator(io::need(cfg, "oscillator"));
    const auto range = io::get_or<std::vector<double>>(cfg, "mu_range", {-0.5, 0.5});
    if (range.size() != 2 || !(range[0] < range[1])) io::bad("mu_range", "[lo, hi] with lo < hi");
    const int points = io::get_or(cfg, "points", 21);
    if (points < 2 || points > 10001) io::bad("points", "must lie in [2, 10001]");
    std::vector<double> mus;
    for (int i = 0; i < points; ++i) mus.push_back(range[0] + (range[1] - range[0]) * i / (points - 1));
    const auto sols = response_sweep(osc, io::number(io::need(cfg, "omega"), "omega"), mus, response_options(cfg));
    Artifacts a;
    a.table = io::Csv({"mu", "averaged_slope", "residual", "iterations", "floquet_c", "floquet_d", "ev1_re", "ev1_im",
                       "ev2_re", "ev2_im", "type"});
    json rows = json::array();
    svg::Series re1{"Re ev1", {}, {}, "#1f77b4"}, re2{"Re ev2", {}, {}, "#17becf"};
    svg::Series im1{"Im ev1", {}, {}, "#d62728"}, im2{"Im ev2", {}, {}, "#ff7f0e"};
    int changes = 0;
    for (std::size_t i = 0; i < sols.size(); ++i) {
        const auto& s = sols[i];
        const auto ev = sorted(s.floquet_eigenvalues);
        a.table.row() << s.mu << s.averaged_slope << s.residual << s.iterations << s.floquet(1, 0) << s.floquet(1, 1)
                      << ev[0].real() << ev[0].imag() << ev[1].real() << ev[1].imag() << s.floquet_type();
        json r = solution_json(s);
        r.erase("coefficients");
        rows.push_back(r);
        for (auto* ser : {&re1, &re2, &im1, &im2}) ser->x.push_back(s.mu);
        re1.y.push_back(ev[0].real());
        re2.y.push_back(ev[1].real());
        im1.y.push_back(ev[0].imag());
        im2.y.push_back(ev[1].imag());
        if (i > 0 && s.floquet_type() != sols[i - 1].floquet_type()) ++changes;
    }
    a.result["points"] = rows;
    a.result["type_changes"] = changes;
    a.plots.push_back({"floquet_sweep", {"Averaged Floquet eigenvalues along the sweep", "mu", "eigenvalue", false, false,
                                         {re1, re2, im1, im2}}});
    return a;
}

inline Artifacts dispatch(const json& cfg) {
    const std::string cmd = cfg.at("command").get<std::string>();
    if (cmd == "unfold") return unfold(cfg);
    if (cmd == "nondegen") return nondegen(cfg);
    if (cmd == "dioph") return dioph(cfg);
    if (cmd == "measure") return measure(cfg);
    if (cmd == "cover") return cover(cfg);
    if (cmd == "homsolve") return homsolve(cfg);
    if (cmd == "kamstep") return kamstep(cfg);
    if (cmd == "response") return response(cfg);
    return sweep(cfg);
}

inline json error_record(ErrorCode code, const std::string& message, const json& cfg, const std::string& digest) {
    return {{"error",
             {{"code", to_string(code)},
              {"message", message},
              {"command", io::get_or<std::string>(cfg, "command", "")},
              {"config_digest", digest},
              {"version", kVersion}}}};
}

}  // namespace detail

/// Runs an effective config; writes result.{json,csv}, plots and
/// effective_config.json into cfg["out"] (default "kamforge_out").
inline RunOutcome run(const json& cfg) {
    RunOutcome outcome;
    const std::string digest = io::config_digest(cfg);
    const fs::path out = io::get_or<std::string>(cfg, "out", "kamforge_out");
    auto fail = [&](int status, ErrorCode code, const std::string& msg) {
        outcome.status = status;
        outcome.error = detail::error_record(code, msg, cfg, digest);
        std::error_code ec;
        fs::create_directories(out, ec);
        if (!ec) {
            std::ofstream f(out / "error.json");
            if (f) {
                f << outcome.error.dump(2) << "\n";
                outcome.files.push_back(out / "error.json");
            }
        }
        return outcome;
    };
    try {
        validate_common(cfg);
    } catch (const Error& e) {
        return fail(kConfigError, e.code(), e.what());
    }
    Artifacts art;
    try {
        art = detail::dispatch(cfg);
    } catch (const Error& e) {
        const bool config = e.code() == ErrorCode::io || std::string(e.what()).rfind("config:", 0) == 0;
        return fail(config ? kConfigError : kModuleError, e.code(), e.what());
    } catch (const io::json::exception& e) {
        return fail(kConfigError, ErrorCode::invalid_argument, std::string("config: ") + e.what());
    }
    try {
        fs::create_directories(out);
        const std::string cmd = cfg.at("command").get<std::string>();
        const json meta{{"version", kVersion}, {"config_digest", digest}, {"command", cmd}};
        const std::string format = io::get_or<std::string>(cfg, "format", "json");
        if (format == "json") {
            const json doc{{"meta", meta}, {"result", art.result}};
            io::write_file(out / "result.json", doc.dump(2) + "\n");
            outcome.files.push_back(out / "result.json");
        } else {
            const std::string pre = "# kamforge " + std::string(kVersion) + " config_digest=" + digest + " command=" + cmd + "\n";
            io::write_file(out / "result.csv", art.table.str(pre));
            outcome.files.push_back(out / "result.csv");
        }
        const std::string comment = "kamforge " + std::string(kVersion) + " config_digest=" + digest;
        for (auto& [name, plot] : art.plots) {
            plot.comment = comment;
            io::write_file(out / (name + ".svg"), svg::render(plot));
            outcome.files.push_back(out / (name + ".svg"));
        }
        json echo = cfg;
        echo["_meta"] = meta;
        io::write_file(out / "effective_config.json", echo.dump(2) + "\n");
        outcome.files.push_back(out / "effective_config.json");
    } catch (const Error& e) {
        return fail(kConfigError, e.code(), e.what());
    } catch (const fs::filesystem_error& e) {
        return fail(kConfigError, ErrorCode::io, e.what());
    }
    return outcome;
}

/// Config path plus overrides to exit status; errors go to stderr as one JSON line.
inline int run_file(const fs::path& config, const Overrides& ov, std::ostream& err = std::cerr) {
    json cfg;
    try {
        cfg = effective_config(config, ov);
    } catch (const Error& e) {
        err << detail::error_record(e.code(), e.what(), json::object(), "").dump() << "\n";
        return kConfigError;
    }
    const RunOutcome r = run(cfg);
    if (r.status != 0) err << r.error.dump() << "\n";
    return r.status;
}

}  // namespace kamforge::cli
