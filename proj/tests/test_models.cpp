#include "kamforge/models.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <numbers>

using namespace kamforge;
using namespace kamforge::testing;

namespace {

const double kGolden = (std::sqrt(5.0) - 1.0) / 2.0;

Exponent ex(std::initializer_list<int> e) { return Exponent(e); }

// n = 2, m = 1, p = 1, R = diag(1, -1); variables w = (y, z1, z2)
IntegrableField sample_integrable() {
    const ReversingStructure rs(alternating_r(1));
    IntegrableField x = IntegrableField::empty(2, 1, rs);
    x.f.add(ex({0, 0, 0}), (Vector(2) << 1.0, kGolden).finished());
    x.f.add(ex({1, 0, 0}), (Vector(2) << 0.3, -0.2).finished());
    x.f.add(ex({2, 0, 0}), 0, 0.7);
    x.f.add(ex({0, 1, 0}), 1, 0.4);
    x.f.add(ex({0, 0, 2}), 0, -0.1);
    x.g.add(ex({1, 0, 1}), 0, 0.5);
    x.g.add(ex({0, 0, 1}), 0, 0.25);
    // Omega = 1.3 J2 plus y z and z^2 corrections
    x.h.add(ex({0, 0, 1}), 0, -1.3);
    x.h.add(ex({0, 1, 0}), 1, 1.3);
    x.h.add(ex({1, 0, 1}), 0, 0.6);
    x.h.add(ex({1, 1, 0}), 1, -0.2);
    x.h.add(ex({0, 2, 0}), 1, 0.9);
    x.h.add(ex({0, 1, 1}), 0, 0.3);
    return x;
}

Matrix two_block_omega() {
    Matrix om = Matrix::Zero(4, 4);
    om.block(0, 0, 2, 2) = std::sqrt(2.0) * j2();
    om.block(2, 2, 2, 2) = std::sqrt(3.0) * j2();
    return om;
}

DiophantineSpec spec_k(int K) {
    DiophantineSpec s;
    s.gamma = 1e-3;
    s.tau = 1.5;
    s.K = K;
    return s;
}

PerturbedField kam_fixture(double eps, std::uint64_t seed) {
    const ReversingStructure rs(alternating_r(2));
    const Vector omega = (Vector(2) << 1.0, kGolden).finished();
    const Matrix om = two_block_omega();
    Rng rng(seed);
    FourierField pert = reversible_part(random_field(rng, 2, 1, 2, 1), rs.R());
    pert *= eps;
    return {normal_linear(omega, 1, om, rs), lcu(om, StructuredSpaces(rs)), pert};
}

}  // namespace

TEST(Polynomial, GradientMatchesCentralDifferences) {
    const auto x = sample_integrable();
    Rng rng(1);
    for (int t = 0; t < 10; ++t) {
        const Vector w = gaussian(rng, 3, 1, 0.5);
        const Matrix gh = x.h.gradient(w);
        for (int i = 0; i < 3; ++i) {
            const double d = 1e-6;
            Vector wp = w, wm = w;
            wp(i) += d;
            wm(i) -= d;
            const Vector fd = (x.h.eval(wp) - x.h.eval(wm)) / (2 * d);
            EXPECT_LE((fd - gh.col(i)).norm(), 1e-8);
        }
    }
    EXPECT_EQ(x.h.degree(), 2);
    Polynomial bad(3, 2);
    EXPECT_THROW(bad.add(ex({1, 0}), Vector::Zero(2)), Error);
    EXPECT_THROW(bad.add(ex({1, 0, -1}), Vector::Zero(2)), Error);
}

TEST(Integrable, ReversibleAndTorusFamilyInvariant) {
    auto x = sample_integrable();
    const auto chk = check_integrable(x);
    EXPECT_TRUE(chk.ok()) << chk.reversibility_defect << " " << chk.torus_family_defect;

    auto bad = x;
    bad.g.add(ex({0, 1, 0}), 0, 0.1);  // g even in z2 breaks g(y,Rz) = -g
    EXPECT_GT(check_integrable(bad).reversibility_defect, 1e-3);

    auto drift = x;
    drift.h.add(ex({2, 0, 0}), 1, 0.1);  // h(y, 0) != 0
    EXPECT_NEAR(check_integrable(drift).torus_family_defect, 0.1, 1e-15);
}

TEST(Integrable, DominantPartIsScalingLimit) {
    const auto x = sample_integrable();
    const auto np = dominant_part(x);
    EXPECT_EQ(np.omega, (Vector(2) << 1.0, kGolden).finished());
    EXPECT_LE((np.Omega - (Matrix(2, 2) << 0, -1.3, 1.3, 0).finished()).norm(), 1e-15);

    // distance to the limit is O(eps): slope one on a log-log fit
    std::vector<double> eps{1e-2, 1e-3, 1e-4}, dist;
    for (double e : eps) dist.push_back(scaling_distance(x, e));
    EXPECT_NEAR(loglog_slope(eps, dist), 1.0, 1e-9);

    // pointwise: (D_eps)_* X at (y, z) equals the D_eps-conjugated evaluation
    const double e = 0.05;
    const auto s = scaled(x, e);
    const Vector y = (Vector(1) << 0.4).finished();
    const Vector z = (Vector(2) << -0.3, 0.8).finished();
    const FieldValue a = s.evaluate(y, z);
    const FieldValue b = x.evaluate(e * y, e * e * z);
    EXPECT_LE((a.dx - b.dx).norm(), 1e-14);
    EXPECT_LE((a.dy - b.dy / e).norm(), 1e-13);
    EXPECT_LE((a.dz - b.dz / (e * e)).norm(), 1e-12);
}

TEST(Integrable, ScalingRejectsDivergentTerms) {
    auto x = sample_integrable();
    x.g.add(ex({0, 0, 0}), 0, 0.2);  // constant drift in y
    EXPECT_THROW(dominant_part(x), Error);
    auto y = sample_integrable();
    y.h.add(ex({1, 0, 0}), 0, 0.2);  // h linear in y
    EXPECT_THROW(dominant_part(y), Error);
}

TEST(Integrable, LocalizeIsATranslation) {
    const auto x = sample_integrable();
    const Vector nu = (Vector(1) << 0.35).finished();
    const auto loc = localize(x, nu);
    EXPECT_EQ(loc.nu, nu);
    Rng rng(4);
    for (int t = 0; t < 10; ++t) {
        const Vector y = gaussian(rng, 1, 1, 0.5);
        const Vector z = gaussian(rng, 2, 1, 0.5);
        const FieldValue a = loc.evaluate(y, z);
        const FieldValue b = x.evaluate(y + nu, z);
        EXPECT_LE(a.distance(b), 1e-14);
    }
    // localised frequency is f(nu, 0)
    const auto np = dominant_part(loc);
    EXPECT_LE((np.omega - x.f.eval((Vector(3) << 0.35, 0, 0).finished())).norm(), 1e-15);
    EXPECT_TRUE(check_integrable(loc).ok());
}

TEST(KamStep, ZeroPerturbationIsAFixedPoint) {
    auto zf = kam_fixture(0.0, 1);
    const auto [next, rep] = kam_step(zf, spec_k(10));
    EXPECT_EQ(rep.before, 0.0);
    EXPECT_LE(rep.after, 1e-12);  // DFT roundoff of X's own jets
    EXPECT_EQ(rep.lambda1.norm(), 0.0);
}

TEST(KamStep, ShiftsMatchHomologicalOracle) {
    const auto zf = kam_fixture(1e-3, 2);
    const auto [next, rep] = kam_step(zf, spec_k(10));
    EXPECT_LE((rep.lambda1 + zf.perturbation.get({0, 0}).f.real()).norm(), 1e-15);
    EXPECT_LE(rep.homological_residual, 1e-10 * system_norm(zf.perturbation));
    EXPECT_GT(rep.min_divisor_ratio, 1.0);
}

TEST(KamStep, ConjugatedJetsMatchPointwiseOracle) {
    // Y = (D Phi)^{-1} Z'(Phi) evaluated directly, D Phi by central differences
    const auto zf = kam_fixture(2e-2, 3);
    const auto spec = spec_k(10);
    const auto np = dominant_part(zf.base);
    const auto sol = solve_homological({np.omega, np.Omega, zf.unfolding, zf.base.symmetry}, zf.perturbation, spec);
    Matrix A = Matrix::Zero(4, 4);
    for (Eigen::Index i = 0; i < sol.lambda2.size(); ++i) A += sol.lambda2(i) * zf.unfolding.directions[i];
    const auto [next, rep] = kam_step(zf, spec);

    auto phi = [&](const Vector& s) {
        const Vector x = s.head(2), y = s.segment(2, 1), z = s.tail(4);
        const Jets j = sol.psi.jets_at(x);
        Vector out(7);
        out << x + j.f.real(), y + j.g.real() + j.g_eta.real() * y + j.g_zeta.real() * z,
            z + j.h.real() + j.h_eta.real() * y + j.h_zeta.real() * z;
        return out;
    };
    auto zprime = [&](const Vector& s) {
        const Vector x = s.head(2), y = s.segment(2, 1), z = s.tail(4);
        const FieldValue xv = zf.base.evaluate(y, z);
        const FieldValue pv = zf.perturbation.evaluate({x, y, z});
        Vector out(7);
        out << xv.dx + pv.dx + sol.lambda1, xv.dy + pv.dy, xv.dz + pv.dz + A * z;
        return out;
    };
    Rng rng(5);
    for (int t = 0; t < 5; ++t) {
        Vector s(7);
        s.head(2) = gaussian(rng, 2, 1, 2.0);
        s.tail(5) = gaussian(rng, 5, 1, 1e-4);
        Matrix dphi(7, 7);
        for (int i = 0; i < 7; ++i) {
            Vector sp = s, sm = s;
            sp(i) += 1e-5;
            sm(i) -= 1e-5;
            dphi.col(i) = (phi(sp) - phi(sm)) / 2e-5;
        }
        const Vector direct = dphi.lu().solve(zprime(phi(s)));
        const FieldValue xv = zf.base.evaluate(s.segment(2, 1), s.tail(4));
        const FieldValue nv = next.perturbation.evaluate({s.head(2), s.segment(2, 1), s.tail(4)});
        Vector jet(7);
        jet << xv.dx + nv.dx, xv.dy + nv.dy, xv.dz + nv.dz;
        // jets are exact to first order in (y, z); |w|^2 ~ 1e-8, FD error ~ 1e-10
        EXPECT_LE((direct - jet).cwiseAbs().maxCoeff(), 1e-7) << "point " << t;
    }
}

TEST(KamStep, RemainderDropsQuadratically) {
    const double unit = remainder_norm(kam_fixture(1.0, 7).perturbation);
    std::vector<double> eps{1e-2, 3e-3, 1e-3}, after;
    for (double e : eps) {
        const auto [next, rep] = kam_step(kam_fixture(e, 7), spec_k(10));
        EXPECT_NEAR(rep.before, e * unit, 1e-14);
        EXPECT_LT(rep.after, rep.before);
        after.push_back(rep.after);
    }
    const double slope = loglog_slope(eps, after);
    EXPECT_GE(slope, 1.7);
    EXPECT_LE(slope, 2.3);
}

TEST(KamStep, RejectsCoveringFields) {
    auto zf = kam_fixture(1e-3, 1);
    zf.perturbation.set_cover_order(2);
    EXPECT_THROW(kam_step(zf, spec_k(10)), Error);
}

// --- response solutions

namespace {

ForcedOscillator linear_oscillator(double c, double eps) {
    ForcedOscillator osc;
    osc.terms.push_back({{0, 0}, false, 1, 0, -c, 0.0});
    osc.terms.push_back({{1, 1}, true, 0, 0, eps, 0.0});
    return osc;
}

ForcedOscillator duffing_oscillator(double eps) {
    ForcedOscillator osc;
    osc.terms.push_back({{0, 0}, false, 1, 0, 0.0, 1.0});   // mu z1
    osc.terms.push_back({{0, 0}, false, 3, 0, -1.0, 0.0});  // -z1^3
    osc.terms.push_back({{1, 1}, true, 0, 0, eps, 0.0});
    return osc;
}

}  // namespace

TEST(Response, LinearOracleGrid) {
    for (double c : {0.5, 2.0, 3.0})
        for (double eps : {1e-3, 1e-2, 1e-1})
            for (double dw : {-0.01, 0.0, 0.01}) {
                const double omega = kGolden + dw;
                const auto sol = response_solve(linear_oscillator(c, eps), omega, 0.0);
                const double expected = linear_response_amplitude(c, eps, omega);
                EXPECT_NEAR(sol.coefficient({1, 1}), expected, 1e-10 * std::max(1.0, std::abs(expected)));
                double rest = 0;
                for (std::size_t i = 0; i < sol.modes.size(); ++i)
                    if (sol.modes[i] != Mode{1, 1}) rest = std::max(rest, std::abs(sol.coeffs(static_cast<Eigen::Index>(i))));
                EXPECT_LE(rest, 1e-13);
                EXPECT_LE(sol.grid_residual, 1e-10);
                EXPECT_EQ(sol.floquet(1, 0), -c);
            }
}

TEST(Response, DuffingConvergesWithSpectralResidual) {
    const auto sol = response_solve(duffing_oscillator(0.05), kGolden, -0.3);
    EXPECT_LE(sol.residual, 1e-10);
    // odd torus: reconstruct and verify the equation pointwise off the grid
    const double h = 1e-4;
    Rng rng(8);
    for (int t = 0; t < 5; ++t) {
        const Vector x = gaussian(rng, 2, 1, 2.0);
        auto u = [&](double tau) {
            double v = 0;
            for (std::size_t i = 0; i < sol.modes.size(); ++i)
                v += sol.coeffs(static_cast<Eigen::Index>(i)) *
                     std::sin(sol.modes[i][0] * (x(0) + tau) + sol.modes[i][1] * (x(1) + kGolden * tau));
            return v;
        };
        const double d1 = (u(h) - u(-h)) / (2 * h);
        const double d2 = (u(h) - 2 * u(0) + u(-h)) / (h * h);
        const auto hv = duffing_oscillator(0.05).eval(x, u(0), d1, -0.3);
        EXPECT_NEAR(d2, hv[0], 1e-5);  // truncation beyond K plus FD error
        // odd in x: u(-x) = -u(x)
        double um = 0;
        for (std::size_t i = 0; i < sol.modes.size(); ++i)
            um += sol.coeffs(static_cast<Eigen::Index>(i)) * std::sin(-sol.modes[i][0] * x(0) - sol.modes[i][1] * x(1));
        EXPECT_NEAR(um, -u(0), 1e-15);
    }
}

TEST(Response, SweepCrossesFromEllipticToHyperbolic) {
    std::vector<double> mus;
    for (int i = 0; i <= 20; ++i) mus.push_back(-0.5 + 0.05 * i);
    const auto sweep = response_sweep(duffing_oscillator(0.02), kGolden, mus);
    ASSERT_EQ(sweep.size(), 21u);
    int changes = 0;
    for (std::size_t i = 0; i < sweep.size(); ++i) {
        EXPECT_LE(sweep[i].residual, 1e-10);
        EXPECT_EQ(sweep[i].averaged_slope, mus[i]);
        if (i > 0 && sweep[i].floquet_type() != sweep[i - 1].floquet_type()) ++changes;
    }
    EXPECT_EQ(sweep.front().floquet_type(), "elliptic");
    EXPECT_EQ(sweep.back().floquet_type(), "hyperbolic");
    EXPECT_EQ(changes, 1);
    // averaged entry is mu - 3 <z1^2>
    for (const auto& s : sweep) {
        double m2 = 0;
        for (Eigen::Index i = 0; i < s.coeffs.size(); ++i) m2 += 0.5 * s.coeffs(i) * s.coeffs(i);
        EXPECT_NEAR(s.floquet(1, 0), s.mu - 3 * m2, 1e-12);
    }
}

TEST(Response, RejectsNonReversibleAndResonant) {
    ForcedOscillator bad;
    bad.terms.push_back({{1, 0}, false, 0, 0, 1.0, 0.0});  // cos forcing is even in x
    EXPECT_THROW(response_solve(bad, kGolden, 0.0), Error);
    try {
        response_solve(linear_oscillator(1.0, 0.1), 0.5, 0.0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::small_divisor);
    }
}
