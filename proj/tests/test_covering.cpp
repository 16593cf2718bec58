#include "kamforge/covering.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <numeric>

using namespace kamforge;
using namespace kamforge::testing;

namespace {

const double kTwoPi = 2.0 * std::numbers::pi;

CoveringData two_fold() {
    CoveringData cov;
    cov.l = 2;
    cov.pairs = {0, 1};
    cov.k1 = 1;
    cov.sigma = IntMatrix::Identity(2, 2);
    return cov;
}

// The lifted family as displayed: Omega(mu) - i Id written in real form.
Matrix displayed_hat(double mu1, double mu2) {
    return (Matrix(4, 4) << 0, -mu1, 1, 0,
                            mu1, 0, 0, 1,
                            -mu2, 0, 0, -mu1,
                            0, -mu2, mu1, 0).finished();
}

FourierField example_field(double mu1, double mu2, double omega2) {
    const Vector omega = (Vector(2) << 2.0, omega2).finished();
    return normal_linear_field(omega, 3, example_omega(mu1, mu2));
}

PhasePoint random_point(Rng& rng, int n, int m, int d, double x_range) {
    std::uniform_real_distribution<double> u(0.0, x_range);
    PhasePoint pt;
    pt.x = Vector::Zero(n);
    for (int i = 0; i < n; ++i) pt.x(i) = u(rng);
    pt.y = gaussian(rng, m, 1);
    pt.z = gaussian(rng, d, 1);
    return pt;
}

std::int64_t gcd_all(const IntVector& k) {
    std::int64_t g = 0;
    for (Eigen::Index i = 0; i < k.size(); ++i) g = std::gcd(g, k(i));
    return g;
}

}  // namespace

TEST(Unimodular, AlreadyNormalIsIdentity) {
    const IntVector k = (IntVector(3) << 5, 0, 0).finished();
    const auto r = normalize_resonance(k);
    EXPECT_EQ(r.k1, 5);
    EXPECT_EQ(r.transform.sigma, IntMatrix::Identity(3, 3));
}

TEST(Unimodular, TwoThreeAndFourSix) {
    Rng rng(1);
    for (const auto& [k, g] : std::vector<std::pair<IntVector, std::int64_t>>{
             {(IntVector(2) << 2, 3).finished(), 1}, {(IntVector(2) << 4, 6).finished(), 2}}) {
        const auto r = normalize_resonance(k);
        EXPECT_EQ(r.k1, g);
        EXPECT_EQ(r.transform.determinant(), 1);
        const IntVector kk = r.transform.apply_covector(k);
        EXPECT_EQ(kk(0), g);
        EXPECT_EQ(kk(1), 0);
        for (int t = 0; t < 1000; ++t) {
            const Vector w = gaussian(rng, 2, 1);
            const double before = k.cast<double>().dot(w);
            const double after = kk.cast<double>().dot(r.transform.apply_frequency(w));
            ASSERT_NEAR(before, after, 1e-12 * (1 + std::abs(before)) * 10);
        }
    }
}

TEST(Unimodular, RandomVectorsKeepGcdAndDeterminant) {
    Rng rng(2);
    std::uniform_int_distribution<int> u(-40, 40);
    for (int t = 0; t < 300; ++t) {
        const int n = 1 + t % 4;
        IntVector k(n);
        do {
            for (int i = 0; i < n; ++i) k(i) = u(rng);
        } while (k.cwiseAbs().maxCoeff() == 0);
        const auto r = normalize_resonance(k);
        const IntVector kk = r.transform.apply_covector(k);
        if (n > 1) {
            EXPECT_EQ(r.k1, gcd_all(k));
            EXPECT_EQ(std::abs(r.transform.determinant()), 1);
            EXPECT_EQ(kk.tail(n - 1).cwiseAbs().sum(), 0);
        }
        EXPECT_EQ(kk(0), r.k1);
        EXPECT_EQ(r.transform.sigma * r.transform.sigma_inv, IntMatrix::Identity(n, n));
    }
}

TEST(Unimodular, ZeroVectorRejected) { EXPECT_THROW(normalize_resonance(IntVector::Zero(3)), Error); }

TEST(VanDerPol, ZeroRateIsIdentity) {
    Rng rng(3);
    const FourierField fld = reversible_part(random_field(rng, 2, 1, 2, 3), alternating_r(2));
    const FourierField out = vanderpol(fld, {1}, 0);
    EXPECT_EQ((out - fld).norm(), 0.0);
}

TEST(VanDerPol, ResonantBlockLosesItsFrequency) {
    const double w1 = 0.8;
    const int k1 = 3;
    Matrix om = Matrix::Zero(4, 4);
    om.block(0, 0, 2, 2) = 1.7 * j2();
    om.block(2, 2, 2, 2) = k1 * w1 * j2().transpose();  // alpha_2 = k1 w1
    const FourierField fld = normal_linear_field((Vector(2) << w1, 0.3).finished(), 0, om);
    const FourierField out = vanderpol(fld, {1}, k1);
    const Matrix hz = out.get({0, 0}).h_zeta.real();
    EXPECT_LE(hz.block(2, 2, 2, 2).norm(), 1e-15);
    EXPECT_LE((hz.block(0, 0, 2, 2) - 1.7 * j2()).norm(), 1e-15);
    EXPECT_EQ(out.modes().size(), 1u);
}

TEST(VanDerPol, SpectrumShiftsByRate) {
    const double w1 = 1.3, rho = -0.2, b = 2.1;
    const int k1 = 2;
    Matrix om = Matrix::Zero(2, 2);
    om << rho, -b, b, rho;  // eigenvalues rho +- i b
    ASSERT_TRUE(floquet_compatible(om, {0}));
    const FourierField out = vanderpol(normal_linear_field((Vector(1) << w1).finished(), 0, om), {0}, k1);
    const auto ev = eigenvalues(out.get({0}).h_zeta.real());
    ASSERT_EQ(ev.size(), 2u);
    for (const auto& e : ev) {
        EXPECT_NEAR(e.real(), rho, 1e-14);
        EXPECT_NEAR(std::abs(e.imag()), std::abs(b - k1 * w1), 1e-14);
    }
}

TEST(VanDerPol, InversePairRoundTrip) {
    Rng rng(4);
    for (int t = 0; t < 20; ++t) {
        const FourierField fld = reversible_part(random_field(rng, 2, 1, 2, 3), alternating_r(2));
        const FourierField back = vanderpol(vanderpol(fld, {0}, 2), {0}, -2);
        EXPECT_LE((back - fld).norm(), 1e-12 * fld.norm());
    }
}

TEST(VanDerPol, PairOutOfRange) {
    FourierField fld(1, 0, 1, 2);
    EXPECT_THROW(vanderpol(fld, {1}, 1), Error);
}

TEST(Lift, CoveringExampleFloquetMatrix) {
    Rng rng(5);
    for (int t = 0; t < 20; ++t) {
        std::uniform_real_distribution<double> u(-0.5, 0.5);
        const double mu1 = t == 0 ? 0.0 : u(rng), mu2 = t == 0 ? 0.0 : u(rng);
        const FourierField lifted = lift_to_cover(example_field(mu1, mu2, 0.61), two_fold());
        ASSERT_EQ(lifted.modes().size(), 1u);
        const Jets j = lifted.get({0, 0});
        EXPECT_EQ(j.h_zeta.imag().norm(), 0.0);
        EXPECT_LE((j.h_zeta.real() - displayed_hat(mu1, mu2)).cwiseAbs().maxCoeff(), 1e-15);
        // hat omega_1 = 2 on xi1 in R/4piZ: period 2pi, twice the base period pi
        EXPECT_EQ(j.f(0).real(), 2.0);
        EXPECT_EQ(lifted.cover_order(), 2);
    }
}

TEST(Lift, DeckCommutesWithProjection) {
    Rng rng(6);
    const auto cov = two_fold();
    for (int t = 0; t < 100; ++t) {
        const PhasePoint pt = random_point(rng, 2, 3, 4, 2 * kTwoPi);
        const PhasePoint a = cover_project(deck(pt, cov), cov);
        const PhasePoint b = cover_project(pt, cov);
        double dx = std::abs(a.x(0) - b.x(0));
        dx = std::min(dx, kTwoPi - dx);
        EXPECT_LE(dx, 1e-12);
        EXPECT_EQ(a.x(1), b.x(1));
        EXPECT_EQ(a.y, b.y);
        EXPECT_LE((a.z - b.z).cwiseAbs().maxCoeff(), 1e-12 * (1 + pt.z.norm()));
    }
    // F^l = Id
    const PhasePoint pt = random_point(rng, 2, 3, 4, 2 * kTwoPi);
    const PhasePoint ff = deck(deck(pt, cov), cov);
    EXPECT_NEAR(ff.x(0), pt.x(0), 1e-12);
    EXPECT_LE((ff.z - pt.z).norm(), 1e-15);
}

TEST(Lift, JetRoundTrip) {
    Rng rng(7);
    const auto cov = two_fold();
    for (int t = 0; t < 100; ++t) {
        const FourierField fld = reversible_part(random_field(rng, 2, 1, 2, 2), example_rhat());
        const FourierField back = push_to_base(lift_to_cover(fld, cov), cov);
        EXPECT_LE((back - fld).norm(), 1e-12 * fld.norm());
    }
}

TEST(Lift, PointwisePushForward) {
    // affine fields with f independent of (y, z) push forward exactly
    Rng rng(8);
    const auto cov = two_fold();
    for (int t = 0; t < 10; ++t) {
        FourierField fld = reversible_part(random_field(rng, 2, 1, 2, 2), example_rhat());
        const FourierField copy = fld;
        for (const auto& [k, j] : copy.modes()) {
            fld.at(k).f_eta.setZero();
            fld.at(k).f_zeta.setZero();
        }
        const FourierField lifted = lift_to_cover(fld, cov);
        for (int s = 0; s < 10; ++s) {
            const PhasePoint pt = random_point(rng, 2, 1, 4, 2 * kTwoPi);
            const FieldValue pushed = push_value(pt, lifted.evaluate(pt), cov);
            const FieldValue base = fld.evaluate(cover_project(pt, cov));
            EXPECT_LE(pushed.distance(base), 1e-12 * (1 + fld.norm()) * (1 + pt.z.norm()));
        }
    }
}

TEST(Lift, LiftedFieldIsDeckEquivariant) {
    Rng rng(9);
    const auto cov = two_fold();
    const FourierField fld = reversible_part(random_field(rng, 2, 1, 2, 2), example_rhat());
    const FourierField lifted = lift_to_cover(fld, cov);
    const auto rep = check_deck_equivariance(lifted, deck_matrix(cov, 4), 2);
    EXPECT_TRUE(rep.ok) << rep.summary();
    EXPECT_LE((deck_matrix(cov, 4) + Matrix::Identity(4, 4)).norm(), 1e-15);
}

TEST(Lift, RejectsBadCoverings) {
    auto cov = two_fold();
    cov.k1 = 2;
    EXPECT_THROW(lift_to_cover(example_field(0, 0, 0.6), cov), Error);
    cov = two_fold();
    cov.l = 1;
    EXPECT_THROW(lift_to_cover(example_field(0, 0, 0.6), cov), Error);
}

TEST(Lift, PushRejectsNonEquivariantField) {
    const auto cov = two_fold();
    FourierField cover(2, 0, 1, 4);
    cover.set_cover_order(2);
    cover.at({1, 0}).f(0) = 1.0;  // a half-frequency term in f
    EXPECT_THROW(push_to_base(cover, cov), Error);
}

TEST(SigmaReversibility, CoveringExamplePasses) {
    const ReversingStructure rs(example_rhat(), Twist{-Matrix::Identity(4, 4), 2});
    for (double mu2 : {0.0, 0.3, -0.2}) {
        const FourierField lifted = lift_to_cover(example_field(0.1, mu2, 0.61), two_fold());
        const auto rep = check_sigma_reversibility(lifted, rs);
        EXPECT_TRUE(rep.ok) << rep.summary();
    }
}

TEST(SigmaReversibility, OddTermInFIsLocated) {
    const ReversingStructure rs(example_rhat(), Twist{-Matrix::Identity(4, 4), 2});
    FourierField lifted = lift_to_cover(example_field(0.0, 0.0, 0.61), two_fold());
    lifted.at({0, 0}).f_zeta(0, 3) = 0.25;  // f depends linearly on zeta_4, odd in z_II
    const auto rep = check_sigma_reversibility(lifted, rs);
    EXPECT_FALSE(rep.ok);
    bool found = false;
    for (const auto& v : rep.violations)
        if (v.check == "z_II parity" && v.jet == "f_zeta" && v.k == Mode{0, 0}) {
            found = true;
            EXPECT_NEAR(v.defect, 0.5, 1e-15);
        }
    EXPECT_TRUE(found) << rep.summary();
    // the term itself is G-reversible: only the covering checks see it
    EXPECT_TRUE(check_reversibility(lifted, rs.R()).ok);
}

TEST(SigmaReversibility, NoTwistReducesToReversibility) {
    Rng rng(10);
    const ReversingStructure rs(alternating_r(2));
    const FourierField good = reversible_part(random_field(rng, 2, 1, 2, 2), alternating_r(2));
    EXPECT_TRUE(check_sigma_reversibility(good, rs).ok);
    const FourierField bad = random_field(rng, 2, 1, 2, 2);
    const auto a = check_sigma_reversibility(bad, rs);
    const auto b = check_reversibility(bad, rs.R());
    EXPECT_FALSE(a.ok);
    EXPECT_EQ(a.violations.size(), b.violations.size());
}
