#include "kamforge/nondegen.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

using namespace kamforge;
using namespace kamforge::testing;

namespace {

// Kernel of a small matrix by brute force: columns e_i combinations checked directly.
bool kernel_contains(const Matrix& m, const Vector& v) { return (m * v).norm() <= 1e-14 * (1 + v.norm()); }

FamilyAtPoint covering_family(const ReversingStructure& rs) {
    FamilyAtPoint fam;
    fam.omega0 = (Vector(2) << 2.0, 0.5 * (std::sqrt(5.0) - 1.0)).finished();
    fam.Omega0 = example_omega(0, 0) - blockdiag_j2t(2);
    fam.d_omega = Matrix::Zero(2, 4);
    fam.d_omega.leftCols(2) = Matrix::Identity(2, 2);
    fam.d_Omega = {Matrix::Zero(4, 4), Matrix::Zero(4, 4), example_omega(1, 0) - example_omega(0, 0),
                   example_omega(0, 1) - example_omega(0, 0)};
    fam.symmetry = rs;
    return fam;
}

}  // namespace

TEST(BhtOne, PaperCaseHolds) {
    const ReversingStructure rs(diag({-1, 1}));
    const Matrix om = (Matrix(2, 2) << 0, 1, 0, 0).finished();
    ASSERT_TRUE(kernel_contains(om, Vector::Unit(2, 0)));  // ker = span(e1) = Fix(-R)
    const auto rec = bht_i(om, rs);
    EXPECT_EQ(rec.verdict, Verdict::holds);
    EXPECT_FALSE(rec.witness.has_value());
    EXPECT_NEAR(rec.margin, 1.0, 1e-15);
}

TEST(BhtOne, ConstructedFailureWithWitness) {
    const ReversingStructure rs(diag({-1, 1}));
    const Matrix om = (Matrix(2, 2) << 0, 0, 1, 0).finished();
    ASSERT_TRUE(kernel_contains(om, Vector::Unit(2, 1)));  // ker = span(e2) = Fix(R)
    const auto rec = bht_i(om, rs);
    EXPECT_EQ(rec.verdict, Verdict::fails);
    ASSERT_TRUE(rec.witness.has_value());
    EXPECT_LE((*rec.witness - Vector::Unit(2, 1)).norm(), 1e-15);
}

TEST(BhtOne, InvertibleHoldsForAnyInvolution) {
    Rng rng(1);
    for (int p = 1; p <= 3; ++p) {
        // a non-diagonal involution: conjugate diag form by a random invertible matrix
        const Matrix a = random_near_identity(rng, 2 * p, 0.3);
        const ReversingStructure rs(a * alternating_r(p) * a.inverse());
        Matrix om;
        do {
            om = random_minus(rng, rs);
        } while (std::abs(om.determinant()) < 1e-3);
        EXPECT_EQ(bht_i(om, rs).verdict, Verdict::holds) << "p = " << p;
    }
}

TEST(BhtOne, RejectsNonReversibleMatrix) {
    const ReversingStructure rs(diag({-1, 1}));
    EXPECT_THROW(bht_i(Matrix::Identity(2, 2), rs), Error);
}

TEST(BhtOne, UpperSemicontinuityAtReportedMargin) {
    Rng rng(2);
    const ReversingStructure rs(alternating_r(2));
    // singular but with kernel inside Fix(-R)
    Matrix om = Matrix::Zero(4, 4);
    om(1, 0) = 1.0;  // e1 -> e2
    om(2, 3) = 0.5;  // e4 -> e3
    om(3, 2) = 0.7;  // e3 -> e4; kernel span(e2) in Fix(-R)
    ASSERT_TRUE(check_membership(om, rs, Parity::minus).member);
    const auto rec = bht_i(om, rs);
    ASSERT_EQ(rec.verdict, Verdict::holds);
    ASSERT_GT(rec.stable_radius, 0.0);
    for (int trial = 0; trial < 50; ++trial) {
        Matrix e = random_minus(rng, rs);
        e /= op_norm(e);
        for (double frac : {0.1, 0.5, 0.99}) {
            const auto perturbed = bht_i(om + frac * rec.stable_radius * e, rs);
            EXPECT_EQ(perturbed.verdict, Verdict::holds);
            EXPECT_GE(perturbed.margin, rec.margin - frac * rec.stable_radius - 1e-12);
        }
    }
}

TEST(BhtOne, InvariantUnderEquivariantConjugation) {
    Rng rng(3);
    const ReversingStructure rs(alternating_r(2));
    const Matrix fails = (Matrix(4, 4) << 0, 0, 0, 0,
                                          1, 0, 0, 0,
                                          0, 0, 0, 1,
                                          0, 0, 0, 0).finished();
    ASSERT_TRUE(check_membership(fails, rs, Parity::minus).member);
    const Matrix holds = (Matrix(4, 4) << 0, 0, 0, 0,
                                          1, 0, 0, 0,
                                          0, 0, 0, 0,
                                          0, 0, 1, 0).finished();
    for (int trial = 0; trial < 10; ++trial) {
        const Matrix a = random_plus_near_identity(rng, rs, 0.3);
        const Matrix ai = a.inverse();
        EXPECT_EQ(bht_i(a * fails * ai, rs).verdict, bht_i(fails, rs).verdict);
        EXPECT_EQ(bht_i(a * holds * ai, rs).verdict, bht_i(holds, rs).verdict);
    }
    EXPECT_EQ(bht_i(fails, rs).verdict, Verdict::fails);
    EXPECT_EQ(bht_i(holds, rs).verdict, Verdict::holds);
}

TEST(BhtOne, TwistRestrictsToJointFixedSpace) {
    // Omega0 = E13 + E24 vanishes on e1 in Fix(R); S = -I removes all of B+
    const ReversingStructure plain(example_rhat());
    const ReversingStructure twisted(example_rhat(), Twist{-Matrix::Identity(4, 4), 2});
    const Matrix om = example_omega(0, 0) - blockdiag_j2t(2);
    EXPECT_EQ(bht_i(om, plain).verdict, Verdict::fails);
    EXPECT_EQ(bht_i(om, twisted).verdict, Verdict::holds);
    EXPECT_EQ(twisted.b_plus().cols(), 0);
}

TEST(BhtTwo, LcuFamilyIsTransverse) {
    Rng rng(4);
    for (int p = 1; p <= 3; ++p) {
        const ReversingStructure rs(alternating_r(p));
        StructuredSpaces sp(rs);
        for (int trial = 0; trial < 5; ++trial) {
            const Matrix om = random_minus(rng, rs);
            const auto u = lcu(om, sp);
            const Vector omega = Vector::Random(2);
            const auto rec = bht_ii(unfolding_family(omega, u, rs));
            EXPECT_EQ(rec.verdict, Verdict::holds) << "p = " << p;
            EXPECT_EQ(rec.deficit, 0);
        }
        for (auto kind : {ClosedFormKind::p_fold_resonance, ClosedFormKind::nilpotent_zero}) {
            const auto cf = lcu_closed_form(kind, p);
            const ReversingStructure rcf(cf.R);
            EXPECT_EQ(bht_ii(unfolding_family(Vector::Ones(2), cf.unfolding, rcf)).verdict, Verdict::holds);
        }
    }
}

TEST(BhtTwo, ConstantFamilyDeficitIsCodimension) {
    const auto cf = lcu_closed_form(ClosedFormKind::p_fold_resonance, 3);
    const ReversingStructure rs(cf.R);
    FamilyAtPoint fam;
    fam.omega0 = Vector::Ones(2);
    fam.Omega0 = cf.unfolding.base;
    fam.d_omega = Matrix::Identity(2, 2);
    fam.d_Omega = {Matrix::Zero(6, 6), Matrix::Zero(6, 6)};
    fam.symmetry = rs;
    const auto rec = bht_ii(fam);
    EXPECT_EQ(rec.verdict, Verdict::fails);
    EXPECT_EQ(rec.deficit, 3);
}

TEST(BhtTwo, ForcedOscillatorCondition) {
    const Vector omega = (Vector(2) << 1.0, 0.5 * (std::sqrt(5.0) - 1.0)).finished();
    EXPECT_EQ(bht_ii(forced_oscillator_family(omega, 0.0, 1.0)).verdict, Verdict::holds);
    const auto flat = bht_ii(forced_oscillator_family(omega, 0.0, 0.0));
    EXPECT_EQ(flat.verdict, Verdict::fails);
    EXPECT_EQ(flat.deficit, 1);
    // every nonzero orbit in this 2-dim gl- has codimension 1
    EXPECT_EQ(bht_ii(forced_oscillator_family(omega, -2.0, 0.0)).deficit, 1);
    EXPECT_EQ(bht_ii(forced_oscillator_family(omega, -2.0, 0.3)).verdict, Verdict::holds);
}

TEST(BhtTwo, ValidatesFamily) {
    const Vector omega = Vector::Ones(2);
    auto fam = forced_oscillator_family(omega, 0.0, 1.0);
    fam.d_Omega.pop_back();
    EXPECT_THROW(bht_ii(fam), Error);
    auto fam2 = forced_oscillator_family(omega, 0.0, 1.0);
    fam2.d_Omega[2] = Matrix::Identity(2, 2);
    EXPECT_THROW(bht_ii(fam2), Error);
    auto fam3 = forced_oscillator_family(Vector::Ones(3).head(2), 0.0, 1.0);
    fam3.d_omega = Matrix::Zero(2, 1);
    EXPECT_THROW(bht_ii(fam3), Error);
}

TEST(CorollaryGate, PlainOnRotation) {
    const ReversingStructure rs(diag({1, -1}));
    FamilyAtPoint fam;
    fam.omega0 = Vector::Ones(1);
    fam.Omega0 = j2();
    fam.d_omega = (Matrix(1, 2) << 1, 0).finished();
    fam.d_Omega = {Matrix::Zero(2, 2), j2()};
    fam.symmetry = rs;
    const auto g = corollary_gate(fam, CorollaryCase::plain);
    EXPECT_EQ(g.hypothesis.verdict, Verdict::holds);
    EXPECT_EQ(g.verdict, Verdict::holds);
}

TEST(CorollaryGate, ZeroKernelOnForcedOscillator) {
    const Vector omega = (Vector(2) << 1.0, 0.5 * (std::sqrt(5.0) - 1.0)).finished();
    const auto g = corollary_gate(forced_oscillator_family(omega, 0.0, 1.0), CorollaryCase::zero_kernel);
    EXPECT_EQ(g.hypothesis.verdict, Verdict::holds);
    EXPECT_EQ(g.verdict, Verdict::holds);
    EXPECT_EQ(corollary_gate(forced_oscillator_family(omega, 0.0, 1.0), CorollaryCase::plain).verdict,
              Verdict::fails);
}

TEST(CorollaryGate, CoveringExampleVerdicts) {
    // kernel of E13 + E24 is span(e1, e2), by direct inspection
    const Matrix base = example_omega(0, 0) - blockdiag_j2t(2);
    ASSERT_TRUE(kernel_contains(base, Vector::Unit(4, 0)));
    ASSERT_TRUE(kernel_contains(base, Vector::Unit(4, 1)));
    const std::vector<Matrix> cx{blockdiag_j2t(2)};

    // S = diag(I2, -I2): e1 in Fix(S) is in the kernel
    const Matrix s_block = diag({1, 1, -1, -1});
    const auto g1 = corollary_gate(covering_family(ReversingStructure(example_rhat(), Twist{s_block, 2}, cx)),
                                   CorollaryCase::covering_l2);
    EXPECT_EQ(g1.hypothesis.verdict, Verdict::fails);
    EXPECT_EQ(g1.verdict, Verdict::fails);

    // ker = span(e1, e2) is not inside Fix(-R) = span(e2, e3)
    const auto g2 = corollary_gate(covering_family(ReversingStructure(example_rhat(), std::nullopt, cx)),
                                   CorollaryCase::zero_kernel);
    EXPECT_EQ(g2.hypothesis.verdict, Verdict::fails);
    EXPECT_EQ(g2.verdict, Verdict::fails);

    // the deck transformation of the 2:1 cover is S = -I4, with Fix(S) = {0}
    const auto g3 = corollary_gate(
        covering_family(ReversingStructure(example_rhat(), Twist{-Matrix::Identity(4, 4), 2}, cx)),
        CorollaryCase::covering_l2);
    EXPECT_EQ(g3.hypothesis.verdict, Verdict::holds);
    EXPECT_EQ(g3.transversality.verdict, Verdict::holds);
    EXPECT_EQ(g3.verdict, Verdict::holds);
}

TEST(CorollaryGate, CoveringCaseNeedsTwist) {
    const Vector omega = Vector::Ones(2);
    EXPECT_THROW(corollary_gate(forced_oscillator_family(omega, 0.0, 1.0), CorollaryCase::covering_l2), Error);
}
