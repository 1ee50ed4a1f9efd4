#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace qbt;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no qbt::Error thrown";
    return ErrorCode::SolverFailure;
}

Index count_above(const Vec& v, double rel) {
    if (v.size() == 0 || v(0) <= 0) return 0;
    Index k = 0;
    while (k < v.size() && v(k) > rel * v(0)) ++k;
    return k;
}

ReducedModel reduce(const DescriptorSystem& s, double tol, bool ablate = false) {
    const auto w = separate(s);
    auto g = compute_gramians(s, w);
    if (ablate) g = ablate_mixed_gramians(g);
    return balance_and_truncate(s, w, g, TruncationCriterion::by_tol(tol));
}

}  // namespace

TEST(Reduce, IllustrativeHankelValues) {
    const auto s = bench::gen_illustrative();
    const auto w = separate(s);
    const auto h = hankel_values(s, w, compute_gramians(s, w));
    // sigma^2 = eig(P1 Q1) with P1 = ones/2, Q1 = [[1.25,.5],[.5,.5]]: 1.375.
    // theta^2 = eig(P2 Q2) with Q2 = [[.5,.5],[.5,5]]: (7 +- sqrt 40) / 2.
    ASSERT_GE(h.sigma.size(), 1);
    EXPECT_NEAR(h.sigma(0), std::sqrt(1.375), 1e-13);
    EXPECT_EQ(count_above(h.sigma, 1e-12), 1);
    ASSERT_EQ(h.theta.size(), 2);
    EXPECT_NEAR(h.theta(0), std::sqrt((7 + std::sqrt(40.0)) / 2), 1e-13);
    EXPECT_NEAR(h.theta(1), std::sqrt((7 - std::sqrt(40.0)) / 2), 1e-13);
}

TEST(Reduce, IllustrativeOrders) {
    const auto rom = reduce(bench::gen_illustrative(), 1e-8);
    EXPECT_EQ(rom.r_p, 1);
    EXPECT_EQ(rom.r_i, 2);
    EXPECT_EQ(rom.r(), 3);
    EXPECT_TRUE(rom.record.cleaned);
    EXPECT_TRUE(rom.warnings.empty());
    EXPECT_EQ(rom.system.tags.at("name"), "illustrative-rom");
    EXPECT_EQ(rom.system.tags.at("reduced_from_n"), "4");
    EXPECT_EQ(rom.record.sigma_kept().size(), 1);
    EXPECT_EQ(rom.record.theta_dropped().size(), 0);
}

TEST(Reduce, AblationDropsMixedRank) {
    const auto rom = reduce(bench::gen_illustrative(), 1e-8, true);
    // Without Q12 only Q22 = diag(0, 4) observes the improper part.
    EXPECT_EQ(rom.r_p, 1);
    EXPECT_EQ(rom.r_i, 1);
}

TEST(Reduce, ReducedGramiansAreBalanced) {
    const auto s = bench::gen_illustrative();
    const auto rom = reduce(s, 1e-8);
    const auto rw = separate(rom.system);
    const auto rg = compute_gramians(rom.system, rw);
    const auto h = hankel_values(rom.system, rw, rg);
    EXPECT_NEAR(h.sigma(0), rom.record.sigma(0), 1e-12);
    EXPECT_LT((h.theta - rom.record.theta.head(2)).norm(), 1e-12);
    EXPECT_EQ(rom.system.E(0, 0), 1.0);
    EXPECT_EQ(rom.system.A.bottomRightCorner(2, 2), Mat::Identity(2, 2));
}

TEST(Reduce, TruncatedControllabilityGramianIsDiagonal) {
    for (std::uint64_t seed : {3u, 4u}) {
        const auto [s, gt] = bench::gen_random_wcf(8, 4, 2, seed);
        const auto w = separate(s);
        const auto g = compute_gramians(s, w);
        const auto rom = balance_and_truncate(s, w, g, TruncationCriterion::by_order(3));
        ASSERT_EQ(rom.r_p, 3);
        const Index rp = rom.r_p, ri = rom.r_i;
        // A11 S1 + S1 A11^T + B1 B1^T = 0 with S1 = diag(sigma_1..3).
        const Mat A11 = rom.system.A.topLeftCorner(rp, rp);
        const Mat B1 = rom.system.B.topRows(rp);
        const Mat S1 = rom.record.sigma.head(rp).asDiagonal();
        EXPECT_LT((A11 * S1 + S1 * A11.transpose() + B1 * B1.transpose()).norm(), 1e-10 * S1.norm()) << seed;
        // Improper: sum_k N^k B2 B2^T N^kT = diag(theta).
        const Mat N = rom.system.E.bottomRightCorner(ri, ri);
        const Mat B2 = rom.system.B.bottomRows(ri);
        Mat P2 = Mat::Zero(ri, ri), L = B2;
        for (int k = 0; k < ri; ++k, L = N * L) P2 += L * L.transpose();
        const Mat T = rom.record.theta.head(ri).asDiagonal();
        EXPECT_LT((P2 - T).norm(), 1e-10 * T.norm()) << seed;
    }
}

TEST(Reduce, NothingObservable) {
    auto s = bench::gen_illustrative();
    s.output.M[0].setZero();
    const auto w = separate(s);
    const auto g = compute_gramians(s, w);
    const auto h = hankel_values(s, w, g);
    EXPECT_TRUE(h.sigma.size() == 0 || h.sigma(0) == 0.0);
    EXPECT_EQ(code_of([&] { balance_and_truncate(s, w, g, TruncationCriterion::by_tol(1e-8)); }),
              ErrorCode::NothingObservable);
}

TEST(Reduce, EquivalenceInvariance) {
    std::mt19937_64 rng(99);
    std::normal_distribution<double> nd;
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        const auto [s, gt] = bench::gen_random_wcf(7, 5, 2, 200 + seed);
        const auto w = separate(s);
        const auto h = hankel_values(s, w, compute_gramians(s, w));
        const Index n = s.n();
        Mat S = Mat::Identity(n, n), Z = Mat::Identity(n, n);
        for (Index i = 0; i < n * n; ++i) S(i) += 0.3 * nd(rng), Z(i) += 0.3 * nd(rng);
        DescriptorSystem t = s;
        t.E = S * s.E * Z;
        t.A = S * s.A * Z;
        t.B = S * s.B;
        t.output.M[0] = detail::sym(Z.transpose() * s.output.M[0] * Z);
        const auto wt = separate(t);
        const auto ht = hankel_values(t, wt, compute_gramians(t, wt));
        const Index k = count_above(h.sigma, 1e-8);
        ASSERT_GT(k, 0);
        EXPECT_LT((h.sigma.head(k) - ht.sigma.head(k)).norm(), 1e-9 * h.sigma(0)) << seed;
        const Index ki = count_above(h.theta, 1e-8);
        EXPECT_LT((h.theta.head(ki) - ht.theta.head(ki)).norm(), 1e-9 * h.theta(0)) << seed;
    }
}

TEST(Reduce, AblationIsNoOpWithoutCoupling) {
    const auto [s0, gt] = bench::gen_random_wcf(6, 4, 2, 17);
    // Quadratic form block diagonal in canonical coordinates, so the mixed Gramians vanish.
    const Mat Mc = gt.T.transpose() * s0.output.M[0] * gt.T;
    Mat Md = Mat::Zero(10, 10);
    Md.topLeftCorner(6, 6) = Mc.topLeftCorner(6, 6);
    Md.bottomRightCorner(4, 4) = Mc.bottomRightCorner(4, 4);
    auto s = s0;
    s.output.M[0] = detail::sym(gt.T.transpose() * Md * gt.T);
    const auto w = separate(s);
    const auto g = compute_gramians(s, w);
    EXPECT_LT(g.Q_ip.norm(), 1e-10 * g.Q_pp.norm());
    EXPECT_LT(g.Q_pi.norm(), 1e-10 * g.Q_ii.norm());
    const auto a = balance_and_truncate(s, w, g, TruncationCriterion::by_tol(1e-6));
    const auto b = balance_and_truncate(s, w, ablate_mixed_gramians(g), TruncationCriterion::by_tol(1e-6));
    EXPECT_EQ(a.r_p, b.r_p);
    EXPECT_EQ(a.r_i, b.r_i);
    EXPECT_LT((a.record.sigma - b.record.sigma).norm(), 1e-8 * a.record.sigma(0));
}

TEST(Reduce, OrderSelectionRules) {
    TruncationOptions o;
    Vec s(5);
    s << 1, 0.5, 0.5, 1e-3, 1e-14;
    EXPECT_EQ(detail::proper_order(s, TruncationCriterion::by_order(2), o), 3);  // tie extends
    EXPECT_EQ(detail::proper_order(s, TruncationCriterion::by_order(1), o), 1);
    EXPECT_EQ(detail::proper_order(s, TruncationCriterion::by_tol(1e-2), o), 3);
    EXPECT_EQ(detail::proper_order(s, TruncationCriterion::by_tol(0.0), o), 4);  // floor drops 1e-14
    EXPECT_EQ(detail::proper_order(s, TruncationCriterion::by_order(10), o), 4);
    EXPECT_EQ(detail::proper_order(Vec::Zero(3), TruncationCriterion::by_tol(0.0), o), 0);
    EXPECT_EQ(code_of([&] { detail::proper_order(s, TruncationCriterion::by_order(-1), o); }),
              ErrorCode::InvalidParams);
    EXPECT_EQ(code_of([&] { detail::proper_order(s, TruncationCriterion::by_tol(-1), o); }),
              ErrorCode::InvalidParams);
}

TEST(Reduce, KeepEverythingIsMinimal) {
    const auto [s, gt] = bench::gen_random_wcf(6, 4, 3, 23);
    const auto w = separate(s);
    const auto g = compute_gramians(s, w);
    const auto rom = balance_and_truncate(s, w, g, TruncationCriterion::by_tol(0.0));
    EXPECT_EQ(rom.r_p, count_above(rom.record.sigma, 1e-12));
    EXPECT_LE(rom.r(), s.n());
    EXPECT_FALSE(rom.has_warning(Warning::UnstableReducedProperPart));
}

TEST(Reduce, OdeHasNoImproperPart) {
    const auto [s, gt] = bench::gen_random_wcf(6, 0, 1, 4);
    const auto rom = reduce(s, 1e-6);
    EXPECT_EQ(rom.r_i, 0);
    EXPECT_GT(rom.r_p, 0);
    EXPECT_EQ(rom.system.E.topLeftCorner(rom.r_p, rom.r_p), Mat::Identity(rom.r_p, rom.r_p));
}

TEST(Reduce, LinearOutputOnly) {
    bench::RandomWcfOptions o;
    o.linear_output = true;
    auto [s, gt] = bench::gen_random_wcf(6, 3, 2, 45, o);
    s.output.M.clear();
    const auto rom = reduce(s, 1e-10);
    EXPECT_GT(rom.r_p, 0);
    EXPECT_TRUE(rom.system.output.M.empty());
    ASSERT_TRUE(rom.system.output.C.has_value());
    EXPECT_EQ(rom.system.output.C->cols(), rom.r());
}

TEST(Reduce, UnstableRejected) {
    auto s = make_system(Mat::Identity(2, 2), Mat::Identity(2, 2), Mat::Ones(2, 1), {Mat::Identity(2, 2)});
    const auto w = separate(s);
    GramianSet g;
    EXPECT_EQ(code_of([&] { balance_and_truncate(s, w, g, TruncationCriterion::by_tol(0.0)); }),
              ErrorCode::UnstableProperPart);
}
