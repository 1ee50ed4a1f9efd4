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

/// Canonical form of a cleaned ROM read off directly: E = diag(I, N), A = diag(A11, I).
WeierstrassDecomposition canonical_rom(const ReducedModel& rom) {
    WeierstrassDecomposition w;
    const Index rp = rom.r_p, ri = rom.r_i, r = rp + ri;
    w.n_f = rp;
    w.n_inf = ri;
    w.W = w.Winv = w.T = w.Tinv = Mat::Identity(r, r);
    w.J = rom.system.A.topLeftCorner(rp, rp);
    w.N = rom.system.E.bottomRightCorner(ri, ri);
    w.nu = static_cast<int>(std::max<Index>(ri, 1));
    return w;
}

struct Kernels {
    double T_pp = 0, T_ip = 0, T_C = 0;
};

/// Squared L2 distances of the output kernels by tensor Gauss-Legendre quadrature (m = 1, p = 1).
Kernels kernel_distances(const DescriptorSystem& s, const WeierstrassDecomposition& gt, const ReducedModel& rom) {
    const auto rw = canonical_rom(rom);
    const auto& h = rom.system;
    auto alpha = [](const Mat& J) { return Eigen::EigenSolver<Mat>(J, false).eigenvalues().real().maxCoeff(); };
    const double L = 25.0 / std::min(-alpha(gt.J), -alpha(rw.J));
    const auto rule = oracle::gauss_rule(L, 1.0);
    const auto Q = static_cast<Index>(rule.t.size());
    Mat V(s.n(), Q), Vh(h.n(), Q);
    for (Index q = 0; q < Q; ++q) {
        V.col(q) = oracle::FJ(gt, rule.t[static_cast<std::size_t>(q)]) * s.B;
        Vh.col(q) = oracle::FJ(rw, rule.t[static_cast<std::size_t>(q)]) * h.B;
    }
    const Vec wq = Eigen::Map<const Vec>(rule.w.data(), Q);
    Kernels k;
    const Mat D = V.transpose() * s.output.M[0] * V - Vh.transpose() * h.output.M[0] * Vh;
    k.T_pp = wq.dot(D.cwiseAbs2() * wq);
    for (int j = 0; j < std::max(gt.nu, rw.nu); ++j) {
        const Vec c = oracle::FN(gt, j) * s.B, ch = oracle::FN(rw, j) * h.B;
        const Vec d = V.transpose() * s.output.M[0] * c - Vh.transpose() * h.output.M[0] * ch;
        k.T_ip += wq.dot(d.cwiseAbs2());
    }
    if (s.output.C) {
        const Vec d = (*s.output.C * V - *h.output.C * Vh).transpose();
        k.T_C = wq.dot(d.cwiseAbs2());
    }
    return k;
}

struct Case {
    DescriptorSystem sys, rom_sys;
    WeierstrassDecomposition w, rw;
    ReducedModel rom;
};

Case make_case(const DescriptorSystem& s, Index order) {
    Case c;
    c.sys = s;
    c.w = separate(s);
    c.rom = balance_and_truncate(s, c.w, compute_gramians(s, c.w), TruncationCriterion::by_order(order));
    c.rom_sys = c.rom.system;
    c.rw = separate(c.rom_sys);
    return c;
}

}  // namespace

TEST(Bound, CrossGramianEquations) {
    const auto [s, gt] = bench::gen_random_wcf(6, 4, 2, 12);
    const auto c = make_case(s, 3);
    const auto x = cross_gramians(c.sys, c.w, c.rom_sys, c.rw);
    EXPECT_LT((c.w.J * x.X + x.X * c.rw.J.transpose() + c.w.B1 * c.rw.B1.transpose()).norm(), 1e-12 * (1 + x.X.norm()));
    // Ptilde_p = int F_J(t) B Bhat^T Fhat_J(t)^T dt.
    const auto rw = canonical_rom(c.rom);
    const auto rule = oracle::gauss_rule(oracle::horizon_for(gt.J), 0.5);
    Mat ref = Mat::Zero(s.n(), c.rom.r());
    for (std::size_t q = 0; q < rule.t.size(); ++q)
        ref += rule.w[q] * oracle::FJ(gt, rule.t[q]) * s.B * c.rom_sys.B.transpose() *
               oracle::FJ(rw, rule.t[q]).transpose();
    EXPECT_LT(oracle::rel(x.Ptilde_p, ref), 1e-7);
    Mat refi = Mat::Zero(s.n(), c.rom.r());
    for (int k = 0; k < 2; ++k)
        refi += oracle::FN(gt, k) * s.B * c.rom_sys.B.transpose() * oracle::FN(rw, k).transpose();
    EXPECT_LT(oracle::rel(x.Ptilde_i, refi), 1e-9);
}

TEST(Bound, KernelDistancesMatchQuadrature) {
    bench::RandomWcfOptions o;
    o.linear_output = true;
    for (std::uint64_t seed : {31u, 32u}) {
        const auto [s, gt] = bench::gen_random_wcf(5, 3, 2, seed, o);
        const auto c = make_case(s, 2);
        ASSERT_TRUE(c.rom.record.cleaned);
        const auto rep = error_bound(c.sys, c.w, c.rom_sys, c.rw, Signal::parse("exp(-t)"), 10.0);
        const auto k = kernel_distances(s, gt, c.rom);
        const auto& out = rep.outputs[0];
        EXPECT_NEAR(out.T_pp, k.T_pp, 1e-7 * k.T_pp) << seed;
        EXPECT_NEAR(out.T_ip, k.T_ip, 1e-7 * k.T_ip) << seed;
        EXPECT_NEAR(out.T_C, k.T_C, 1e-7 * k.T_C) << seed;
        // Without cancellation the trace form agrees.
        EXPECT_NEAR(out.T_pp_trace, out.T_pp, 1e-8 * out.trace_pp[0]) << seed;
        EXPECT_NEAR(out.T_ip_trace, out.T_ip, 1e-8 * std::abs(out.trace_ip[0]) + 1e-14) << seed;
    }
}

TEST(Bound, VanishesForIdenticalModels) {
    const auto s = bench::gen_illustrative();
    const auto w = separate(s);
    const auto u = Signal::parse("0.2*exp(-t)");
    const auto rep = error_bound(s, w, s, w, u, 10.0);
    EXPECT_LT(rep.bound_total, 1e-12);
    const auto [r, gt] = bench::gen_random_wcf(6, 3, 2, 5);
    const auto wr = separate(r);
    EXPECT_LT(error_bound(r, wr, r, wr, u, 10.0).bound_total, 1e-10);
}

TEST(Bound, IsSoundOnRandomSystems) {
    const auto grid = uniform_grid(10.0, 0.01);
    for (std::uint64_t seed : {40u, 41u, 42u}) {
        const auto [s, gt] = bench::gen_random_wcf(8, 4, 2, seed);
        for (Index order : {1, 3}) {
            const auto c = make_case(s, order);
            for (const char* sig : {"exp(-t)", "sin(t)^2*exp(-t/2)"}) {
                const auto u = Signal::parse(sig);
                const auto rep = error_bound(c.sys, c.w, c.rom_sys, c.rw, u, 10.0);
                const auto y = simulate(c.sys, c.w, u, grid, {Integrator::Exact});
                const auto yh = simulate(c.rom_sys, c.rw, u, grid, {Integrator::Exact});
                const double err = output_error(y, yh).Linf;
                EXPECT_LE(err, rep.bound_total * (1 + 1e-9) + 1e-14) << seed << " " << order << " " << sig;
                EXPECT_LE(rep.bound_total_horizon, rep.bound_total * (1 + 1e-12));
            }
        }
    }
}

TEST(Bound, IllustrativeFullVersusAblated) {
    const auto s = bench::gen_illustrative();
    const auto w = separate(s);
    const auto g = compute_gramians(s, w);
    const auto u = Signal::parse("0.2*exp(-t)");
    const auto full = balance_and_truncate(s, w, g, TruncationCriterion::by_tol(1e-8));
    const auto abl = balance_and_truncate(s, w, ablate_mixed_gramians(g), TruncationCriterion::by_tol(1e-8));
    const auto bf = error_bound(s, w, full.system, separate(full.system), u, 10.0);
    const auto ba = error_bound(s, w, abl.system, separate(abl.system), u, 10.0);
    EXPECT_LT(bf.bound_total, 1e-12);
    EXPECT_GT(ba.bound_total, 1e-3);
    EXPECT_EQ(bf.nu, 2);
}

TEST(Bound, Errors) {
    const auto s = bench::gen_illustrative();
    const auto w = separate(s);
    auto rough = Signal::parse("exp(-t)");
    rough.limit_smoothness(0);
    EXPECT_EQ(code_of([&] { error_bound(s, w, s, w, rough, 10.0); }), ErrorCode::SignalTooRough);
    auto other = s;
    other.output.M.push_back(s.output.M[0]);
    const auto wo = separate(other);
    EXPECT_EQ(code_of([&] { error_bound(s, w, other, wo, Signal::parse("exp(-t)"), 10.0); }),
              ErrorCode::DimensionMismatch);
    EXPECT_EQ(code_of([&] { error_bound(s, w, s, w, Signal::parse("sin(t)"), 0.0); }), ErrorCode::InvalidParams);
}

TEST(Bound, ReportsExponentConvention) {
    const auto s = bench::gen_illustrative();
    const auto w = separate(s);
    const auto rep = error_bound(s, w, s, w, Signal::parse("exp(-t)"), 5.0);
    EXPECT_FALSE(rep.exponent_note.empty());
    EXPECT_NEAR(rep.norms.uu_L2, rep.norms.L2 * rep.norms.L2, 1e-15);
}
