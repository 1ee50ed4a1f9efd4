#pragma once

#include "qbt/spectral.hpp"

#include <Eigen/QR>

#include <random>
#include <utility>

namespace qbt::bench {

/// The 4x4 example that is already in canonical form.
inline DescriptorSystem gen_illustrative() {
    Mat E = Mat::Identity(4, 4);
    E(2, 2) = 0;
    E(2, 3) = 1;
    E(3, 3) = 0;
    Mat A = Vec::Ones(4).asDiagonal();
    A(0, 0) = -1;
    A(1, 1) = -1;
    Mat B = Mat::Ones(4, 1);
    Mat M(4, 4);
    M << 1, 0, 1, 0,
         0, 0, 0, 1,
         1, 0, 0, 0,
         0, 1, 0, 2;
    auto s = make_system(E, A, B, {M});
    s.tags["name"] = "illustrative";
    return s;
}

struct MsdParams {
    double mass = 1.0;    // m_i
    double k = 1.5;       // spring between neighbours
    double d = 0.7;       // damper between neighbours
    double kappa = 2.0;   // spring to ground
    double delta = 0.9;   // damper to ground
    // Optional per-element overrides; empty means use the scalars above.
    std::vector<double> masses, ks, ds, kappas, deltas;
};

namespace detail {

inline std::vector<double> expand(const std::vector<double>& v, double dflt, std::size_t len,
                                  const char* name) {
    if (v.empty()) return std::vector<double>(len, dflt);
    qbt::detail::require(v.size() == len, ErrorCode::InvalidParams,
                         std::string("msd parameter '") + name + "' has wrong length");
    return v;
}

/// Tridiagonal chain matrix with couplings c (length g-1) and grounding e (length g).
inline Mat chain(const std::vector<double>& c, const std::vector<double>& e) {
    const Index g = static_cast<Index>(e.size());
    Mat X = Mat::Zero(g, g);
    for (Index i = 0; i < g; ++i) X(i, i) = e[i];
    for (Index i = 0; i + 1 < g; ++i) {
        X(i, i) += c[i];
        X(i + 1, i + 1) += c[i];
        X(i, i + 1) = -c[i];
        X(i + 1, i) = -c[i];
    }
    return X;
}

}  // namespace detail

/// Constrained mass-spring-damper chain of index 3, n = 2g + 1.
inline DescriptorSystem gen_msd(Index g = 600, const MsdParams& prm = {}) {
    using qbt::detail::require;
    require(g >= 2, ErrorCode::InvalidParams, "msd needs g >= 2");
    const auto G = static_cast<std::size_t>(g);
    const auto ms = detail::expand(prm.masses, prm.mass, G, "masses");
    const auto ks = detail::expand(prm.ks, prm.k, G - 1, "ks");
    const auto ds = detail::expand(prm.ds, prm.d, G - 1, "ds");
    const auto kap = detail::expand(prm.kappas, prm.kappa, G, "kappas");
    const auto del = detail::expand(prm.deltas, prm.delta, G, "deltas");
    for (const auto* v : {&ms, &ks, &ds, &kap, &del})
        for (double x : *v) require(x > 0, ErrorCode::InvalidParams, "msd parameters must be positive");

    const Mat K = detail::chain(ks, kap);
    const Mat D = detail::chain(ds, del);
    const Index n = 2 * g + 1;
    Mat E = Mat::Zero(n, n), A = Mat::Zero(n, n), B = Mat::Zero(n, 1);
    E.topLeftCorner(g, g).setIdentity();
    for (Index i = 0; i < g; ++i) E(g + i, g + i) = ms[i];
    A.block(0, g, g, g).setIdentity();
    A.block(g, 0, g, g) = -K;
    A.block(g, g, g, g) = -D;
    // G = e_1 - e_g
    A(g, 2 * g) = 1;
    A(2 * g - 1, 2 * g) = -1;
    A(2 * g, 0) = 1;
    A(2 * g, g - 1) = -1;
    B(g, 0) = 1;
    auto s = make_system(E, A, B, {Mat::Identity(n, n)});
    s.tags["name"] = "msd";
    s.tags["g"] = std::to_string(g);
    return s;
}

/// MAC (staggered) finite differences for Stokes flow on the unit square with
/// no-slip walls and k x k pressure cells. The last pressure unknown is pinned
/// (p_last = 0) in place of the redundant divergence row, which keeps n = 2k(k-1) + k^2.
inline DescriptorSystem gen_stokes(Index k = 15) {
    qbt::detail::require(k >= 3, ErrorCode::InvalidGrid, "Stokes grid needs k >= 3");
    const double h = 1.0 / static_cast<double>(k), h2 = h * h;
    const Index nu_ = (k - 1) * k;  // u at x = i h (i = 1..k-1), y = (j + 1/2) h
    const Index nvv = k * (k - 1);  // v at x = (i + 1/2) h, y = j h (j = 1..k-1)
    const Index nv = nu_ + nvv, np = k * k, n = nv + np;
    auto uid = [&](Index i, Index j) { return (i - 1) + (k - 1) * j; };
    auto vid = [&](Index i, Index j) { return nu_ + i + k * (j - 1); };
    auto pid = [&](Index i, Index j) { return nv + i + k * j; };

    Mat A = Mat::Zero(n, n);
    // u-momentum: Dirichlet at x walls, reflected ghost at y walls.
    for (Index j = 0; j < k; ++j)
        for (Index i = 1; i < k; ++i) {
            const Index r = uid(i, j);
            double diag = -4;
            if (i > 1) A(r, uid(i - 1, j)) = 1 / h2;
            if (i < k - 1) A(r, uid(i + 1, j)) = 1 / h2;
            if (j > 0) A(r, uid(i, j - 1)) = 1 / h2; else diag -= 1;
            if (j < k - 1) A(r, uid(i, j + 1)) = 1 / h2; else diag -= 1;
            A(r, r) = diag / h2;
        }
    for (Index j = 1; j < k; ++j)
        for (Index i = 0; i < k; ++i) {
            const Index r = vid(i, j);
            double diag = -4;
            if (j > 1) A(r, vid(i, j - 1)) = 1 / h2;
            if (j < k - 1) A(r, vid(i, j + 1)) = 1 / h2;
            if (i > 0) A(r, vid(i - 1, j)) = 1 / h2; else diag -= 1;
            if (i < k - 1) A(r, vid(i + 1, j)) = 1 / h2; else diag -= 1;
            A(r, r) = diag / h2;
        }
    // Divergence rows (-G^T) and gradient columns (G), G = -Div^T.
    for (Index j = 0; j < k; ++j)
        for (Index i = 0; i < k; ++i) {
            const Index c = pid(i, j);
            if (c == n - 1) continue;
            auto couple = [&](Index vel, double div) {
                A(c, vel) = -div;
                A(vel, c) = -div;
            };
            if (i + 1 < k) couple(uid(i + 1, j), 1 / h);
            if (i > 0) couple(uid(i, j), -1 / h);
            if (j + 1 < k) couple(vid(i, j + 1), 1 / h);
            if (j > 0) couple(vid(i, j), -1 / h);
        }
    A(n - 1, n - 1) = 1;

    Mat E = Mat::Zero(n, n);
    E.topLeftCorner(nv, nv).setIdentity();
    Mat B = Mat::Zero(n, 1);
    B(uid(k / 2, k / 2), 0) = 1;
    auto s = make_system(E, A, B, {0.01 * Mat::Identity(n, n)});
    s.tags["name"] = "stokes";
    s.tags["k"] = std::to_string(k);
    return s;
}

struct RandomWcfOptions {
    Index m = 1;
    Index p = 1;
    bool linear_output = false;
};

namespace detail {

/// Orthogonal times a diagonal with entries in [lo, hi]; returns (X, X^{-1}).
inline std::pair<Mat, Mat> well_conditioned(Index n, double lo, double hi, std::mt19937_64& rng,
                                            bool diag_left) {
    std::normal_distribution<double> nd;
    std::uniform_real_distribution<double> ud(lo, hi);
    Mat G(n, n);
    for (Index j = 0; j < n; ++j)
        for (Index i = 0; i < n; ++i) G(i, j) = nd(rng);
    Mat U = n ? Mat(Eigen::HouseholderQR<Mat>(G).householderQ() * Mat::Identity(n, n)) : Mat(0, 0);
    Vec d(n);
    for (Index i = 0; i < n; ++i) d(i) = ud(rng);
    if (diag_left) return {d.asDiagonal() * U, U.transpose() * d.cwiseInverse().asDiagonal()};
    return {U * d.asDiagonal(), d.cwiseInverse().asDiagonal() * U.transpose()};
}

}  // namespace detail

/// Random pencil assembled from a known canonical form. Returns the system and
/// the generating decomposition.
inline std::pair<DescriptorSystem, WeierstrassDecomposition>
gen_random_wcf(Index n_f, Index n_inf, int nu, std::uint64_t seed, const RandomWcfOptions& o = {}) {
    using qbt::detail::require;
    require(n_f >= 0 && n_inf >= 0 && n_f + n_inf > 0, ErrorCode::InvalidParams, "sizes must be nonnegative, n > 0");
    require((n_inf == 0 && nu == 1) || (nu >= 1 && nu <= n_inf), ErrorCode::InvalidParams,
            "need 1 <= nu <= n_inf, or n_inf = 0 and nu = 1");
    require(o.m >= 1 && o.p >= 1, ErrorCode::InvalidParams, "m and p must be positive");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    std::uniform_real_distribution<double> re(-5.0, -0.1), im(0.5, 3.0), sup(0.5, 2.0);
    const Index n = n_f + n_inf;

    // Proper block: real eigenvalues plus some complex pairs, all with real part in [-5, -0.1].
    Mat J0 = Mat::Zero(n_f, n_f);
    const Index pairs = n_f / 3;
    Index i = 0;
    for (Index q = 0; q < pairs; ++q, i += 2) {
        const double a = re(rng), b = im(rng);
        J0(i, i) = a;
        J0(i + 1, i + 1) = a;
        J0(i, i + 1) = b;
        J0(i + 1, i) = -b;
    }
    for (; i < n_f; ++i) J0(i, i) = re(rng);
    auto [V, Vinv] = detail::well_conditioned(n_f, 1.0, 2.0, rng, false);
    const Mat J = V * J0 * Vinv;

    // Nilpotent block: Jordan chains, the first of length nu.
    Mat N0 = Mat::Zero(n_inf, n_inf);
    Index start = 0;
    bool first = true;
    std::uniform_int_distribution<int> len_d(1, nu);
    while (start < n_inf) {
        Index len = first ? nu : std::min<Index>(len_d(rng), n_inf - start);
        first = false;
        for (Index r = 0; r + 1 < len; ++r) N0(start + r, start + r + 1) = sup(rng);
        start += len;
    }
    auto [S, Sinv] = detail::well_conditioned(n_inf, 1.0, 2.0, rng, false);
    const Mat N = S * N0 * Sinv;

    auto [W, Winv] = detail::well_conditioned(n, 1.0, 3.0, rng, false);
    auto [T, Tinv] = detail::well_conditioned(n, 1.0, 3.0, rng, true);

    Mat DE = Mat::Zero(n, n), DA = Mat::Zero(n, n);
    DE.topLeftCorner(n_f, n_f).setIdentity();
    DE.bottomRightCorner(n_inf, n_inf) = N;
    DA.topLeftCorner(n_f, n_f) = J;
    DA.bottomRightCorner(n_inf, n_inf).setIdentity();

    Mat B(n, o.m);
    for (Index c = 0; c < o.m; ++c)
        for (Index r = 0; r < n; ++r) B(r, c) = nd(rng);
    std::vector<Mat> Ms;
    for (Index j = 0; j < o.p; ++j) {
        Mat G(n, n);
        for (Index c = 0; c < n; ++c)
            for (Index r = 0; r < n; ++r) G(r, c) = nd(rng);
        Ms.push_back(0.5 * (G + G.transpose()));
    }
    std::optional<Mat> C;
    if (o.linear_output) {
        Mat Cm(o.p, n);
        for (Index c = 0; c < n; ++c)
            for (Index r = 0; r < o.p; ++r) Cm(r, c) = nd(rng);
        C = Cm;
    }
    auto sys = make_system(W * DE * T, W * DA * T, B, Ms, C);
    sys.tags["name"] = "random_wcf";
    sys.tags["seed"] = std::to_string(seed);

    WeierstrassDecomposition w;
    w.W = W;
    w.Winv = Winv;
    w.T = T;
    w.Tinv = Tinv;
    w.J = J;
    w.N = N;
    w.nu = nu;
    w.n_f = n_f;
    w.n_inf = n_inf;
    const Mat Bt = Winv * B;
    w.B1 = Bt.topRows(n_f);
    w.B2 = Bt.bottomRows(n_inf);
    for (const auto& M : sys.output.M) w.Mt.push_back(Tinv.transpose() * M * Tinv);
    if (C) w.Ct = *C * Tinv;
    w.eigenvalues = n_f ? Eigen::VectorXcd(Eigen::EigenSolver<Mat>(J).eigenvalues()) : Eigen::VectorXcd(0);
    w.stable = true;
    return {sys, w};
}

}  // namespace qbt::bench
