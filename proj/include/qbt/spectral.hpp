#pragma once

#include "qbt/linalg.hpp"
#include "qbt/model.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <complex>

namespace qbt {

struct SeparateOptions {
    /// Singular values of (A - s0 E)^{-1} E below tol_infinite * its norm count as null directions.
    double tol_infinite = 1e-10;
};

/// E = W diag(I, N) T, A = W diag(J, I) T; finite block first.
struct WeierstrassDecomposition {
    Mat W, Winv, T, Tinv;
    Mat J;  // quasi-upper-triangular
    Mat N;  // block strictly upper triangular, nilpotent
    int nu = 1;
    Index n_f = 0, n_inf = 0;
    Mat B1, B2;
    std::vector<Mat> Mt;    // T^{-T} M_j T^{-1}
    std::optional<Mat> Ct;  // C T^{-1}
    Eigen::VectorXcd eigenvalues;  // finite spectrum
    std::vector<Index> chain_sizes;  // staircase stage dimensions
    bool stable = false;
    double cond_W = 1, cond_T = 1, residual_E = 0, residual_A = 0;
    std::vector<Warning> warnings;

    Index n() const { return n_f + n_inf; }

    Mat M11(std::size_t j) const { return Mt[j].topLeftCorner(n_f, n_f); }
    Mat M12(std::size_t j) const { return Mt[j].topRightCorner(n_f, n_inf); }
    Mat M22(std::size_t j) const { return Mt[j].bottomRightCorner(n_inf, n_inf); }

    // Column/row blocks of the transforms.
    auto Tinv_f() const { return Tinv.leftCols(n_f); }
    auto Tinv_i() const { return Tinv.rightCols(n_inf); }
    auto Winv_f() const { return Winv.topRows(n_f); }
    auto Winv_i() const { return Winv.bottomRows(n_inf); }
    auto W_f() const { return W.leftCols(n_f); }
    auto W_i() const { return W.rightCols(n_inf); }
    auto T_f() const { return T.topRows(n_f); }
    auto T_i() const { return T.bottomRows(n_inf); }

    /// N^k, zero for k >= nu.
    Mat N_pow(int k) const {
        if (k >= nu) return Mat::Zero(n_inf, n_inf);
        Mat P = Mat::Identity(n_inf, n_inf);
        for (int i = 0; i < k; ++i) P = P * N;
        return P;
    }
};

struct SpectralProjectors {
    Mat P_r, P_l;
};

namespace detail {

/// Zeroes entries that are structurally zero in a quasi-triangular matrix whose
/// subdiagonal pattern is given by S.
inline void enforce_quasi_triangular(Mat& J, const Mat& S) {
    const Index n = J.rows();
    for (Index j = 0; j < n; ++j)
        for (Index i = j + 1; i < n; ++i)
            if (i > j + 1 || S(i, j) == 0.0) J(i, j) = 0.0;
}

struct Staircase {
    Mat Z;                        // orthogonal, infinite directions first
    Mat Kt;                       // Z^T K Z
    std::vector<Index> stages;    // null dimensions per stage
};

/// Orthogonal staircase reduction of K = (A - s0 E)^{-1} E. The infinite right
/// deflating subspace is the generalized null space of K.
inline Staircase staircase(const Mat& K, double tol) {
    const Index n = K.rows();
    Staircase st;
    st.Z = Mat::Identity(n, n);
    st.Kt = K;
    double kref = -1;
    Index off = 0;
    while (off < n) {
        const Index r = n - off;
        auto sv = linalg::svd(st.Kt.bottomRightCorner(r, r));
        if (kref < 0) kref = sv.s.size() ? sv.s(0) : 0.0;
        const double thr = tol * kref;
        Index d = 0;
        while (d < r && sv.s(r - 1 - d) <= thr) ++d;
        if (d == 0) break;
        Mat Vr(r, r);
        Vr << sv.V.rightCols(d), sv.V.leftCols(r - d);
        st.Z.rightCols(r) = (st.Z.rightCols(r) * Vr).eval();
        st.Kt.rightCols(r) = (st.Kt.rightCols(r) * Vr).eval();
        st.Kt.bottomRows(r) = (Vr.transpose() * st.Kt.bottomRows(r)).eval();
        st.stages.push_back(d);
        off += d;
    }
    return st;
}

inline int nilpotency_index(const Mat& N, int cap) {
    if (N.size() == 0) return 1;
    const double nN = std::max(N.norm(), 1e-300);
    Mat P = N;
    int k = 1;
    double scale = nN;
    while (k < cap && P.norm() > 1e-12 * scale) {
        P = P * N;
        scale *= nN;
        ++k;
    }
    return k;
}

}  // namespace detail

/// Splits the pencil into finite and infinite parts.
inline WeierstrassDecomposition separate(const DescriptorSystem& sys, const SeparateOptions& opt = {}) {
    using detail::require;
    check_dimensions(sys);
    const Mat& E = sys.E;
    const Mat& A = sys.A;
    const Index n = sys.n();
    WeierstrassDecomposition w;

    // Real shift away from the (stable) finite spectrum.
    const double nE = E.norm(), nA = A.norm();
    const double base = (nE > 0 && nA > 0) ? nA / nE : 1.0;
    double s0 = base, best = -1;
    Eigen::PartialPivLU<Mat> lu;
    for (double c : {1.0, 1.618, 0.618, 3.3, 0.3}) {
        Eigen::PartialPivLU<Mat> trial(A - c * base * E);
        const double rc = detail::lu_rcond(trial);
        if (rc > best) {
            best = rc;
            s0 = c * base;
            lu = trial;
        }
        if (rc > 1e-6) break;
    }
    require(best > detail::singular_rcond_threshold(n), ErrorCode::SingularPencil,
            "no shift s0 gives a nonsingular A - s0 E");

    const Mat K = n ? Mat(lu.solve(E)) : Mat(0, 0);
    auto st = detail::staircase(K, opt.tol_infinite);
    Index ni = 0;
    for (Index d : st.stages) ni += d;
    const Index nf = n - ni;
    w.n_f = nf;
    w.n_inf = ni;
    w.chain_sizes = st.stages;

    const Mat Zi = st.Z.leftCols(ni), Zf = st.Z.rightCols(nf);

    // Block strictly upper triangular K on the infinite part.
    Mat Kii = st.Kt.topLeftCorner(ni, ni);
    {
        Index r0 = 0;
        for (Index a : st.stages) {
            Kii.block(r0, 0, a, r0 + a).setZero();
            r0 += a;
        }
    }
    Mat Ninf = ni ? Mat(Kii * (Mat::Identity(ni, ni) + s0 * Kii).inverse()) : Mat(0, 0);
    {
        Index r0 = 0;
        for (Index a : st.stages) {
            Ninf.block(r0, 0, a, r0 + a).setZero();
            r0 += a;
        }
    }

    // Left basis: range((A - s0 E) Z_inf) leads.
    Mat Q = Mat::Identity(n, n);
    if (ni > 0) {
        Eigen::HouseholderQR<Mat> qr((A - s0 * E) * Zi);
        Q = qr.householderQ() * Mat::Identity(n, n);
    }
    const Mat Qi = Q.leftCols(ni), Qf = Q.rightCols(nf);

    const Mat AZ = A * st.Z, EZ = E * st.Z;
    const Mat Aii = Qi.transpose() * AZ.leftCols(ni);
    const Mat Aif = Qi.transpose() * AZ.rightCols(nf);
    const Mat Eif = Qi.transpose() * EZ.rightCols(nf);
    const Mat Aff = Qf.transpose() * AZ.rightCols(nf);
    const Mat Eff = Qf.transpose() * EZ.rightCols(nf);

    // Finite block: generalized Schur form, kept unordered.
    auto qz = linalg::qz(Aff, Eff);
    const auto Tq = qz.T.triangularView<Eigen::Upper>();
    w.J = nf ? Mat(Tq.solve(qz.S)) : Mat(0, 0);
    detail::enforce_quasi_triangular(w.J, qz.S);
    w.eigenvalues.resize(nf);
    for (Index k = 0; k < nf; ++k)
        w.eigenvalues(k) = std::complex<double>(qz.alphar(k), qz.alphai(k)) / qz.beta(k);
    w.stable = true;
    for (Index k = 0; k < nf; ++k) w.stable = w.stable && w.eigenvalues(k).real() < 0;

    // Decoupling: Y - Nt Y F = G with Nt nilpotent, summed exactly.
    Mat Y = Mat::Zero(ni, nf), X = Mat::Zero(ni, nf);
    Eigen::PartialPivLU<Mat> luAii;
    if (ni > 0) luAii.compute(Aii);
    if (ni > 0 && nf > 0) {
        const Mat EffInv = qz.Z * Tq.solve(qz.Q.transpose());
        const Mat Nt = Aii * Ninf * luAii.inverse();
        const Mat F = Aff * EffInv;
        const Mat G = (Nt * Aif - Eif) * EffInv;
        Mat term = G;
        Y = G;
        for (std::size_t k = 1; k < st.stages.size(); ++k) {
            term = Nt * term * F;
            Y += term;
        }
        X = -luAii.solve(Aif + Y * Aff);
    }

    w.W.resize(n, n);
    w.Winv.resize(n, n);
    w.T.resize(n, n);
    w.Tinv.resize(n, n);
    if (nf > 0) {
        const Mat Gf = Qf - Qi * Y;
        w.W.leftCols(nf) = Gf * qz.Q * Mat(qz.T.triangularView<Eigen::Upper>());
        w.T.topRows(nf) = qz.Z.transpose() * Zf.transpose();
        w.Winv.topRows(nf) = Tq.solve(qz.Q.transpose() * Qf.transpose());
        w.Tinv.leftCols(nf) = (Zi * X + Zf) * qz.Z;
    }
    if (ni > 0) {
        w.W.rightCols(ni) = Qi * Aii;
        w.T.bottomRows(ni) = Zi.transpose() - X * Zf.transpose();
        w.Winv.bottomRows(ni) = luAii.solve(Qi.transpose() + Y * Qf.transpose());
        w.Tinv.rightCols(ni) = Zi;
    }
    w.N = Ninf;
    const int nu_stair = std::max<int>(1, static_cast<int>(st.stages.size()));
    w.nu = ni == 0 ? 1 : std::min(nu_stair, detail::nilpotency_index(Ninf, static_cast<int>(ni)));

    const Mat Bt = w.Winv * sys.B;
    w.B1 = Bt.topRows(nf);
    w.B2 = Bt.bottomRows(ni);
    for (const auto& M : sys.output.M) w.Mt.push_back(w.Tinv.transpose() * M * w.Tinv);
    if (sys.output.C) w.Ct = *sys.output.C * w.Tinv;

    Mat DE = Mat::Zero(n, n), DA = Mat::Zero(n, n);
    DE.topLeftCorner(nf, nf).setIdentity();
    DE.bottomRightCorner(ni, ni) = w.N;
    DA.topLeftCorner(nf, nf) = w.J;
    DA.bottomRightCorner(ni, ni).setIdentity();
    w.residual_E = (w.W * DE * w.T - E).norm() / (nE + 1);
    w.residual_A = (w.W * DA * w.T - A).norm() / (nA + 1);
    w.cond_W = n ? w.W.norm() * w.Winv.norm() : 1.0;
    w.cond_T = n ? w.T.norm() * w.Tinv.norm() : 1.0;
    if (w.cond_W > 1e12 || w.cond_T > 1e12) w.warnings.push_back(Warning::IllConditionedTransform);
    return w;
}

inline SpectralProjectors projectors(const WeierstrassDecomposition& w) {
    return {w.Tinv_f() * w.T_f(), w.W_f() * w.Winv_f()};
}

/// F_J(t) = T^{-1} diag(e^{Jt}, 0) W^{-1}.
inline Mat eval_FJ(const WeierstrassDecomposition& w, double t) {
    if (w.n_f == 0) return Mat::Zero(w.n(), w.n());
    const Mat eJt = (w.J * t).exp();
    return w.Tinv_f() * eJt * w.Winv_f();
}

/// F_N(k) = T^{-1} diag(0, -N^k) W^{-1}.
inline Mat eval_FN(const WeierstrassDecomposition& w, int k) {
    if (k >= w.nu || w.n_inf == 0) return Mat::Zero(w.n(), w.n());
    return -(w.Tinv_i() * w.N_pow(k) * w.Winv_i());
}

/// validate() plus the stability verdict from the spectral split.
inline ValidationReport validate_with_stability(const DescriptorSystem& sys, const SeparateOptions& opt = {}) {
    auto r = validate(sys);
    r.stable = separate(sys, opt).stable;
    return r;
}

}  // namespace qbt
