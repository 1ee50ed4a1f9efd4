#pragma once

#include "qbt/spectral.hpp"

namespace qbt {

enum class Side { Controllability, Observability };

namespace detail {

inline bool is_quasi_triangular(const Mat& J) {
    const Index n = J.rows();
    for (Index j = 0; j < n; ++j)
        for (Index i = j + 2; i < n; ++i)
            if (J(i, j) != 0.0) return false;
    for (Index i = 1; i + 1 < n; ++i)
        if (J(i, i - 1) != 0.0 && J(i + 1, i) != 0.0) return false;
    return true;
}

/// Solves J X + X J^T = -C (transposed = false) or J^T X + X J = -C (transposed = true).
inline Mat lyap(const Mat& J, const Mat& C, bool transposed) {
    if (J.rows() == 0) return Mat(0, 0);
    if (is_quasi_triangular(J)) {
        const char a = transposed ? 'T' : 'N', b = transposed ? 'N' : 'T';
        return sym(linalg::trsyl(a, b, 1, J, J, -C));
    }
    Eigen::RealSchur<Mat> rs(J);
    const Mat& U = rs.matrixU();
    Mat S = rs.matrixT();
    for (Index j = 0; j < S.cols(); ++j)
        for (Index i = j + 2; i < S.rows(); ++i) S(i, j) = 0.0;
    const Mat Ct = U.transpose() * C * U;
    const char a = transposed ? 'T' : 'N', b = transposed ? 'N' : 'T';
    return sym(U * linalg::trsyl(a, b, 1, S, S, -Ct) * U.transpose());
}

/// sum_k N^k C (N^T)^k (transposed = false) or sum_k (N^T)^k C N^k, k < nu.
inline Mat stein(const Mat& N, int nu, const Mat& C, bool transposed) {
    if (N.rows() == 0) return Mat(0, 0);
    Mat X = C, term = C;
    for (int k = 1; k < nu; ++k) {
        term = transposed ? Mat(N.transpose() * term * N) : Mat(N * term * N.transpose());
        X += term;
    }
    return sym(X);
}

inline void require_stable(const WeierstrassDecomposition& w) {
    require(w.stable, ErrorCode::UnstableProperPart, "J has an eigenvalue with nonnegative real part");
}

}  // namespace detail

/// Proper-part projected Lyapunov equation, solved in canonical coordinates.
inline Mat solve_proper_lyap(const WeierstrassDecomposition& w, Side side, const Mat& rhs) {
    detail::require_stable(w);
    detail::require(rhs.rows() == w.n() && rhs.cols() == w.n(), ErrorCode::DimensionMismatch, "rhs must be n x n");
    if (side == Side::Controllability) {
        const Mat C11 = w.Winv_f() * rhs * w.Winv_f().transpose();
        return detail::sym(w.Tinv_f() * detail::lyap(w.J, C11, false) * w.Tinv_f().transpose());
    }
    const Mat C11 = w.Tinv_f().transpose() * rhs * w.Tinv_f();
    return detail::sym(w.Winv_f().transpose() * detail::lyap(w.J, C11, true) * w.Winv_f());
}

/// Improper-part projected Stein equation via the terminating nilpotent sum.
inline Mat solve_improper_stein(const WeierstrassDecomposition& w, Side side, const Mat& rhs) {
    detail::require(rhs.rows() == w.n() && rhs.cols() == w.n(), ErrorCode::DimensionMismatch, "rhs must be n x n");
    if (side == Side::Controllability) {
        const Mat C22 = w.Winv_i() * rhs * w.Winv_i().transpose();
        return detail::sym(w.Tinv_i() * detail::stein(w.N, w.nu, C22, false) * w.Tinv_i().transpose());
    }
    const Mat C22 = w.Tinv_i().transpose() * rhs * w.Tinv_i();
    return detail::sym(w.Winv_i().transpose() * detail::stein(w.N, w.nu, C22, true) * w.Winv_i());
}

struct ControllabilityGramians {
    Mat P_p, P_i;
    Mat P1, P2;  // canonical-coordinate blocks
};

/// All Gramians. Canonical blocks: Q11 <-> Q_pp, Q21 <-> Q_ip, Q12 <-> Q_pi, Q22 <-> Q_ii.
struct GramianSet {
    Mat P_p, P_i;
    Mat Q_pp, Q_ip, Q_pi, Q_ii;
    Mat Q_p, Q_i;
    std::optional<Mat> Q_pC, Q_iC;

    Mat P1, P2;
    Mat Q11, Q21, Q12, Q22;
    std::optional<Mat> QC1, QC2;
    Mat Q1, Q2;  // blocks of Q_p and Q_i
    bool ablated = false;
};

inline ControllabilityGramians controllability_gramians(const DescriptorSystem& sys,
                                                        const WeierstrassDecomposition& w) {
    detail::require_stable(w);
    detail::require(sys.n() == w.n(), ErrorCode::DimensionMismatch, "decomposition does not match system");
    ControllabilityGramians g;
    g.P1 = detail::lyap(w.J, w.B1 * w.B1.transpose(), false);
    g.P2 = detail::stein(w.N, w.nu, w.B2 * w.B2.transpose(), false);
    g.P_p = detail::sym(w.Tinv_f() * g.P1 * w.Tinv_f().transpose());
    g.P_i = detail::sym(w.Tinv_i() * g.P2 * w.Tinv_i().transpose());
    return g;
}

/// Observability Gramians for the quadratic forms (summed over outputs) plus the linear part.
inline GramianSet observability_gramians(const DescriptorSystem& sys, const WeierstrassDecomposition& w,
                                         const ControllabilityGramians& c) {
    detail::require_stable(w);
    detail::require(w.Mt.size() == sys.output.M.size(), ErrorCode::DimensionMismatch,
                    "decomposition does not match output spec");
    const Index nf = w.n_f, ni = w.n_inf;
    GramianSet g;
    g.P_p = c.P_p;
    g.P_i = c.P_i;
    g.P1 = c.P1;
    g.P2 = c.P2;

    Mat R11 = Mat::Zero(nf, nf), R21 = Mat::Zero(nf, nf), R12 = Mat::Zero(ni, ni), R22 = Mat::Zero(ni, ni);
    for (std::size_t j = 0; j < w.Mt.size(); ++j) {
        const Mat M11 = w.M11(j), M12 = w.M12(j), M22 = w.M22(j);
        R11 += M11 * c.P1 * M11;
        R21 += M12 * c.P2 * M12.transpose();
        R12 += M12.transpose() * c.P1 * M12;
        R22 += M22 * c.P2 * M22;
    }
    g.Q11 = detail::lyap(w.J, detail::sym(R11), true);
    g.Q21 = detail::lyap(w.J, detail::sym(R21), true);
    g.Q12 = detail::stein(w.N, w.nu, detail::sym(R12), true);
    g.Q22 = detail::stein(w.N, w.nu, detail::sym(R22), true);

    const auto Wf = w.Winv_f(), Wi = w.Winv_i();
    g.Q_pp = detail::sym(Wf.transpose() * g.Q11 * Wf);
    g.Q_ip = detail::sym(Wf.transpose() * g.Q21 * Wf);
    g.Q_pi = detail::sym(Wi.transpose() * g.Q12 * Wi);
    g.Q_ii = detail::sym(Wi.transpose() * g.Q22 * Wi);
    g.Q1 = g.Q11 + g.Q21;
    g.Q2 = g.Q12 + g.Q22;
    g.Q_p = g.Q_pp + g.Q_ip;
    g.Q_i = g.Q_pi + g.Q_ii;

    if (w.Ct) {
        const Mat Cf = w.Ct->leftCols(nf), Ci = w.Ct->rightCols(ni);
        g.QC1 = detail::lyap(w.J, Cf.transpose() * Cf, true);
        g.QC2 = detail::stein(w.N, w.nu, Ci.transpose() * Ci, true);
        g.Q_pC = detail::sym(Wf.transpose() * *g.QC1 * Wf);
        g.Q_iC = detail::sym(Wi.transpose() * *g.QC2 * Wi);
        g.Q1 += *g.QC1;
        g.Q2 += *g.QC2;
        g.Q_p += *g.Q_pC;
        g.Q_i += *g.Q_iC;
    }
    return g;
}

inline GramianSet compute_gramians(const DescriptorSystem& sys, const WeierstrassDecomposition& w) {
    return observability_gramians(sys, w, controllability_gramians(sys, w));
}

struct SemidefiniteFactor {
    Mat R;  // X ~ R R^T
    Index rank = 0;
    double dropped = 0;  // ||X - R R^T||_F / ||X||_F from discarded eigenvalues
};

/// Symmetric eigendecomposition keeping eigenvalues >= drop_tol * lambda_max.
inline SemidefiniteFactor psd_factor(const Mat& X, double drop_tol = 1e-13) {
    detail::require(X.rows() == X.cols(), ErrorCode::DimensionMismatch, "psd_factor needs a square matrix");
    SemidefiniteFactor f;
    const Index n = X.rows();
    if (n == 0) {
        f.R.resize(0, 0);
        return f;
    }
    auto ev = linalg::syev(detail::sym(X));
    const double lmax = ev.w(n - 1), lmin = ev.w(0);
    const double norm2 = std::max(std::abs(lmax), std::abs(lmin));
    detail::require(lmin >= -1e-10 * norm2, ErrorCode::IndefiniteMatrix,
                    "matrix has eigenvalue " + std::to_string(lmin) + " below -1e-10 ||X||_2");
    double kept2 = 0, drop2 = 0;
    std::vector<Index> keep;
    for (Index i = n - 1; i >= 0; --i) {
        const double l = ev.w(i);
        if (l > 0 && l >= drop_tol * lmax) {
            keep.push_back(i);
            kept2 += l * l;
        } else {
            drop2 += l * l;
        }
    }
    f.rank = static_cast<Index>(keep.size());
    f.R.resize(n, f.rank);
    for (Index c = 0; c < f.rank; ++c) f.R.col(c) = ev.V.col(keep[c]) * std::sqrt(ev.w(keep[c]));
    const double tot = kept2 + drop2;
    f.dropped = tot > 0 ? std::sqrt(drop2 / tot) : 0.0;
    return f;
}

/// Relative residuals of the defining projected equations and projection conditions.
struct GramianResiduals {
    double P_p = 0, P_i = 0, Q_pp = 0, Q_ip = 0, Q_pi = 0, Q_ii = 0;
    double proj_P_p = 0, proj_P_i = 0, proj_Q_p = 0, proj_Q_i = 0;

    double max_equation() const { return std::max({P_p, P_i, Q_pp, Q_ip, Q_pi, Q_ii}); }
    double max_projection() const { return std::max({proj_P_p, proj_P_i, proj_Q_p, proj_Q_i}); }
};

inline GramianResiduals gramian_residuals(const DescriptorSystem& sys, const WeierstrassDecomposition& w,
                                          const GramianSet& g) {
    const Mat& E = sys.E;
    const Mat& A = sys.A;
    const Index n = sys.n();
    const auto pr = projectors(w);
    const Mat I = Mat::Identity(n, n);
    const Mat Ql = I - pr.P_l, Qr = I - pr.P_r;
    const double nE = E.norm(), nA = A.norm();
    auto ratio = [](double r, double scale) { return scale > 0 ? r / scale : r; };

    // Continuous: E X A^T + A X E^T = -Pl F Pl^T (controllability); transposed form for observability.
    auto cont_c = [&](const Mat& X, const Mat& F) {
        const Mat rhs = pr.P_l * F * pr.P_l.transpose();
        return ratio((E * X * A.transpose() + A * X * E.transpose() + rhs).norm(),
                     2 * nE * nA * X.norm() + rhs.norm());
    };
    auto cont_o = [&](const Mat& X, const Mat& F) {
        const Mat rhs = pr.P_r.transpose() * F * pr.P_r;
        return ratio((E.transpose() * X * A + A.transpose() * X * E + rhs).norm(),
                     2 * nE * nA * X.norm() + rhs.norm());
    };
    auto disc_c = [&](const Mat& X, const Mat& F) {
        const Mat rhs = Ql * F * Ql.transpose();
        return ratio((A * X * A.transpose() - E * X * E.transpose() - rhs).norm(),
                     (nA * nA + nE * nE) * X.norm() + rhs.norm());
    };
    auto disc_o = [&](const Mat& X, const Mat& F) {
        const Mat rhs = Qr.transpose() * F * Qr;
        return ratio((A.transpose() * X * A - E.transpose() * X * E - rhs).norm(),
                     (nA * nA + nE * nE) * X.norm() + rhs.norm());
    };
    Mat Fp = Mat::Zero(n, n), Fi = Mat::Zero(n, n);
    for (const auto& M : sys.output.M) {
        Fp += M * g.P_p * M;
        Fi += M * g.P_i * M;
    }
    const Mat BB = sys.B * sys.B.transpose();
    GramianResiduals r;
    r.P_p = cont_c(g.P_p, BB);
    r.P_i = disc_c(g.P_i, BB);
    if (!g.ablated) {
        r.Q_pp = cont_o(g.Q_pp, Fp);
        r.Q_ip = cont_o(g.Q_ip, Fi);
        r.Q_pi = disc_o(g.Q_pi, Fp);
        r.Q_ii = disc_o(g.Q_ii, Fi);
    }
    auto rel = [](const Mat& D, const Mat& X) { return X.norm() > 0 ? D.norm() / X.norm() : D.norm(); };
    r.proj_P_p = rel(g.P_p - pr.P_r * g.P_p * pr.P_r.transpose(), g.P_p);
    r.proj_P_i = rel(pr.P_r * g.P_i * pr.P_r.transpose(), g.P_i);
    r.proj_Q_p = rel(g.Q_p - pr.P_l.transpose() * g.Q_p * pr.P_l, g.Q_p);
    r.proj_Q_i = rel(pr.P_l.transpose() * g.Q_i * pr.P_l, g.Q_i);
    return r;
}

}  // namespace qbt
