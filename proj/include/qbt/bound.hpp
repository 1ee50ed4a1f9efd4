#pragma once

#include "qbt/reduce.hpp"
#include "qbt/signal.hpp"

#include <array>
#include <limits>

namespace qbt {

/// Cross Gramians between the full model and a reduced model.
struct CrossGramians {
    Mat Ptilde_p, Ptilde_i;  // n x r
    Mat Phat_p, Phat_i;      // r x r
    // Canonical blocks: J X + X Jhat^T = -B1 Bhat1^T and Y = sum_k N^k B2 Bhat2^T Nhat^kT.
    Mat X, Y;
    Mat P1, P2, Phat1, Phat2;
};

namespace detail {

/// Solves A X + X B^T = C.
inline Mat sylvester(const Mat& A, const Mat& B, const Mat& C) {
    if (A.rows() == 0 || B.rows() == 0) return Mat::Zero(A.rows(), B.rows());
    if (is_quasi_triangular(A) && is_quasi_triangular(B)) return linalg::trsyl('N', 'T', 1, A, B, C);
    Eigen::RealSchur<Mat> sa(A), sb(B);
    Mat Sa = sa.matrixT(), Sb = sb.matrixT();
    for (Mat* S : {&Sa, &Sb})
        for (Index j = 0; j < S->cols(); ++j)
            for (Index i = j + 2; i < S->rows(); ++i) (*S)(i, j) = 0.0;
    const Mat& Ua = sa.matrixU();
    const Mat& Ub = sb.matrixU();
    return Ua * linalg::trsyl('N', 'T', 1, Sa, Sb, Ua.transpose() * C * Ub) * Ub.transpose();
}

}  // namespace detail

inline CrossGramians cross_gramians(const DescriptorSystem& sys, const WeierstrassDecomposition& w,
                                    const DescriptorSystem& rom, const WeierstrassDecomposition& rw) {
    detail::require_stable(w);
    detail::require_stable(rw);
    detail::require(sys.m() == rom.m(), ErrorCode::DimensionMismatch, "full and reduced models differ in inputs");
    CrossGramians c;
    const auto full = controllability_gramians(sys, w);
    const auto red = controllability_gramians(rom, rw);
    c.P1 = full.P1;
    c.P2 = full.P2;
    c.Phat1 = red.P1;
    c.Phat2 = red.P2;
    c.Phat_p = red.P_p;
    c.Phat_i = red.P_i;
    c.X = detail::sylvester(w.J, rw.J, -w.B1 * rw.B1.transpose());
    c.Y = Mat::Zero(w.n_inf, rw.n_inf);
    if (w.n_inf > 0 && rw.n_inf > 0) {
        Mat L = w.B2, R = rw.B2;
        for (int k = 0; k < std::min(w.nu, rw.nu); ++k) {
            c.Y += L * R.transpose();
            L = w.N * L;
            R = rw.N * R;
        }
    }
    c.Ptilde_p = w.Tinv_f() * c.X * rw.Tinv_f().transpose();
    c.Ptilde_i = w.Tinv_i() * c.Y * rw.Tinv_i().transpose();
    return c;
}

/// Bound contributions for one output component.
struct OutputBound {
    /// tr(P M P M), tr(Pt^T M Pt Mh), tr(Ph Mh Ph Mh) for the proper-proper kernel.
    std::array<double, 3> trace_pp{};
    /// tr(P_p M P_i M), tr(Pt_p^T M Pt_i Mh), tr(Ph_p Mh Ph_i Mh) for the improper-proper kernel.
    std::array<double, 3> trace_ip{};
    double T_pp_trace = 0, T_ip_trace = 0;  // t1 - 2 t2 + t3, subject to cancellation
    double T_pp = 0, T_ip = 0;              // same quantities from the factored joint Gramians
    double T_C = 0;                         // squared L2 distance of the linear impulse responses
    double bound_pp = 0, bound_ip = 0, bound_C = 0;
    double bound = 0;
};

struct ErrorBoundReport {
    std::vector<OutputBound> outputs;
    SignalNorms norms;
    int nu = 1;
    double bound_total = 0;          // uses norms including the tail estimate
    double bound_total_horizon = 0;  // uses norms on [0, horizon]
    std::string exponent_note =
        "proper-proper term uses sqrt(T_pp) * ||u (x) u||_L2 with ||u (x) u||_L2 = ||u||_L2^2 (no extra square root)";
};

namespace detail {

inline Mat blkdiag(const Mat& a, const Mat& b) {
    Mat d = Mat::Zero(a.rows() + b.rows(), a.cols() + b.cols());
    d.topLeftCorner(a.rows(), a.cols()) = a;
    d.bottomRightCorner(b.rows(), b.cols()) = b;
    return d;
}

inline double clamp0(double x) { return x > 0 ? x : 0.0; }

}  // namespace detail

/// A-priori bound on max_t ||y(t) - yhat(t)|| for the given input.
inline ErrorBoundReport error_bound(const DescriptorSystem& sys, const WeierstrassDecomposition& w,
                                    const DescriptorSystem& rom, const WeierstrassDecomposition& rw,
                                    const Signal& u, double horizon) {
    detail::require(sys.output.M.size() == rom.output.M.size() &&
                        sys.output.C.has_value() == rom.output.C.has_value(),
                    ErrorCode::DimensionMismatch, "full and reduced output specs differ");
    const int nu = std::max(w.nu, rw.nu);
    ErrorBoundReport rep;
    rep.nu = nu;
    rep.norms = signal_norms(u, horizon, nu);
    const auto c = cross_gramians(sys, w, rom, rw);

    const Index nf = w.n_f, ni = w.n_inf, rf = rw.n_f, ri = rw.n_inf;
    // Joint proper Gramian [[P1, X], [X^T, Phat1]] = Re Re^T.
    Mat Pe(nf + rf, nf + rf);
    Pe << c.P1, c.X, c.X.transpose(), c.Phat1;
    // Eigenvalues at roundoff level are numerically zero; their square roots would pollute T.
    const double eps = std::numeric_limits<double>::epsilon();
    const Mat Re = psd_factor(Pe, eps * static_cast<double>(std::max<Index>(Pe.rows(), 1))).R;
    // Joint improper factor [B2e, Ne B2e, ..., Ne^{nu-1} B2e].
    Mat Ri(ni + ri, 0);
    if (ni + ri > 0) {
        Mat b(ni + ri, sys.m());
        b << w.B2, rw.B2;
        const Mat Ne = detail::blkdiag(w.N, rw.N);
        Ri.resize(ni + ri, static_cast<Index>(nu) * sys.m());
        for (int k = 0; k < nu; ++k) {
            Ri.middleCols(k * sys.m(), sys.m()) = b;
            b = Ne * b;
        }
    }

    const std::size_t p = sys.output.M.size();
    const Index pc = sys.output.C ? sys.output.C->rows() : 0;
    const std::size_t outs = std::max<std::size_t>(p, static_cast<std::size_t>(pc));
    rep.outputs.resize(outs);
    for (std::size_t j = 0; j < p; ++j) {
        auto& o = rep.outputs[j];
        const Mat M11 = w.M11(j), M12 = w.M12(j), H11 = rw.M11(j), H12 = rw.M12(j);
        o.trace_pp = {(c.P1 * M11 * c.P1 * M11).trace(), (c.X.transpose() * M11 * c.X * H11).trace(),
                      (c.Phat1 * H11 * c.Phat1 * H11).trace()};
        o.trace_ip = {(c.P1 * M12 * c.P2 * M12.transpose()).trace(),
                      (c.X.transpose() * M12 * c.Y * H12.transpose()).trace(),
                      (c.Phat1 * H12 * c.Phat2 * H12.transpose()).trace()};
        o.T_pp_trace = o.trace_pp[0] - 2 * o.trace_pp[1] + o.trace_pp[2];
        o.T_ip_trace = o.trace_ip[0] - 2 * o.trace_ip[1] + o.trace_ip[2];
        const Mat Me = detail::blkdiag(M11, -H11);
        o.T_pp = (Re.transpose() * Me * Re).squaredNorm();
        if (Ri.cols() > 0 && Re.cols() > 0) o.T_ip = (Re.transpose() * detail::blkdiag(M12, -H12) * Ri).squaredNorm();
    }
    if (w.Ct) {
        Mat Ce(pc, nf + rf);
        Ce << w.Ct->leftCols(nf), -rw.Ct->leftCols(rf);
        const Mat CR = Ce * Re;
        for (Index j = 0; j < pc; ++j) rep.outputs[static_cast<std::size_t>(j)].T_C = CR.row(j).squaredNorm();
    }

    auto total = [&](double L2, double C, bool store) {
        double sum = 0;
        for (auto& o : rep.outputs) {
            const double bpp = std::sqrt(detail::clamp0(o.T_pp)) * L2 * L2;
            const double bip = 2 * std::sqrt(detail::clamp0(o.T_ip)) * std::sqrt(static_cast<double>(nu)) * C * L2;
            const double bc = std::sqrt(detail::clamp0(o.T_C)) * L2;
            if (store) {
                o.bound_pp = bpp;
                o.bound_ip = bip;
                o.bound_C = bc;
                o.bound = bpp + bip + bc;
            }
            sum += bpp + bip + bc;
        }
        return sum;
    };
    rep.bound_total = total(rep.norms.L2, rep.norms.C, true);
    rep.bound_total_horizon = total(rep.norms.L2_horizon, rep.norms.C_horizon, false);
    return rep;
}

}  // namespace qbt
