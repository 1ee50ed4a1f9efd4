#pragma once

// Reference computations that bypass the library solvers: quadrature of the defining
// integrals and the terminating sums, evaluated from a known canonical form.

#include "qbt/qbt.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <vector>

namespace oracle {

using qbt::Index;
using qbt::Mat;
using qbt::Vec;
using qbt::WeierstrassDecomposition;

/// Composite 10-point Gauss-Legendre rule on [0, L].
struct Rule {
    std::vector<double> t, w;
};

inline Rule gauss_rule(double L, double panel) {
    using G = boost::math::quadrature::gauss<double, 10>;
    const auto& x = G::abscissa();
    const auto& wt = G::weights();
    Rule r;
    const int panels = static_cast<int>(std::ceil(L / panel));
    const double h = L / panels;
    for (int p = 0; p < panels; ++p) {
        const double mid = (p + 0.5) * h, half = 0.5 * h;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double signs[2] = {1.0, -1.0};
            for (double s : signs) {
                if (x[i] == 0.0 && s < 0) continue;
                r.t.push_back(mid + s * half * x[i]);
                r.w.push_back(half * wt[i]);
            }
        }
    }
    return r;
}

/// Integration length after which e^{2 alpha t} (alpha = spectral abscissa of J) falls below 1e-17.
inline double horizon_for(const Mat& J) {
    if (J.rows() == 0) return 1.0;
    const double alpha = Eigen::EigenSolver<Mat>(J, false).eigenvalues().real().maxCoeff();
    return 40.0 / (-alpha) + 5.0;
}

inline Mat FJ(const WeierstrassDecomposition& w, double t) {
    return w.Tinv.leftCols(w.n_f) * Mat((w.J * t).exp()) * w.Winv.topRows(w.n_f);
}

inline Mat FN(const WeierstrassDecomposition& w, int k) {
    Mat Nk = Mat::Identity(w.n_inf, w.n_inf);
    for (int i = 0; i < k; ++i) Nk = Nk * w.N;
    return -(w.Tinv.rightCols(w.n_inf) * Nk * w.Winv.bottomRows(w.n_inf));
}

/// Integral of F_J(t)^T X F_J(t) (observability) or F_J(t) X F_J(t)^T (controllability).
/// e^{Jt} is advanced panel by panel from exponentials of the node offsets.
inline Mat integral(const WeierstrassDecomposition& w, const Mat& X, bool obs) {
    const Index n = w.n(), nf = w.n_f;
    if (nf == 0) return Mat::Zero(n, n);
    const Mat Tf = w.Tinv.leftCols(nf), Wf = w.Winv.topRows(nf);
    const Mat Xc = obs ? Mat(Tf.transpose() * X * Tf) : Mat(Wf * X * Wf.transpose());
    const double L = horizon_for(w.J), panel = 0.5;
    const auto one = gauss_rule(panel, panel);
    const int panels = static_cast<int>(std::ceil(L / panel));
    std::vector<Mat> offs;
    for (double t : one.t) offs.push_back((w.J * t).exp());
    const Mat step = (w.J * panel).exp();
    Mat base = Mat::Identity(nf, nf), S = Mat::Zero(nf, nf);
    for (int p = 0; p < panels; ++p) {
        for (std::size_t i = 0; i < offs.size(); ++i) {
            const Mat F = base * offs[i];
            S += one.w[i] * (obs ? Mat(F.transpose() * Xc * F) : Mat(F * Xc * F.transpose()));
        }
        base = base * step;
    }
    return obs ? Mat(Wf.transpose() * S * Wf) : Mat(Tf * S * Tf.transpose());
}

/// Sum over k < nu of F_N(k)^T X F_N(k) or F_N(k) X F_N(k)^T.
inline Mat nil_sum(const WeierstrassDecomposition& w, const Mat& X, bool obs) {
    const Index n = w.n();
    Mat S = Mat::Zero(n, n);
    if (w.n_inf == 0) return S;
    for (int k = 0; k < w.nu; ++k) {
        const Mat F = FN(w, k);
        S += obs ? Mat(F.transpose() * X * F) : Mat(F * X * F.transpose());
    }
    return S;
}

struct Gramians {
    Mat P_p, P_i, Q_pp, Q_ip, Q_pi, Q_ii;
};

/// Gramians of the original coordinates summed over the quadratic outputs.
inline Gramians gramians(const qbt::DescriptorSystem& s, const WeierstrassDecomposition& w) {
    Gramians g;
    const Mat BB = s.B * s.B.transpose();
    g.P_p = integral(w, BB, false);
    g.P_i = nil_sum(w, BB, false);
    const Index n = s.n();
    Mat Rp = Mat::Zero(n, n), Ri = Mat::Zero(n, n);
    for (const auto& M : s.output.M) {
        Rp += M * g.P_p * M;
        Ri += M * g.P_i * M;
    }
    g.Q_pp = integral(w, Rp, true);
    g.Q_ip = integral(w, Ri, true);
    g.Q_pi = nil_sum(w, Rp, true);
    g.Q_ii = nil_sum(w, Ri, true);
    return g;
}

inline double rel(const Mat& a, const Mat& b) {
    const double s = std::max(b.norm(), 1e-300);
    return (a - b).norm() / s;
}

}  // namespace oracle
