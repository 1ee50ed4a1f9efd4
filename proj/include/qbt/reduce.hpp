#pragma once

#include "qbt/gramians.hpp"

#include <algorithm>
#include <limits>

namespace qbt {

/// Proper (sigma) and improper (theta) Hankel singular values, both descending.
struct HankelSpectrum {
    Vec sigma;
    Vec theta;
};

/// Gramian square-root factors: P_p = R_p R_p^T, Q_p = L_p L_p^T, likewise for the improper pair.
struct BalancingFactors {
    Mat R_p, L_p, R_i, L_i;
};

struct FactorOptions {
    /// Proper Gramians: eigenvalues below drop_tol * lambda_max are discarded.
    /// The default keeps every positive eigenvalue so the sigma tail reaches the roundoff floor.
    double drop_tol = 0.0;
    /// Improper Gramians: negative selects the numerical rank cut n * eps, which zero theta detection needs.
    double improper_drop_tol = -1.0;
};

/// Factors are built from the canonical blocks and mapped back with T^{-1} and W^{-T}.
inline BalancingFactors balancing_factors(const WeierstrassDecomposition& w, const GramianSet& g,
                                          const FactorOptions& opt = {}) {
    const double di = opt.improper_drop_tol >= 0
                          ? opt.improper_drop_tol
                          : std::numeric_limits<double>::epsilon() * static_cast<double>(std::max<Index>(w.n_inf, 1));
    BalancingFactors f;
    f.R_p = w.Tinv_f() * psd_factor(g.P1, opt.drop_tol).R;
    f.R_i = w.Tinv_i() * psd_factor(g.P2, di).R;
    f.L_p = w.Winv_f().transpose() * psd_factor(g.Q1, opt.drop_tol).R;
    f.L_i = w.Winv_i().transpose() * psd_factor(g.Q2, di).R;
    return f;
}

inline HankelSpectrum hankel_values(const DescriptorSystem& sys, const BalancingFactors& f) {
    HankelSpectrum h;
    h.sigma = linalg::svd(f.L_p.transpose() * sys.E * f.R_p).s;
    h.theta = linalg::svd(f.L_i.transpose() * sys.A * f.R_i).s;
    return h;
}

inline HankelSpectrum hankel_values(const DescriptorSystem& sys, const WeierstrassDecomposition& w,
                                    const GramianSet& g) {
    return hankel_values(sys, balancing_factors(w, g));
}

/// Either a relative tolerance on sigma or a fixed proper order.
struct TruncationCriterion {
    std::optional<double> tol_sigma_rel;
    std::optional<Index> order;

    static TruncationCriterion by_tol(double tol) { return {tol, std::nullopt}; }
    static TruncationCriterion by_order(Index r) { return {std::nullopt, r}; }
};

struct TruncationOptions {
    double tol_theta_zero = 1e-12;
    /// sigma_k <= sigma_floor * sigma_1 counts as zero, also with tol_sigma_rel = 0.
    double sigma_floor = 1e-12;
    /// Relative gap below which sigma_r and sigma_{r+1} count as a tie.
    double tie_tol = 1e-12;
    double structure_tol = 1e-8;
    FactorOptions factors{};
};

struct TruncationRecord {
    Vec sigma, theta;
    Index r_p = 0, r_i = 0;
    Vec sigma_kept() const { return sigma.head(r_p); }
    Vec sigma_dropped() const { return sigma.tail(sigma.size() - r_p); }
    Vec theta_kept() const { return theta.head(r_i); }
    Vec theta_dropped() const { return theta.tail(theta.size() - r_i); }
    /// Relative off-block mass of the assembled (E^, A^) before cleanup.
    double structure_deviation = 0;
    bool cleaned = false;
};

struct ReducedModel {
    DescriptorSystem system;
    Index r_p = 0, r_i = 0;
    Mat W_r, T_r;  // n x r
    TruncationRecord record;
    std::vector<Warning> warnings;

    Index r() const { return r_p + r_i; }
    bool has_warning(Warning x) const { return std::find(warnings.begin(), warnings.end(), x) != warnings.end(); }
};

namespace detail {

inline Index proper_order(const Vec& s, const TruncationCriterion& c, const TruncationOptions& o) {
    const Index len = s.size();
    if (len == 0 || s(0) <= 0) return 0;
    Index nonzero = 0;
    while (nonzero < len && s(nonzero) > o.sigma_floor * s(0)) ++nonzero;
    Index r = 0;
    if (c.order) {
        require(*c.order >= 0, ErrorCode::InvalidParams, "order must be nonnegative");
        r = std::min(*c.order, nonzero);
    } else {
        const double tol = c.tol_sigma_rel.value_or(0.0);
        require(tol >= 0, ErrorCode::InvalidParams, "tolerance must be nonnegative");
        while (r < nonzero && s(r) >= tol * s(0)) ++r;
    }
    while (r > 0 && r < nonzero && s(r) >= s(r - 1) * (1 - o.tie_tol)) ++r;
    return r;
}

}  // namespace detail

/// Balanced truncation of both parts. The improper part keeps every nonzero theta.
inline ReducedModel balance_and_truncate(const DescriptorSystem& sys, const WeierstrassDecomposition& w,
                                         const GramianSet& g, const TruncationCriterion& crit,
                                         const TruncationOptions& opt = {}) {
    detail::require_stable(w);
    const auto f = balancing_factors(w, g, opt.factors);
    const auto svp = linalg::svd(f.L_p.transpose() * sys.E * f.R_p);
    const auto svi = linalg::svd(f.L_i.transpose() * sys.A * f.R_i);

    ReducedModel rom;
    rom.record.sigma = svp.s;
    rom.record.theta = svi.s;
    const Index rp = detail::proper_order(svp.s, crit, opt);
    Index ri = 0;
    if (svi.s.size() > 0 && svi.s(0) > 0)
        while (ri < svi.s.size() && svi.s(ri) > opt.tol_theta_zero * svi.s(0)) ++ri;
    detail::require(rp + ri > 0, ErrorCode::NothingObservable, "all Hankel singular values vanish");
    rom.r_p = rom.record.r_p = rp;
    rom.r_i = rom.record.r_i = ri;

    const Index n = sys.n(), r = rp + ri;
    rom.W_r.resize(n, r);
    rom.T_r.resize(n, r);
    if (rp > 0) {
        const Vec s = svp.s.head(rp).cwiseSqrt().cwiseInverse();
        rom.W_r.leftCols(rp) = f.L_p * svp.U.leftCols(rp) * s.asDiagonal();
        rom.T_r.leftCols(rp) = f.R_p * svp.V.leftCols(rp) * s.asDiagonal();
    }
    if (ri > 0) {
        const Vec s = svi.s.head(ri).cwiseSqrt().cwiseInverse();
        rom.W_r.rightCols(ri) = f.L_i * svi.U.leftCols(ri) * s.asDiagonal();
        rom.T_r.rightCols(ri) = f.R_i * svi.V.leftCols(ri) * s.asDiagonal();
    }

    const Mat& Wr = rom.W_r;
    const Mat& Tr = rom.T_r;
    Mat Eh = Wr.transpose() * sys.E * Tr;
    Mat Ah = Wr.transpose() * sys.A * Tr;

    Mat Ec = Eh, Ac = Ah;
    Ec.topLeftCorner(rp, rp).setIdentity();
    Ec.topRightCorner(rp, ri).setZero();
    Ec.bottomLeftCorner(ri, rp).setZero();
    Ac.bottomRightCorner(ri, ri).setIdentity();
    Ac.topRightCorner(rp, ri).setZero();
    Ac.bottomLeftCorner(ri, rp).setZero();
    const double dev = ((Eh - Ec).norm() + (Ah - Ac).norm()) / std::max(Ec.norm() + Ac.norm(), 1e-300);
    rom.record.structure_deviation = dev;
    if (dev <= opt.structure_tol) {
        Eh = Ec;
        Ah = Ac;
        rom.record.cleaned = true;
    } else {
        rom.warnings.push_back(Warning::StructureDeviation);
    }

    rom.system.E = Eh;
    rom.system.A = Ah;
    rom.system.B = Wr.transpose() * sys.B;
    for (const auto& M : sys.output.M) rom.system.output.M.push_back(detail::sym(Tr.transpose() * M * Tr));
    if (sys.output.C) rom.system.output.C = Mat(*sys.output.C * Tr);
    rom.system.tags = sys.tags;
    if (auto it = rom.system.tags.find("name"); it != rom.system.tags.end()) it->second += "-rom";
    rom.system.tags["reduced_from_n"] = std::to_string(n);

    if (rp > 0) {
        Eigen::EigenSolver<Mat> es(Ah.topLeftCorner(rp, rp), false);
        if ((es.eigenvalues().real().array() >= 0).any()) rom.warnings.push_back(Warning::UnstableReducedProperPart);
    }
    return rom;
}

/// Copy of the Gramian set with the mixed observability Gramians removed.
inline GramianSet ablate_mixed_gramians(const GramianSet& g) {
    GramianSet a = g;
    a.Q_p = g.Q_pp;
    a.Q_i = g.Q_ii;
    a.Q1 = g.Q11;
    a.Q2 = g.Q22;
    if (g.Q_pC) {
        a.Q_p += *g.Q_pC;
        a.Q_i += *g.Q_iC;
        a.Q1 += *g.QC1;
        a.Q2 += *g.QC2;
    }
    a.ablated = true;
    return a;
}

}  // namespace qbt
