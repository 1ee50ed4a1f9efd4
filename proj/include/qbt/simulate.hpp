#pragma once

#include "qbt/signal.hpp"
#include "qbt/spectral.hpp"

#include <cstdio>
#include <ostream>

namespace qbt {

enum class Integrator { RK4, Exact };

struct SimulateOptions {
    Integrator integrator = Integrator::RK4;
    /// Internal RK4 step; 0 selects min(1e-3, 0.1 / ||J||_1).
    double max_step = 0;
    bool keep_states = false;
};

/// Output samples y(t_i) as rows of y (N x p); optional states as rows of x (N x n).
struct Trajectory {
    std::vector<double> t;
    Mat y;
    std::optional<Mat> x;

    Index samples() const { return static_cast<Index>(t.size()); }
    Index p() const { return y.cols(); }
};

/// 0, step, 2 step, ..., horizon.
inline std::vector<double> uniform_grid(double horizon, double step) {
    detail::require(std::isfinite(horizon) && horizon > 0, ErrorCode::InvalidGrid, "horizon must be positive and finite");
    detail::require(std::isfinite(step) && step > 0, ErrorCode::InvalidGrid, "grid step must be positive");
    const double cnt = std::round(horizon / step);
    detail::require(cnt >= 1 && cnt < 1e8, ErrorCode::InvalidGrid, "grid has too few or too many points");
    const auto n = static_cast<std::size_t>(cnt);
    std::vector<double> t(n + 1);
    for (std::size_t i = 0; i <= n; ++i) t[i] = static_cast<double>(i) * step;
    t[n] = std::abs(t[n] - horizon) <= 1e-9 * horizon ? horizon : t[n];
    return t;
}

namespace detail {

/// Induced 1-norm.
inline double norm1(const Mat& J) { return J.cwiseAbs().colwise().sum().maxCoeff(); }

inline void check_grid(const std::vector<double>& t) {
    require(!t.empty(), ErrorCode::InvalidGrid, "empty time grid");
    require(std::isfinite(t[0]) && t[0] >= 0, ErrorCode::InvalidGrid, "grid must start at t >= 0");
    for (std::size_t i = 1; i < t.size(); ++i)
        require(std::isfinite(t[i]) && t[i] > t[i - 1], ErrorCode::InvalidGrid, "grid must be strictly increasing");
}

/// Stepwise exact propagation of x' = J x + B1 u with u expanded to q Taylor terms per step.
class ExactPropagator {
public:
    ExactPropagator(const Mat& J, const Mat& B1, const Signal& u) : J_(J), B1_(B1), u_(u) {}

    Vec advance(const Vec& x, double t, double dt) {
        const double rho = u_.max_abs_rate();
        const int sub = std::max(1, static_cast<int>(std::ceil(dt * rho)));
        const double h = dt / sub;
        const auto& st = stepper(h);
        Vec z = x;
        const Index m = B1_.cols();
        Vec U(m * st.q);
        for (int s = 0; s < sub; ++s) {
            const double ts = t + h * s;
            for (int j = 0; j < st.q; ++j) U.segment(j * m, m) = u_.derivative(j, ts);
            z = st.eJ * z + st.gamma * U;
        }
        return z;
    }

private:
    struct Step {
        int q;
        Mat eJ, gamma;
    };

    const Step& stepper(double h) {
        // Grid spacings computed as differences jitter by a few ulps; reuse the cached step.
        for (const auto& [key, st] : cache_)
            if (std::abs(key - h) <= 1e-11 * h) return st;
        const double rh = u_.max_abs_rate() * h;
        int q = 1;
        double term = rh;
        while (q < 40 && term > 1e-18) {
            ++q;
            term *= rh / q;
        }
        const Index nf = J_.rows(), m = B1_.cols(), na = nf + m * q;
        Mat aug = Mat::Zero(na, na);
        aug.topLeftCorner(nf, nf) = J_;
        aug.block(0, nf, nf, m) = B1_;
        for (int j = 0; j + 1 < q; ++j) aug.block(nf + j * m, nf + (j + 1) * m, m, m).setIdentity();
        const Mat phi = (aug * h).exp();
        cache_.emplace_back(h, Step{q, phi.topLeftCorner(nf, nf), phi.topRightCorner(nf, m * q)});
        return cache_.back().second;
    }

    const Mat& J_;
    const Mat& B1_;
    const Signal& u_;
    std::vector<std::pair<double, Step>> cache_;
};

inline Vec rk4_advance(const Mat& J, const Mat& B1, const Signal& u, const Vec& x, double t, double dt,
                       double hmax) {
    const int sub = std::max(1, static_cast<int>(std::ceil(dt / hmax - 1e-9)));
    const double h = dt / sub;
    Vec z = x;
    for (int s = 0; s < sub; ++s) {
        const double ts = t + h * s;
        const Vec u0 = B1 * u.value(ts), uh = B1 * u.value(ts + h / 2), u1 = B1 * u.value(ts + h);
        const Vec k1 = J * z + u0;
        const Vec k2 = J * (z + h / 2 * k1) + uh;
        const Vec k3 = J * (z + h / 2 * k2) + uh;
        const Vec k4 = J * (z + h * k3) + u1;
        z += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
    }
    return z;
}

}  // namespace detail

/// Output trajectory from the zero initial state. The proper state is integrated in canonical
/// coordinates and the improper state is the closed-form nilpotent sum.
/// A supplied x0 must be consistent: zero proper part and improper part matching u(0).
inline Trajectory simulate(const DescriptorSystem& sys, const WeierstrassDecomposition& w, const Signal& u,
                           const std::vector<double>& grid, const SimulateOptions& opt = {},
                           const std::optional<Vec>& x0 = std::nullopt) {
    using detail::require;
    detail::check_grid(grid);
    require(sys.n() == w.n(), ErrorCode::DimensionMismatch, "decomposition does not match system");
    require(u.m() == sys.m(), ErrorCode::DimensionMismatch,
            "signal has " + std::to_string(u.m()) + " components, system has " + std::to_string(sys.m()) + " inputs");
    require(u.max_derivative() < 0 || u.max_derivative() >= w.nu - 1, ErrorCode::SignalTooRough,
            "index " + std::to_string(w.nu) + " needs " + std::to_string(w.nu - 1) + " input derivatives");

    const Index nf = w.n_f, ni = w.n_inf, n = w.n();
    std::vector<Mat> NB;
    for (int k = 0; k < w.nu; ++k) NB.push_back(w.N_pow(k) * w.B2);
    auto improper = [&](double t) {
        Vec x2 = Vec::Zero(ni);
        for (int k = 0; k < w.nu && ni > 0; ++k) x2 -= NB[static_cast<std::size_t>(k)] * u.derivative(k, t);
        return x2;
    };

    if (x0) {
        require(x0->size() == n, ErrorCode::DimensionMismatch, "initial state has wrong length");
        const double scale = std::max(1.0, x0->norm());
        require((w.T_f() * *x0).norm() <= 1e-12 * scale, ErrorCode::InconsistentInitialState,
                "only a zero proper initial state is supported");
        require((w.T_i() * *x0 - improper(0.0)).norm() <= 1e-10 * std::max(scale, improper(0.0).norm()),
                ErrorCode::InconsistentInitialState, "improper part of x0 does not match the input at t = 0");
    }

    const Index p = sys.p();
    Trajectory tr;
    tr.t = grid;
    const auto N = static_cast<Index>(grid.size());
    tr.y.resize(N, p);
    if (opt.keep_states) tr.x = Mat(N, n);

    double hmax = opt.max_step;
    if (hmax <= 0) {
        const double nJ = nf > 0 ? detail::norm1(w.J) : 0.0;
        hmax = nJ > 0 ? std::min(1e-3, 0.1 / nJ) : 1e-3;
    }
    detail::ExactPropagator exact(w.J, w.B1, u);

    Vec x1 = Vec::Zero(nf);
    double t = 0;
    Vec z(n);
    for (Index i = 0; i < N; ++i) {
        const double ti = grid[static_cast<std::size_t>(i)];
        if (ti > t && nf > 0) {
            x1 = opt.integrator == Integrator::Exact ? exact.advance(x1, t, ti - t)
                                                     : detail::rk4_advance(w.J, w.B1, u, x1, t, ti - t, hmax);
        }
        t = ti;
        z.head(nf) = x1;
        z.tail(ni) = improper(ti);
        for (std::size_t j = 0; j < w.Mt.size(); ++j) tr.y(i, static_cast<Index>(j)) = z.dot(w.Mt[j] * z);
        if (w.Ct) {
            const Vec lin = *w.Ct * z;
            if (w.Mt.empty()) tr.y.row(i) = lin.transpose();
            else tr.y.row(i) += lin.transpose();
        }
        if (tr.x) tr.x->row(i) = (w.Tinv * z).transpose();
    }
    return tr;
}

struct ErrorMetrics {
    std::vector<double> pointwise;  // ||y(t_i) - y^(t_i)||_2
    double Linf = 0, L2 = 0;
    double y_max = 0;  // max ||y(t_i)||
};

inline ErrorMetrics output_error(const Trajectory& full, const Trajectory& rom) {
    using detail::require;
    require(full.t.size() == rom.t.size(), ErrorCode::GridMismatch, "trajectories have different sample counts");
    for (std::size_t i = 0; i < full.t.size(); ++i)
        require(std::abs(full.t[i] - rom.t[i]) <= 1e-12 * std::max(1.0, std::abs(full.t[i])), ErrorCode::GridMismatch,
                "trajectories are sampled on different grids");
    require(full.p() == rom.p(), ErrorCode::DimensionMismatch, "trajectories have different output counts");
    ErrorMetrics e;
    e.pointwise.resize(full.t.size());
    for (std::size_t i = 0; i < full.t.size(); ++i) {
        const auto r = static_cast<Index>(i);
        e.pointwise[i] = (full.y.row(r) - rom.y.row(r)).norm();
        e.Linf = std::max(e.Linf, e.pointwise[i]);
        e.y_max = std::max(e.y_max, full.y.row(r).norm());
    }
    double acc = 0;
    for (std::size_t i = 1; i < full.t.size(); ++i)
        acc += 0.5 * (full.t[i] - full.t[i - 1]) * (e.pointwise[i] * e.pointwise[i] + e.pointwise[i - 1] * e.pointwise[i - 1]);
    e.L2 = std::sqrt(acc);
    return e;
}

/// CSV with a versioned header comment: t, y_1..y_p and, when rom is given, yhat_1..yhat_p, abs_err.
inline void write_trajectory_csv(std::ostream& os, const Trajectory& full, const Trajectory* rom = nullptr) {
    std::optional<ErrorMetrics> err;
    if (rom) err = output_error(full, *rom);
    os << "# qbt-trajectory v1\n";
    os << "t";
    for (Index j = 0; j < full.p(); ++j) os << ",y" << j + 1;
    if (rom) {
        for (Index j = 0; j < rom->p(); ++j) os << ",yhat" << j + 1;
        os << ",abs_err";
    }
    os << "\n";
    char buf[64];
    auto put = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        os << buf;
    };
    for (std::size_t i = 0; i < full.t.size(); ++i) {
        const auto r = static_cast<Index>(i);
        put(full.t[i]);
        for (Index j = 0; j < full.p(); ++j) os << ',', put(full.y(r, j));
        if (rom) {
            for (Index j = 0; j < rom->p(); ++j) os << ',', put(rom->y(r, j));
            os << ',';
            put(err->pointwise[i]);
        }
        os << "\n";
    }
}

}  // namespace qbt
