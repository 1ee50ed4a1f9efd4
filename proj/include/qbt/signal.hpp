#pragma once

#include "qbt/core.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/minima.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <complex>
#include <limits>
#include <map>
#include <string>
#include <string_view>

namespace qbt {

/// c * sin(omega t)^a * cos(omega t)^b * exp(-gamma t)
struct SignalTerm {
    double c = 1;
    int a = 0, b = 0;
    double omega = 1;
    double gamma = 0;
};

/// Vector input whose components are finite sums of complex exponentials c e^{s t}.
/// Derivatives of every order are exact: d^k/dt^k c e^{st} = c s^k e^{st}.
class Signal {
public:
    using cplx = std::complex<double>;
    struct Mode {
        cplx coef, rate;
    };

    Signal() = default;
    explicit Signal(std::vector<std::vector<Mode>> comps, std::string text = {})
        : comps_(std::move(comps)), text_(std::move(text)) {
        for (auto& c : comps_) normalize(c);
    }

    static Signal from_terms(const std::vector<std::vector<SignalTerm>>& comps) {
        std::vector<std::vector<Mode>> out;
        for (const auto& terms : comps) {
            std::vector<Mode> modes;
            for (const auto& t : terms) {
                auto e = expand_power(t.omega, t.a, true);
                e = multiply(e, expand_power(t.omega, t.b, false));
                for (auto& m : e) modes.push_back({m.coef * t.c, m.rate - t.gamma});
            }
            out.push_back(std::move(modes));
        }
        return Signal(std::move(out));
    }

    /// Scalar c e^{-gamma t}.
    static Signal exponential(double c, double gamma) { return from_terms({{SignalTerm{c, 0, 0, 1, gamma}}}); }

    /// Parses the signal mini-language, e.g. "0.2*exp(-t)", "sin(t)^3*exp(-t/2)", "sin(2t)^2*exp(-0.5t); cos(t)".
    static Signal parse(std::string_view text);

    Index m() const { return static_cast<Index>(comps_.size()); }
    const std::string& text() const { return text_; }
    const std::vector<std::vector<Mode>>& modes() const { return comps_; }

    Vec value(double t) const { return derivative(0, t); }

    Vec derivative(int k, double t) const {
        detail::require(k >= 0, ErrorCode::InvalidParams, "derivative order must be nonnegative");
        detail::require(max_derivative_ < 0 || k <= max_derivative_, ErrorCode::SignalTooRough,
                        "signal has no derivative of order " + std::to_string(k));
        Vec v(m());
        for (Index i = 0; i < m(); ++i) {
            double s = 0;
            for (const auto& md : comps_[static_cast<std::size_t>(i)])
                s += (md.coef * std::pow(md.rate, k) * std::exp(md.rate * t)).real();
            v(i) = s;
        }
        return v;
    }

    /// Smallest decay exponent over all modes; +inf for the zero signal.
    double decay_rate() const {
        double g = std::numeric_limits<double>::infinity();
        for (const auto& c : comps_)
            for (const auto& md : c) g = std::min(g, -md.rate.real());
        return g;
    }

    double max_abs_rate() const {
        double r = 0;
        for (const auto& c : comps_)
            for (const auto& md : c) r = std::max(r, std::abs(md.rate));
        return r;
    }

    /// Bound on ||u^(k)(t)|| e^{decay t}, valid for all t >= 0.
    double envelope(int k) const {
        double s2 = 0;
        for (const auto& c : comps_) {
            double s = 0;
            for (const auto& md : c) s += std::abs(md.coef) * std::pow(std::abs(md.rate), k);
            s2 += s * s;
        }
        return std::sqrt(s2);
    }

    /// -1 means unlimited.
    int max_derivative() const { return max_derivative_; }
    Signal& limit_smoothness(int k) {
        max_derivative_ = k;
        return *this;
    }

private:
    static std::vector<Mode> expand_power(double omega, int p, bool is_sin) {
        // sin = (e^{iwt} - e^{-iwt}) / 2i, cos = (e^{iwt} + e^{-iwt}) / 2
        const cplx i(0, 1);
        const cplx c_plus = is_sin ? 1.0 / (2.0 * i) : cplx(0.5);
        const cplx c_minus = is_sin ? -1.0 / (2.0 * i) : cplx(0.5);
        std::vector<Mode> base{{c_plus, i * omega}, {c_minus, -i * omega}};
        std::vector<Mode> out{{1.0, 0.0}};
        for (int k = 0; k < p; ++k) out = multiply(out, base);
        return out;
    }

    static std::vector<Mode> multiply(const std::vector<Mode>& x, const std::vector<Mode>& y) {
        std::vector<Mode> out;
        for (const auto& a : x)
            for (const auto& b : y) out.push_back({a.coef * b.coef, a.rate + b.rate});
        normalize(out);
        return out;
    }

    static void normalize(std::vector<Mode>& v) {
        auto key = [](const cplx& r) { return std::pair<double, double>(r.real(), r.imag()); };
        std::map<std::pair<double, double>, cplx> acc;
        for (const auto& md : v) acc[key(md.rate)] += md.coef;
        v.clear();
        double scale = 0;
        for (const auto& [r, c] : acc) scale = std::max(scale, std::abs(c));
        for (const auto& [r, c] : acc)
            if (std::abs(c) > 1e-15 * scale) v.push_back({c, cplx(r.first, r.second)});
    }

    friend class SignalParser;

    std::vector<std::vector<Mode>> comps_;
    std::string text_;
    int max_derivative_ = -1;
};

namespace detail {

inline Error parse_error(std::string_view text, std::size_t pos, const std::string& what) {
    return Error(ErrorCode::ParseError,
                 "signal '" + std::string(text) + "' at position " + std::to_string(pos) + ": " + what);
}

}  // namespace detail

/// Recursive-descent parser for the signal grammar:
///   signal    := component (';' component)*
///   component := ['+'|'-'] term (('+'|'-') term)*
///   term      := factor (['*'] factor)*
///   factor    := number | ('sin'|'cos') ['^' int] '(' lin ')' ['^' int] | 'exp' '(' lin ')'
///   lin       := ['-'] (number ['*'] 't' | 't' [('*'|'/') number]) with further '*'/'/' number
class SignalParser {
public:
    explicit SignalParser(std::string_view s) : s_(s) {}

    Signal run() {
        std::vector<std::vector<Signal::Mode>> comps;
        comps.push_back(component());
        while (peek() == ';') {
            ++p_;
            comps.push_back(component());
        }
        skip();
        if (p_ != s_.size()) throw detail::parse_error(s_, p_, "unexpected character");
        Signal sig(std::move(comps), std::string(s_));
        return sig;
    }

private:
    using Modes = std::vector<Signal::Mode>;

    void skip() {
        while (p_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[p_]))) ++p_;
    }
    char peek() {
        skip();
        return p_ < s_.size() ? s_[p_] : '\0';
    }
    void expect(char c) {
        if (peek() != c) throw detail::parse_error(s_, p_, std::string("expected '") + c + "'");
        ++p_;
    }
    bool word(std::string_view w) {
        skip();
        if (s_.substr(p_, w.size()) == w) {
            p_ += w.size();
            return true;
        }
        return false;
    }
    double number() {
        skip();
        const char* b = s_.data() + p_;
        char* e = nullptr;
        const std::string tmp(b, s_.size() - p_);
        const double v = std::strtod(tmp.c_str(), &e);
        const std::size_t used = static_cast<std::size_t>(e - tmp.c_str());
        if (used == 0) throw detail::parse_error(s_, p_, "expected a number");
        if (!std::isfinite(v)) throw detail::parse_error(s_, p_, "number out of range");
        p_ += used;
        return v;
    }
    int integer() {
        const std::size_t at = p_;
        const double v = number();
        if (v != std::floor(v) || v < 0 || v > 64) throw detail::parse_error(s_, at, "expected a small nonnegative integer");
        return static_cast<int>(v);
    }
    bool starts_number() {
        const char c = peek();
        return std::isdigit(static_cast<unsigned char>(c)) || c == '.';
    }

    Modes component() {
        double sign = 1;
        if (peek() == '-') { sign = -1; ++p_; }
        else if (peek() == '+') ++p_;
        Modes out = scaled(term(), sign);
        while (peek() == '+' || peek() == '-') {
            sign = s_[p_] == '-' ? -1 : 1;
            ++p_;
            for (auto& md : scaled(term(), sign)) out.push_back(md);
        }
        return out;
    }

    static Modes scaled(Modes m, double s) {
        for (auto& md : m) md.coef *= s;
        return m;
    }

    Modes term() {
        Signal::cplx coef = 1.0;
        std::vector<Modes> parts;
        bool have_exp = false;
        auto one = [&] {
            if (starts_number()) {
                coef *= number();
                return;
            }
            const std::size_t at = p_;
            const bool is_sin = word("sin");
            const bool is_cos = !is_sin && word("cos");
            if (is_sin || is_cos) {
                int pw = 1;
                if (peek() == '^') { ++p_; pw = integer(); }
                expect('(');
                const double w = linear();
                expect(')');
                if (peek() == '^') { ++p_; pw *= integer(); }
                parts.push_back(Signal::from_terms({{SignalTerm{1.0, is_sin ? pw : 0, is_cos ? pw : 0, w, 0}}})
                                    .modes()[0]);
                return;
            }
            if (word("exp")) {
                if (have_exp) throw detail::parse_error(s_, at, "at most one exponential per term");
                have_exp = true;
                expect('(');
                const double r = linear();
                expect(')');
                parts.push_back(Modes{{1.0, r}});
                return;
            }
            throw detail::parse_error(s_, at, "expected a number, sin, cos or exp");
        };
        one();
        for (;;) {
            const char c = peek();
            if (c == '*') {
                ++p_;
                one();
            } else if (std::isalpha(static_cast<unsigned char>(c)) || std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
                one();
            } else {
                break;
            }
        }
        Modes out{{coef, 0.0}};
        for (const auto& p : parts) {
            Modes next;
            for (const auto& a : out)
                for (const auto& b : p) next.push_back({a.coef * b.coef, a.rate + b.rate});
            out = std::move(next);
        }
        return out;
    }

    /// Coefficient c of a linear argument c*t.
    double linear() {
        double c = 1;
        if (peek() == '-') { c = -1; ++p_; }
        else if (peek() == '+') ++p_;
        bool have_t = false;
        bool first = true;
        for (;;) {
            char op = '*';
            if (!first) {
                const char nx = peek();
                if (nx == '*' || nx == '/') { op = nx; ++p_; }
                else if (nx == 't' || starts_number()) op = '*';
                else break;
            }
            first = false;
            if (peek() == 't') {
                if (op == '/') throw detail::parse_error(s_, p_, "t may not appear in a denominator");
                if (have_t) throw detail::parse_error(s_, p_, "argument must be linear in t");
                have_t = true;
                ++p_;
            } else {
                const std::size_t at = p_;
                const double v = number();
                if (op == '/') {
                    if (v == 0) throw detail::parse_error(s_, at, "division by zero");
                    c /= v;
                } else {
                    c *= v;
                }
            }
        }
        if (!have_t) throw detail::parse_error(s_, p_, "argument must contain t");
        return c;
    }

    std::string_view s_;
    std::size_t p_ = 0;
};

inline Signal Signal::parse(std::string_view text) { return SignalParser(text).run(); }

/// Norms entering the error bound. Values without suffix include the analytic tail past the horizon
/// when the signal decays; *_horizon values cover [0, horizon] only.
struct SignalNorms {
    double horizon = 0;
    int nu = 1;
    double L2 = 0, L2_horizon = 0;
    double C = 0, C_horizon = 0;  // max_{k < nu} sup ||u^(k)||
    double uu_L2 = 0;             // ||u (x) u||_L2 = ||u||_L2^2
    bool tail = false;            // tail estimate was added
};

namespace detail {

inline double l2_squared(const Signal& u, double a, double b) {
    using boost::math::quadrature::gauss_kronrod;
    const double rho = std::max(u.max_abs_rate(), 1.0);
    const double piece = 4.0 / rho;
    const auto f = [&](double t) { return u.value(t).squaredNorm(); };
    double total = 0;
    for (double lo = a; lo < b;) {
        const double hi = std::min(b, lo + piece);
        total += gauss_kronrod<double, 31>::integrate(f, lo, hi, 15, 1e-14);
        lo = hi;
    }
    return total;
}

inline double sup_norm(const Signal& u, int k, double H) {
    const double rho = std::max(u.max_abs_rate(), 1.0);
    const Index samples = std::clamp<Index>(static_cast<Index>(std::ceil(H * rho * 20)) + 1, 2001, 2000001);
    const double dt = H / static_cast<double>(samples - 1);
    std::vector<double> v(static_cast<std::size_t>(samples));
    for (Index i = 0; i < samples; ++i) v[static_cast<std::size_t>(i)] = u.derivative(k, dt * static_cast<double>(i)).norm();
    double best = *std::max_element(v.begin(), v.end());
    // Refine around local maxima that come close to the sampled maximum.
    for (Index i = 0; i < samples; ++i) {
        const auto s = static_cast<std::size_t>(i);
        const bool left = i == 0 || v[s] >= v[s - 1];
        const bool right = i == samples - 1 || v[s] >= v[s + 1];
        if (!(left && right) || v[s] < 0.9 * best) continue;
        const double lo = std::max(0.0, dt * static_cast<double>(i - 1)), hi = std::min(H, dt * static_cast<double>(i + 1));
        const auto neg = [&](double t) { return -u.derivative(k, t).norm(); };
        const auto r = boost::math::tools::brent_find_minima(neg, lo, hi, 50);
        best = std::max(best, -r.second);
    }
    return best;
}

}  // namespace detail

/// L2 and C^{nu-1} norms of u on [0, horizon] (horizon may be +inf for decaying signals).
inline SignalNorms signal_norms(const Signal& u, double horizon, int nu) {
    detail::require(horizon > 0, ErrorCode::InvalidParams, "horizon must be positive");
    detail::require(nu >= 1, ErrorCode::InvalidParams, "nu must be >= 1");
    detail::require(u.max_derivative() < 0 || u.max_derivative() >= nu - 1, ErrorCode::SignalTooRough,
                    "signal provides " + std::to_string(u.max_derivative()) + " derivatives, need " +
                        std::to_string(nu - 1));
    SignalNorms r;
    r.nu = nu;
    const double gamma = u.decay_rate();
    const bool decays = gamma > 0;
    double H = horizon;
    if (std::isinf(horizon)) {
        detail::require(decays, ErrorCode::InvalidParams, "infinite horizon needs a decaying signal");
        if (std::isinf(gamma)) {
            H = 1;
        } else {
            double amp = 0;
            for (int k = 0; k < nu; ++k) amp = std::max(amp, u.envelope(k));
            H = std::max(1.0, (std::log(std::max(amp, 1e-300)) + 40.0) / gamma);
        }
    }
    r.horizon = horizon;

    const double i2 = detail::l2_squared(u, 0, H);
    r.L2_horizon = std::sqrt(i2);
    r.C_horizon = 0;
    for (int k = 0; k < nu; ++k) r.C_horizon = std::max(r.C_horizon, detail::sup_norm(u, k, H));

    if (decays) {
        r.tail = true;
        const double e0 = u.envelope(0);
        const double tail2 = std::isinf(gamma) ? 0.0 : e0 * e0 * std::exp(-2 * gamma * H) / (2 * gamma);
        r.L2 = std::sqrt(i2 + tail2);
        r.C = r.C_horizon;
        if (!std::isinf(gamma))
            for (int k = 0; k < nu; ++k) r.C = std::max(r.C, u.envelope(k) * std::exp(-gamma * H));
        if (std::isinf(horizon)) r.L2_horizon = r.L2, r.C_horizon = r.C;
    } else {
        r.L2 = r.L2_horizon;
        r.C = r.C_horizon;
    }
    r.uu_L2 = r.L2 * r.L2;
    return r;
}

}  // namespace qbt
