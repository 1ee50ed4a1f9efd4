// Command-line front end: generate -> reduce -> simulate -> bound, plus hsv and verify.

#include "qbt/qbt.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

namespace {

using namespace qbt;

enum Exit { kOk = 0, kUsage = 2, kValidation = 3, kSolver = 4, kIo = 5, kVerifyFailed = 6 };

int exit_code(ErrorCode c) {
    switch (c) {
        case ErrorCode::SolverFailure:
        case ErrorCode::IndefiniteMatrix:
            return kSolver;
        case ErrorCode::IoError:
        case ErrorCode::ParseError:
            return kIo;
        default:
            return kValidation;
    }
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

struct Config {
    std::string manifest, rom, out;
    std::string which, signal = "0.2*exp(-t)", integrator = "exact";
    double tol = 1e-8, theta_tol = 1e-12, horizon = 10, step = 0.01;
    Index order = -1;
    bool ablate = false;
    std::uint64_t seed = 1;
    Index k = 15, g = 600, nf = 6, ninf = 4, m = 1, p = 1;
    int nu = 2;
    bool linear = false;
};

/// Writes to the --out file, or stdout when it is empty or "-".
class Sink {
public:
    explicit Sink(const std::string& path) {
        if (!path.empty() && path != "-") {
            file_.open(path);
            if (!file_) throw Error(ErrorCode::IoError, "cannot write " + path);
        }
    }
    std::ostream& os() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }

private:
    std::ofstream file_;
};

struct Loaded {
    DescriptorSystem sys;
    WeierstrassDecomposition w;
};

Loaded load_and_separate(const std::string& manifest) {
    Loaded l;
    l.sys = load_system(std::filesystem::path(manifest));
    validate(l.sys);
    l.w = separate(l.sys);
    for (auto x : l.w.warnings) std::cerr << "warning: " << to_string(x) << "\n";
    return l;
}

void write_hsv(std::ostream& os, const Vec& sigma, const Vec& theta) {
    os << "# qbt-hsv v1\nkind,index,value\n";
    for (Index i = 0; i < sigma.size(); ++i) os << "sigma," << i + 1 << "," << fmt(sigma(i)) << "\n";
    for (Index i = 0; i < theta.size(); ++i) os << "theta," << i + 1 << "," << fmt(theta(i)) << "\n";
}

TruncationCriterion criterion(const Config& c) {
    return c.order >= 0 ? TruncationCriterion::by_order(c.order) : TruncationCriterion::by_tol(c.tol);
}

int cmd_generate(const Config& c) {
    DescriptorSystem s;
    std::optional<int> nu;
    if (c.which == "illustrative") {
        s = bench::gen_illustrative();
        nu = 2;
    } else if (c.which == "stokes") {
        s = bench::gen_stokes(c.k);
    } else if (c.which == "msd") {
        s = bench::gen_msd(c.g);
    } else if (c.which == "random_wcf") {
        bench::RandomWcfOptions o;
        o.m = c.m;
        o.p = c.p;
        o.linear_output = c.linear;
        s = bench::gen_random_wcf(c.nf, c.ninf, c.nu, c.seed, o).first;
        nu = c.nu;
    } else {
        throw Error(ErrorCode::InvalidParams, "unknown benchmark '" + c.which + "'");
    }
    const auto mf = save_system(s, c.out, {}, nu);
    std::cout << "wrote " << mf.path.string() << " (n = " << s.n() << ", m = " << s.m() << ", p = " << s.p() << ")\n";
    return kOk;
}

int cmd_reduce(const Config& c) {
    auto l = load_and_separate(c.manifest);
    GramianSet g = compute_gramians(l.sys, l.w);
    if (c.ablate) g = ablate_mixed_gramians(g);
    TruncationOptions opt;
    opt.tol_theta_zero = c.theta_tol;
    const auto rom = balance_and_truncate(l.sys, l.w, g, criterion(c), opt);
    for (auto x : rom.warnings) std::cerr << "warning: " << to_string(x) << "\n";

    const std::filesystem::path dir(c.out);
    std::map<std::string, std::string> extra{{"r_p", std::to_string(rom.r_p)},
                                             {"r_i", std::to_string(rom.r_i)},
                                             {"Wr", "Wr.mtx"},
                                             {"Tr", "Tr.mtx"},
                                             {"ablated", c.ablate ? "1" : "0"},
                                             {"structure_deviation", fmt(rom.record.structure_deviation)}};
    save_system(rom.system, dir, extra);
    mm::write(dir / "Wr.mtx", rom.W_r);
    mm::write(dir / "Tr.mtx", rom.T_r);
    std::ofstream hsv(dir / "hsv.csv");
    if (!hsv) throw Error(ErrorCode::IoError, "cannot write " + (dir / "hsv.csv").string());
    write_hsv(hsv, rom.record.sigma, rom.record.theta);
    std::cout << "r_p = " << rom.r_p << "\nr_i = " << rom.r_i << "\nr = " << rom.r() << "\n";
    return kOk;
}

int cmd_hsv(const Config& c) {
    auto l = load_and_separate(c.manifest);
    const auto g = compute_gramians(l.sys, l.w);
    const auto h = hankel_values(l.sys, l.w, c.ablate ? ablate_mixed_gramians(g) : g);
    Sink out(c.out);
    write_hsv(out.os(), h.sigma, h.theta);
    return kOk;
}

Integrator integrator(const std::string& s) {
    if (s == "rk4") return Integrator::RK4;
    if (s == "exact") return Integrator::Exact;
    throw Error(ErrorCode::InvalidParams, "integrator must be rk4 or exact");
}

int cmd_simulate(const Config& c) {
    const auto u = Signal::parse(c.signal);
    const auto grid = uniform_grid(c.horizon, c.step);
    SimulateOptions so;
    so.integrator = integrator(c.integrator);
    auto full = load_and_separate(c.manifest);
    const auto yf = simulate(full.sys, full.w, u, grid, so);
    Sink out(c.out);
    if (c.rom.empty()) {
        write_trajectory_csv(out.os(), yf);
        return kOk;
    }
    auto red = load_and_separate(c.rom);
    const auto yr = simulate(red.sys, red.w, u, grid, so);
    write_trajectory_csv(out.os(), yf, &yr);
    const auto e = output_error(yf, yr);
    std::cerr << "max |y - yhat| = " << fmt(e.Linf) << "\n";
    return kOk;
}

void write_bound(std::ostream& os, const ErrorBoundReport& r, double measured) {
    os << "# qbt-bound v1\n";
    os << "nu = " << r.nu << "\n";
    os << "norm.L2 = " << fmt(r.norms.L2) << "\nnorm.L2_horizon = " << fmt(r.norms.L2_horizon) << "\n";
    os << "norm.C = " << fmt(r.norms.C) << "\nnorm.C_horizon = " << fmt(r.norms.C_horizon) << "\n";
    os << "norm.u_otimes_u_L2 = " << fmt(r.norms.uu_L2) << "\nnorm.tail = " << (r.norms.tail ? 1 : 0) << "\n";
    for (std::size_t j = 0; j < r.outputs.size(); ++j) {
        const auto& o = r.outputs[j];
        const std::string k = "output" + std::to_string(j + 1) + ".";
        for (int i = 0; i < 3; ++i) os << k << "trace_pp" << i + 1 << " = " << fmt(o.trace_pp[static_cast<std::size_t>(i)]) << "\n";
        for (int i = 0; i < 3; ++i) os << k << "trace_ip" << i + 1 << " = " << fmt(o.trace_ip[static_cast<std::size_t>(i)]) << "\n";
        os << k << "T_pp = " << fmt(o.T_pp) << "\n" << k << "T_ip = " << fmt(o.T_ip) << "\n" << k << "T_C = " << fmt(o.T_C) << "\n";
        os << k << "bound_pp = " << fmt(o.bound_pp) << "\n" << k << "bound_ip = " << fmt(o.bound_ip) << "\n";
        os << k << "bound_C = " << fmt(o.bound_C) << "\n" << k << "bound = " << fmt(o.bound) << "\n";
    }
    os << "bound_total = " << fmt(r.bound_total) << "\nbound_total_horizon = " << fmt(r.bound_total_horizon) << "\n";
    if (measured >= 0) os << "measured_Linf = " << fmt(measured) << "\n";
    os << "note = " << r.exponent_note << "\n";
}

int cmd_bound(const Config& c) {
    const auto u = Signal::parse(c.signal);
    auto full = load_and_separate(c.manifest);
    auto red = load_and_separate(c.rom);
    const auto rep = error_bound(full.sys, full.w, red.sys, red.w, u, c.horizon);
    double measured = -1;
    if (c.step > 0) {
        SimulateOptions so;
        so.integrator = integrator(c.integrator);
        const auto grid = uniform_grid(c.horizon, c.step);
        measured = output_error(simulate(full.sys, full.w, u, grid, so), simulate(red.sys, red.w, u, grid, so)).Linf;
    }
    Sink out(c.out);
    write_bound(out.os(), rep, measured);
    return kOk;
}

int cmd_verify(const Config& c) {
    auto l = load_and_separate(c.manifest);
    Sink out(c.out);
    auto& os = out.os();
    bool ok = true;
    auto check = [&](const std::string& name, double value, double limit) {
        const bool pass = value <= limit;
        ok = ok && pass;
        os << (pass ? "PASS " : "FAIL ") << name << " " << fmt(value) << " <= " << fmt(limit) << "\n";
    };
    check("separation.residual_E", l.w.residual_E, 1e-8);
    check("separation.residual_A", l.w.residual_A, 1e-8);
    check("stability.max_real_part", l.w.eigenvalues.size() ? l.w.eigenvalues.real().maxCoeff() : -1.0, -1e-12);
    const auto g = compute_gramians(l.sys, l.w);
    const auto res = gramian_residuals(l.sys, l.w, g);
    check("gramians.equation_residual", res.max_equation(), 1e-8);
    check("gramians.projection_defect", res.max_projection(), 1e-8);
    const auto f = balancing_factors(l.w, g);
    const auto sv = linalg::svd(f.L_p.transpose() * l.sys.E * f.R_p);
    if (sv.s.size() > 0) {
        const Mat S = sv.U.transpose() * f.L_p.transpose() * l.sys.E * f.R_p * sv.V;
        check("hankel.balancing_identity", (S - Mat(sv.s.asDiagonal())).norm() / std::max(sv.s(0), 1e-300), 1e-10);
    }
    const auto rom = balance_and_truncate(l.sys, l.w, g, criterion(c));
    check("reduce.structure_deviation", rom.record.structure_deviation, 1e-8);
    const auto tag = l.sys.tags.find("name");
    if (tag != l.sys.tags.end() && tag->second == "illustrative") {
        Mat P1 = Mat::Constant(2, 2, 0.5), P2(2, 2), Q11 = Mat::Zero(2, 2), Q21(2, 2), Q12(2, 2), Q22 = Mat::Zero(2, 2);
        P2 << 2, 1, 1, 1;
        Q11(0, 0) = 0.25;
        Q21 << 1, 0.5, 0.5, 0.5;
        Q12 << 0.5, 0.5, 0.5, 1;
        Q22(1, 1) = 4;
        const std::pair<const char*, std::pair<const Mat*, const Mat*>> printed[] = {
            {"P1", {&g.P1, &P1}},    {"P2", {&g.P2, &P2}},    {"Q11", {&g.Q11, &Q11}},
            {"Q21", {&g.Q21, &Q21}}, {"Q12", {&g.Q12, &Q12}}, {"Q22", {&g.Q22, &Q22}}};
        for (const auto& [name, mats] : printed) {
            const double d = mats.first->rows() == 2 && mats.first->cols() == 2
                                 ? (*mats.first - *mats.second).cwiseAbs().maxCoeff()
                                 : 1.0;
            check(std::string("illustrative.") + name, d, 1e-10);
        }
    }
    os << (ok ? "verify: all checks passed\n" : "verify: FAILED\n");
    return ok ? kOk : kVerifyFailed;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Balanced truncation for descriptor systems with quadratic outputs"};
    app.require_subcommand(1);
    Config c;

    auto add_reduce_opts = [&](CLI::App* s) {
        s->add_option("--tol", c.tol, "keep sigma_k >= sigma_1 * tol")->check(CLI::NonNegativeNumber);
        s->add_option("--order", c.order, "keep exactly this many proper states")->check(CLI::NonNegativeNumber);
        s->add_option("--theta-tol", c.theta_tol, "theta_k <= theta_1 * theta-tol counts as zero");
        s->add_flag("--ablate-mixed", c.ablate, "drop the mixed observability Gramians");
    };
    auto add_signal_opts = [&](CLI::App* s) {
        s->add_option("--signal", c.signal, "input, e.g. \"sin(t)^3*exp(-t/2)\"");
        s->add_option("--horizon", c.horizon, "final time");
        s->add_option("--step", c.step, "output grid step");
        s->add_option("--integrator", c.integrator, "rk4 or exact")->check(CLI::IsMember({"rk4", "exact"}));
    };

    auto* gen = app.add_subcommand("generate", "write a benchmark system");
    gen->add_option("--which", c.which, "illustrative | stokes | msd | random_wcf")
        ->required()
        ->check(CLI::IsMember({"illustrative", "stokes", "msd", "random_wcf"}));
    gen->add_option("--k", c.k, "Stokes grid size");
    gen->add_option("--g", c.g, "number of masses");
    gen->add_option("--nf", c.nf, "random: finite block size");
    gen->add_option("--ninf", c.ninf, "random: infinite block size");
    gen->add_option("--nu", c.nu, "random: index");
    gen->add_option("--m", c.m, "random: inputs");
    gen->add_option("--p", c.p, "random: outputs");
    gen->add_flag("--linear", c.linear, "random: add a linear output part");
    gen->add_option("--seed", c.seed, "random: seed");
    gen->add_option("--out", c.out, "output directory")->required();

    auto* red = app.add_subcommand("reduce", "balanced truncation, writes the reduced model and hsv.csv");
    red->add_option("--manifest", c.manifest, "system manifest")->required();
    red->add_option("--out", c.out, "output directory")->required();
    add_reduce_opts(red);

    auto* hsv = app.add_subcommand("hsv", "Hankel singular values as CSV");
    hsv->add_option("--manifest", c.manifest, "system manifest")->required();
    hsv->add_option("--out", c.out, "CSV file (default stdout)");
    hsv->add_flag("--ablate-mixed", c.ablate, "drop the mixed observability Gramians");

    auto* sim = app.add_subcommand("simulate", "output trajectory CSV");
    sim->add_option("--manifest", c.manifest, "full model manifest")->required();
    sim->add_option("--rom", c.rom, "reduced model manifest");
    sim->add_option("--out", c.out, "CSV file (default stdout)");
    add_signal_opts(sim);

    auto* bnd = app.add_subcommand("bound", "a-priori output error bound");
    bnd->add_option("--manifest", c.manifest, "full model manifest")->required();
    bnd->add_option("--rom", c.rom, "reduced model manifest")->required();
    bnd->add_option("--out", c.out, "report file (default stdout)");
    add_signal_opts(bnd);

    auto* ver = app.add_subcommand("verify", "invariant checks; exit 6 on failure");
    ver->add_option("--manifest", c.manifest, "system manifest")->required();
    ver->add_option("--out", c.out, "report file (default stdout)");
    add_reduce_opts(ver);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kUsage;
    }
    if (red->count("--tol") && red->count("--order")) {
        std::cerr << "error: --tol and --order are mutually exclusive\n";
        return kUsage;
    }

    try {
        if (*gen) return cmd_generate(c);
        if (*red) return cmd_reduce(c);
        if (*hsv) return cmd_hsv(c);
        if (*sim) return cmd_simulate(c);
        if (*bnd) return cmd_bound(c);
        if (*ver) return cmd_verify(c);
    } catch (const Error& e) {
        std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
        return exit_code(e.code());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kIo;
    }
    return kUsage;
}
