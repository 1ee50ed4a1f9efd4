// Reduces the 4x4 index-2 example, simulates both models and prints the error bound.

#include "qbt/qbt.hpp"

#include <cstdio>

int main() {
    using namespace qbt;
    try {
        const auto sys = bench::gen_illustrative();
        const auto w = separate(sys);
        std::printf("n_f = %ld, n_inf = %ld, nu = %d\n", static_cast<long>(w.n_f), static_cast<long>(w.n_inf), w.nu);

        const auto g = compute_gramians(sys, w);
        for (const bool ablate : {false, true}) {
            const auto rom = balance_and_truncate(sys, w, ablate ? ablate_mixed_gramians(g) : g,
                                                  TruncationCriterion::by_tol(1e-8));
            const auto rw = separate(rom.system);
            const auto u = Signal::parse("0.2*exp(-t)");
            const auto grid = uniform_grid(10.0, 0.01);
            SimulateOptions so;
            so.integrator = Integrator::Exact;
            const auto err = output_error(simulate(sys, w, u, grid, so), simulate(rom.system, rw, u, grid, so));
            const auto b = error_bound(sys, w, rom.system, rw, u, 10.0);
            std::printf("%s: r_p = %ld, r_i = %ld, max error = %.3e, bound = %.3e\n",
                        ablate ? "without mixed Gramians" : "with mixed Gramians", static_cast<long>(rom.r_p),
                        static_cast<long>(rom.r_i), err.Linf, b.bound_total);
        }
    } catch (const Error& e) {
        std::fprintf(stderr, "error [%s]: %s\n", to_string(e.code()), e.what());
        return 1;
    }
    return 0;
}
