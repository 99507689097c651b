// One week of synthetic half-hourly prices through the base-case store:
// E = 10, P = 1, eta = 0.8, lambda = 0.05. Prints the daily profit, the
// look-ahead each decision needed, and the capacity sensitivity.

#include <algorithm>
#include <cstdio>

#include "storeopt/storeopt.hpp"

int main() {
    using namespace storeopt;
    const std::size_t steps_per_day = 48;
    const std::size_t T = 7 * steps_per_day;

    CycleSpec prices_spec;
    prices_spec.seed = 42;
    const auto prices = generate(prices_spec, T);
    const Instance inst{StoreSpec{10.0, 1.0, 1.0, 1.0, 0.0, 0.0}, market_impact_costs(prices, 0.05, 0.8)};
    const auto sol = solve(validate_instance(inst));

    std::printf("week profit %.4f over %zu segments\n", -sol.objective, sol.segment_ends.size());
    const auto x = sol.schedule.controls(inst.spec.leakage);
    const auto profile = horizon_profile(sol);
    for (std::size_t d = 0; d < 7; ++d) {
        double profit = 0.0;
        std::size_t longest = 0;
        double top = 0.0;
        for (std::size_t t = d * steps_per_day; t < (d + 1) * steps_per_day; ++t) {
            profit -= inst.costs[t](x[t]);
            longest = std::max(longest, profile[t].second);
            top = std::max(top, sol.schedule.level(t + 1));
        }
        std::printf("day %zu: profit %8.4f  peak level %6.3f  longest look-ahead %3zu steps\n", d + 1, profit, top,
                    longest);
    }

    const auto sens = sensitivity(inst, sol);
    std::printf("dV/dE %.6f  dV/dP_i %.6f  dV/dP_o %.6f\n", sens.dV_dE, sens.dV_dPi, sens.dV_dPo);
    for (const auto& w : sens.warnings) std::printf("note: %s\n", w.c_str());
    return 0;
}
