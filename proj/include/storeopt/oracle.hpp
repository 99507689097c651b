#pragma once

// Brute-force reference solvers used to check the Lagrangian construction:
// backward dynamic programming over a level grid, and exhaustive enumeration
// of control tuples for tiny instances.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "storeopt/costs.hpp"
#include "storeopt/error.hpp"
#include "storeopt/model.hpp"

namespace storeopt {

struct GridSpec {
    /// Uniform points on [0, E], endpoints included.
    std::size_t level_points = 201;
    /// Upper limit on T * N^2.
    double budget = 5e7;
};

struct DpResult {
    Solution solution;  // schedule and objective; multipliers left empty
    /// Reported bound on objective - continuum optimum: L T E / (N - 1), with
    /// L = 2 max_t max(|C_t'(-P_o)|, |C_t'(P_i)|).
    double error_bound = 0.0;
    /// Value estimate V_0(S_0) from the backward pass. Never below the
    /// continuum optimum.
    double value = 0.0;
};

struct ComparisonReport {
    double objective_difference = 0.0;  // a - b
    double max_level_deviation = 0.0;
    double tolerance = 0.0;
    bool passed = false;
};

namespace detail {

/// Levels at t that are reachable from S_0 and can still reach S_T.
inline std::vector<Interval> feasible_bands(const StoreSpec& spec, std::size_t T) {
    const auto fwd = reachable_levels(spec, T);
    const auto bwd = terminal_reachable_levels(spec, T);
    std::vector<Interval> band(T + 1);
    for (std::size_t t = 0; t <= T; ++t) {
        band[t].lower = std::max(fwd[t].lower, bwd[t].lower);
        band[t].upper = std::min(fwd[t].upper, bwd[t].upper);
        if (band[t].lower > band[t].upper) {
            // within validation tolerance; collapse to a point
            band[t].upper = band[t].lower = 0.5 * (band[t].lower + band[t].upper);
        }
    }
    band[0] = {spec.initial_level, spec.initial_level};
    band[T] = {spec.terminal_level, spec.terminal_level};
    return band;
}

/// Per-time grids: the uniform points of [0, E] inside the feasible band,
/// plus the band endpoints.
inline std::vector<std::vector<double>> stage_grids(const StoreSpec& spec, std::size_t T,
                                                    std::size_t points) {
    const auto band = feasible_bands(spec, T);
    const double h = spec.capacity / static_cast<double>(points - 1);
    std::vector<std::vector<double>> grids(T + 1);
    for (std::size_t t = 0; t <= T; ++t) {
        auto& g = grids[t];
        g.push_back(band[t].lower);
        const auto first = static_cast<std::size_t>(std::ceil(band[t].lower / h));
        for (std::size_t i = first; i < points; ++i) {
            const double v = i + 1 == points ? spec.capacity : static_cast<double>(i) * h;
            if (v > band[t].upper) break;
            if (v > g.back()) g.push_back(v);
        }
        if (band[t].upper > g.back()) g.push_back(band[t].upper);
    }
    return grids;
}

inline double interpolate(const std::vector<double>& grid, const std::vector<double>& values, double y) {
    if (y <= grid.front()) return values.front();
    if (y >= grid.back()) return values.back();
    const auto it = std::upper_bound(grid.begin(), grid.end(), y);
    const std::size_t j = static_cast<std::size_t>(it - grid.begin());
    const double w = (y - grid[j - 1]) / (grid[j] - grid[j - 1]);
    return (1.0 - w) * values[j - 1] + w * values[j];
}

struct StepChoice {
    double control = 0.0;
    double value = std::numeric_limits<double>::infinity();
};

/// min over x of stage_cost(x) + V_next(rho s + x), with successors on the
/// next grid plus the two rate extremes clipped to the next grid's range.
template <class StageCost>
StepChoice best_step(const StoreSpec& spec, double s, const std::vector<double>& next_grid,
                     const std::vector<double>& next_values, StageCost&& stage_cost) {
    const double base = spec.leakage * s;
    const double lo = std::max(base - spec.output_rate, next_grid.front());
    const double hi = std::min(base + spec.input_rate, next_grid.back());
    StepChoice best;
    if (lo > hi) {
        // reachable only within rounding
        if (lo - hi <= 1e-9 * energy_scale(spec)) {
            const double y = 0.5 * (lo + hi);
            best.control = y - base;
            best.value = stage_cost(best.control) + interpolate(next_grid, next_values, y);
        }
        return best;
    }
    // near-ties go to the smaller trade
    auto consider = [&](double y, double value) {
        const double x = y - base;
        const double v = stage_cost(x) + value;
        const double slack = 1e-12 * (1.0 + std::abs(v));
        if (v < best.value - slack || (v <= best.value + slack && std::abs(x) < std::abs(best.control))) {
            best.value = v;
            best.control = x;
        }
    };
    consider(lo, interpolate(next_grid, next_values, lo));
    auto it = std::lower_bound(next_grid.begin(), next_grid.end(), lo);
    for (; it != next_grid.end() && *it <= hi; ++it) {
        consider(*it, next_values[static_cast<std::size_t>(it - next_grid.begin())]);
    }
    consider(hi, interpolate(next_grid, next_values, hi));
    return best;
}

inline void check_grid(const GridSpec& grid, std::size_t T) {
    if (grid.level_points < 2) throw BadSpecError("grid needs at least 2 level points");
    const double n = static_cast<double>(grid.level_points);
    if (static_cast<double>(T) * n * n > grid.budget) {
        throw BudgetExceeded("T * N^2 = " + std::to_string(static_cast<double>(T) * n * n) +
                             " exceeds the budget " + std::to_string(grid.budget));
    }
}

}  // namespace detail

/// Value tables V_t on the per-time grids, t = 0..T, for a deterministic
/// instance. `values[T]` is the single entry 0 at S_T.
struct ValueTables {
    std::vector<std::vector<double>> grids;
    std::vector<std::vector<double>> values;
};

inline ValueTables dp_tables(const ValidatedInstance& vinst, const GridSpec& grid = {}) {
    const auto& inst = vinst.instance();
    const std::size_t T = inst.horizon();
    detail::check_grid(grid, T);
    ValueTables tab;
    tab.grids = detail::stage_grids(inst.spec, T, grid.level_points);
    tab.values.resize(T + 1);
    tab.values[T].assign(tab.grids[T].size(), 0.0);
    for (std::size_t t = T; t-- > 0;) {
        const auto& cost = inst.costs[t];
        auto& v = tab.values[t];
        v.resize(tab.grids[t].size());
        for (std::size_t i = 0; i < v.size(); ++i) {
            v[i] = detail::best_step(inst.spec, tab.grids[t][i], tab.grids[t + 1], tab.values[t + 1],
                                     [&](double x) { return cost(x); })
                       .value;
        }
    }
    return tab;
}

inline double dp_error_bound(const Instance& inst, const GridSpec& grid) {
    double L = 0.0;
    for (const auto& c : inst.costs) {
        L = std::max({L, std::abs(c.right_derivative(-inst.spec.output_rate)),
                      std::abs(c.left_derivative(inst.spec.input_rate))});
    }
    const double h = inst.spec.capacity / static_cast<double>(grid.level_points - 1);
    return 2.0 * L * static_cast<double>(inst.horizon()) * h;
}

/// Grid DP with forward recovery at the actual levels, so the returned
/// schedule is feasible and its objective is an upper bound on the optimum.
inline DpResult dp_solve(const ValidatedInstance& vinst, const GridSpec& grid = {}) {
    const auto& inst = vinst.instance();
    const std::size_t T = inst.horizon();
    const auto tab = dp_tables(vinst, grid);
    std::vector<double> levels(T + 1);
    levels[0] = inst.spec.initial_level;
    for (std::size_t t = 0; t < T; ++t) {
        const auto& cost = inst.costs[t];
        const auto step = detail::best_step(inst.spec, levels[t], tab.grids[t + 1], tab.values[t + 1],
                                            [&](double x) { return cost(x); });
        if (!std::isfinite(step.value)) {
            throw InfeasibleError("grid DP found no feasible control at t=" + std::to_string(t + 1), t + 1);
        }
        levels[t + 1] = inst.spec.leakage * levels[t] + step.control;
        if (t + 1 < T) levels[t + 1] = std::clamp(levels[t + 1], 0.0, inst.spec.capacity);
    }
    levels[T] = inst.spec.terminal_level;
    DpResult r;
    r.solution.schedule = Schedule(std::move(levels));
    r.solution.objective = objective(inst, r.solution.schedule);
    r.error_bound = dp_error_bound(inst, grid);
    r.value = tab.values[0].front();
    return r;
}

struct ExhaustiveResult {
    Schedule schedule;
    double objective = std::numeric_limits<double>::infinity();
};

/// Enumerates controls x_1..x_{T-1} on `control_grid_points` evenly spaced
/// values of [-P_o, P_i]; x_T is forced by the terminal level.
inline ExhaustiveResult exhaustive_solve(const ValidatedInstance& vinst, std::size_t control_grid_points,
                                         double budget = 5e6) {
    const auto& inst = vinst.instance();
    const auto& spec = inst.spec;
    const std::size_t T = inst.horizon();
    if (control_grid_points < 2) throw BadSpecError("control grid needs at least 2 points");
    if (std::pow(static_cast<double>(control_grid_points), static_cast<double>(T)) > budget) {
        throw BudgetExceeded("control grid enumeration exceeds the budget");
    }
    std::vector<double> xs(control_grid_points);
    for (std::size_t i = 0; i < control_grid_points; ++i) {
        xs[i] = -spec.output_rate +
                (spec.input_rate + spec.output_rate) * static_cast<double>(i) /
                    static_cast<double>(control_grid_points - 1);
    }
    const double tol = default_feasibility_tol(spec);
    ExhaustiveResult best;
    std::vector<double> levels(T + 1);
    levels[0] = spec.initial_level;

    std::function<void(std::size_t, double)> descend = [&](std::size_t t, double cost) {
        if (t + 1 == T) {
            const double x = spec.terminal_level - spec.leakage * levels[t];
            if (x < -spec.output_rate - tol || x > spec.input_rate + tol) return;
            const double total = cost + inst.costs[t](x);
            if (total < best.objective) {
                levels[T] = spec.terminal_level;
                best.objective = total;
                best.schedule = Schedule(levels);
            }
            return;
        }
        for (double x : xs) {
            const double next = spec.leakage * levels[t] + x;
            if (next < -tol || next > spec.capacity + tol) continue;
            levels[t + 1] = next;
            descend(t + 1, cost + inst.costs[t](x));
        }
    };
    descend(0, 0.0);
    if (!std::isfinite(best.objective)) {
        throw InfeasibleError("no feasible control tuple on the grid", T);
    }
    return best;
}

inline ComparisonReport compare(const Solution& a, const Solution& b, double tol) {
    ComparisonReport r;
    r.tolerance = tol;
    r.objective_difference = a.objective - b.objective;
    const auto& la = a.schedule.levels();
    const auto& lb = b.schedule.levels();
    if (la.size() != lb.size()) throw BadSpecError("solutions have different horizons");
    for (std::size_t t = 0; t < la.size(); ++t) {
        r.max_level_deviation = std::max(r.max_level_deviation, std::abs(la[t] - lb[t]));
    }
    r.passed = std::abs(r.objective_difference) <= tol;
    return r;
}

}  // namespace storeopt
