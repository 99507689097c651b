#pragma once

// Optimality certificate for a candidate (S, mu): feasibility, per-step
// response optimality of x_t against mu_t, and complementary slackness of mu
// against the capacity bounds. Independent of the solver.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <sstream>
#include <span>
#include <string>
#include <vector>

#include "storeopt/costs.hpp"
#include "storeopt/error.hpp"
#include "storeopt/model.hpp"

namespace storeopt {

struct Certificate {
    /// Relative tolerance the certificate was evaluated at, and the absolute
    /// thresholds it implies for each measure.
    double tolerance = 0.0;
    double feasibility_threshold = 0.0;
    double response_threshold = 0.0;
    double slackness_threshold = 0.0;

    FeasReport feasibility;
    /// Worst over t of C_t(x_t) - mu_t x_t - min_X [C_t(x) - mu_t x], max of
    /// the closed-form and the grid estimate of the minimum.
    double response_optimality = 0.0;
    double response_closed_form = 0.0;
    double response_grid = 0.0;
    std::size_t response_worst_time = 0;
    /// Worst signed violation of the slackness relations between mu_t and rho mu_{t+1}.
    double complementary_slackness = 0.0;
    std::size_t slackness_worst_time = 0;

    bool passed = false;
    std::vector<std::string> warnings;
    /// Set when the check fails: mu need not be unique, so a failure with this
    /// mu does not by itself show that S is suboptimal.
    std::string caveat;

    std::string summary() const {
        std::ostringstream os;
        os.precision(6);
        os << (passed ? "passed" : "FAILED") << " at tol " << tolerance
           << ": feasibility " << feasibility.worst() << " (limit " << feasibility_threshold
           << "), response " << response_optimality << " at t=" << response_worst_time
           << " (limit " << response_threshold << "), slackness " << complementary_slackness
           << " at t=" << slackness_worst_time << " (limit " << slackness_threshold << ")";
        return os.str();
    }
};

namespace detail {

constexpr int kResponseGridPoints = 257;

inline double grid_minimum(const CostFunction& c, double mu, double lower, double upper) {
    double best = std::numeric_limits<double>::infinity();
    const double step = (upper - lower) / (kResponseGridPoints - 1);
    for (int i = 0; i < kResponseGridPoints; ++i) {
        const double x = i + 1 == kResponseGridPoints ? upper : lower + i * step;
        best = std::min(best, c(x) - mu * x);
    }
    return best;
}

inline double closed_form_minimum(const CostFunction& c, double mu, double lower, double upper) {
    const double x = c.response(mu, lower, upper).lower;
    return c(x) - mu * x;
}

inline void check_lengths(const Instance& inst, const Schedule& s, std::span<const double> mu) {
    if (s.horizon() != inst.horizon() || mu.size() != inst.horizon()) {
        throw BadSpecError("schedule, multipliers and costs must share the horizon " +
                           std::to_string(inst.horizon()));
    }
}

}  // namespace detail

/// Evaluates the three sufficient optimality conditions at relative tolerance
/// `tol`. Thresholds: feasibility tol * max(E, P_i + P_o); response
/// tol * price_scale * (P_i + P_o); slackness tol * price_scale.
inline Certificate check_kkt(const Instance& inst, const Schedule& schedule,
                             std::span<const double> multipliers, double tol) {
    detail::check_lengths(inst, schedule, multipliers);
    const StoreSpec& spec = inst.spec;
    const double ps = price_scale(inst);
    const double span_x = spec.input_rate + spec.output_rate;

    Certificate cert;
    cert.tolerance = tol;
    cert.feasibility_threshold = tol * energy_scale(spec);
    cert.response_threshold = tol * ps * span_x;
    cert.slackness_threshold = tol * ps;

    cert.feasibility = feasibility_check(spec, schedule, cert.feasibility_threshold);

    const auto x = schedule.controls(spec.leakage);
    const std::size_t T = inst.horizon();
    for (std::size_t t = 0; t < T; ++t) {
        const auto& c = inst.costs[t];
        const double mu = multipliers[t];
        const double achieved = c(x[t]) - mu * x[t];
        const double cf = achieved - detail::closed_form_minimum(c, mu, -spec.output_rate, spec.input_rate);
        const double grid = achieved - detail::grid_minimum(c, mu, -spec.output_rate, spec.input_rate);
        cert.response_closed_form = std::max(cert.response_closed_form, cf);
        cert.response_grid = std::max(cert.response_grid, grid);
        const double worst = std::max(cf, grid);
        if (worst > cert.response_optimality) {
            cert.response_optimality = worst;
            cert.response_worst_time = t + 1;
        }
    }

    const double band = std::max(cert.feasibility_threshold, 1e-12 * energy_scale(spec));
    const auto& s = schedule.levels();
    for (std::size_t t = 1; t < T; ++t) {
        const double gap = spec.leakage * multipliers[t] - multipliers[t - 1];
        const bool empty = s[t] <= band;
        const bool full = s[t] >= spec.capacity - band;
        double v = 0.0;
        if (empty && full) {
            v = 0.0;
        } else if (empty) {
            v = std::max(0.0, gap);
        } else if (full) {
            v = std::max(0.0, -gap);
        } else {
            v = std::abs(gap);
        }
        if (v > cert.complementary_slackness) {
            cert.complementary_slackness = v;
            cert.slackness_worst_time = t;
        }
    }

    cert.passed = cert.feasibility.feasible() &&
                  cert.response_optimality <= cert.response_threshold &&
                  cert.complementary_slackness <= cert.slackness_threshold;

    const bool increasing = std::all_of(inst.costs.begin(), inst.costs.end(), [&](const CostFunction& c) {
        return c.right_derivative(-spec.output_rate) >= 0.0;
    });
    if (increasing) {
        for (std::size_t t = 0; t < T; ++t) {
            if (multipliers[t] < -cert.slackness_threshold) {
                cert.warnings.push_back("negative multiplier at t=" + std::to_string(t + 1) +
                                        " although every cost is increasing");
                break;
            }
        }
    }
    if (!cert.passed) {
        cert.caveat = "multipliers are not unique in general; failure with these multipliers "
                      "does not by itself prove the schedule suboptimal";
    }
    return cert;
}

/// Weak-duality bound on the suboptimality of `schedule`: its objective minus
/// the Lagrangian lower bound sum_t min_X [C_t(x) - mu_t x] - rho mu_1 S_0 +
/// mu_T S_T + sum_{t<T} min(0, E (mu_t - rho mu_{t+1})). Nonnegative for any
/// feasible schedule; zero at an optimal pair.
inline double certify_value_gap(const Instance& inst, const Schedule& schedule,
                                std::span<const double> multipliers) {
    detail::check_lengths(inst, schedule, multipliers);
    const StoreSpec& spec = inst.spec;
    const std::size_t T = inst.horizon();
    double bound = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
        const auto& c = inst.costs[t];
        const double mu = multipliers[t];
        bound += std::min(detail::closed_form_minimum(c, mu, -spec.output_rate, spec.input_rate),
                          detail::grid_minimum(c, mu, -spec.output_rate, spec.input_rate));
    }
    bound += -spec.leakage * multipliers[0] * spec.initial_level +
             multipliers[T - 1] * spec.terminal_level;
    for (std::size_t t = 1; t < T; ++t) {
        bound += std::min(0.0, spec.capacity * (multipliers[t - 1] - spec.leakage * multipliers[t]));
    }
    return objective(inst, schedule) - bound;
}

}  // namespace storeopt
