#pragma once

// Derivatives of the optimal cost V* with respect to the capacity E and the
// rate limits P_i, P_o, read off the multipliers of a solved instance, and a
// finite-difference harness that re-solves perturbed instances.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "storeopt/model.hpp"
#include "storeopt/solver.hpp"

namespace storeopt {

enum class Bound { Capacity, InputRate, OutputRate };

inline std::string to_string(Bound b) {
    switch (b) {
        case Bound::Capacity: return "capacity";
        case Bound::InputRate: return "input_rate";
        case Bound::OutputRate: return "output_rate";
    }
    return "unknown";
}

struct SensitivityReport {
    double dV_dE = 0.0;
    double dV_dPi = 0.0;
    double dV_dPo = 0.0;
    /// Times with S_t = E (1..T-1), x_t = P_i, and x_t = -P_o.
    std::vector<std::size_t> tau;
    std::vector<std::size_t> tau_in;
    std::vector<std::size_t> tau_out;
    std::vector<std::string> warnings;
    /// Set for each derivative replaced by a one-sided finite difference
    /// because the multiplier formula is not trustworthy there.
    bool fd_E = false;
    bool fd_Pi = false;
    bool fd_Po = false;
};

namespace detail {

inline double binding_band(const StoreSpec& spec) { return default_feasibility_tol(spec); }

inline void check_solution(const Instance& inst, const Solution& sol) {
    if (sol.schedule.horizon() != inst.horizon() || sol.multipliers.size() != inst.horizon()) {
        throw BadSpecError("solution does not match the instance horizon");
    }
}

}  // namespace detail

inline std::vector<std::size_t> capacity_binding_times(const Instance& inst, const Solution& sol) {
    std::vector<std::size_t> tau;
    const double band = detail::binding_band(inst.spec);
    for (std::size_t t = 1; t < inst.horizon(); ++t) {
        if (sol.schedule.level(t) >= inst.spec.capacity - band) tau.push_back(t);
    }
    return tau;
}

inline std::vector<std::size_t> rate_binding_times(const Instance& inst, const Solution& sol, Bound which) {
    std::vector<std::size_t> out;
    const double band = detail::binding_band(inst.spec);
    const auto x = sol.schedule.controls(inst.spec.leakage);
    for (std::size_t t = 1; t <= inst.horizon(); ++t) {
        if (which == Bound::InputRate && x[t - 1] >= inst.spec.input_rate - band) out.push_back(t);
        if (which == Bound::OutputRate && x[t - 1] <= -inst.spec.output_rate + band) out.push_back(t);
    }
    return out;
}

/// sum over t in tau of (mu_t - rho mu_{t+1}).
inline double dV_dE(const Instance& inst, const Solution& sol) {
    detail::check_solution(inst, sol);
    double sum = 0.0;
    for (std::size_t t : capacity_binding_times(inst, sol)) {
        sum += sol.multipliers[t - 1] - inst.spec.leakage * sol.multipliers[t];
    }
    return sum;
}

/// sum over t in tau_i of (C_t'(P_i) - mu_t), left derivative at P_i.
inline double dV_dPi(const Instance& inst, const Solution& sol) {
    detail::check_solution(inst, sol);
    double sum = 0.0;
    for (std::size_t t : rate_binding_times(inst, sol, Bound::InputRate)) {
        sum += inst.costs[t - 1].left_derivative(inst.spec.input_rate) - sol.multipliers[t - 1];
    }
    return sum;
}

/// sum over t in tau_o of (mu_t - C_t'(-P_o)), right derivative at -P_o.
inline double dV_dPo(const Instance& inst, const Solution& sol) {
    detail::check_solution(inst, sol);
    double sum = 0.0;
    for (std::size_t t : rate_binding_times(inst, sol, Bound::OutputRate)) {
        sum += sol.multipliers[t - 1] - inst.costs[t - 1].right_derivative(-inst.spec.output_rate);
    }
    return sum;
}

inline Instance perturbed(const Instance& inst, Bound which, double delta) {
    Instance out = inst;
    switch (which) {
        case Bound::Capacity: out.spec.capacity += delta; break;
        case Bound::InputRate: out.spec.input_rate += delta; break;
        case Bound::OutputRate: out.spec.output_rate += delta; break;
    }
    return out;
}

struct FiniteDifferenceReport {
    Bound which = Bound::Capacity;
    double h = 0.0;
    double central = 0.0;
    double forward = 0.0;
    double backward = 0.0;
    double formula = 0.0;
    double absolute_gap = 0.0;
    double relative_gap = 0.0;
    double value = 0.0;  // V* of the unperturbed instance
    std::vector<std::string> warnings;
};

/// Re-solves at b - h, b, b + h and compares the central difference with
/// the multiplier formula. Disagreeing one-sided differences are flagged as
/// a kink; the report then carries no verdict.
inline FiniteDifferenceReport finite_difference_check(const Instance& inst, double h, Bound which,
                                                      const SolverOptions& options = {}) {
    if (!(h > 0.0)) throw BadSpecError("finite-difference step must be positive");
    const Solution base = solve(validate_instance(inst), options);
    const double up = solve(validate_instance(perturbed(inst, which, h)), options).objective;
    const double down = solve(validate_instance(perturbed(inst, which, -h)), options).objective;

    FiniteDifferenceReport r;
    r.which = which;
    r.h = h;
    r.value = base.objective;
    r.central = (up - down) / (2.0 * h);
    r.forward = (up - base.objective) / h;
    r.backward = (base.objective - down) / h;
    switch (which) {
        case Bound::Capacity: r.formula = dV_dE(inst, base); break;
        case Bound::InputRate: r.formula = dV_dPi(inst, base); break;
        case Bound::OutputRate: r.formula = dV_dPo(inst, base); break;
    }
    r.absolute_gap = std::abs(r.formula - r.central);
    r.relative_gap = r.absolute_gap / std::max(std::abs(r.central), 1e-12);
    if (std::abs(r.forward - r.backward) > 1e-2 * std::max(1.0, std::abs(r.central))) {
        r.warnings.push_back("one-sided differences disagree for " + to_string(which) +
                             ": V* is not differentiable here");
    }
    return r;
}

/// Multiplier formulas with differentiability checks. Derivatives whose
/// formula is flagged are replaced by the forward (relaxing) difference of
/// re-solved instances with step `h` (relative to the bound).
inline SensitivityReport sensitivity(const Instance& inst, const Solution& sol, double h = 1e-6,
                                     const SolverOptions& options = {}) {
    detail::check_solution(inst, sol);
    const auto& spec = inst.spec;
    const double ps = price_scale(inst);
    const double tol = 1e-6 * ps;
    SensitivityReport r;
    r.tau = capacity_binding_times(inst, sol);
    r.tau_in = rate_binding_times(inst, sol, Bound::InputRate);
    r.tau_out = rate_binding_times(inst, sol, Bound::OutputRate);
    r.dV_dE = dV_dE(inst, sol);
    r.dV_dPi = dV_dPi(inst, sol);
    r.dV_dPo = dV_dPo(inst, sol);

    bool suspect_E = false;
    bool suspect_in = false;
    bool suspect_out = false;
    for (std::size_t t : r.tau) {
        if (sol.multipliers[t - 1] - spec.leakage * sol.multipliers[t] > tol) {
            r.warnings.push_back("capacity summand at t=" + std::to_string(t) + " is positive");
            suspect_E = true;
        }
    }
    for (std::size_t t : r.tau_in) {
        const auto& c = inst.costs[t - 1];
        if (c.left_derivative(spec.input_rate) - sol.multipliers[t - 1] > tol) {
            r.warnings.push_back("input-rate summand at t=" + std::to_string(t) + " is positive");
            suspect_in = true;
        }
        if (std::abs(c.right_derivative(spec.input_rate) - c.left_derivative(spec.input_rate)) > tol) {
            r.warnings.push_back("cost at t=" + std::to_string(t) + " has a kink at P_i");
            suspect_in = true;
        }
    }
    for (std::size_t t : r.tau_out) {
        const auto& c = inst.costs[t - 1];
        if (sol.multipliers[t - 1] - c.right_derivative(-spec.output_rate) > tol) {
            r.warnings.push_back("output-rate summand at t=" + std::to_string(t) + " is positive");
            suspect_out = true;
        }
        if (std::abs(c.right_derivative(-spec.output_rate) - c.left_derivative(-spec.output_rate)) > tol) {
            r.warnings.push_back("cost at t=" + std::to_string(t) + " has a kink at -P_o");
            suspect_out = true;
        }
    }
    const bool all_strict = std::all_of(inst.costs.begin(), inst.costs.end(),
                                        [](const CostFunction& c) { return c.strictly_convex(); });
    if (!all_strict && (!r.tau.empty() || !r.tau_in.empty() || !r.tau_out.empty())) {
        r.warnings.push_back("costs are not strictly convex: multipliers may not be unique");
        suspect_E = suspect_E || !r.tau.empty();
        suspect_in = suspect_in || !r.tau_in.empty();
        suspect_out = suspect_out || !r.tau_out.empty();
    }
    if (spec.input_rate == spec.output_rate && !r.tau_in.empty() && !r.tau_out.empty()) {
        r.warnings.push_back("equal rate limits bind in both directions: V* may have a kink in P");
        suspect_in = suspect_out = true;
    }

    auto forward_difference = [&](Bound which, double b) {
        const double step = h * std::max(1.0, b);
        const double up = solve(validate_instance(perturbed(inst, which, step)), options).objective;
        return (up - sol.objective) / step;
    };
    if (suspect_E) {
        r.dV_dE = forward_difference(Bound::Capacity, spec.capacity);
        r.fd_E = true;
    }
    if (suspect_in) {
        r.dV_dPi = forward_difference(Bound::InputRate, spec.input_rate);
        r.fd_Pi = true;
    }
    if (suspect_out) {
        r.dV_dPo = forward_difference(Bound::OutputRate, spec.output_rate);
        r.fd_Po = true;
    }
    return r;
}

}  // namespace storeopt
