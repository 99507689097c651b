#pragma once

// Store specification, problem instance, schedules, and the feasibility and
// objective primitives shared by the solver, the oracles and the verifier.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "storeopt/costs.hpp"
#include "storeopt/error.hpp"

namespace storeopt {

/// Physical store. Rates are per time step; `leakage` is the fraction of
/// the contents retained from one step to the next.
struct StoreSpec {
    double capacity = 0.0;
    double input_rate = 0.0;
    double output_rate = 0.0;
    double leakage = 1.0;
    double initial_level = 0.0;
    double terminal_level = 0.0;
};

inline void check_spec(const StoreSpec& s) {
    const auto finite = [](double v) { return std::isfinite(v); };
    if (!finite(s.capacity) || !finite(s.input_rate) || !finite(s.output_rate) ||
        !finite(s.leakage) || !finite(s.initial_level) || !finite(s.terminal_level)) {
        throw BadSpecError("store parameters must be finite");
    }
    if (s.capacity < 0.0) throw BadSpecError("capacity must be nonnegative");
    if (s.input_rate < 0.0 || s.output_rate < 0.0) throw BadSpecError("rates must be nonnegative");
    if (!(s.input_rate + s.output_rate > 0.0)) {
        throw BadSpecError("input and output rates cannot both be zero");
    }
    if (!(s.leakage > 0.0 && s.leakage <= 1.0)) throw BadSpecError("leakage must lie in (0, 1]");
    if (s.initial_level < 0.0 || s.initial_level > s.capacity) {
        throw BadSpecError("initial level outside [0, capacity]");
    }
    if (s.terminal_level < 0.0 || s.terminal_level > s.capacity) {
        throw BadSpecError("terminal level outside [0, capacity]");
    }
}

/// Energy scale used for absolute level tolerances.
inline double energy_scale(const StoreSpec& s) {
    return std::max(s.capacity, s.input_rate + s.output_rate);
}

/// Default absolute feasibility tolerance.
inline double default_feasibility_tol(const StoreSpec& s) { return 1e-9 * energy_scale(s); }

struct Instance {
    StoreSpec spec;
    std::vector<CostFunction> costs;

    std::size_t horizon() const { return costs.size(); }
};

/// Largest marginal cost magnitude over the rate domain; 1 for an all-zero instance.
inline double price_scale(const Instance& inst) {
    double s = 0.0;
    for (const auto& c : inst.costs) {
        s = std::max({s, std::abs(c.right_derivative(-inst.spec.output_rate)),
                      std::abs(c.left_derivative(inst.spec.input_rate)),
                      std::abs(c.left_derivative(0.0)), std::abs(c.right_derivative(0.0))});
    }
    return s > 0.0 ? s : 1.0;
}

/// Store levels S_0..S_T. Controls are derived: x_t = S_t - rho S_{t-1}.
class Schedule {
public:
    Schedule() = default;
    explicit Schedule(std::vector<double> levels) : levels_(std::move(levels)) {}

    static Schedule from_controls(double initial_level, std::span<const double> controls,
                                  double leakage) {
        std::vector<double> levels;
        levels.reserve(controls.size() + 1);
        levels.push_back(initial_level);
        for (double x : controls) levels.push_back(leakage * levels.back() + x);
        return Schedule(std::move(levels));
    }

    std::size_t horizon() const { return levels_.empty() ? 0 : levels_.size() - 1; }
    const std::vector<double>& levels() const { return levels_; }
    double level(std::size_t t) const { return levels_.at(t); }

    /// x_t for t = 1..T, returned 0-based (element t-1).
    std::vector<double> controls(double leakage) const {
        std::vector<double> x;
        if (levels_.size() < 2) return x;
        x.reserve(levels_.size() - 1);
        for (std::size_t t = 1; t < levels_.size(); ++t) {
            x.push_back(levels_[t] - leakage * levels_[t - 1]);
        }
        return x;
    }

private:
    std::vector<double> levels_;
};

/// Optimal schedule with its cumulative multipliers and segment structure.
/// `multipliers[t-1]` is mu*_t; `segment_ends` holds T_1 < ... < T_K = T;
/// `horizons` holds the look-ahead horizons of the first K-1 segments (the
/// last segment's horizon is the end of the data).
struct Solution {
    Schedule schedule;
    std::vector<double> multipliers;
    std::vector<std::size_t> segment_ends;
    std::vector<std::size_t> horizons;
    double objective = 0.0;
};

inline double objective(const Instance& inst, const Schedule& schedule) {
    if (schedule.horizon() != inst.horizon()) {
        throw BadSpecError("schedule length " + std::to_string(schedule.horizon()) +
                           " does not match horizon " + std::to_string(inst.horizon()));
    }
    const auto x = schedule.controls(inst.spec.leakage);
    double total = 0.0;
    for (std::size_t t = 0; t < x.size(); ++t) total += inst.costs[t](x[t]);
    return total;
}

enum class ViolationKind {
    Length,
    InitialLevel,
    TerminalLevel,
    CapacityLower,
    CapacityUpper,
    InputRate,
    OutputRate,
};

inline const char* to_string(ViolationKind k) {
    switch (k) {
        case ViolationKind::Length: return "length";
        case ViolationKind::InitialLevel: return "initial_level";
        case ViolationKind::TerminalLevel: return "terminal_level";
        case ViolationKind::CapacityLower: return "capacity_lower";
        case ViolationKind::CapacityUpper: return "capacity_upper";
        case ViolationKind::InputRate: return "input_rate";
        case ViolationKind::OutputRate: return "output_rate";
    }
    return "unknown";
}

struct Violation {
    ViolationKind kind;
    std::size_t time;
    double magnitude;
};

struct FeasReport {
    std::vector<Violation> violations;

    bool feasible() const { return violations.empty(); }
    double worst() const {
        double w = 0.0;
        for (const auto& v : violations) w = std::max(w, v.magnitude);
        return w;
    }
};

/// Lists every capacity, boundary and rate constraint violated by more than `tol`.
inline FeasReport feasibility_check(const StoreSpec& spec, const Schedule& schedule, double tol) {
    FeasReport report;
    const auto& s = schedule.levels();
    if (s.empty()) {
        report.violations.push_back({ViolationKind::Length, 0, 1.0});
        return report;
    }
    const auto add = [&](ViolationKind k, std::size_t t, double mag) {
        if (mag > tol) report.violations.push_back({k, t, mag});
    };
    add(ViolationKind::InitialLevel, 0, std::abs(s[0] - spec.initial_level));
    const std::size_t T = s.size() - 1;
    for (std::size_t t = 1; t <= T; ++t) {
        add(ViolationKind::CapacityLower, t, -s[t]);
        add(ViolationKind::CapacityUpper, t, s[t] - spec.capacity);
        const double x = s[t] - spec.leakage * s[t - 1];
        add(ViolationKind::InputRate, t, x - spec.input_rate);
        add(ViolationKind::OutputRate, t, -x - spec.output_rate);
    }
    if (T > 0) add(ViolationKind::TerminalLevel, T, std::abs(s[T] - spec.terminal_level));
    return report;
}

inline FeasReport feasibility_check(const StoreSpec& spec, const Schedule& schedule) {
    return feasibility_check(spec, schedule, default_feasibility_tol(spec));
}

/// Forward-reachable level intervals [lo_t, hi_t], t = 0..T.
inline std::vector<Interval> reachable_levels(const StoreSpec& spec, std::size_t T) {
    std::vector<Interval> r(T + 1);
    r[0] = {spec.initial_level, spec.initial_level};
    for (std::size_t t = 1; t <= T; ++t) {
        r[t].lower = std::max(0.0, spec.leakage * r[t - 1].lower - spec.output_rate);
        r[t].upper = std::min(spec.capacity, spec.leakage * r[t - 1].upper + spec.input_rate);
    }
    return r;
}

/// Levels at t = 0..T from which the terminal level can still be reached.
inline std::vector<Interval> terminal_reachable_levels(const StoreSpec& spec, std::size_t T) {
    std::vector<Interval> r(T + 1);
    r[T] = {spec.terminal_level, spec.terminal_level};
    for (std::size_t t = T; t-- > 0;) {
        r[t].lower = std::max(0.0, (r[t + 1].lower - spec.input_rate) / spec.leakage);
        r[t].upper = std::min(spec.capacity, (r[t + 1].upper + spec.output_rate) / spec.leakage);
    }
    return r;
}

/// An instance known to admit a feasible schedule and to have convex costs.
/// Only `validate_instance` creates one.
class ValidatedInstance {
public:
    const Instance& instance() const { return inst_; }
    const StoreSpec& spec() const { return inst_.spec; }
    const std::vector<CostFunction>& costs() const { return inst_.costs; }
    std::size_t horizon() const { return inst_.costs.size(); }

private:
    explicit ValidatedInstance(Instance inst) : inst_(std::move(inst)) {}
    friend ValidatedInstance validate_instance(Instance inst, double tol);

    Instance inst_;
};

/// Checks the spec, spot-checks convexity of every cost on [-P_o, P_i], and
/// confirms that the terminal level is reachable. `tol` < 0 selects the
/// default feasibility tolerance.
inline ValidatedInstance validate_instance(Instance inst, double tol = -1.0) {
    check_spec(inst.spec);
    const auto& s = inst.spec;
    const std::size_t T = inst.horizon();
    if (T == 0) throw BadSpecError("instance needs at least one time step");
    if (tol < 0.0) tol = default_feasibility_tol(s);
    for (std::size_t t = 0; t < T; ++t) {
        if (!midpoint_convex(inst.costs[t], -s.output_rate, s.input_rate)) {
            throw BadSpecError("cost at t=" + std::to_string(t + 1) + " fails the convexity check");
        }
    }
    const auto fwd = reachable_levels(s, T);
    const auto bwd = terminal_reachable_levels(s, T);
    // t = 0 is data; report the first step with no feasible completion.
    for (std::size_t t = 1; t <= T; ++t) {
        if (fwd[t].lower > bwd[t].upper + tol || bwd[t].lower > fwd[t].upper + tol) {
            throw InfeasibleError("terminal level " + std::to_string(s.terminal_level) +
                                      " unreachable; first blocked at t=" + std::to_string(t),
                                  t);
        }
    }
    return ValidatedInstance(std::move(inst));
}

}  // namespace storeopt
