#pragma once

// Shared fixtures, random instance generators and test-only oracles. Nothing
// here calls into the solver.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "storeopt/costs.hpp"
#include "storeopt/model.hpp"

namespace testing_support {

using namespace storeopt;

inline std::vector<CostFunction> price_taker(const std::vector<double>& prices) {
    std::vector<CostFunction> out;
    for (double p : prices) out.push_back(piecewise_linear_cost(p, p));
    return out;
}

inline std::vector<CostFunction> quadratic(const std::vector<double>& prices, double slope,
                                           double eta = 1.0) {
    std::vector<CostFunction> out;
    for (double p : prices) out.push_back(quadratic_impact_cost({p, slope, eta}));
    return out;
}

inline StoreSpec store(double E, double P_in, double P_out, double rho = 1.0, double s0 = 0.0,
                       double sT = 0.0) {
    return StoreSpec{E, P_in, P_out, rho, s0, sT};
}

/// The three-step price-taker fixture: prices (1, 5, 2), E = 2, P = 1.
inline Instance three_step_instance() {
    return Instance{store(2.0, 1.0, 1.0), price_taker({1.0, 5.0, 2.0})};
}

/// Two-step market-impact fixture: p = (1, 3), p' = 0.25, eta = 1.
inline Instance two_step_instance(double E, double P_in, double P_out) {
    return Instance{store(E, P_in, P_out), quadratic({1.0, 3.0}, 0.25)};
}

struct RandomInstanceOptions {
    std::size_t min_steps = 2;
    std::size_t max_steps = 12;
    std::vector<double> etas{0.8, 1.0};
    std::vector<double> leakages{0.95, 1.0};
    bool random_boundaries = true;
};

/// Random feasible market-impact instance: p_t in [1, 10], p'_t = lambda p_t.
inline Instance random_quadratic_instance(std::mt19937_64& rng,
                                          const RandomInstanceOptions& opt = {}) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> steps(opt.min_steps, opt.max_steps);
    while (true) {
        const std::size_t T = steps(rng);
        const double eta = opt.etas[rng() % opt.etas.size()];
        const double rho = opt.leakages[rng() % opt.leakages.size()];
        const double E = 1.0 + 9.0 * u(rng);
        const double p_in = 0.5 + 2.5 * u(rng);
        const double p_out = 0.5 + 2.5 * u(rng);
        const double lambda = 0.02 + 0.3 * u(rng);
        double s0 = 0.0;
        double sT = 0.0;
        if (opt.random_boundaries) {
            s0 = E * u(rng);
            sT = E * u(rng);
        }
        std::vector<double> prices(T);
        for (auto& p : prices) p = 1.0 + 9.0 * u(rng);
        std::vector<CostFunction> costs;
        for (double p : prices) costs.push_back(quadratic_impact_cost({p, lambda * p, eta}));
        Instance inst{StoreSpec{E, p_in, p_out, rho, s0, sT}, costs};
        const auto fwd = reachable_levels(inst.spec, T);
        const auto bwd = terminal_reachable_levels(inst.spec, T);
        bool ok = true;
        // keep a margin so that perturbations and grids stay feasible
        for (std::size_t t = 1; t < T; ++t) {
            if (std::min(fwd[t].upper, bwd[t].upper) - std::max(fwd[t].lower, bwd[t].lower) < 0.2) {
                ok = false;
            }
        }
        if (sT < fwd[T].lower + 0.1 || sT > fwd[T].upper - 0.1) ok = false;
        if (ok) return inst;
    }
}

/// True when every active bound has a strictly signed multiplier and every
/// inactive bound has room, so that V* is differentiable in E, P_i and P_o.
inline bool strictly_complementary(const Instance& inst, const Solution& sol, double margin = 1e-4) {
    const auto& sp = inst.spec;
    if (sp.input_rate == sp.output_rate) return false;
    const double band = default_feasibility_tol(sp);
    const double room = 1e-4 * energy_scale(sp);
    const double m = margin * price_scale(inst);
    const auto& mu = sol.multipliers;
    for (std::size_t t = 1; t < inst.horizon(); ++t) {
        const double s = sol.schedule.level(t);
        const double gap = mu[t - 1] - sp.leakage * mu[t];
        if (s >= sp.capacity - band) {
            if (!(gap < -m)) return false;
        } else if (s <= band) {
            if (!(gap > m)) return false;
        } else if (s < room || s > sp.capacity - room) {
            return false;
        }
    }
    const auto x = sol.schedule.controls(sp.leakage);
    for (std::size_t t = 0; t < inst.horizon(); ++t) {
        const auto& c = inst.costs[t];
        if (x[t] >= sp.input_rate - band) {
            if (!(c.left_derivative(sp.input_rate) - mu[t] < -m)) return false;
        } else if (x[t] <= -sp.output_rate + band) {
            if (!(mu[t] - c.right_derivative(-sp.output_rate) < -m)) return false;
        } else if (x[t] > sp.input_rate - room || x[t] < -sp.output_rate + room) {
            return false;
        }
    }
    return true;
}

/// Dense-grid argmin of C(x) - mu x on [lower, upper].
inline double grid_argmin(const CostFunction& c, double mu, double lower, double upper,
                          int points = 200001) {
    double best = std::numeric_limits<double>::infinity();
    double arg = lower;
    for (int i = 0; i < points; ++i) {
        const double x = lower + (upper - lower) * i / (points - 1);
        const double v = c(x) - mu * x;
        if (v < best) {
            best = v;
            arg = x;
        }
    }
    return arg;
}

}  // namespace testing_support
