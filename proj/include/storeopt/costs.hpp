#pragma once

// Convex per-step cost functions C(x) for adding x (x > 0 buys, x < 0 sells)
// to the store, and their multiplier responses argmin_x [C(x) - mu x].

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "storeopt/error.hpp"

namespace storeopt {

/// Closed interval [lower, upper].
struct Interval {
    double lower = 0.0;
    double upper = 0.0;

    double midpoint() const { return lower == upper ? lower : lower + 0.5 * (upper - lower); }
    double width() const { return upper - lower; }
    bool contains(double x, double tol = 0.0) const { return x >= lower - tol && x <= upper + tol; }
};

/// Coefficients of one side of the kink: linear * x + quadratic * x^2.
struct Branch {
    double linear = 0.0;
    double quadratic = 0.0;
};

enum class CostFamily { PriceTaker, QuadraticImpact, Custom };

/// Parameters of the market-impact cost. `impact_slope` is the price
/// movement per unit traded; the sell side is scaled by `efficiency`.
struct PriceImpactParams {
    double price = 0.0;
    double impact_slope = 0.0;
    double efficiency = 1.0;
};

/// A convex cost made of two quadratic branches joined at x = 0:
///
///     C(x) = buy.linear  * x + buy.quadratic  * x^2    for x >= 0
///     C(x) = sell.linear * x + sell.quadratic * x^2    for x <  0
///
/// Both shipped families are of this form. The price-taker cost has zero
/// quadratic terms; the market-impact cost has buy = (p, p') and
/// sell = (eta p, eta^2 p'). Convexity holds iff sell.linear <= buy.linear
/// and both quadratic terms are nonnegative, which the constructor enforces.
///
/// Instances are small immutable values.
class CostFunction {
public:
    /// The zero cost.
    CostFunction() = default;

    static CostFunction two_sided(Branch buy, Branch sell, CostFamily family = CostFamily::Custom) {
        if (!std::isfinite(buy.linear) || !std::isfinite(buy.quadratic) ||
            !std::isfinite(sell.linear) || !std::isfinite(sell.quadratic)) {
            throw BadSpecError("cost coefficients must be finite");
        }
        if (buy.quadratic < 0.0 || sell.quadratic < 0.0) {
            throw BadSpecError("cost quadratic coefficients must be nonnegative");
        }
        if (sell.linear > buy.linear) {
            throw PriceOrderError("sell price " + std::to_string(sell.linear) +
                                  " exceeds buy price " + std::to_string(buy.linear));
        }
        CostFunction c;
        c.buy_ = buy;
        c.sell_ = sell;
        c.family_ = family;
        return c;
    }

    double operator()(double x) const { return evaluate(x); }

    double evaluate(double x) const {
        const Branch& b = x >= 0.0 ? buy_ : sell_;
        return (b.linear + b.quadratic * x) * x;
    }

    double right_derivative(double x) const {
        const Branch& b = x >= 0.0 ? buy_ : sell_;
        return b.linear + 2.0 * b.quadratic * x;
    }

    double left_derivative(double x) const {
        const Branch& b = x > 0.0 ? buy_ : sell_;
        return b.linear + 2.0 * b.quadratic * x;
    }

    /// Minimizers of C(x) - mu x over [lower, upper], as a closed interval.
    /// Nondecreasing in mu at both endpoints.
    Interval response(double mu, double lower, double upper) const {
        const Interval free = unconstrained_response(mu);
        return {std::clamp(free.lower, lower, upper), std::clamp(free.upper, lower, upper)};
    }

    /// True when the response is a single point for every mu.
    bool strictly_convex() const { return buy_.quadratic > 0.0 && sell_.quadratic > 0.0; }

    /// gamma * C for gamma > 0.
    CostFunction scaled(double gamma) const {
        if (!(gamma > 0.0) || !std::isfinite(gamma)) {
            throw BadSpecError("cost scale factor must be positive and finite");
        }
        CostFunction c = *this;
        c.buy_ = {gamma * buy_.linear, gamma * buy_.quadratic};
        c.sell_ = {gamma * sell_.linear, gamma * sell_.quadratic};
        return c;
    }

    /// C(x) + delta x^2.
    CostFunction regularized(double delta) const {
        if (!(delta >= 0.0) || !std::isfinite(delta)) {
            throw BadSpecError("regularization must be nonnegative and finite");
        }
        CostFunction c = *this;
        c.buy_.quadratic += delta;
        c.sell_.quadratic += delta;
        return c;
    }

    const Branch& buy_branch() const { return buy_; }
    const Branch& sell_branch() const { return sell_; }
    CostFamily family() const { return family_; }

    friend bool operator==(const CostFunction& a, const CostFunction& b) {
        return a.buy_.linear == b.buy_.linear && a.buy_.quadratic == b.buy_.quadratic &&
               a.sell_.linear == b.sell_.linear && a.sell_.quadratic == b.sell_.quadratic;
    }

private:
    static constexpr double inf = std::numeric_limits<double>::infinity();

    // Argmin over the real line; endpoints may be infinite when a branch is linear.
    Interval unconstrained_response(double mu) const {
        const double up = buy_.linear;
        const double down = sell_.linear;
        if (mu > up) {
            const double x = buy_.quadratic > 0.0 ? (mu - up) / (2.0 * buy_.quadratic) : inf;
            return {x, x};
        }
        if (mu < down) {
            const double x = sell_.quadratic > 0.0 ? (mu - down) / (2.0 * sell_.quadratic) : -inf;
            return {x, x};
        }
        // down <= mu <= up: zero is optimal; flat linear branches widen the set.
        Interval r{0.0, 0.0};
        if (mu == up && buy_.quadratic == 0.0) r.upper = inf;
        if (mu == down && sell_.quadratic == 0.0) r.lower = -inf;
        return r;
    }

    Branch buy_{};
    Branch sell_{};
    CostFamily family_ = CostFamily::Custom;
};

/// Price-taker cost: buy at `buy_price`, sell at `sell_price`.
inline CostFunction piecewise_linear_cost(double buy_price, double sell_price) {
    if (buy_price < sell_price) {
        throw PriceOrderError("buy price " + std::to_string(buy_price) + " below sell price " +
                              std::to_string(sell_price));
    }
    return CostFunction::two_sided({buy_price, 0.0}, {sell_price, 0.0}, CostFamily::PriceTaker);
}

/// Market-impact cost: (p + p' x) x when buying, (p + eta p' x) eta x when selling.
inline CostFunction quadratic_impact_cost(const PriceImpactParams& params) {
    const double eta = params.efficiency;
    if (!(eta > 0.0 && eta <= 1.0)) {
        throw BadSpecError("efficiency must lie in (0, 1]");
    }
    if (!(params.impact_slope >= 0.0)) {
        throw BadSpecError("impact slope must be nonnegative (price " +
                           std::to_string(params.price) + ")");
    }
    return CostFunction::two_sided({params.price, params.impact_slope},
                                   {eta * params.price, eta * eta * params.impact_slope},
                                   CostFamily::QuadraticImpact);
}

/// Price-taker costs from a price series: buy at p_t, sell at eta p_t.
inline std::vector<CostFunction> price_taker_costs(const std::vector<double>& prices, double efficiency = 1.0) {
    if (!(efficiency > 0.0 && efficiency <= 1.0)) throw BadSpecError("efficiency must lie in (0, 1]");
    std::vector<CostFunction> out;
    out.reserve(prices.size());
    for (double p : prices) out.push_back(piecewise_linear_cost(p, efficiency * p));
    return out;
}

/// Market-impact costs from a price series with p'_t = lambda p_t.
inline std::vector<CostFunction> market_impact_costs(const std::vector<double>& prices, double lambda,
                                                     double efficiency = 1.0) {
    std::vector<CostFunction> out;
    out.reserve(prices.size());
    for (double p : prices) out.push_back(quadratic_impact_cost({p, lambda * p, efficiency}));
    return out;
}

inline CostFunction regularize(const CostFunction& cost, double delta) {
    if (!(delta > 0.0)) {
        throw BadSpecError("regularization delta must be positive");
    }
    return cost.regularized(delta);
}

/// Sampled midpoint-convexity test of `cost` on [lower, upper].
inline bool midpoint_convex(const CostFunction& cost, double lower, double upper,
                            int samples = 33, double rel_tol = 1e-12) {
    if (!(upper > lower)) return true;
    const double step = (upper - lower) / (samples - 1);
    double scale = 0.0;
    for (int i = 0; i < samples; ++i) {
        scale = std::max(scale, std::abs(cost(lower + i * step)));
    }
    const double tol = rel_tol * std::max(scale, 1.0);
    for (int i = 0; i + 2 < samples; ++i) {
        for (int j = i + 2; j < samples; j += 2) {
            const double a = lower + i * step;
            const double b = lower + j * step;
            const double m = 0.5 * (a + b);
            if (cost(m) > 0.5 * (cost(a) + cost(b)) + tol) return false;
        }
    }
    return true;
}

}  // namespace storeopt
