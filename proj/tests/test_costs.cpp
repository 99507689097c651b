#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "storeopt/costs.hpp"
#include "support.hpp"

using namespace storeopt;
using Catch::Approx;

TEST_CASE("price-taker response", "[costs]") {
    const auto c = piecewise_linear_cost(3.0, 1.0);

    SECTION("strictly between prices holds") {
        const auto r = c.response(2.0, -1.0, 1.0);
        CHECK(r.lower == 0.0);
        CHECK(r.upper == 0.0);
    }
    SECTION("above the buy price fills at the input rate") {
        const auto r = c.response(4.0, -1.0, 1.0);
        CHECK(r.lower == 1.0);
        CHECK(r.upper == 1.0);
    }
    SECTION("at the buy price any purchase up to the rate is optimal") {
        const auto r = c.response(3.0, -1.0, 1.0);
        CHECK(r.lower == 0.0);
        CHECK(r.upper == 1.0);
    }
    SECTION("at the sell price any sale down to the rate is optimal") {
        const auto r = c.response(1.0, -1.0, 1.0);
        CHECK(r.lower == -1.0);
        CHECK(r.upper == 0.0);
    }
    SECTION("below the sell price empties at the output rate") {
        const auto r = c.response(0.5, -2.0, 1.0);
        CHECK(r.lower == -2.0);
        CHECK(r.upper == -2.0);
    }
}

TEST_CASE("flat price-taker cost responds with the whole domain", "[costs]") {
    const auto c = piecewise_linear_cost(3.0, 3.0);
    const auto r = c.response(3.0, -2.0, 1.0);
    CHECK(r.lower == -2.0);
    CHECK(r.upper == 1.0);
}

TEST_CASE("price order is enforced", "[costs]") {
    CHECK_THROWS_AS(piecewise_linear_cost(1.0, 3.0), PriceOrderError);
    CHECK_NOTHROW(piecewise_linear_cost(-2.0, -2.0));
}

TEST_CASE("price-taker evaluation", "[costs]") {
    const auto a = piecewise_linear_cost(1.0, 1.0);
    const auto b = piecewise_linear_cost(3.0, 3.0);
    CHECK(a(1.0) + b(-1.0) == -2.0);
}

TEST_CASE("market-impact cost evaluation", "[costs]") {
    const auto c = quadratic_impact_cost({1.0, 0.25, 1.0});
    CHECK(c(2.0) == Approx(3.0));
    const auto d = quadratic_impact_cost({3.0, 0.25, 1.0});
    CHECK(c(1.0) + d(-1.0) == Approx(-1.5));

    const auto lossy = quadratic_impact_cost({2.0, 0.5, 0.8});
    // (p + eta p' x) eta x at x = -1
    CHECK(lossy(-1.0) == Approx((2.0 + 0.8 * 0.5 * -1.0) * 0.8 * -1.0));
    CHECK(lossy.left_derivative(0.0) == Approx(1.6));
    CHECK(lossy.right_derivative(0.0) == Approx(2.0));
}

TEST_CASE("market-impact response matches a dense grid search", "[costs]") {
    using testing_support::grid_argmin;
    const auto c1 = quadratic_impact_cost({1.0, 0.25, 1.0});
    const double x1 = grid_argmin(c1, 2.0, -5.0, 5.0);
    CHECK(x1 == Approx(2.0).margin(1e-4));
    const auto r1 = c1.response(2.0, -5.0, 5.0);
    CHECK(r1.lower == Approx(2.0));
    CHECK(r1.upper == Approx(2.0));

    const auto c2 = quadratic_impact_cost({3.0, 0.25, 1.0});
    const double x2 = grid_argmin(c2, 2.5, -5.0, 1.0);
    CHECK(x2 == Approx(-1.0).margin(1e-4));
    CHECK(c2.response(2.5, -5.0, 1.0).lower == Approx(-1.0));
}

TEST_CASE("market-impact parameters are validated", "[costs]") {
    CHECK_THROWS_AS(quadratic_impact_cost({1.0, -0.1, 1.0}), BadSpecError);
    CHECK_THROWS_AS(quadratic_impact_cost({1.0, 0.1, 0.0}), BadSpecError);
    CHECK_THROWS_AS(quadratic_impact_cost({1.0, 0.1, 1.2}), BadSpecError);
}

TEST_CASE("regularization", "[costs]") {
    const auto c = piecewise_linear_cost(3.0, 1.0);
    const auto r = regularize(c, 1e-8);
    CHECK(r(0.0) == c(0.0));
    CHECK(r.strictly_convex());
    CHECK_FALSE(c.strictly_convex());

    const auto at_buy = r.response(3.0, -1.0, 1.0);
    CHECK(at_buy.lower == 0.0);
    CHECK(at_buy.upper == 0.0);

    // (mu - c_b) / (2 delta) = 1 at mu = 3 + 2e-8, so the response is clamped at P_i
    const auto above = r.response(3.0 + 2e-8, -1.0, 1.0);
    CHECK(above.lower == Approx(1.0));
    CHECK(above.upper == Approx(1.0));
    const auto half = r.response(3.0 + 1e-8, -1.0, 1.0);
    CHECK(half.lower == Approx(0.5).epsilon(1e-6));

    CHECK_THROWS_AS(regularize(c, 0.0), BadSpecError);
}

TEST_CASE("market-impact cost with unit efficiency is smooth", "[costs][property]") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 200; ++i) {
        const auto c = quadratic_impact_cost({10.0 * u(rng) - 2.0, u(rng), 1.0});
        for (double x : {-3.0, -0.5, 0.0, 0.7, 2.0}) {
            CHECK(std::abs(c.left_derivative(x) - c.right_derivative(x)) <= 1e-12);
        }
    }
}

namespace {

CostFunction random_cost(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    switch (rng() % 3) {
        case 0: {
            const double s = 10.0 * u(rng) - 3.0;
            return piecewise_linear_cost(s + 3.0 * u(rng), s);
        }
        case 1: return quadratic_impact_cost({10.0 * u(rng), u(rng), 0.5 + 0.5 * u(rng)});
        default: return regularize(piecewise_linear_cost(5.0 * u(rng) + 1.0, u(rng)), 1e-3 * u(rng) + 1e-9);
    }
}

}  // namespace

TEST_CASE("response is monotone in mu", "[costs][property]") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 2000; ++i) {
        const auto c = random_cost(rng);
        const double lower = -3.0 * u(rng);
        const double upper = 3.0 * u(rng);
        double m1 = 20.0 * u(rng) - 5.0;
        double m2 = 20.0 * u(rng) - 5.0;
        if (m1 > m2) std::swap(m1, m2);
        if (m1 == m2) continue;
        CHECK(c.response(m1, lower, upper).upper <= c.response(m2, lower, upper).lower + 1e-12);
    }
}

TEST_CASE("response minimizes the Lagrangian term", "[costs][property]") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 1000; ++i) {
        const auto c = random_cost(rng);
        const double lower = -3.0 * u(rng);
        const double upper = 3.0 * u(rng);
        const double mu = 20.0 * u(rng) - 5.0;
        const auto r = c.response(mu, lower, upper);
        REQUIRE(r.lower <= r.upper);
        for (double xs : {r.lower, r.midpoint(), r.upper}) {
            const double best = c(xs) - mu * xs;
            bool ok = true;
            for (int k = 0; k <= 64; ++k) {
                const double x = lower + (upper - lower) * k / 64.0;
                if (c(x) - mu * x < best - 1e-9) ok = false;
            }
            CHECK(ok);
        }
    }
}

TEST_CASE("efficiency losses preserve convexity of increasing costs", "[costs][property]") {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 500; ++i) {
        const auto c = quadratic_impact_cost({20.0 * u(rng), 2.0 * u(rng), 0.05 + 0.95 * u(rng)});
        CHECK(midpoint_convex(c, -5.0, 5.0));
    }
}
