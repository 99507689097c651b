#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "storeopt/model.hpp"
#include "support.hpp"

using namespace storeopt;
using testing_support::price_taker;
using testing_support::quadratic;
using testing_support::store;

TEST_CASE("validate_instance accepts a store that can stay empty", "[model]") {
    Instance inst{store(10.0, 1.0, 1.0), price_taker({1.0, 2.0, 3.0})};
    CHECK_NOTHROW(validate_instance(inst));
}

TEST_CASE("validate_instance rejects an unreachable terminal level", "[model]") {
    SECTION("fill rate too slow") {
        Instance inst{store(10.0, 1.0, 1.0, 1.0, 0.0, 5.0), price_taker({1.0, 2.0, 3.0})};
        try {
            validate_instance(inst);
            FAIL("expected InfeasibleError");
        } catch (const InfeasibleError& e) {
            CHECK(e.first_blocked_time() >= 1);
            CHECK(e.first_blocked_time() <= 3);
        }
        // hi_3 = 3 < 5 but 3 is reachable
        inst.spec.terminal_level = 3.0;
        CHECK_NOTHROW(validate_instance(inst));
    }
    SECTION("leakage and output rate cannot drain the store in one step") {
        // lo_1 = 0.5 * 8 - 1 = 3 > 0
        Instance inst{store(10.0, 1.0, 1.0, 0.5, 8.0, 0.0), price_taker({1.0})};
        CHECK_THROWS_AS(validate_instance(inst), InfeasibleError);
        inst.spec.terminal_level = 3.0;
        CHECK_NOTHROW(validate_instance(inst));
    }
}

TEST_CASE("validate_instance rejects bad specs", "[model]") {
    const auto costs = price_taker({1.0});
    CHECK_THROWS_AS(validate_instance(Instance{store(1.0, 0.0, 0.0), costs}), BadSpecError);
    CHECK_THROWS_AS(validate_instance(Instance{store(1.0, 1.0, 1.0, 0.0), costs}), BadSpecError);
    CHECK_THROWS_AS(validate_instance(Instance{store(1.0, 1.0, 1.0, 1.0, 2.0, 0.0), costs}),
                    BadSpecError);
    CHECK_THROWS_AS(validate_instance(Instance{store(-1.0, 1.0, 1.0), costs}), BadSpecError);
    CHECK_THROWS_AS(validate_instance(Instance{store(1.0, 1.0, 1.0), {}}), BadSpecError);
}

TEST_CASE("objective", "[model]") {
    SECTION("idle schedule costs nothing") {
        Instance inst{store(10.0, 1.0, 1.0), price_taker({4.0, 2.0, 7.0})};
        CHECK(objective(inst, Schedule({0.0, 0.0, 0.0, 0.0})) == 0.0);
    }
    SECTION("price-taker arithmetic") {
        Instance inst{store(10.0, 1.0, 1.0), price_taker({1.0, 3.0})};
        CHECK(objective(inst, Schedule({0.0, 1.0, 0.0})) == -2.0);
    }
    SECTION("market-impact arithmetic") {
        Instance inst{store(10.0, 1.0, 1.0), quadratic({1.0, 3.0}, 0.25)};
        CHECK(objective(inst, Schedule({0.0, 1.0, 0.0})) == Catch::Approx(-1.5));
    }
    SECTION("length mismatch") {
        Instance inst{store(10.0, 1.0, 1.0), price_taker({1.0, 3.0})};
        CHECK_THROWS_AS(objective(inst, Schedule({0.0, 1.0})), BadSpecError);
    }
}

TEST_CASE("feasibility_check", "[model]") {
    const auto spec = store(10.0, 1.0, 1.0);
    SECTION("feasible") {
        CHECK(feasibility_check(spec, Schedule({0.0, 1.0, 0.0}), 1e-9).feasible());
    }
    SECTION("input rate") {
        const auto r = feasibility_check(spec, Schedule({0.0, 2.0, 0.0}), 1e-9);
        REQUIRE_FALSE(r.feasible());
        bool found = false;
        for (const auto& v : r.violations) {
            if (v.kind == ViolationKind::InputRate && v.time == 1) {
                found = true;
                CHECK(v.magnitude == Catch::Approx(1.0));
            }
        }
        CHECK(found);
    }
    SECTION("terminal and capacity") {
        const auto r = feasibility_check(spec, Schedule({0.0, 1.0, -1.0}), 1e-9);
        bool terminal = false;
        bool capacity = false;
        for (const auto& v : r.violations) {
            if (v.kind == ViolationKind::TerminalLevel && v.time == 2) {
                terminal = true;
                CHECK(v.magnitude == Catch::Approx(1.0));
            }
            if (v.kind == ViolationKind::CapacityLower && v.time == 2) capacity = true;
        }
        CHECK(terminal);
        CHECK(capacity);
    }
}

TEST_CASE("relaxing the store never breaks feasibility", "[model][property]") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int checked = 0;
    for (int i = 0; i < 500; ++i) {
        const double E = 1.0 + 5.0 * u(rng);
        StoreSpec s{E, 0.1 + u(rng), 0.1 + u(rng), 0.8 + 0.2 * u(rng), E * u(rng), E * u(rng)};
        Instance inst{s, price_taker(std::vector<double>(1 + rng() % 6, 1.0))};
        bool valid = true;
        try {
            validate_instance(inst);
        } catch (const InfeasibleError&) {
            valid = false;
        }
        if (!valid) continue;
        ++checked;
        for (int which = 0; which < 3; ++which) {
            Instance bigger = inst;
            if (which == 0) bigger.spec.capacity *= 1.5;
            if (which == 1) bigger.spec.input_rate *= 1.5;
            if (which == 2) bigger.spec.output_rate *= 1.5;
            CHECK_NOTHROW(validate_instance(bigger));
        }
    }
    CHECK(checked > 50);
}

TEST_CASE("objective is convex in the controls", "[model][property]") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 200; ++i) {
        const std::size_t T = 1 + rng() % 8;
        std::vector<double> prices(T);
        for (auto& p : prices) p = 10.0 * u(rng);
        Instance inst{store(100.0, 2.0, 2.0, 0.9), quadratic(prices, 0.3 * u(rng), 0.7 + 0.3 * u(rng))};
        std::vector<double> xa(T), xb(T), xm(T);
        const double lambda = u(rng);
        for (std::size_t t = 0; t < T; ++t) {
            xa[t] = 4.0 * u(rng) - 2.0;
            xb[t] = 4.0 * u(rng) - 2.0;
            xm[t] = lambda * xa[t] + (1.0 - lambda) * xb[t];
        }
        const double va = objective(inst, Schedule::from_controls(50.0, xa, 0.9));
        const double vb = objective(inst, Schedule::from_controls(50.0, xb, 0.9));
        const double vm = objective(inst, Schedule::from_controls(50.0, xm, 0.9));
        CHECK(vm <= lambda * va + (1.0 - lambda) * vb + 1e-9);
    }
}

TEST_CASE("controls round-trip through levels", "[model][property]") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < 100; ++i) {
        const double rho = 0.5 + 0.5 * std::abs(u(rng));
        std::vector<double> x(1 + rng() % 20);
        for (auto& v : x) v = u(rng);
        const auto s = Schedule::from_controls(3.0 * std::abs(u(rng)), x, rho);
        const auto back = s.controls(rho);
        REQUIRE(back.size() == x.size());
        for (std::size_t t = 0; t < x.size(); ++t) CHECK(std::abs(back[t] - x[t]) <= 1e-12);
    }
}
