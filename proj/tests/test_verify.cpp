#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "storeopt/solver.hpp"
#include "storeopt/verify.hpp"
#include "support.hpp"

using namespace storeopt;
using Catch::Approx;
using testing_support::price_taker;
using testing_support::store;

namespace {

const Schedule kOptimal({0.0, 1.0, 0.0, 0.0});

}  // namespace

TEST_CASE("certificate for the three-step optimum", "[verify]") {
    const auto inst = testing_support::three_step_instance();
    const std::vector<double> mu{2.0, 2.0, 2.0};
    const auto cert = check_kkt(inst, kOptimal, mu, 1e-6);
    INFO(cert.summary());
    CHECK(cert.passed);
    CHECK(cert.response_optimality <= 1e-12);
    CHECK(cert.complementary_slackness == 0.0);
    CHECK(cert.caveat.empty());
}

TEST_CASE("corrupted multiplier fails the response condition", "[verify]") {
    const auto inst = testing_support::three_step_instance();
    const std::vector<double> mu{2.0, 2.0, 4.0};
    const auto cert = check_kkt(inst, kOptimal, mu, 1e-6);
    CHECK_FALSE(cert.passed);
    CHECK(cert.response_worst_time == 3);
    // C_3(0) - 0 = 0 against min_x [2x - 4x] = -2 at x = 1
    CHECK(cert.response_optimality == Approx(2.0));
    CHECK(cert.response_closed_form == Approx(2.0));
    CHECK(cert.response_grid == Approx(2.0));
    CHECK_FALSE(cert.caveat.empty());
}

TEST_CASE("idle schedule without arbitrage certifies", "[verify]") {
    std::vector<CostFunction> costs;
    for (double s : {1.0, 2.0, 1.5, 0.5}) costs.push_back(piecewise_linear_cost(s + 5.0, s));
    const Instance inst{store(3.0, 1.0, 1.0), costs};
    const Schedule idle(std::vector<double>(5, 0.0));
    const std::vector<double> mu(4, 3.0);
    CHECK(check_kkt(inst, idle, mu, 1e-6).passed);
}

TEST_CASE("infeasible schedule fails condition (i)", "[verify]") {
    const auto inst = testing_support::three_step_instance();
    const Schedule bad({0.0, 1.0, 2.0, 0.0});
    const auto cert = check_kkt(inst, bad, std::vector<double>{2.0, 2.0, 2.0}, 1e-6);
    CHECK_FALSE(cert.feasibility.feasible());
    CHECK_FALSE(cert.passed);
}

TEST_CASE("slackness violations are signed by boundary", "[verify]") {
    const auto inst = testing_support::three_step_instance();
    // S_1 = 1 is interior, so mu_1 must equal mu_2
    const auto interior = check_kkt(inst, kOptimal, std::vector<double>{1.5, 2.0, 2.0}, 1e-6);
    CHECK(interior.complementary_slackness == Approx(0.5));
    CHECK(interior.slackness_worst_time == 1);
    // S_2 = 0 allows mu_3 <= mu_2 but not mu_3 > mu_2
    const auto down = check_kkt(inst, kOptimal, std::vector<double>{2.0, 2.0, 1.9}, 1e-6);
    CHECK(down.complementary_slackness == 0.0);
}

TEST_CASE("negative multipliers with increasing costs warn", "[verify]") {
    const Instance inst{store(3.0, 1.0, 1.0), price_taker({1.0, 1.0})};
    const Schedule idle({0.0, 0.0, 0.0});
    const auto cert = check_kkt(inst, idle, std::vector<double>{-1.0, -1.0}, 1e-6);
    CHECK_FALSE(cert.warnings.empty());
}

TEST_CASE("length mismatch is rejected", "[verify]") {
    const auto inst = testing_support::three_step_instance();
    CHECK_THROWS_AS(check_kkt(inst, kOptimal, std::vector<double>{2.0, 2.0}, 1e-6), BadSpecError);
}

TEST_CASE("value gap", "[verify]") {
    const auto inst = testing_support::three_step_instance();
    const std::vector<double> mu{2.0, 2.0, 2.0};
    CHECK(std::abs(certify_value_gap(inst, kOptimal, mu)) <= 1e-9);
    CHECK(certify_value_gap(inst, Schedule({0.0, 0.0, 0.0, 0.0}), mu) == Approx(4.0));

    // mu = 0: gap = objective - sum_t min_X C_t
    const Instance q{store(5.0, 1.0, 1.0), testing_support::quadratic({1.0, 2.0}, 0.5)};
    const Schedule s({0.0, 0.5, 0.0});
    const std::vector<double> zero(2, 0.0);
    double lower = 0.0;
    for (const auto& c : q.costs) {
        const double x = c.response(0.0, -1.0, 1.0).lower;
        lower += c(x);
    }
    CHECK(certify_value_gap(q, s, zero) == Approx(objective(q, s) - lower));
    CHECK(certify_value_gap(q, s, zero) >= 0.0);
}

TEST_CASE("solver output certifies with a vanishing gap", "[verify][property]") {
    std::mt19937_64 rng(31);
    for (int i = 0; i < 100; ++i) {
        const auto raw = testing_support::random_quadratic_instance(rng);
        const auto sol = solve(validate_instance(raw));
        const auto cert = check_kkt(raw, sol.schedule, sol.multipliers, 1e-8);
        INFO(cert.summary());
        CHECK(cert.passed);
        const double gap = certify_value_gap(raw, sol.schedule, sol.multipliers);
        const auto& sp = raw.spec;
        CHECK(gap >= -1e-9);
        CHECK(gap <= 1e-8 * price_scale(raw) * raw.horizon() * (sp.capacity + sp.input_rate + sp.output_rate));
    }
}
