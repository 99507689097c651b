#pragma once

// Command-line front end. `run` takes argv-style arguments and explicit
// streams so it can be driven from tests; "-" names stdin or stdout.
//
// Exit codes: 0 success, 1 domain error, 2 usage error.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "storeopt/io.hpp"
#include "storeopt/model.hpp"
#include "storeopt/oracle.hpp"
#include "storeopt/pricegen.hpp"
#include "storeopt/rolling.hpp"
#include "storeopt/sensitivity.hpp"
#include "storeopt/solver.hpp"
#include "storeopt/verify.hpp"

namespace storeopt::cli {

enum ExitCode : int { kSuccess = 0, kDomainError = 1, kUsageError = 2 };

namespace detail {

struct SolveArgs {
    std::string prices;
    std::string config;
    std::string out = "-";
    std::string format = "json";
    std::optional<double> mu_tol;
    std::optional<double> reg_delta;
};

struct VerifyArgs {
    std::string solution;
    std::string prices;
    double tol = 1e-6;
};

struct SensitivityArgs {
    std::string prices;
    std::string config;
    double h = 1e-6;
    bool check = false;
};

struct SimulateArgs {
    std::string prices;
    std::string config;
    double sigma = 0.1;
    std::size_t paths = 100;
    std::uint64_t seed = 0;
    std::string forecaster = "expectation";
    std::optional<std::size_t> window;
    unsigned threads = 0;
};

struct OracleArgs {
    std::string prices;
    std::string config;
    std::size_t grid = 201;
};

struct GenArgs {
    std::size_t steps = 0;
    std::uint64_t seed = 0;
    double sigma = 3.0;
    double mean = 45.0;
    bool clip = false;
    bool allow_negative = false;
    std::string out = "-";
};

/// Owns an output file, or forwards to the caller's stream for "-".
class Sink {
public:
    Sink(const std::string& path, std::ostream& fallback) : stream_(&fallback) {
        if (path != "-") {
            file_ = std::make_unique<std::ofstream>(path, std::ios::binary);
            if (!*file_) throw StoreError("cannot write '" + path + "'");
            stream_ = file_.get();
        }
    }
    std::ostream& get() { return *stream_; }
    void finish() {
        stream_->flush();
        if (!*stream_) throw StoreError("write failed");
    }

private:
    std::unique_ptr<std::ofstream> file_;
    std::ostream* stream_;
};

inline PriceSeries read_prices(const std::string& path, std::istream& in) {
    return path == "-" ? parse_prices(in) : load_prices(path);
}

inline SolverOptions solver_options(const std::optional<double>& mu_tol, const std::optional<double>& reg) {
    SolverOptions o;
    o.mu_tolerance = mu_tol;
    o.regularization = reg;
    return o;
}

inline int do_solve(const SolveArgs& a, std::istream& in, std::ostream& out) {
    const auto config = load_config(a.config);
    const auto prices = read_prices(a.prices, in);
    const auto inst = validate_instance(build_instance(config, prices));
    const auto sol = solve(inst, solver_options(a.mu_tol, a.reg_delta));
    Sink sink(a.out, out);
    if (a.format == "csv") {
        write_solution_csv(sink.get(), sol, config.spec.leakage);
    } else {
        write_solution_json(sink.get(), sol, config, &prices);
    }
    sink.finish();
    return kSuccess;
}

inline int do_verify(const VerifyArgs& a, std::istream& in, std::ostream& out, std::ostream& err) {
    StoredSolution stored;
    if (a.solution == "-") {
        stored = read_solution(in);
    } else {
        stored = read_solution(a.solution);
    }
    PriceSeries prices;
    if (!a.prices.empty()) {
        prices = load_prices(a.prices);
    } else if (stored.prices) {
        prices = *stored.prices;
    } else {
        throw BadSpecError("solution carries no prices; pass --prices");
    }
    const Instance inst = build_instance(stored.config, prices);
    if (inst.horizon() != stored.solution.schedule.horizon()) {
        throw BadSpecError("price file has " + std::to_string(inst.horizon()) + " steps, solution has " +
                           std::to_string(stored.solution.schedule.horizon()));
    }
    const auto cert = check_kkt(inst, stored.solution.schedule, stored.solution.multipliers, a.tol);
    const double recomputed = objective(inst, stored.solution.schedule);
    out.precision(12);
    out << cert.summary() << '\n';
    out << "objective " << recomputed << '\n';
    for (const auto& w : cert.warnings) err << "warning: " << w << '\n';
    if (std::abs(recomputed - stored.solution.objective) > 1e-9 * std::max(1.0, std::abs(recomputed))) {
        err << "warning: stored objective " << stored.solution.objective << " differs from recomputed "
            << recomputed << '\n';
    }
    if (!cert.passed) {
        if (!cert.caveat.empty()) err << cert.caveat << '\n';
        err << "error: certificate failed\n";
        return kDomainError;
    }
    return kSuccess;
}

inline void print_times(std::ostream& out, const char* name, const std::vector<std::size_t>& ts) {
    out << name << ' ';
    if (ts.empty()) out << '-';
    for (std::size_t i = 0; i < ts.size(); ++i) out << (i ? "," : "") << ts[i];
    out << '\n';
}

inline int do_sensitivity(const SensitivityArgs& a, std::istream& in, std::ostream& out, std::ostream& err) {
    const auto config = load_config(a.config);
    const auto inst = build_instance(config, read_prices(a.prices, in));
    const auto sol = solve(validate_instance(inst));
    const auto r = sensitivity(inst, sol, a.h);
    out.precision(12);
    out << "objective " << sol.objective << '\n';
    out << "dV_dE " << r.dV_dE << (r.fd_E ? " (finite difference)" : "") << '\n';
    out << "dV_dPi " << r.dV_dPi << (r.fd_Pi ? " (finite difference)" : "") << '\n';
    out << "dV_dPo " << r.dV_dPo << (r.fd_Po ? " (finite difference)" : "") << '\n';
    print_times(out, "capacity_binding", r.tau);
    print_times(out, "input_binding", r.tau_in);
    print_times(out, "output_binding", r.tau_out);
    for (const auto& w : r.warnings) err << "warning: " << w << '\n';
    if (a.check) {
        for (Bound b : {Bound::Capacity, Bound::InputRate, Bound::OutputRate}) {
            const auto fd = finite_difference_check(inst, a.h, b);
            out << "fd_" << to_string(b) << ' ' << fd.central << " formula " << fd.formula << " gap "
                << fd.absolute_gap << '\n';
            for (const auto& w : fd.warnings) err << "warning: " << w << '\n';
        }
    }
    return kSuccess;
}

inline int do_simulate(const SimulateArgs& a, std::istream& in, std::ostream& out) {
    const auto config = load_config(a.config);
    const auto inst = build_instance(config, read_prices(a.prices, in));
    validate_instance(inst);
    const ForecasterKind kind = a.forecaster == "perfect"   ? ForecasterKind::Perfect
                                : a.forecaster == "backcast" ? ForecasterKind::Backcast
                                                             : ForecasterKind::Expectation;
    const std::size_t window = a.window.value_or(config.backcast_window.value_or(48));
    const auto results = simulate_rolling(inst.spec, inst.costs, a.sigma, a.paths, a.seed, kind, window, a.threads);
    out.precision(12);
    out << "path,realized_cost,perfect_foresight_cost\n";
    double sum = 0.0;
    double sum_perfect = 0.0;
    for (std::size_t i = 0; i < results.size(); ++i) {
        const auto realized = realized_costs(inst.costs, martingale_path(inst.horizon(), a.sigma, a.seed, i));
        const double perfect = solve(validate_instance(Instance{inst.spec, realized})).objective;
        out << i << ',' << results[i].realized_cost << ',' << perfect << '\n';
        sum += results[i].realized_cost;
        sum_perfect += perfect;
    }
    if (!results.empty()) {
        const double n = static_cast<double>(results.size());
        out << "# mean realized " << sum / n << " mean perfect foresight " << sum_perfect / n << '\n';
    }
    return kSuccess;
}

inline int do_oracle(const OracleArgs& a, std::istream& in, std::ostream& out, std::ostream& err) {
    const auto config = load_config(a.config);
    const auto vinst = validate_instance(build_instance(config, read_prices(a.prices, in)));
    const auto sol = solve(vinst);
    const auto dp = dp_solve(vinst, GridSpec{a.grid});
    const auto report = compare(sol, dp.solution, dp.error_bound);
    out.precision(12);
    out << "solver_objective " << sol.objective << '\n';
    out << "dp_objective " << dp.solution.objective << '\n';
    out << "dp_value " << dp.value << '\n';
    out << "error_bound " << dp.error_bound << '\n';
    out << "max_level_deviation " << report.max_level_deviation << '\n';
    // the DP schedule is feasible, so the solver may not beat it by more than rounding
    const bool ok = report.passed && sol.objective <= dp.solution.objective + 1e-9 * std::max(1.0, std::abs(sol.objective));
    if (!ok) {
        err << "error: solver and grid DP disagree beyond the bound\n";
        return kDomainError;
    }
    return kSuccess;
}

inline int do_genprices(const GenArgs& a, std::ostream& out) {
    CycleSpec spec;
    spec.mean = a.mean;
    spec.noise_sigma = a.sigma;
    spec.seed = a.seed;
    spec.clip_negative = a.clip;
    spec.allow_negative = a.allow_negative;
    const auto prices = generate(spec, a.steps);
    Sink sink(a.out, out);
    write_prices(sink.get(), prices);
    sink.finish();
    return kSuccess;
}

}  // namespace detail

inline int run(int argc, const char* const argv[], std::istream& in, std::ostream& out, std::ostream& err) {
    CLI::App app{"Optimal arbitrage schedules for a finite, rate-limited, lossy store", "storeopt"};
    app.require_subcommand(1);
    app.fallthrough(false);

    detail::SolveArgs solve_args;
    auto* solve_cmd = app.add_subcommand("solve", "Solve for the optimal schedule");
    solve_cmd->add_option("--prices", solve_args.prices, "Price CSV, '-' for stdin")->required();
    solve_cmd->add_option("--config", solve_args.config, "Store config JSON")->required();
    solve_cmd->add_option("--out", solve_args.out, "Output path, '-' for stdout");
    solve_cmd->add_option("--format", solve_args.format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
    solve_cmd->add_option("--mu-tol", solve_args.mu_tol, "Bisection tolerance on mu")->check(CLI::PositiveNumber);
    solve_cmd->add_option("--reg-delta", solve_args.reg_delta, "Regularization for non-strictly-convex costs")
        ->check(CLI::NonNegativeNumber);

    detail::VerifyArgs verify_args;
    auto* verify_cmd = app.add_subcommand("verify", "Check the optimality certificate of a stored solution");
    verify_cmd->add_option("--solution", verify_args.solution, "Solution JSON, '-' for stdin")->required();
    verify_cmd->add_option("--prices", verify_args.prices, "Price CSV; defaults to the prices in the solution");
    verify_cmd->add_option("--tol", verify_args.tol, "Relative tolerance")->check(CLI::PositiveNumber);

    detail::SensitivityArgs sens_args;
    auto* sens_cmd = app.add_subcommand("sensitivity", "Derivatives of the optimal cost in E, P_i, P_o");
    sens_cmd->add_option("--prices", sens_args.prices, "Price CSV, '-' for stdin")->required();
    sens_cmd->add_option("--config", sens_args.config, "Store config JSON")->required();
    sens_cmd->add_option("--step", sens_args.h, "Finite-difference step")->check(CLI::PositiveNumber);
    sens_cmd->add_flag("--check", sens_args.check, "Also report central finite differences");

    detail::SimulateArgs sim_args;
    auto* sim_cmd = app.add_subcommand("simulate", "Rolling intrinsic control on martingale price scenarios");
    sim_cmd->add_option("--prices", sim_args.prices, "Base price CSV, '-' for stdin")->required();
    sim_cmd->add_option("--config", sim_args.config, "Store config JSON")->required();
    sim_cmd->add_option("--sigma", sim_args.sigma, "Log-volatility per step")->check(CLI::NonNegativeNumber);
    sim_cmd->add_option("--paths", sim_args.paths, "Number of scenarios");
    sim_cmd->add_option("--seed", sim_args.seed, "Scenario seed");
    sim_cmd->add_option("--forecaster", sim_args.forecaster, "perfect, expectation or backcast")
        ->check(CLI::IsMember({"perfect", "expectation", "backcast"}));
    sim_cmd->add_option("--window", sim_args.window, "Back-cast window in steps")->check(CLI::PositiveNumber);
    sim_cmd->add_option("--threads", sim_args.threads, "Worker threads, 0 for all cores");

    detail::OracleArgs oracle_args;
    auto* oracle_cmd = app.add_subcommand("oracle", "Compare the solver with the grid DP");
    oracle_cmd->add_option("--prices", oracle_args.prices, "Price CSV, '-' for stdin")->required();
    oracle_cmd->add_option("--config", oracle_args.config, "Store config JSON")->required();
    oracle_cmd->add_option("--grid", oracle_args.grid, "Level grid points N_S")->check(CLI::Range(2, 100000));

    detail::GenArgs gen_args;
    auto* gen_cmd = app.add_subcommand("genprices", "Write a synthetic daily-cycle price series");
    gen_cmd->add_option("--steps", gen_args.steps, "Number of steps")->required()->check(CLI::PositiveNumber);
    gen_cmd->add_option("--seed", gen_args.seed, "Noise seed");
    gen_cmd->add_option("--sigma", gen_args.sigma, "Noise standard deviation")->check(CLI::NonNegativeNumber);
    gen_cmd->add_option("--mean", gen_args.mean, "Mean price");
    gen_cmd->add_flag("--clip", gen_args.clip, "Clip negative prices to zero");
    gen_cmd->add_flag("--allow-negative", gen_args.allow_negative, "Keep negative prices");
    gen_cmd->add_option("--out", gen_args.out, "Output path, '-' for stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kSuccess : kUsageError;
    }

    try {
        if (*solve_cmd) return detail::do_solve(solve_args, in, out);
        if (*verify_cmd) return detail::do_verify(verify_args, in, out, err);
        if (*sens_cmd) return detail::do_sensitivity(sens_args, in, out, err);
        if (*sim_cmd) return detail::do_simulate(sim_args, in, out);
        if (*oracle_cmd) return detail::do_oracle(oracle_args, in, out, err);
        if (*gen_cmd) return detail::do_genprices(gen_args, out);
    } catch (const StoreError& e) {
        err << "error: " << e.what() << '\n';
        return kDomainError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kDomainError;
    }
    return kUsageError;
}

inline int run(int argc, const char* const argv[]) { return run(argc, argv, std::cin, std::cout, std::cerr); }

}  // namespace storeopt::cli
