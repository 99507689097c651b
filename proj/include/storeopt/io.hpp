#pragma once

// File formats: price CSV input, store config JSON, solution JSON and the
// per-step CSV trace.

#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <iomanip>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "storeopt/costs.hpp"
#include "storeopt/error.hpp"
#include "storeopt/model.hpp"
#include "storeopt/solver.hpp"

namespace storeopt {

/// One price per step (`t,price`) or separate buy and sell prices
/// (`t,buy_price,sell_price`). For the one-column schema `sell` equals `buy`.
struct PriceSeries {
    std::vector<double> buy;
    std::vector<double> sell;
    bool two_sided = false;

    std::size_t size() const { return buy.size(); }
    friend bool operator==(const PriceSeries&, const PriceSeries&) = default;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    while (true) {
        const std::size_t comma = line.find(',', pos);
        out.push_back(trim(line.substr(pos, comma == std::string_view::npos ? line.npos : comma - pos)));
        if (comma == std::string_view::npos) break;
        pos = comma + 1;
    }
    return out;
}

inline double parse_number(std::string_view field, std::size_t line, const char* what) {
    if (!field.empty() && field.front() == '+') field.remove_prefix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc() || ptr != field.data() + field.size() || field.empty()) {
        throw ParseError(std::string("bad ") + what + " '" + std::string(field) + "'", line);
    }
    if (!std::isfinite(v)) throw ParseError(std::string(what) + " is not finite", line);
    return v;
}

inline long long parse_index(std::string_view field, std::size_t line) {
    long long v = 0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc() || ptr != field.data() + field.size() || field.empty()) {
        throw ParseError("bad time index '" + std::string(field) + "'", line);
    }
    return v;
}

}  // namespace detail

inline PriceSeries parse_prices(std::istream& in) {
    std::string raw;
    std::size_t line = 0;
    PriceSeries out;
    bool header_seen = false;
    std::size_t columns = 0;
    std::size_t blank_after = 0;  // line of the first trailing blank, if any

    while (std::getline(in, raw)) {
        ++line;
        std::string_view text(raw);
        if (line == 1 && text.starts_with("\xEF\xBB\xBF")) text.remove_prefix(3);
        text = detail::trim(text);
        if (text.empty()) {
            if (blank_after == 0) blank_after = line;
            continue;
        }
        if (blank_after != 0) throw ParseError("blank line inside the data", blank_after);

        const auto fields = detail::split_commas(text);
        if (!header_seen) {
            header_seen = true;
            if (fields.size() == 2 && fields[0] == "t" && fields[1] == "price") {
                columns = 2;
            } else if (fields.size() == 3 && fields[0] == "t" && fields[1] == "buy_price" &&
                       fields[2] == "sell_price") {
                columns = 3;
                out.two_sided = true;
            } else {
                throw ParseError("expected header 't,price' or 't,buy_price,sell_price'", line);
            }
            continue;
        }
        if (fields.size() != columns) {
            throw ParseError("expected " + std::to_string(columns) + " fields, got " +
                                 std::to_string(fields.size()),
                             line);
        }
        const long long t = detail::parse_index(fields[0], line);
        const auto expected = static_cast<long long>(out.buy.size()) + 1;
        if (t > expected) {
            throw GapError("time jumps from " + std::to_string(expected - 1) + " to " + std::to_string(t), line);
        }
        if (t != expected) {
            throw ParseError("expected t=" + std::to_string(expected) + ", got " + std::to_string(t), line);
        }
        if (columns == 2) {
            const double p = detail::parse_number(fields[1], line, "price");
            out.buy.push_back(p);
            out.sell.push_back(p);
        } else {
            const double b = detail::parse_number(fields[1], line, "buy price");
            const double s = detail::parse_number(fields[2], line, "sell price");
            if (b < s) {
                throw PriceOrderError("line " + std::to_string(line) + ": buy price " + std::to_string(b) +
                                          " below sell price " + std::to_string(s),
                                      line);
            }
            out.buy.push_back(b);
            out.sell.push_back(s);
        }
    }
    if (!header_seen) throw ParseError("empty price file", line == 0 ? 1 : line);
    if (out.buy.empty()) throw ParseError("price file has no data rows", line);
    return out;
}

inline PriceSeries load_prices(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw StoreError("cannot open price file '" + path + "'");
    return parse_prices(in);
}

inline void write_prices(std::ostream& out, const std::vector<double>& prices) {
    out << "t,price\n" << std::setprecision(12);
    for (std::size_t t = 0; t < prices.size(); ++t) out << t + 1 << ',' << prices[t] << '\n';
}

enum class CostModel { PriceTaker, QuadraticImpact };

struct StoreConfig {
    StoreSpec spec;
    double efficiency = 1.0;
    double impact_lambda = 0.0;
    CostModel cost_model = CostModel::PriceTaker;
    std::optional<std::size_t> backcast_window;
};

inline const char* to_string(CostModel m) {
    return m == CostModel::PriceTaker ? "price_taker" : "quadratic_impact";
}

namespace detail {

/// 1-based line of a byte offset into `text`.
inline std::size_t line_of(const std::string& text, std::size_t offset) {
    std::size_t line = 1;
    for (std::size_t i = 0; i < offset && i < text.size(); ++i) {
        if (text[i] == '\n') ++line;
    }
    return line;
}

inline nlohmann::json parse_json(const std::string& text) {
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(e.what(), line_of(text, e.byte > 0 ? e.byte - 1 : 0));
    }
}

inline std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw StoreError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline double number_field(const nlohmann::json& j, const char* key, std::optional<double> fallback = {}) {
    const auto it = j.find(key);
    if (it == j.end()) {
        if (fallback) return *fallback;
        throw BadSpecError(std::string("config is missing '") + key + "'");
    }
    if (!it->is_number()) throw BadSpecError(std::string("config field '") + key + "' must be a number");
    return it->get<double>();
}

}  // namespace detail

inline StoreConfig config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw BadSpecError("config must be a JSON object");
    StoreConfig c;
    c.spec.capacity = detail::number_field(j, "capacity");
    c.spec.input_rate = detail::number_field(j, "input_rate");
    c.spec.output_rate = detail::number_field(j, "output_rate");
    c.spec.leakage = detail::number_field(j, "leakage", 1.0);
    c.spec.initial_level = detail::number_field(j, "initial_level", 0.0);
    c.spec.terminal_level = detail::number_field(j, "terminal_level", 0.0);
    c.efficiency = detail::number_field(j, "efficiency", 1.0);
    c.impact_lambda = detail::number_field(j, "impact_lambda", 0.0);
    const std::string model = j.value("cost_model", std::string("price_taker"));
    if (model == "price_taker") {
        c.cost_model = CostModel::PriceTaker;
    } else if (model == "quadratic_impact") {
        c.cost_model = CostModel::QuadraticImpact;
    } else {
        throw BadSpecError("unknown cost_model '" + model + "'");
    }
    if (j.contains("backcast_window")) {
        const double w = detail::number_field(j, "backcast_window");
        if (!(w >= 1.0) || w != std::floor(w)) throw BadSpecError("backcast_window must be a positive integer");
        c.backcast_window = static_cast<std::size_t>(w);
    }
    check_spec(c.spec);
    if (!(c.efficiency > 0.0 && c.efficiency <= 1.0)) throw BadSpecError("efficiency must lie in (0, 1]");
    if (!(c.impact_lambda >= 0.0)) throw BadSpecError("impact_lambda must be nonnegative");
    return c;
}

inline nlohmann::json config_to_json(const StoreConfig& c) {
    nlohmann::json j{{"capacity", c.spec.capacity},
                     {"input_rate", c.spec.input_rate},
                     {"output_rate", c.spec.output_rate},
                     {"leakage", c.spec.leakage},
                     {"initial_level", c.spec.initial_level},
                     {"terminal_level", c.spec.terminal_level},
                     {"efficiency", c.efficiency},
                     {"impact_lambda", c.impact_lambda},
                     {"cost_model", to_string(c.cost_model)}};
    if (c.backcast_window) j["backcast_window"] = *c.backcast_window;
    return j;
}

inline StoreConfig parse_config(const std::string& text) { return config_from_json(detail::parse_json(text)); }

inline StoreConfig load_config(const std::string& path) { return parse_config(detail::slurp(path)); }

/// Cost functions for `prices` under `config`. Two-sided price files give the
/// price-taker buy and sell prices directly; efficiency is not applied again.
inline std::vector<CostFunction> build_costs(const StoreConfig& config, const PriceSeries& prices) {
    if (config.cost_model == CostModel::QuadraticImpact) {
        if (prices.two_sided) {
            throw BadSpecError("quadratic_impact needs the 't,price' schema, not separate buy and sell prices");
        }
        return market_impact_costs(prices.buy, config.impact_lambda, config.efficiency);
    }
    if (!prices.two_sided) return price_taker_costs(prices.buy, config.efficiency);
    std::vector<CostFunction> out;
    out.reserve(prices.size());
    for (std::size_t t = 0; t < prices.size(); ++t) {
        try {
            out.push_back(piecewise_linear_cost(prices.buy[t], prices.sell[t]));
        } catch (const PriceOrderError& e) {
            throw PriceOrderError("t=" + std::to_string(t + 1) + ": " + e.what(), t + 2);
        }
    }
    return out;
}

inline Instance build_instance(const StoreConfig& config, const PriceSeries& prices) {
    return Instance{config.spec, build_costs(config, prices)};
}

/// A solution as stored on disk, with the config and prices it was solved for.
struct StoredSolution {
    Solution solution;
    StoreConfig config;
    std::optional<PriceSeries> prices;
};

inline nlohmann::json solution_to_json(const Solution& sol, const StoreConfig& config,
                                       const PriceSeries* prices = nullptr) {
    nlohmann::json j;
    j["levels"] = sol.schedule.levels();
    j["controls"] = sol.schedule.controls(config.spec.leakage);
    j["multipliers"] = sol.multipliers;
    j["segment_ends"] = sol.segment_ends;
    j["horizons"] = sol.horizons;
    j["objective"] = sol.objective;
    j["spec"] = config_to_json(config);
    if (prices) {
        if (prices->two_sided) {
            j["prices"] = {{"buy", prices->buy}, {"sell", prices->sell}};
        } else {
            j["prices"] = {{"price", prices->buy}};
        }
    }
    return j;
}

inline StoredSolution solution_from_json(const nlohmann::json& j) {
    StoredSolution out;
    try {
        out.solution.schedule = Schedule(j.at("levels").get<std::vector<double>>());
        out.solution.multipliers = j.at("multipliers").get<std::vector<double>>();
        out.solution.segment_ends = j.at("segment_ends").get<std::vector<std::size_t>>();
        out.solution.horizons = j.at("horizons").get<std::vector<std::size_t>>();
        out.solution.objective = j.at("objective").get<double>();
        out.config = config_from_json(j.at("spec"));
        if (j.contains("prices")) {
            const auto& p = j.at("prices");
            PriceSeries ps;
            if (p.contains("price")) {
                ps.buy = p.at("price").get<std::vector<double>>();
                ps.sell = ps.buy;
            } else {
                ps.buy = p.at("buy").get<std::vector<double>>();
                ps.sell = p.at("sell").get<std::vector<double>>();
                ps.two_sided = true;
                if (ps.buy.size() != ps.sell.size()) throw BadSpecError("buy and sell price lists differ in length");
            }
            out.prices = std::move(ps);
        }
    } catch (const nlohmann::json::exception& e) {
        throw BadSpecError(std::string("malformed solution: ") + e.what());
    }
    if (out.solution.schedule.horizon() != out.solution.multipliers.size()) {
        throw BadSpecError("solution has " + std::to_string(out.solution.multipliers.size()) +
                           " multipliers for horizon " + std::to_string(out.solution.schedule.horizon()));
    }
    return out;
}

/// Full round-trip precision (nlohmann prints shortest round-trip doubles).
inline void write_solution_json(std::ostream& out, const Solution& sol, const StoreConfig& config,
                                const PriceSeries* prices = nullptr) {
    out << solution_to_json(sol, config, prices).dump(2) << '\n';
}

inline StoredSolution read_solution(std::istream& in) {
    std::ostringstream ss;
    ss << in.rdbuf();
    return solution_from_json(detail::parse_json(ss.str()));
}

inline StoredSolution read_solution(const std::string& path) {
    return solution_from_json(detail::parse_json(detail::slurp(path)));
}

/// Rows t,level,control,mu,lookahead for t = 1..T at 12 significant digits.
inline void write_solution_csv(std::ostream& out, const Solution& sol, double leakage) {
    const auto x = sol.schedule.controls(leakage);
    const auto profile = horizon_profile(sol);
    const auto old = out.precision(12);
    out << "t,level,control,mu,lookahead\n";
    for (std::size_t t = 1; t <= sol.schedule.horizon(); ++t) {
        out << t << ',' << sol.schedule.level(t) << ',' << x[t - 1] << ',' << sol.multipliers[t - 1] << ','
            << profile[t - 1].second << '\n';
    }
    out.precision(old);
}

}  // namespace storeopt
