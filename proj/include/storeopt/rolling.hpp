#pragma once

// Multiplicative martingale cost uncertainty C_t = xi_t * Cbar_t: scenario
// generation, a scenario-tree dynamic program, the check that the stochastic
// problem collapses to the deterministic one on Cbar, and the rolling
// intrinsic controller.
//
// Rolling intrinsic plans on forecast costs but every committed step is
// charged at the realized cost of that step.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "storeopt/costs.hpp"
#include "storeopt/error.hpp"
#include "storeopt/model.hpp"
#include "storeopt/oracle.hpp"
#include "storeopt/solver.hpp"

namespace storeopt {

struct ScenarioPath {
    /// xi_1..xi_T, all positive.
    std::vector<double> scales;
};

inline std::vector<CostFunction> realized_costs(const std::vector<CostFunction>& base, const ScenarioPath& path) {
    if (path.scales.size() != base.size()) throw BadSpecError("scenario length differs from the cost horizon");
    std::vector<CostFunction> out;
    out.reserve(base.size());
    for (std::size_t t = 0; t < base.size(); ++t) out.push_back(base[t].scaled(path.scales[t]));
    return out;
}

/// Lognormal martingale: xi_t = xi_{t-1} exp(sigma Z_t - sigma^2 / 2). Path i
/// draws from its own generator seeded with (seed, i), so paths do not depend
/// on how many are requested or on evaluation order.
inline ScenarioPath martingale_path(std::size_t T, double sigma, std::uint64_t seed, std::uint64_t index) {
    if (!(sigma >= 0.0)) throw BadSpecError("sigma must be nonnegative");
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> z(0.0, 1.0);
    ScenarioPath p;
    p.scales.resize(T);
    double xi = 1.0;
    for (std::size_t t = 0; t < T; ++t) {
        const double draw = z(rng);
        if (sigma > 0.0) xi *= std::exp(sigma * draw - 0.5 * sigma * sigma);
        p.scales[t] = xi;
    }
    return p;
}

inline std::vector<ScenarioPath> generate_martingale_paths(std::size_t T, double sigma, std::size_t n_paths,
                                                           std::uint64_t seed) {
    std::vector<ScenarioPath> out;
    out.reserve(n_paths);
    for (std::size_t i = 0; i < n_paths; ++i) out.push_back(martingale_path(T, sigma, seed, i));
    return out;
}

struct TreeNode {
    std::size_t parent = 0;
    std::size_t time = 0;
    /// Probability of this node given its parent.
    double probability = 1.0;
    double scale = 1.0;
    std::vector<std::size_t> children;
};

/// Children of a node, as listed when building a tree. Nodes refer to
/// earlier nodes as parents; node 0 is the root at t = 0 with scale 1.
struct NodeSpec {
    std::size_t parent = 0;
    double probability = 1.0;
    double scale = 1.0;
};

class ScenarioTree {
public:
    /// Checks structure, probabilities and the martingale property
    /// sum_c p_c xi_c = xi_node at every internal node.
    ScenarioTree(std::vector<CostFunction> base, const std::vector<NodeSpec>& nodes)
        : ScenarioTree(std::move(base), nodes, true) {}

    /// Same structural checks, but scales need not form a martingale.
    static ScenarioTree unchecked(std::vector<CostFunction> base, const std::vector<NodeSpec>& nodes) {
        return ScenarioTree(std::move(base), nodes, false);
    }

    std::size_t horizon() const { return base_.size(); }
    const std::vector<CostFunction>& base_costs() const { return base_; }
    const std::vector<TreeNode>& nodes() const { return nodes_; }
    const TreeNode& node(std::size_t i) const { return nodes_[i]; }

    /// Worst |sum_c p_c xi_c - xi_node| over internal nodes.
    double martingale_defect() const {
        double worst = 0.0;
        for (const auto& n : nodes_) {
            if (n.children.empty()) continue;
            double mean = 0.0;
            for (std::size_t c : n.children) mean += nodes_[c].probability * nodes_[c].scale;
            worst = std::max(worst, std::abs(mean - n.scale));
        }
        return worst;
    }

private:
    ScenarioTree(std::vector<CostFunction> base, const std::vector<NodeSpec>& nodes, bool martingale)
        : base_(std::move(base)) {
        if (base_.empty()) throw BadSpecError("scenario tree needs at least one time step");
        nodes_.push_back(TreeNode{});
        for (const auto& spec : nodes) {
            const std::size_t id = nodes_.size();
            if (spec.parent >= id) throw BadSpecError("tree node must follow its parent");
            if (!(spec.probability > 0.0 && spec.probability <= 1.0)) {
                throw BadSpecError("branch probabilities must lie in (0, 1]");
            }
            if (!(spec.scale > 0.0) || !std::isfinite(spec.scale)) throw BadSpecError("scales must be positive");
            TreeNode n;
            n.parent = spec.parent;
            n.time = nodes_[spec.parent].time + 1;
            n.probability = spec.probability;
            n.scale = spec.scale;
            if (n.time > base_.size()) throw BadSpecError("tree is deeper than the cost horizon");
            nodes_[spec.parent].children.push_back(id);
            nodes_.push_back(n);
        }
        for (const auto& n : nodes_) {
            if (n.children.empty()) {
                if (n.time != base_.size()) throw BadSpecError("every leaf must sit at the horizon");
                continue;
            }
            double total = 0.0;
            for (std::size_t c : n.children) total += nodes_[c].probability;
            if (std::abs(total - 1.0) > 1e-12) throw BadSpecError("branch probabilities must sum to 1");
        }
        if (martingale && martingale_defect() > 1e-12) {
            throw BadSpecError("scales do not form a martingale (defect " + std::to_string(martingale_defect()) + ")");
        }
    }

    std::vector<CostFunction> base_;
    std::vector<TreeNode> nodes_;
};

/// Random martingale tree: each internal node gets 1..max_branching children
/// with random probabilities and lognormal multipliers renormalized to mean 1.
inline ScenarioTree random_martingale_tree(std::vector<CostFunction> base, std::size_t max_branching, double sigma,
                                           std::mt19937_64& rng) {
    if (max_branching < 1) throw BadSpecError("branching must be at least 1");
    std::uniform_int_distribution<std::size_t> branches(1, max_branching);
    std::uniform_real_distribution<double> u(0.2, 1.0);
    std::normal_distribution<double> z(0.0, 1.0);
    std::vector<NodeSpec> specs;
    std::vector<std::pair<std::size_t, double>> frontier{{0, 1.0}};
    std::size_t next_id = 1;
    for (std::size_t t = 0; t < base.size(); ++t) {
        std::vector<std::pair<std::size_t, double>> next;
        for (const auto& [id, scale] : frontier) {
            const std::size_t k = branches(rng);
            std::vector<double> p(k);
            std::vector<double> m(k);
            double total = 0.0;
            for (std::size_t i = 0; i < k; ++i) {
                p[i] = u(rng);
                total += p[i];
            }
            double mean = 0.0;
            for (std::size_t i = 0; i < k; ++i) {
                p[i] /= total;
                m[i] = std::exp(sigma * z(rng));
                mean += p[i] * m[i];
            }
            for (std::size_t i = 0; i < k; ++i) {
                const double child = scale * m[i] / mean;
                specs.push_back({id, p[i], child});
                next.emplace_back(next_id++, child);
            }
        }
        frontier = std::move(next);
    }
    return ScenarioTree(std::move(base), specs);
}

struct TreeDpResult {
    /// V_0(S_0) on the grid.
    double value = 0.0;
    /// Optimal x_1 at each child of the root, in child order.
    std::vector<double> first_controls;
    /// V at every node on the grid of its time.
    std::vector<std::vector<double>> node_values;
    std::vector<std::vector<double>> grids;
};

/// Backward induction over (node, level): the decision x_{t+1} is taken after
/// xi_{t+1} is revealed, so V_n(s) = sum_c p_c min_x [xi_c Cbar_{t+1}(x) + V_c(rho s + x)].
inline TreeDpResult scenario_tree_dp(const ScenarioTree& tree, const StoreSpec& spec, const GridSpec& grid = {}) {
    const std::size_t T = tree.horizon();
    validate_instance(Instance{spec, tree.base_costs()});
    const double n = static_cast<double>(grid.level_points);
    if (grid.level_points < 2) throw BadSpecError("grid needs at least 2 level points");
    if (static_cast<double>(tree.nodes().size()) * n * n > grid.budget) {
        throw BudgetExceeded("scenario tree DP exceeds the budget");
    }
    TreeDpResult r;
    r.grids = detail::stage_grids(spec, T, grid.level_points);
    const auto& nodes = tree.nodes();
    r.node_values.resize(nodes.size());
    // children always follow parents, so a reverse sweep sees children first
    for (std::size_t id = nodes.size(); id-- > 0;) {
        const auto& node = nodes[id];
        const std::size_t t = node.time;
        auto& v = r.node_values[id];
        if (t == T) {
            v.assign(r.grids[T].size(), 0.0);
            continue;
        }
        v.assign(r.grids[t].size(), 0.0);
        const auto& cost = tree.base_costs()[t];
        for (std::size_t c : node.children) {
            const double xi = nodes[c].scale;
            const double p = nodes[c].probability;
            for (std::size_t i = 0; i < v.size(); ++i) {
                const auto step = detail::best_step(spec, r.grids[t][i], r.grids[t + 1], r.node_values[c],
                                                    [&](double x) { return xi * cost(x); });
                v[i] += p * step.value;
            }
        }
    }
    r.value = r.node_values[0].front();
    const auto& cost = tree.base_costs()[0];
    for (std::size_t c : nodes[0].children) {
        const double xi = nodes[c].scale;
        const auto step = detail::best_step(spec, spec.initial_level, r.grids[1], r.node_values[c],
                                            [&](double x) { return xi * cost(x); });
        r.first_controls.push_back(step.control);
    }
    return r;
}

/// Expected cost of a fixed schedule over the tree.
inline double expected_schedule_cost(const ScenarioTree& tree, const StoreSpec& spec, const Schedule& schedule) {
    const auto x = schedule.controls(spec.leakage);
    if (x.size() != tree.horizon()) throw BadSpecError("schedule length differs from the tree horizon");
    const auto& nodes = tree.nodes();
    std::vector<double> reach(nodes.size(), 0.0);
    reach[0] = 1.0;
    double total = 0.0;
    for (std::size_t id = 1; id < nodes.size(); ++id) {
        const auto& node = nodes[id];
        reach[id] = reach[node.parent] * node.probability;
        total += reach[id] * node.scale * tree.base_costs()[node.time - 1](x[node.time - 1]);
    }
    return total;
}

struct CollapseReport {
    double stochastic_value = 0.0;
    double deterministic_value = 0.0;
    double value_gap = 0.0;
    /// Worst |V_n(s) - xi_n Vbar_t(s)| over nodes and grid levels.
    double node_identity_gap = 0.0;
    /// Worst |x_1 at a root child - deterministic x_1|.
    double first_control_gap = 0.0;
    double tolerance = 0.0;
    bool value_matches = false;
    bool node_identity_holds = false;
    bool first_control_matches = false;
    bool passed() const { return value_matches && node_identity_holds && first_control_matches; }
};

/// Compares the tree DP with the deterministic DP on the base costs over the
/// same grids. `tol` is relative to max(1, max |Vbar|) for values and to
/// max(E, P_i + P_o) for controls.
inline CollapseReport collapse_check(const ScenarioTree& tree, const StoreSpec& spec, const GridSpec& grid = {},
                                     double tol = 1e-9) {
    const auto det_inst = validate_instance(Instance{spec, tree.base_costs()});
    const auto det = dp_tables(det_inst, grid);
    const auto sto = scenario_tree_dp(tree, spec, grid);

    double scale = 1.0;
    for (const auto& v : det.values) {
        for (double x : v) scale = std::max(scale, std::abs(x));
    }
    CollapseReport r;
    r.tolerance = tol;
    r.stochastic_value = sto.value;
    r.deterministic_value = det.values[0].front();
    r.value_gap = std::abs(r.stochastic_value - r.deterministic_value);
    for (std::size_t id = 0; id < tree.nodes().size(); ++id) {
        const auto& node = tree.node(id);
        const auto& v = sto.node_values[id];
        for (std::size_t i = 0; i < v.size(); ++i) {
            r.node_identity_gap = std::max(r.node_identity_gap, std::abs(v[i] - node.scale * det.values[node.time][i]));
        }
    }
    const auto& cost = tree.base_costs()[0];
    const auto det_first = detail::best_step(spec, spec.initial_level, det.grids[1], det.values[1],
                                             [&](double x) { return cost(x); });
    for (double x : sto.first_controls) {
        r.first_control_gap = std::max(r.first_control_gap, std::abs(x - det_first.control));
    }
    r.value_matches = r.value_gap <= tol * scale;
    r.node_identity_holds = r.node_identity_gap <= tol * scale;
    r.first_control_matches = r.first_control_gap <= tol * energy_scale(spec);
    return r;
}

/// Supplies the planning costs for t+1..T after t steps have been committed.
class Forecaster {
public:
    virtual ~Forecaster() = default;
    /// Returns T - t costs. `realized` holds C_1..C_t and `scales` xi_1..xi_t.
    virtual std::vector<CostFunction> forecast(std::size_t t, std::size_t T, std::span<const CostFunction> realized,
                                               std::span<const double> scales) const = 0;
};

/// Knows the realized costs in advance.
class PerfectForesight final : public Forecaster {
public:
    explicit PerfectForesight(std::vector<CostFunction> realized) : costs_(std::move(realized)) {}
    std::vector<CostFunction> forecast(std::size_t t, std::size_t, std::span<const CostFunction>,
                                       std::span<const double>) const override {
        return {costs_.begin() + static_cast<std::ptrdiff_t>(t), costs_.end()};
    }

private:
    std::vector<CostFunction> costs_;
};

/// E[C_u | F_t] = xi_t Cbar_u under the martingale model.
class ConditionalExpectation final : public Forecaster {
public:
    explicit ConditionalExpectation(std::vector<CostFunction> base) : base_(std::move(base)) {}
    std::vector<CostFunction> forecast(std::size_t t, std::size_t, std::span<const CostFunction>,
                                       std::span<const double> scales) const override {
        const double xi = t == 0 ? 1.0 : scales[t - 1];
        std::vector<CostFunction> out;
        out.reserve(base_.size() - t);
        for (std::size_t u = t; u < base_.size(); ++u) out.push_back(base_[u].scaled(xi));
        return out;
    }

private:
    std::vector<CostFunction> base_;
};

/// Repeats the trailing `window` realized costs. Before enough history
/// exists, the missing steps come from `prior`, the costs of the window
/// preceding t = 1 (oldest first).
class Backcast final : public Forecaster {
public:
    Backcast(std::size_t window, std::vector<CostFunction> prior) : window_(window), prior_(std::move(prior)) {
        if (window_ == 0) throw BadSpecError("back-cast window must be positive");
        if (prior_.size() != window_) throw BadSpecError("back-cast prior must cover one window");
    }
    std::size_t window() const { return window_; }

    std::vector<CostFunction> forecast(std::size_t t, std::size_t T, std::span<const CostFunction> realized,
                                       std::span<const double>) const override {
        std::vector<CostFunction> out;
        out.reserve(T - t);
        for (std::size_t u = t + 1; u <= T; ++u) {
            // latest time at or before t in the same phase as u
            const std::size_t back = ((u - t - 1) / window_ + 1) * window_;
            const auto source = static_cast<std::ptrdiff_t>(u) - static_cast<std::ptrdiff_t>(back);
            if (source >= 1) {
                out.push_back(realized[static_cast<std::size_t>(source - 1)]);
            } else {
                out.push_back(prior_[static_cast<std::size_t>(source + static_cast<std::ptrdiff_t>(window_) - 1)]);
            }
        }
        return out;
    }

private:
    std::size_t window_;
    std::vector<CostFunction> prior_;
};

struct RollingResult {
    Schedule schedule;
    std::vector<double> controls;
    /// Sum of realized C_t(x_t) over the committed controls.
    double realized_cost = 0.0;
};

/// Receding-horizon control: at each t, solve on forecast costs from the
/// current level, commit x_{t+1} and charge it at the realized C_{t+1}.
inline RollingResult rolling_intrinsic(const StoreSpec& spec, const std::vector<CostFunction>& realized,
                                       const ScenarioPath& path, const Forecaster& forecaster,
                                       const SolverOptions& options = {}) {
    const std::size_t T = realized.size();
    if (path.scales.size() != T) throw BadSpecError("scenario length differs from the cost horizon");
    validate_instance(Instance{spec, realized});
    std::vector<double> levels{spec.initial_level};
    levels.reserve(T + 1);
    RollingResult r;
    for (std::size_t t = 0; t < T; ++t) {
        auto plan_costs = forecaster.forecast(t, T, std::span<const CostFunction>(realized.data(), t),
                                              std::span<const double>(path.scales.data(), t));
        if (plan_costs.size() != T - t) throw BadSpecError("forecaster returned the wrong number of steps");
        StoreSpec local = spec;
        local.initial_level = levels.back();
        const Solution plan = solve(validate_instance(Instance{local, std::move(plan_costs)}), options);
        const double next = plan.schedule.level(1);
        const double x = next - spec.leakage * levels.back();
        r.controls.push_back(x);
        r.realized_cost += realized[t](x);
        levels.push_back(next);
    }
    r.schedule = Schedule(std::move(levels));
    return r;
}

enum class ForecasterKind { Perfect, Expectation, Backcast };

inline std::unique_ptr<Forecaster> make_forecaster(ForecasterKind kind, const std::vector<CostFunction>& base,
                                                   const std::vector<CostFunction>& realized, std::size_t window) {
    switch (kind) {
        case ForecasterKind::Perfect: return std::make_unique<PerfectForesight>(realized);
        case ForecasterKind::Expectation: return std::make_unique<ConditionalExpectation>(base);
        case ForecasterKind::Backcast: {
            window = std::min(window, base.size());
            return std::make_unique<Backcast>(
                window, std::vector<CostFunction>(base.begin(), base.begin() + static_cast<std::ptrdiff_t>(window)));
        }
    }
    throw BadSpecError("unknown forecaster");
}

/// Rolling intrinsic over `n_paths` martingale scenarios on worker threads.
/// Results are indexed by path and do not depend on the thread count.
inline std::vector<RollingResult> simulate_rolling(const StoreSpec& spec, const std::vector<CostFunction>& base,
                                                   double sigma, std::size_t n_paths, std::uint64_t seed,
                                                   ForecasterKind kind, std::size_t window = 48,
                                                   unsigned threads = 0, const SolverOptions& options = {}) {
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(n_paths, 1)));
    std::vector<RollingResult> results(n_paths);
    std::vector<std::string> errors(n_paths);
    auto work = [&](unsigned worker) {
        for (std::size_t i = worker; i < n_paths; i += threads) {
            try {
                const auto path = martingale_path(base.size(), sigma, seed, i);
                const auto realized = realized_costs(base, path);
                const auto f = make_forecaster(kind, base, realized, window);
                results[i] = rolling_intrinsic(spec, realized, path, *f, options);
            } catch (const std::exception& e) {
                errors[i] = e.what();
            }
        }
    };
    std::vector<std::thread> pool;
    for (unsigned w = 1; w < threads; ++w) pool.emplace_back(work, w);
    work(0);
    for (auto& th : pool) th.join();
    for (std::size_t i = 0; i < n_paths; ++i) {
        if (!errors[i].empty()) throw StoreError("path " + std::to_string(i) + ": " + errors[i]);
    }
    return results;
}

}  // namespace storeopt
