#pragma once

// Sequential Lagrangian construction of the optimal schedule S* and the
// cumulative multiplier mu*.
//
// For a trial reference value mu, the store follows the unconstrained
// response path S_t(mu) = rho S_{t-1}(mu) + x*_t(mu_t) with mu_t = mu / rho^(t-s-1),
// starting at (s, S_s). The path is classified by its first capacity (or
// terminal) violation. The segment value mu_bar is the supremum of the mu
// whose path first leaves the store through the bottom; it is located by
// bisection, the segment ends where mu_bar's path touches 0 or E, and the
// construction restarts from there. Each segment only needs costs up to its
// horizon (the later of the two bracketing violation times).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "storeopt/costs.hpp"
#include "storeopt/error.hpp"
#include "storeopt/model.hpp"

namespace storeopt {

struct SolverOptions {
    /// Stop bisecting once the mu bracket is this narrow. Unset bisects down
    /// to adjacent doubles, which makes the result independent of the
    /// initial bracket.
    std::optional<double> mu_tolerance;
    double bracket_growth = 4.0;
    int max_bisection_iters = 4096;
    /// Quadratic regularization added to costs that are not strictly convex.
    /// Unset picks 1e-8 * median|buy price| / max(P_i, P_o); zero disables it.
    std::optional<double> regularization;
    /// Certify the result against the unregularized problem and throw
    /// CertificationError if it fails.
    bool certify = true;
    double certify_tolerance = 1e-4;
};

enum class PathTag { Feasible, LowerViolation, UpperViolation };

struct PathClass {
    PathTag tag = PathTag::Feasible;
    /// First violating time; meaningful only when tag != Feasible.
    std::size_t violation_time = 0;
};

struct SegmentResult {
    double mu_bar = 0.0;
    std::size_t start = 0;
    std::size_t end = 0;
    /// Look-ahead horizon; equal to T for the final segment.
    std::size_t horizon = 0;
    bool final = false;
    /// Levels S_{start+1}..S_end.
    std::vector<double> levels;
};

namespace detail {

inline double default_regularization(const Instance& inst) {
    std::vector<double> prices;
    prices.reserve(inst.costs.size());
    for (const auto& c : inst.costs) prices.push_back(std::abs(c.buy_branch().linear));
    double median = 0.0;
    if (!prices.empty()) {
        auto mid = prices.begin() + static_cast<std::ptrdiff_t>(prices.size() / 2);
        std::nth_element(prices.begin(), mid, prices.end());
        median = *mid;
    }
    if (!(median > 0.0)) median = price_scale(inst);
    const double rate = std::max(inst.spec.input_rate, inst.spec.output_rate);
    return 1e-8 * median / rate;
}

/// Costs and tolerances shared by every path simulation of one solve.
class PathEngine {
public:
    PathEngine(const Instance& inst, const SolverOptions& opt) : spec_(inst.spec), opt_(opt) {
        const double delta =
            opt.regularization ? *opt.regularization : default_regularization(inst);
        if (!(delta >= 0.0)) throw BadSpecError("regularization must be nonnegative");
        planning_.reserve(inst.costs.size());
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        for (const auto& c : inst.costs) {
            planning_.push_back(c.strictly_convex() || delta == 0.0 ? c : c.regularized(delta));
            lo = std::min(lo, c.right_derivative(-spec_.output_rate));
            hi = std::max(hi, c.left_derivative(spec_.input_rate));
        }
        bracket_lo_ = lo - 1.0;
        bracket_hi_ = hi + 1.0;
        band_ = 1e-12 * energy_scale(spec_);
        if (opt.mu_tolerance && !(*opt.mu_tolerance > 0.0)) {
            throw BadSpecError("mu tolerance must be positive");
        }
        if (!(opt.bracket_growth > 1.0)) throw BadSpecError("bracket growth must exceed 1");
        if (opt.max_bisection_iters < 1) throw BadSpecError("max_bisection_iters must be >= 1");
    }

    std::size_t horizon() const { return planning_.size(); }
    double band() const { return band_; }
    const StoreSpec& spec() const { return spec_; }

    /// Simulates the response path from (start, level). Levels S_{start+1}..
    /// up to the first violation (inclusive) are appended to `out` if given.
    PathClass simulate(double mu, std::size_t start, double level,
                       std::vector<double>* out = nullptr) const {
        const std::size_t T = horizon();
        const double rho = spec_.leakage;
        double m = mu;
        double s = level;
        if (out) out->clear();
        for (std::size_t t = start + 1; t <= T; ++t) {
            const double x =
                planning_[t - 1].response(m, -spec_.output_rate, spec_.input_rate).midpoint();
            s = rho * s + x;
            if (out) out->push_back(s);
            const double lower = t < T ? 0.0 : spec_.terminal_level;
            const double upper = t < T ? spec_.capacity : spec_.terminal_level;
            if (s < lower - band_) return {PathTag::LowerViolation, t};
            if (s > upper + band_) return {PathTag::UpperViolation, t};
            if (rho != 1.0 && m != 0.0) m /= rho;
        }
        return {PathTag::Feasible, 0};
    }

    /// `anchor` is the reference value carried over from the previous
    /// segment, mu_{start} / rho. When several reference values give a
    /// feasible completion, the one closest to the anchor is used, which keeps
    /// the slackness relation at the junction.
    SegmentResult advance(std::size_t start, double level,
                          std::optional<double> anchor = std::nullopt) const {
        const std::size_t T = horizon();
        if (start >= T) throw BadSpecError("segment start beyond horizon");

        double lo = bracket_lo_;
        double hi = bracket_hi_;
        const double width0 = std::max(hi - lo, 1.0);

        PathClass lo_class = simulate(lo, start, level);
        for (int k = 0; lo_class.tag != PathTag::LowerViolation; ++k) {
            if (lo_class.tag == PathTag::Feasible) return finish_feasible(lo, start, level, anchor);
            const double next = lo - width0 * std::pow(opt_.bracket_growth, k);
            if (!std::isfinite(next) || k > 600) {
                throw BracketFailure("no lower-violating reference value below " +
                                     std::to_string(lo) + " from t=" + std::to_string(start));
            }
            hi = std::min(hi, lo);
            lo = next;
            lo_class = simulate(lo, start, level);
        }
        PathClass hi_class = simulate(hi, start, level);
        for (int k = 0; hi_class.tag != PathTag::UpperViolation; ++k) {
            if (hi_class.tag == PathTag::Feasible) return finish_feasible(hi, start, level, anchor);
            const double next = hi + width0 * std::pow(opt_.bracket_growth, k);
            if (!std::isfinite(next) || k > 600) {
                throw BracketFailure("no upper-violating reference value above " +
                                     std::to_string(hi) + " from t=" + std::to_string(start));
            }
            lo = std::max(lo, hi);
            lo_class = hi_class;
            hi = next;
            hi_class = simulate(hi, start, level);
        }

        const double eps = opt_.mu_tolerance.value_or(0.0);
        int iters = 0;
        while (true) {
            if (hi - lo <= eps) break;
            const double mid = lo + 0.5 * (hi - lo);
            if (!(mid > lo && mid < hi)) break;
            if (++iters > opt_.max_bisection_iters) {
                throw NoConvergence("bisection did not converge from t=" + std::to_string(start) +
                                    " (bracket [" + std::to_string(lo) + ", " +
                                    std::to_string(hi) + "])");
            }
            const PathClass c = simulate(mid, start, level);
            if (c.tag == PathTag::Feasible) return finish_feasible(mid, start, level, anchor);
            if (c.tag == PathTag::LowerViolation) {
                lo = mid;
                lo_class = c;
            } else {
                hi = mid;
                hi_class = c;
            }
        }
        return finish_bracket(lo, lo_class, hi, hi_class, start, level);
    }

private:
    // Bisects between a feasible and an infeasible reference value down to
    // adjacent doubles and returns the feasible end.
    double feasible_edge(double feasible, double infeasible, std::size_t start, double level) const {
        for (int i = 0; i < opt_.max_bisection_iters; ++i) {
            const double mid = feasible + 0.5 * (infeasible - feasible);
            if (mid == feasible || mid == infeasible) break;
            if (simulate(mid, start, level).tag == PathTag::Feasible) {
                feasible = mid;
            } else {
                infeasible = mid;
            }
        }
        return feasible;
    }

    // The feasible reference values form an interval; with an anchor, move
    // to its point closest to the anchor.
    SegmentResult finish_feasible(double mu, std::size_t start, double level,
                                  std::optional<double> anchor) const {
        if (anchor && std::isfinite(*anchor) && *anchor != mu) {
            if (simulate(*anchor, start, level).tag == PathTag::Feasible) {
                mu = *anchor;
            } else {
                mu = feasible_edge(mu, *anchor, start, level);
            }
        }

        SegmentResult r;
        r.mu_bar = mu;
        r.start = start;
        r.end = horizon();
        r.horizon = horizon();
        r.final = true;
        simulate(mu, start, level, &r.levels);
        tidy(r.levels, start, r.levels.size());
        r.levels.back() = spec_.terminal_level;
        return r;
    }

    // Combines the two bracketing paths so that the segment lands exactly on
    // the boundary it touches. A convex combination of two rate-feasible
    // paths is rate-feasible, and both paths are inside the band before the
    // earlier of the two violation times.
    SegmentResult finish_bracket(double mu_lo, PathClass c_lo, double mu_hi, PathClass c_hi,
                                 std::size_t start, double level) const {
        const std::size_t T = horizon();
        std::vector<double> path_lo;
        std::vector<double> path_hi;
        simulate(mu_lo, start, level, &path_lo);
        simulate(mu_hi, start, level, &path_hi);
        const std::size_t tl = c_lo.violation_time;
        const std::size_t tu = c_hi.violation_time;

        SegmentResult r;
        r.start = start;
        double target = 0.0;
        if (tl > tu) {
            r.end = tu;
            r.horizon = tl;
            target = spec_.capacity;
        } else if (tl < tu) {
            r.end = tl;
            r.horizon = tu;
            target = 0.0;
        } else if (tl == T) {
            r.end = T;
            r.horizon = T;
            r.final = true;
            target = spec_.terminal_level;
        } else {
            throw NoConvergence("bracketing paths leave the store on opposite sides at t=" +
                                std::to_string(tl) + "; response too steep to resolve");
        }

        const std::size_t n = r.end - start;
        const double a = path_lo[n - 1];
        const double b = path_hi[n - 1];
        double theta = b > a ? (target - a) / (b - a) : 0.0;
        theta = std::clamp(theta, 0.0, 1.0);
        r.mu_bar = mu_lo + theta * (mu_hi - mu_lo);
        r.levels.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            r.levels[i] = path_lo[i] + theta * (path_hi[i] - path_lo[i]);
        }
        tidy(r.levels, start, n);
        r.levels.back() = target;
        return r;
    }

    // Clamps interior levels that sit inside the tolerance band back into [0, E].
    void tidy(std::vector<double>& levels, std::size_t start, std::size_t n) const {
        for (std::size_t i = 0; i < n; ++i) {
            if (start + i + 1 < horizon()) {
                levels[i] = std::clamp(levels[i], 0.0, spec_.capacity);
            }
        }
    }

    StoreSpec spec_;
    SolverOptions opt_;
    std::vector<CostFunction> planning_;
    double bracket_lo_ = 0.0;
    double bracket_hi_ = 0.0;
    double band_ = 0.0;
};

}  // namespace detail

/// Classifies the response path for reference value `mu` started at
/// (start_time, start_level).
inline PathClass classify_path(const ValidatedInstance& inst, double mu, std::size_t start_time,
                               double start_level, const SolverOptions& options = {}) {
    return detail::PathEngine(inst.instance(), options).simulate(mu, start_time, start_level);
}

/// One step of the construction: the constant segment starting at
/// (start_time, start_level).
inline SegmentResult advance_segment(const ValidatedInstance& inst, std::size_t start_time,
                                     double start_level, const SolverOptions& options = {},
                                     std::optional<double> anchor = std::nullopt) {
    return detail::PathEngine(inst.instance(), options).advance(start_time, start_level, anchor);
}

Solution solve(const ValidatedInstance& inst, const SolverOptions& options = {});

/// (t, look-ahead) for t = 1..T: the number of steps of future cost data the
/// decision at t depends on.
inline std::vector<std::pair<std::size_t, std::size_t>> horizon_profile(const Solution& sol) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    const std::size_t T = sol.schedule.horizon();
    out.reserve(T);
    std::size_t k = 0;
    for (std::size_t t = 1; t <= T; ++t) {
        while (k < sol.segment_ends.size() && sol.segment_ends[k] < t) ++k;
        const std::size_t h = k < sol.horizons.size() ? sol.horizons[k] : T;
        out.emplace_back(t, h - t);
    }
    return out;
}

}  // namespace storeopt

#include "storeopt/verify.hpp"

namespace storeopt {

inline Solution solve(const ValidatedInstance& inst, const SolverOptions& options) {
    const detail::PathEngine engine(inst.instance(), options);
    const std::size_t T = inst.horizon();
    const double rho = inst.spec().leakage;

    std::vector<double> levels;
    levels.reserve(T + 1);
    levels.push_back(inst.spec().initial_level);
    Solution sol;
    sol.multipliers.reserve(T);

    std::size_t start = 0;
    std::optional<double> anchor;
    while (start < T) {
        SegmentResult seg = engine.advance(start, levels.back(), anchor);
        if (seg.end <= start) throw NoConvergence("segment made no progress at t=" + std::to_string(start));
        double m = seg.mu_bar;
        for (std::size_t t = start + 1; t <= seg.end; ++t) {
            sol.multipliers.push_back(m);
            if (rho != 1.0 && m != 0.0) m /= rho;
        }
        anchor = m;
        levels.insert(levels.end(), seg.levels.begin(), seg.levels.end());
        sol.segment_ends.push_back(seg.end);
        if (seg.final) break;
        sol.horizons.push_back(seg.horizon);
        start = seg.end;
    }
    sol.schedule = Schedule(std::move(levels));
    sol.objective = objective(inst.instance(), sol.schedule);

    if (options.certify) {
        const Certificate cert =
            check_kkt(inst.instance(), sol.schedule, sol.multipliers, options.certify_tolerance);
        if (!cert.passed) {
            throw CertificationError("solution failed its optimality certificate: " + cert.summary());
        }
    }
    return sol;
}

}  // namespace storeopt
