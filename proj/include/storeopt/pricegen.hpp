#pragma once

// Synthetic half-hourly style price series: a mean level plus harmonics plus
// seeded Gaussian noise.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "storeopt/error.hpp"

namespace storeopt {

struct Harmonic {
    double period = 48.0;  // steps, >= 2
    double amplitude = 0.0;
    double phase = 0.0;  // radians
};

struct CycleSpec {
    double mean = 45.0;
    std::vector<Harmonic> harmonics{{48.0, 15.0, 0.0}, {336.0, 5.0, 0.0}};
    double noise_sigma = 3.0;
    std::uint64_t seed = 0;
    bool allow_negative = false;
    /// Replace negative prices by 0 instead of failing.
    bool clip_negative = false;
};

/// p_t = mean + sum_k a_k sin(2 pi (t - 1) / period_k + phase_k) + sigma Z_t, t = 1..T.
inline std::vector<double> generate(const CycleSpec& spec, std::size_t T) {
    if (T == 0) throw BadSpecError("price series needs at least one step");
    if (!(spec.noise_sigma >= 0.0)) throw BadSpecError("noise sigma must be nonnegative");
    for (const auto& h : spec.harmonics) {
        if (!(h.period >= 2.0)) throw BadSpecError("harmonic periods must be at least 2 steps");
    }
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> z(0.0, 1.0);
    std::vector<double> prices(T);
    for (std::size_t t = 0; t < T; ++t) {
        double p = spec.mean;
        for (const auto& h : spec.harmonics) {
            p += h.amplitude * std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / h.period + h.phase);
        }
        if (spec.noise_sigma > 0.0) p += spec.noise_sigma * z(rng);
        if (p < 0.0 && !spec.allow_negative) {
            if (!spec.clip_negative) {
                throw NegativePriceError("generated price " + std::to_string(p) + " at t=" + std::to_string(t + 1) +
                                             " is negative",
                                         t + 1);
            }
            p = 0.0;
        }
        prices[t] = p;
    }
    return prices;
}

}  // namespace storeopt
