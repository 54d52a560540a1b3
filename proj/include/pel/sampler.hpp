#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "pel/pl_function.hpp"

namespace pel {

/// Seeded source of random PL functions and maps for property checks.
///
/// Uniform variates are built from raw 64-bit engine output rather than
/// std::uniform_real_distribution, so sequences are identical across standard
/// library implementations.
class Sampler {
public:
    explicit Sampler(std::uint64_t seed) : seed_(seed), engine_(seed) {}

    std::uint64_t seed() const { return seed_; }

    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Uniform integer in [lo, hi].
    int integer(int lo, int hi) {
        return lo + static_cast<int>(engine_() % static_cast<std::uint64_t>(hi - lo + 1));
    }

    /// Random PL function with at most `max_breakpoints` breakpoints (including
    /// the endpoints), values in [lo, hi], consecutive breakpoints at least
    /// `min_gap` apart.
    PLFunction pl_function(int max_breakpoints = 12, double lo = -2.0, double hi = 2.0, double min_gap = 0.02);

    /// Like pl_function, but every piece has |slope| >= min_slope.
    PLFunction sloped_pl_function(double min_slope, int max_breakpoints = 12);

    /// Random PL map on [lo, hi] with Lipschitz constant <= lip and phi(0) = 0
    /// when 0 lies in the domain.
    PLMap lipschitz_map(double lo, double hi, double lip = 1.0, int pieces = 6);

    /// Random vertex vector with entries in [lo, hi].
    std::vector<double> vector(std::size_t n, double lo = -2.0, double hi = 2.0);

    /// Random finite union of closed intervals with up to `max_components`.
    IntervalSet interval_set(int max_components = 3);

    /// Independent child sampler, deterministic in (seed, index).
    Sampler child(std::uint64_t index) const;

private:
    std::vector<double> sorted_points(int count, double min_gap);

    std::uint64_t seed_;
    std::mt19937_64 engine_;
};

}  // namespace pel
