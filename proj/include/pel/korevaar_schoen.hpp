#pragma once

// Korevaar-Schoen functionals J_{p,r} on sampled metric measure spaces.

#include <array>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pel/pl_function.hpp"

namespace pel {

enum class SpaceKind { interval, torus };

/// Uniform grid on [0,1] (cell centers) or on the flat 2-torus [0,1)^2, with
/// equal quadrature weights summing to 1. Distances are computed from integer
/// index offsets so ball membership is reproducible bit for bit.
class SampledSpace {
public:
    static SampledSpace interval(std::size_t n);
    static SampledSpace torus(std::size_t side);

    SpaceKind kind() const { return kind_; }
    std::string name() const;
    std::size_t size() const { return weights_.size(); }
    std::size_t side() const { return side_; }
    double spacing() const { return 1.0 / static_cast<double>(side_); }
    std::array<double, 2> point(std::size_t i) const;
    double weight(std::size_t i) const { return weights_[i]; }
    double total_mass() const;
    double distance(std::size_t i, std::size_t j) const;
    /// Distance from an arbitrary location (second coordinate ignored on the interval).
    double distance_to(const std::array<double, 2>& x, std::size_t j) const;

    /// Values of fn at the first coordinate of every point.
    std::vector<double> sample(const std::function<double(double)>& fn) const;
    std::vector<double> sample(const PLFunction& f) const;

private:
    SpaceKind kind_ = SpaceKind::interval;
    std::size_t side_ = 0;
    std::vector<double> weights_;
};

struct KSKernel {
    double p = 2.0;
    double r = 0.1;
    /// Restriction set U for the first point, applied to its first coordinate.
    std::optional<IntervalSet> restrict_to;
};

/// Sum of the weights of points at distance < r from x.
double ball_measure(const SampledSpace& space, const std::array<double, 2>& x, double r);

/// sum_x sum_y m(x) m(y) |u(x)-u(y)|^p 1{d(x,y) < r} 1_U(x) / (r^p m(B(x,r))).
/// Rows are summed in fixed tiles and the tiles reduced in order, so the
/// result does not depend on `jobs`.
double ks_energy(const SampledSpace& space, std::span<const double> u, const KSKernel& kernel, int jobs = 1);

struct KSScan {
    double p = 2.0;
    std::vector<double> r;
    std::vector<double> J;
    std::vector<double> sup_so_far;
    double liminf_estimate = 0.0;   // min of J over the last window
    double extrapolated = 0.0;      // Richardson in r from the last two scales
    double dispersion = 0.0;        // spread of pairwise extrapolants over the last window
    double loglog_slope = 0.0;      // least squares slope of log J against log r, last window
    double linear_coefficient = 0.0;  // least squares slope of J against r
    bool divergent = false;
};

/// J_{p,r} along a strictly decreasing r sequence bounded below by 3 grid spacings.
KSScan ks_limit_scan(const SampledSpace& space, std::span<const double> u, double p,
                     const std::vector<double>& r_sequence, int jobs = 1,
                     std::optional<IntervalSet> restrict_to = std::nullopt);

struct WeakMonotonicityReport {
    bool skipped = false;  // all J vanish
    double sup = 0.0;
    double window_min = 0.0;
    double c_star = 0.0;   // sup / window_min
    bool finite = false;
};

WeakMonotonicityReport check_weak_monotonicity(const SampledSpace& space, std::span<const double> u, double p,
                                               const std::vector<double>& r_range, int jobs = 1);

struct CanonicalComparison {
    KSScan scan;
    double ks_energy = 0.0;       // (p+1) * extrapolated limit
    double form_energy = 0.0;     // E(u) of the PL interval form with w = 1
    double measure_total = 0.0;   // mu_<u>(X) by the cell-function construction
    double energy_deviation = 0.0;
    double measure_deviation = 0.0;
};

CanonicalComparison ks_vs_canonical(const SampledSpace& space, const PLFunction& u, double p,
                                    const std::vector<double>& r_sequence, int jobs = 1);

/// Scales r_0 2^{-k}, k = 0..count-1.
std::vector<double> halving_scales(double r0, int count);

/// Halving scales moved to the nearest (k + 1/2) grid spacings, k >= 3, so no
/// grid point sits on a ball boundary.
std::vector<double> grid_scales(const SampledSpace& space, double r0, int count);

}  // namespace pel
