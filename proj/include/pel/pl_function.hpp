#pragma once

// Continuous piecewise-linear functions on [0,1] and piecewise-linear maps on
// real intervals, with the cut/fold operators used by the energy-measure
// construction. All operations are exact up to floating rounding: crossings
// are solved from the two line segments, never by bisection.

#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace pel {

inline constexpr double kGeomEps = 1e-12;         // breakpoint dedup tolerance
inline constexpr double kSlopeMergeEps = 1e-12;   // collinear-piece pruning
inline constexpr std::size_t kPieceCap = 2'000'000;
inline constexpr int kFoldCap = 52;
inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct PieceCapExceeded : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DomainMismatch : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

namespace detail {

// Knot representation shared by PLFunction and PLMap.
struct Knots {
    std::vector<double> x;
    std::vector<double> y;

    double eval(double t) const;
    double slope(std::size_t piece) const { return (y[piece + 1] - y[piece]) / (x[piece + 1] - x[piece]); }
    std::size_t pieces() const { return x.size() - 1; }
    void normalize(std::size_t piece_cap);
};

}  // namespace detail

class PLMap;

/// Continuous piecewise-linear function on [0,1], stored as the linear
/// interpolant of (breakpoint, value) pairs.
class PLFunction {
public:
    PLFunction(std::vector<double> breakpoints, std::vector<double> values,
               std::size_t piece_cap = kPieceCap);

    static PLFunction constant(double c);
    static PLFunction linear(double slope, double intercept);
    static PLFunction identity() { return linear(1.0, 0.0); }
    /// Peak `height` at `peak`, zero at both ends.
    static PLFunction tent(double peak = 0.5, double height = 0.5);

    double operator()(double x) const { return knots_.eval(x); }

    std::span<const double> breakpoints() const { return knots_.x; }
    std::span<const double> values() const { return knots_.y; }
    std::size_t pieces() const { return knots_.pieces(); }
    double slope(std::size_t piece) const { return knots_.slope(piece); }
    double min_value() const;
    double max_value() const;
    bool is_constant() const { return pieces() == 1 && knots_.y[0] == knots_.y[1]; }
    /// Total variation.
    double variation() const;

    const detail::Knots& knots() const { return knots_; }

private:
    detail::Knots knots_;
};

/// Piecewise-linear map on a real interval [lo, hi]; plays the role of the
/// outer function in compositions phi o f.
class PLMap {
public:
    PLMap(std::vector<double> knots, std::vector<double> values, std::size_t piece_cap = kPieceCap);

    static PLMap identity(double lo, double hi);
    static PLMap scale(double c, double lo, double hi);
    static PLMap absolute(double lo, double hi);
    /// t -> ((t ^ b) v a) - ((0 ^ b) v a); a, b may be infinite.
    static PLMap cut(double a, double b, double lo, double hi);
    /// t -> min_k |t - 2^{-(n-1)} k|
    static PLMap triangle(int n, double lo, double hi);
    /// t -> ((-t + a + 2^{-n}) ^ 2^{-n})^+
    static PLMap shifted_cut(double a, int n, double lo, double hi);

    double operator()(double t) const { return knots_.eval(t); }
    double lo() const { return knots_.x.front(); }
    double hi() const { return knots_.x.back(); }
    std::span<const double> knots() const { return knots_.x; }
    std::span<const double> values() const { return knots_.y; }
    std::size_t pieces() const { return knots_.pieces(); }
    double slope(std::size_t piece) const { return knots_.slope(piece); }
    /// Slope on the piece containing t (right-continuous).
    double derivative(double t) const;
    /// Largest |slope| over pieces meeting [a, b].
    double lipschitz_on(double a, double b) const;

    const detail::Knots& raw() const { return knots_; }

private:
    detail::Knots knots_;
};

/// One component of an IntervalSet; flags mark whether each endpoint belongs.
struct Interval {
    double lo = 0.0;
    double hi = 0.0;
    bool lo_closed = true;
    bool hi_closed = true;

    double length() const { return hi - lo; }
    bool contains(double x) const;
    bool operator==(const Interval&) const = default;
};

/// Finite disjoint union of subintervals of [0,1].
class IntervalSet {
public:
    IntervalSet() = default;
    explicit IntervalSet(std::vector<Interval> components);

    static IntervalSet whole() { return IntervalSet({{0.0, 1.0, true, true}}); }
    static IntervalSet closed(double lo, double hi) { return IntervalSet({{lo, hi, true, true}}); }
    static IntervalSet point(double x) { return closed(x, x); }

    std::span<const Interval> components() const { return components_; }
    bool empty() const { return components_.empty(); }
    bool contains(double x) const;
    double length() const;
    /// Containment of closures with tolerance kGeomEps.
    bool subset_of(const IntervalSet& other) const;
    IntervalSet closure() const;
    IntervalSet unite(const IntervalSet& other) const;
    /// Length of the overlap with [lo, hi].
    double overlap(double lo, double hi) const;
    bool operator==(const IntervalSet&) const = default;

private:
    std::vector<Interval> components_;
};

/// Result of an operation that is only approximately piecewise linear.
struct PLApproximation {
    PLFunction fn;
    double sup_error = 0.0;
};

// Algebra ------------------------------------------------------------------

PLFunction affine_combine(double a, const PLFunction& f, double b, const PLFunction& g,
                          std::size_t piece_cap = kPieceCap);
PLFunction operator+(const PLFunction& f, const PLFunction& g);
PLFunction operator-(const PLFunction& f, const PLFunction& g);
PLFunction operator*(double a, const PLFunction& f);
PLFunction operator+(const PLFunction& f, double c);

enum class Lattice { min, max };
PLFunction lattice(const PLFunction& f, const PLFunction& g, Lattice which,
                   std::size_t piece_cap = kPieceCap);
inline PLFunction pl_min(const PLFunction& f, const PLFunction& g) { return lattice(f, g, Lattice::min); }
inline PLFunction pl_max(const PLFunction& f, const PLFunction& g) { return lattice(f, g, Lattice::max); }

PLFunction compose(const PLMap& phi, const PLFunction& f, std::size_t piece_cap = kPieceCap);
PLFunction cut(const PLFunction& f, double a, double b, std::size_t piece_cap = kPieceCap);
PLFunction triangle_fold(const PLFunction& f, int n, std::size_t piece_cap = kPieceCap);
PLFunction shifted_cut(const PLFunction& g, double a, int n, std::size_t piece_cap = kPieceCap);
PLFunction abs(const PLFunction& f);

/// PL interpolant of f*g on the merged breakpoints, each piece split into
/// `refine` equal parts. sup_error is exact: on every sub-piece the product
/// is a quadratic, whose interpolation error peaks at the midpoint.
PLApproximation pl_product(const PLFunction& f, const PLFunction& g, int refine, std::span<const double> extra_knots = {},
                           std::size_t piece_cap = kPieceCap);
/// PL interpolant of |f|^q; sup_error estimated from midpoint deviations.
PLApproximation pl_abs_power(const PLFunction& f, double q, int refine, std::span<const double> extra_knots = {},
                             std::size_t piece_cap = kPieceCap);

/// {x : g(x) <= a} as a union of closed intervals.
IntervalSet sublevel_set(const PLFunction& g, double a);
/// {x : g(x) == a}; includes isolated crossing points.
IntervalSet level_set(const PLFunction& g, double a);
/// x -> slope * dist(x, A) + offset, for A nonempty.
PLFunction distance_function(const IntervalSet& a, double slope = 1.0, double offset = 0.0);

/// Sorted union of breakpoint lists with kGeomEps dedup.
std::vector<double> merge_breakpoints(std::span<const double> a, std::span<const double> b);

/// Triangle wave T_n evaluated directly.
double triangle_wave(double t, int n);

}  // namespace pel
