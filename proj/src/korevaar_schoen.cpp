#include "pel/korevaar_schoen.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <thread>

#include "pel/energy_forms.hpp"
#include "pel/measure.hpp"

namespace pel {

SampledSpace SampledSpace::interval(std::size_t n) {
    if (n < 2 || n > 100'000) throw std::invalid_argument("interval grid needs 2 <= n <= 100000");
    SampledSpace s;
    s.kind_ = SpaceKind::interval;
    s.side_ = n;
    s.weights_.assign(n, 1.0 / static_cast<double>(n));
    return s;
}

SampledSpace SampledSpace::torus(std::size_t side) {
    if (side < 2 || side > 512) throw std::invalid_argument("torus grid needs 2 <= side <= 512");
    SampledSpace s;
    s.kind_ = SpaceKind::torus;
    s.side_ = side;
    s.weights_.assign(side * side, 1.0 / static_cast<double>(side * side));
    return s;
}

std::string SampledSpace::name() const { return kind_ == SpaceKind::interval ? "interval" : "torus"; }

std::array<double, 2> SampledSpace::point(std::size_t i) const {
    const double h = spacing();
    if (kind_ == SpaceKind::interval) return {(static_cast<double>(i) + 0.5) * h, 0.0};
    return {(static_cast<double>(i % side_) + 0.5) * h, (static_cast<double>(i / side_) + 0.5) * h};
}

double SampledSpace::total_mass() const {
    double m = 0.0;
    for (double w : weights_) m += w;
    return m;
}

namespace {

double torus_offset(std::size_t a, std::size_t b, std::size_t side) {
    std::size_t d = a > b ? a - b : b - a;
    return static_cast<double>(std::min(d, side - d));
}

double wrap(double d) {
    d = std::abs(d);
    d -= std::floor(d);
    return std::min(d, 1.0 - d);
}

}  // namespace

double SampledSpace::distance(std::size_t i, std::size_t j) const {
    const double h = spacing();
    if (kind_ == SpaceKind::interval) return static_cast<double>(i > j ? i - j : j - i) * h;
    double dx = torus_offset(i % side_, j % side_, side_), dy = torus_offset(i / side_, j / side_, side_);
    return std::sqrt(dx * dx + dy * dy) * h;
}

double SampledSpace::distance_to(const std::array<double, 2>& x, std::size_t j) const {
    auto y = point(j);
    if (kind_ == SpaceKind::interval) return std::abs(x[0] - y[0]);
    double dx = wrap(x[0] - y[0]), dy = wrap(x[1] - y[1]);
    return std::sqrt(dx * dx + dy * dy);
}

std::vector<double> SampledSpace::sample(const std::function<double(double)>& fn) const {
    std::vector<double> u(size());
    for (std::size_t i = 0; i < size(); ++i) u[i] = fn(point(i)[0]);
    return u;
}

std::vector<double> SampledSpace::sample(const PLFunction& f) const {
    return sample([&](double x) { return f(x); });
}

double ball_measure(const SampledSpace& space, const std::array<double, 2>& x, double r) {
    if (!(r > 0.0)) throw std::invalid_argument("ball radius must be positive");
    double m = 0.0;
    for (std::size_t j = 0; j < space.size(); ++j)
        if (space.distance_to(x, j) < r) m += space.weight(j);
    return m;
}

namespace {

double power(double d, double p) {
    if (p == 2.0) return d * d;
    if (p == 3.0) return d * d * d;
    if (p == 4.0) return (d * d) * (d * d);
    return std::pow(d, p);
}

constexpr std::size_t kTileRows = 1024;

// Row contributions sum_y m(y)|u(x)-u(y)|^p / (r^p m(B(x,r))) times m(x), one tile at a time.
template <class RowFn>
double tiled_sum(std::size_t rows, int jobs, const RowFn& row) {
    std::size_t tiles = (rows + kTileRows - 1) / kTileRows;
    std::vector<double> partial(tiles, 0.0);
    auto run_tile = [&](std::size_t t) {
        double s = 0.0;
        std::size_t end = std::min(rows, (t + 1) * kTileRows);
        for (std::size_t i = t * kTileRows; i < end; ++i) s += row(i);
        partial[t] = s;
    };
    int n = std::clamp(jobs, 1, static_cast<int>(std::max<std::size_t>(tiles, 1)));
    if (n == 1) {
        for (std::size_t t = 0; t < tiles; ++t) run_tile(t);
    } else {
        std::vector<std::thread> pool;
        for (int k = 0; k < n; ++k)
            pool.emplace_back([&, k] {
                for (std::size_t t = static_cast<std::size_t>(k); t < tiles; t += static_cast<std::size_t>(n))
                    run_tile(t);
            });
        for (auto& th : pool) th.join();
    }
    double total = 0.0;
    for (double s : partial) total += s;
    return total;
}

}  // namespace

double ks_energy(const SampledSpace& space, std::span<const double> u, const KSKernel& kernel, int jobs) {
    if (u.size() != space.size()) throw std::invalid_argument("value count does not match the space");
    if (!(kernel.r > 0.0)) throw std::invalid_argument("kernel scale must be positive");
    if (!(kernel.p >= 1.0) || !std::isfinite(kernel.p)) throw std::invalid_argument("kernel exponent must be >= 1");
    for (double v : u)
        if (!std::isfinite(v)) throw std::invalid_argument("values must be finite");
    const double p = kernel.p, r = kernel.r, rp = std::pow(r, p);
    const double h = space.spacing();
    const std::size_t side = space.side();
    auto in_u = [&](std::size_t i) {
        return !kernel.restrict_to || kernel.restrict_to->contains(space.point(i)[0]);
    };

    if (space.kind() == SpaceKind::interval) {
        const std::size_t n = space.size();
        // largest k with k h < r
        auto reach = static_cast<std::size_t>(std::ceil(r / h));
        while (reach > 0 && static_cast<double>(reach) * h >= r) --reach;
        return tiled_sum(n, jobs, [&](std::size_t i) {
            if (!in_u(i)) return 0.0;
            std::size_t lo = i >= reach ? i - reach : 0, hi = std::min(n - 1, i + reach);
            double inner = 0.0, ball = 0.0;
            for (std::size_t j = lo; j <= hi; ++j) {
                inner += space.weight(j) * power(std::abs(u[i] - u[j]), p);
                ball += space.weight(j);
            }
            return space.weight(i) * inner / (rp * ball);
        });
    }

    // torus: offsets (dx, dy) in index units with |offset| h < r
    std::vector<std::pair<long, long>> offsets;
    const long half = static_cast<long>(side / 2);
    for (long dy = -half; dy < static_cast<long>(side) - half; ++dy)
        for (long dx = -half; dx < static_cast<long>(side) - half; ++dx) {
            double a = torus_offset(0, static_cast<std::size_t>((dx + static_cast<long>(side)) % static_cast<long>(side)), side);
            double b = torus_offset(0, static_cast<std::size_t>((dy + static_cast<long>(side)) % static_cast<long>(side)), side);
            if (std::sqrt(a * a + b * b) * h < r) offsets.emplace_back(dx, dy);
        }
    const long s = static_cast<long>(side);
    return tiled_sum(space.size(), jobs, [&](std::size_t i) {
        if (!in_u(i)) return 0.0;
        long ix = static_cast<long>(i % side), iy = static_cast<long>(i / side);
        double inner = 0.0, ball = 0.0;
        for (auto [dx, dy] : offsets) {
            auto j = static_cast<std::size_t>(((iy + dy + s) % s) * s + (ix + dx + s) % s);
            inner += space.weight(j) * power(std::abs(u[i] - u[j]), p);
            ball += space.weight(j);
        }
        return space.weight(i) * inner / (rp * ball);
    });
}

std::vector<double> halving_scales(double r0, int count) {
    if (!(r0 > 0.0) || count < 1) throw std::invalid_argument("halving scales need r0 > 0 and count >= 1");
    std::vector<double> r;
    for (int k = 0; k < count; ++k) r.push_back(std::ldexp(r0, -k));
    return r;
}

std::vector<double> grid_scales(const SampledSpace& space, double r0, int count) {
    const double h = space.spacing();
    std::vector<double> r;
    for (double x : halving_scales(r0, count)) {
        double k = std::max(3.0, std::round(x / h));
        double v = (k + 0.5) * h;
        if (!r.empty() && !(v < r.back())) break;
        r.push_back(v);
    }
    return r;
}

namespace {

double ls_slope(std::span<const double> x, std::span<const double> y) {
    double n = static_cast<double>(x.size()), sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    double den = n * sxx - sx * sx;
    return den != 0.0 ? (n * sxy - sx * sy) / den : 0.0;
}

double richardson(double r0, double j0, double r1, double j1) { return (r0 * j1 - r1 * j0) / (r0 - r1); }

}  // namespace

KSScan ks_limit_scan(const SampledSpace& space, std::span<const double> u, double p,
                     const std::vector<double>& r_sequence, int jobs, std::optional<IntervalSet> restrict_to) {
    if (r_sequence.empty()) throw std::invalid_argument("empty r sequence");
    for (std::size_t i = 0; i < r_sequence.size(); ++i) {
        if (i > 0 && !(r_sequence[i] < r_sequence[i - 1]))
            throw std::invalid_argument("r sequence must be strictly decreasing");
        if (r_sequence[i] < 3.0 * space.spacing())
            throw std::invalid_argument("r below the resolution floor of 3 grid spacings");
    }
    KSScan scan;
    scan.p = p;
    scan.r = r_sequence;
    double sup = 0.0;
    for (double r : r_sequence) {
        double j = ks_energy(space, u, KSKernel{p, r, restrict_to}, jobs);
        scan.J.push_back(j);
        sup = std::max(sup, j);
        scan.sup_so_far.push_back(sup);
    }
    const std::size_t n = scan.J.size();
    const std::size_t window = std::min<std::size_t>(3, n);
    const std::size_t first = n - window;
    scan.liminf_estimate = *std::min_element(scan.J.begin() + static_cast<std::ptrdiff_t>(first), scan.J.end());
    if (n >= 2) {
        scan.extrapolated = richardson(scan.r[n - 2], scan.J[n - 2], scan.r[n - 1], scan.J[n - 1]);
        double lo = kInf, hi = -kInf;
        for (std::size_t a = first; a < n; ++a)
            for (std::size_t b = a + 1; b < n; ++b) {
                double e = richardson(scan.r[a], scan.J[a], scan.r[b], scan.J[b]);
                lo = std::min(lo, e);
                hi = std::max(hi, e);
            }
        scan.dispersion = hi - lo;
        scan.linear_coefficient = ls_slope(scan.r, scan.J);
        bool positive = std::all_of(scan.J.begin() + static_cast<std::ptrdiff_t>(first), scan.J.end(),
                                    [](double j) { return j > 0.0; });
        if (positive) {
            std::vector<double> lr, lj;
            for (std::size_t i = first; i < n; ++i) {
                lr.push_back(std::log(scan.r[i]));
                lj.push_back(std::log(scan.J[i]));
            }
            scan.loglog_slope = ls_slope(lr, lj);
        }
        // J ~ r^{-(p-1)} at a jump; a finite limit has slope near 0
        scan.divergent = scan.loglog_slope < -0.5 * (p - 1.0);
    } else {
        scan.extrapolated = scan.J.front();
    }
    return scan;
}

WeakMonotonicityReport check_weak_monotonicity(const SampledSpace& space, std::span<const double> u, double p,
                                               const std::vector<double>& r_range, int jobs) {
    auto scan = ks_limit_scan(space, u, p, r_range, jobs);
    WeakMonotonicityReport rep;
    rep.sup = scan.sup_so_far.back();
    rep.window_min = scan.liminf_estimate;
    if (rep.sup == 0.0) {
        rep.skipped = true;
        return rep;
    }
    rep.c_star = rep.window_min > 0.0 ? rep.sup / rep.window_min : kInf;
    rep.finite = std::isfinite(rep.c_star);
    return rep;
}

CanonicalComparison ks_vs_canonical(const SampledSpace& space, const PLFunction& u, double p,
                                    const std::vector<double>& r_sequence, int jobs) {
    if (space.kind() != SpaceKind::interval) throw std::invalid_argument("canonical comparison needs the interval grid");
    CanonicalComparison c;
    auto values = space.sample(u);
    c.scan = ks_limit_scan(space, values, p, r_sequence, jobs);
    c.ks_energy = (p + 1.0) * c.scan.extrapolated;
    PLIntervalForm form(p);
    c.form_energy = form.energy(u);
    c.measure_total = measure_of_closed_set(form, u, IntervalSet::whole());
    auto dev = [&](double ref) { return ref > 0.0 ? std::abs(c.ks_energy - ref) / ref : std::abs(c.ks_energy); };
    c.energy_deviation = dev(c.form_energy);
    c.measure_deviation = dev(c.measure_total);
    return c;
}

}  // namespace pel
