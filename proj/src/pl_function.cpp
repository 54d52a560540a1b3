#include "pel/pl_function.hpp"

#include <algorithm>
#include <cmath>

namespace pel {

namespace detail {

double Knots::eval(double t) const {
    if (t <= x.front()) return y.front();
    if (t >= x.back()) return y.back();
    auto it = std::upper_bound(x.begin(), x.end(), t);
    std::size_t i = static_cast<std::size_t>(it - x.begin()) - 1;
    if (t == x[i]) return y[i];
    double w = (t - x[i]) / (x[i + 1] - x[i]);
    return y[i] + w * (y[i + 1] - y[i]);
}

void Knots::normalize(std::size_t piece_cap) {
    if (x.size() != y.size()) throw std::invalid_argument("breakpoints and values differ in length");
    if (x.size() < 2) throw std::invalid_argument("need at least two breakpoints");
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!std::isfinite(x[i]) || !std::isfinite(y[i]))
            throw std::invalid_argument("non-finite breakpoint or value");
    }

    // dedup; the final knot is kept so the domain end is preserved
    std::vector<double> dx{x.front()}, dy{y.front()};
    for (std::size_t i = 1; i < x.size(); ++i) {
        double gap = x[i] - dx.back();
        if (gap < -kGeomEps) throw std::invalid_argument("breakpoints must be increasing");
        if (gap <= kGeomEps) {
            if (i + 1 == x.size() && dx.size() > 1) {
                dx.back() = x[i];
                dy.back() = y[i];
            }
            continue;
        }
        dx.push_back(x[i]);
        dy.push_back(y[i]);
    }
    if (dx.size() < 2) throw std::invalid_argument("degenerate domain");

    // drop interior knots joining (numerically) collinear pieces
    std::vector<double> px{dx[0]}, py{dy[0]};
    for (std::size_t i = 1; i < dx.size(); ++i) {
        if (px.size() >= 2) {
            std::size_t m = px.size() - 1;
            double s1 = (py[m] - py[m - 1]) / (px[m] - px[m - 1]);
            double s2 = (dy[i] - py[m]) / (dx[i] - px[m]);
            if (std::abs(s1 - s2) < kSlopeMergeEps) {
                px.pop_back();
                py.pop_back();
            }
        }
        px.push_back(dx[i]);
        py.push_back(dy[i]);
    }
    if (px.size() - 1 > piece_cap)
        throw PieceCapExceeded("piece count " + std::to_string(px.size() - 1) + " exceeds cap " +
                               std::to_string(piece_cap));
    x = std::move(px);
    y = std::move(py);
}

}  // namespace detail

namespace {

void check_cap(std::size_t n, std::size_t cap) {
    if (n > cap)
        throw PieceCapExceeded("piece count " + std::to_string(n) + " exceeds cap " + std::to_string(cap));
}

// Domain used when building an outer map over the range of a function.
std::pair<double, double> map_domain(const PLFunction& f) {
    double lo = f.min_value(), hi = f.max_value();
    if (hi - lo <= kGeomEps) return {lo - 1.0, hi + 1.0};
    return {lo, hi};
}

}  // namespace

// PLFunction -----------------------------------------------------------------

PLFunction::PLFunction(std::vector<double> breakpoints, std::vector<double> values, std::size_t piece_cap) {
    knots_.x = std::move(breakpoints);
    knots_.y = std::move(values);
    if (knots_.x.size() < 2) throw std::invalid_argument("need at least two breakpoints");
    if (std::abs(knots_.x.front()) > kGeomEps || std::abs(knots_.x.back() - 1.0) > kGeomEps)
        throw std::invalid_argument("breakpoints must span [0,1]");
    knots_.x.front() = 0.0;
    knots_.x.back() = 1.0;
    knots_.normalize(piece_cap);
}

PLFunction PLFunction::constant(double c) { return PLFunction({0.0, 1.0}, {c, c}); }

PLFunction PLFunction::linear(double slope, double intercept) {
    return PLFunction({0.0, 1.0}, {intercept, intercept + slope});
}

PLFunction PLFunction::tent(double peak, double height) {
    return PLFunction({0.0, peak, 1.0}, {0.0, height, 0.0});
}

double PLFunction::min_value() const { return *std::min_element(knots_.y.begin(), knots_.y.end()); }
double PLFunction::max_value() const { return *std::max_element(knots_.y.begin(), knots_.y.end()); }

double PLFunction::variation() const {
    double v = 0.0;
    for (std::size_t i = 0; i + 1 < knots_.y.size(); ++i) v += std::abs(knots_.y[i + 1] - knots_.y[i]);
    return v;
}

// PLMap ------------------------------------------------------------------------

PLMap::PLMap(std::vector<double> knots, std::vector<double> values, std::size_t piece_cap) {
    knots_.x = std::move(knots);
    knots_.y = std::move(values);
    knots_.normalize(piece_cap);
}

PLMap PLMap::identity(double lo, double hi) { return PLMap({lo, hi}, {lo, hi}); }

PLMap PLMap::scale(double c, double lo, double hi) { return PLMap({lo, hi}, {c * lo, c * hi}); }

PLMap PLMap::absolute(double lo, double hi) {
    std::vector<double> k{lo};
    if (lo < 0.0 && hi > 0.0) k.push_back(0.0);
    k.push_back(hi);
    std::vector<double> v;
    for (double t : k) v.push_back(std::abs(t));
    return PLMap(std::move(k), std::move(v));
}

PLMap PLMap::cut(double a, double b, double lo, double hi) {
    if (!(a < b)) throw std::invalid_argument("cut requires a < b");
    double base = std::clamp(0.0, a, b);
    std::vector<double> k{lo};
    if (a > lo && a < hi) k.push_back(a);
    if (b > lo && b < hi) k.push_back(b);
    k.push_back(hi);
    std::vector<double> v;
    for (double t : k) v.push_back(std::clamp(t, a, b) - base);
    return PLMap(std::move(k), std::move(v));
}

PLMap PLMap::triangle(int n, double lo, double hi) {
    if (n < 1 || n > kFoldCap) throw std::invalid_argument("fold level out of range");
    double h = std::ldexp(1.0, -n);
    double k0 = std::floor(lo / h) + 1.0, k1 = std::ceil(hi / h) - 1.0;
    check_cap(static_cast<std::size_t>(std::max(0.0, k1 - k0 + 1.0)) + 1, kPieceCap);
    std::vector<double> k{lo}, v{triangle_wave(lo, n)};
    for (double j = k0; j <= k1; j += 1.0) {
        k.push_back(j * h);
        v.push_back(std::fmod(std::abs(j), 2.0) == 1.0 ? h : 0.0);
    }
    k.push_back(hi);
    v.push_back(triangle_wave(hi, n));
    return PLMap(std::move(k), std::move(v));
}

PLMap PLMap::shifted_cut(double a, int n, double lo, double hi) {
    double h = std::ldexp(1.0, -n);
    auto s = [&](double t) { return std::clamp(a + h - t, 0.0, h); };
    std::vector<double> k{lo};
    if (a > lo && a < hi) k.push_back(a);
    if (a + h > lo && a + h < hi) k.push_back(a + h);
    k.push_back(hi);
    std::vector<double> v;
    for (double t : k) v.push_back(s(t));
    return PLMap(std::move(k), std::move(v));
}

double PLMap::derivative(double t) const {
    const auto& x = knots_.x;
    if (t <= x.front()) return slope(0);
    if (t >= x.back()) return slope(pieces() - 1);
    auto it = std::upper_bound(x.begin(), x.end(), t);
    return slope(static_cast<std::size_t>(it - x.begin()) - 1);
}

double PLMap::lipschitz_on(double a, double b) const {
    double lip = 0.0;
    for (std::size_t i = 0; i < pieces(); ++i) {
        if (knots_.x[i + 1] < a || knots_.x[i] > b) continue;
        lip = std::max(lip, std::abs(slope(i)));
    }
    return lip;
}

// IntervalSet ------------------------------------------------------------------

bool Interval::contains(double x) const {
    if (x < lo || x > hi) return false;
    if (x == lo && !lo_closed) return false;
    if (x == hi && !hi_closed) return false;
    return true;
}

IntervalSet::IntervalSet(std::vector<Interval> components) {
    for (auto& c : components) {
        if (!(c.lo <= c.hi)) throw std::invalid_argument("interval with lo > hi");
        if (c.lo < -kGeomEps || c.hi > 1.0 + kGeomEps) throw std::invalid_argument("interval outside [0,1]");
        c.lo = std::max(c.lo, 0.0);
        c.hi = std::min(c.hi, 1.0);
    }
    std::erase_if(components, [](const Interval& c) { return c.lo == c.hi && !(c.lo_closed && c.hi_closed); });
    std::sort(components.begin(), components.end(),
              [](const Interval& a, const Interval& b) { return a.lo < b.lo || (a.lo == b.lo && a.hi < b.hi); });
    for (const auto& c : components) {
        if (!components_.empty()) {
            auto& last = components_.back();
            bool joins = c.lo < last.hi || (c.lo == last.hi && (c.lo_closed || last.hi_closed));
            if (joins) {
                if (c.hi > last.hi) {
                    last.hi = c.hi;
                    last.hi_closed = c.hi_closed;
                } else if (c.hi == last.hi) {
                    last.hi_closed = last.hi_closed || c.hi_closed;
                }
                continue;
            }
        }
        components_.push_back(c);
    }
}

bool IntervalSet::contains(double x) const {
    return std::any_of(components_.begin(), components_.end(), [x](const Interval& c) { return c.contains(x); });
}

double IntervalSet::length() const {
    double l = 0.0;
    for (const auto& c : components_) l += c.length();
    return l;
}

bool IntervalSet::subset_of(const IntervalSet& other) const {
    for (const auto& c : components_) {
        bool inside = std::any_of(other.components_.begin(), other.components_.end(), [&](const Interval& o) {
            return c.lo >= o.lo - kGeomEps && c.hi <= o.hi + kGeomEps;
        });
        if (!inside) return false;
    }
    return true;
}

IntervalSet IntervalSet::closure() const {
    std::vector<Interval> c(components_.begin(), components_.end());
    for (auto& i : c) i.lo_closed = i.hi_closed = true;
    return IntervalSet(std::move(c));
}

IntervalSet IntervalSet::unite(const IntervalSet& other) const {
    std::vector<Interval> c(components_.begin(), components_.end());
    c.insert(c.end(), other.components_.begin(), other.components_.end());
    return IntervalSet(std::move(c));
}

double IntervalSet::overlap(double lo, double hi) const {
    double total = 0.0;
    for (const auto& c : components_) total += std::max(0.0, std::min(hi, c.hi) - std::max(lo, c.lo));
    return total;
}

// Algebra ------------------------------------------------------------------------

std::vector<double> merge_breakpoints(std::span<const double> a, std::span<const double> b) {
    std::vector<double> all;
    all.reserve(a.size() + b.size());
    std::merge(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(all));
    std::vector<double> out;
    out.reserve(all.size());
    for (double t : all) {
        if (out.empty() || t - out.back() > kGeomEps) out.push_back(t);
    }
    return out;
}

PLFunction affine_combine(double a, const PLFunction& f, double b, const PLFunction& g, std::size_t piece_cap) {
    auto xs = merge_breakpoints(f.breakpoints(), g.breakpoints());
    check_cap(xs.size() - 1, piece_cap);
    std::vector<double> ys(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) ys[i] = a * f(xs[i]) + b * g(xs[i]);
    return PLFunction(std::move(xs), std::move(ys), piece_cap);
}

PLFunction operator+(const PLFunction& f, const PLFunction& g) { return affine_combine(1.0, f, 1.0, g); }
PLFunction operator-(const PLFunction& f, const PLFunction& g) { return affine_combine(1.0, f, -1.0, g); }

PLFunction operator*(double a, const PLFunction& f) {
    std::vector<double> ys(f.values().begin(), f.values().end());
    for (double& y : ys) y *= a;
    return PLFunction({f.breakpoints().begin(), f.breakpoints().end()}, std::move(ys));
}

PLFunction operator+(const PLFunction& f, double c) {
    std::vector<double> ys(f.values().begin(), f.values().end());
    for (double& y : ys) y += c;
    return PLFunction({f.breakpoints().begin(), f.breakpoints().end()}, std::move(ys));
}

PLFunction lattice(const PLFunction& f, const PLFunction& g, Lattice which, std::size_t piece_cap) {
    auto xs = merge_breakpoints(f.breakpoints(), g.breakpoints());
    std::vector<double> px, py;
    px.reserve(xs.size() * 2);
    py.reserve(xs.size() * 2);
    auto pick = [which](double u, double v) { return which == Lattice::min ? std::min(u, v) : std::max(u, v); };
    for (std::size_t i = 0; i < xs.size(); ++i) {
        double fi = f(xs[i]), gi = g(xs[i]);
        if (i > 0) {
            double x0 = xs[i - 1];
            double d0 = f(x0) - g(x0), d1 = fi - gi;
            if ((d0 > 0.0 && d1 < 0.0) || (d0 < 0.0 && d1 > 0.0)) {
                double xc = x0 + (xs[i] - x0) * (d0 / (d0 - d1));
                if (xc > x0 && xc < xs[i]) {
                    px.push_back(xc);
                    py.push_back(f(xc));
                }
            }
        }
        px.push_back(xs[i]);
        py.push_back(pick(fi, gi));
    }
    check_cap(px.size() - 1, piece_cap);
    return PLFunction(std::move(px), std::move(py), piece_cap);
}

PLFunction compose(const PLMap& phi, const PLFunction& f, std::size_t piece_cap) {
    double tol = kGeomEps * std::max(1.0, std::max(std::abs(phi.lo()), std::abs(phi.hi())));
    if (f.min_value() < phi.lo() - tol || f.max_value() > phi.hi() + tol)
        throw DomainMismatch("map domain does not cover the range of the function");
    auto k = phi.knots();
    auto xs = f.breakpoints();
    auto ys = f.values();

    // count first so a runaway composition fails before allocating
    std::size_t count = xs.size();
    for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
        double lo = std::min(ys[i], ys[i + 1]), hi = std::max(ys[i], ys[i + 1]);
        auto b = std::upper_bound(k.begin(), k.end(), lo);
        auto e = std::lower_bound(k.begin(), k.end(), hi);
        if (e > b) count += static_cast<std::size_t>(e - b);
    }
    check_cap(count - 1, piece_cap);

    std::vector<double> px, py;
    px.reserve(count);
    py.reserve(count);
    px.push_back(xs[0]);
    py.push_back(phi(ys[0]));
    for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
        double y0 = ys[i], y1 = ys[i + 1];
        double lo = std::min(y0, y1), hi = std::max(y0, y1);
        auto b = static_cast<std::size_t>(std::upper_bound(k.begin(), k.end(), lo) - k.begin());
        auto e = static_cast<std::size_t>(std::lower_bound(k.begin(), k.end(), hi) - k.begin());
        if (e > b) {
            double dx = xs[i + 1] - xs[i];
            auto emit = [&](std::size_t j) {
                px.push_back(xs[i] + dx * ((k[j] - y0) / (y1 - y0)));
                py.push_back(phi.values()[j]);
            };
            if (y1 > y0) {
                for (std::size_t j = b; j < e; ++j) emit(j);
            } else {
                for (std::size_t j = e; j > b; --j) emit(j - 1);
            }
        }
        px.push_back(xs[i + 1]);
        py.push_back(phi(y1));
    }
    return PLFunction(std::move(px), std::move(py), piece_cap);
}

PLFunction cut(const PLFunction& f, double a, double b, std::size_t piece_cap) {
    if (!(a < b)) throw std::invalid_argument("cut requires a < b");
    auto [lo, hi] = map_domain(f);
    return compose(PLMap::cut(a, b, lo, hi), f, piece_cap);
}

double triangle_wave(double t, int n) {
    double period = std::ldexp(1.0, -(n - 1));
    return std::abs(t - period * std::nearbyint(t / period));
}

PLFunction triangle_fold(const PLFunction& f, int n, std::size_t piece_cap) {
    if (n < 1 || n > kFoldCap) throw std::invalid_argument("fold level out of range");
    double h = std::ldexp(1.0, -n);
    auto xs = f.breakpoints();
    auto ys = f.values();

    double count = static_cast<double>(xs.size());
    for (std::size_t i = 0; i + 1 < xs.size(); ++i) count += std::abs(ys[i + 1] - ys[i]) / h + 1.0;
    if (count - 1.0 > static_cast<double>(piece_cap))
        throw PieceCapExceeded("triangle fold at level " + std::to_string(n) + " exceeds piece cap");

    std::vector<double> px, py;
    px.reserve(static_cast<std::size_t>(count));
    py.reserve(static_cast<std::size_t>(count));
    px.push_back(xs[0]);
    py.push_back(triangle_wave(ys[0], n));
    for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
        double y0 = ys[i], y1 = ys[i + 1];
        double dx = xs[i + 1] - xs[i];
        if (y1 != y0) {
            double lo = std::min(y0, y1), hi = std::max(y0, y1);
            double k0 = std::floor(lo / h) + 1.0, k1 = std::ceil(hi / h) - 1.0;
            auto emit = [&](double k) {
                px.push_back(xs[i] + dx * ((k * h - y0) / (y1 - y0)));
                py.push_back(std::fmod(std::abs(k), 2.0) == 1.0 ? h : 0.0);
            };
            if (y1 > y0) {
                for (double k = k0; k <= k1; k += 1.0) emit(k);
            } else {
                for (double k = k1; k >= k0; k -= 1.0) emit(k);
            }
        }
        px.push_back(xs[i + 1]);
        py.push_back(triangle_wave(y1, n));
    }
    return PLFunction(std::move(px), std::move(py), piece_cap);
}

PLFunction shifted_cut(const PLFunction& g, double a, int n, std::size_t piece_cap) {
    auto [lo, hi] = map_domain(g);
    return compose(PLMap::shifted_cut(a, n, lo, hi), g, piece_cap);
}

PLFunction abs(const PLFunction& f) {
    auto [lo, hi] = map_domain(f);
    return compose(PLMap::absolute(lo, hi), f);
}

PLApproximation pl_product(const PLFunction& f, const PLFunction& g, int refine, std::span<const double> extra_knots,
                           std::size_t piece_cap) {
    if (refine < 1) throw std::invalid_argument("refine must be positive");
    auto xs = merge_breakpoints(merge_breakpoints(f.breakpoints(), g.breakpoints()), extra_knots);
    check_cap((xs.size() - 1) * static_cast<std::size_t>(refine), piece_cap);
    std::vector<double> px, py;
    double err = 0.0;
    for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
        double x0 = xs[i], x1 = xs[i + 1];
        double sf = (f(x1) - f(x0)) / (x1 - x0), sg = (g(x1) - g(x0)) / (x1 - x0);
        double d = (x1 - x0) / refine;
        err = std::max(err, std::abs(sf * sg) * d * d / 4.0);
        for (int j = 0; j < refine; ++j) {
            double x = x0 + d * j;
            px.push_back(x);
            py.push_back(f(x) * g(x));
        }
    }
    px.push_back(1.0);
    py.push_back(f(1.0) * g(1.0));
    return {PLFunction(std::move(px), std::move(py), piece_cap), err};
}

PLApproximation pl_abs_power(const PLFunction& f, double q, int refine, std::span<const double> extra_knots,
                             std::size_t piece_cap) {
    if (refine < 1) throw std::invalid_argument("refine must be positive");
    // zero crossings become knots: |f|^q is only C^1 there
    auto base = abs(f);
    auto xs = merge_breakpoints(base.breakpoints(), extra_knots);
    check_cap((xs.size() - 1) * static_cast<std::size_t>(refine), piece_cap);
    auto h = [&](double x) { return std::pow(base(x), q); };
    std::vector<double> px, py;
    double err = 0.0;
    for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
        double d = (xs[i + 1] - xs[i]) / refine;
        for (int j = 0; j < refine; ++j) {
            double x = xs[i] + d * j;
            double mid = h(x + 0.5 * d) - 0.5 * (h(x) + h(x + d));
            err = std::max(err, std::abs(mid));
            px.push_back(x);
            py.push_back(h(x));
        }
    }
    px.push_back(1.0);
    py.push_back(h(1.0));
    return {PLFunction(std::move(px), std::move(py), piece_cap), err};
}

IntervalSet sublevel_set(const PLFunction& g, double a) {
    auto xs = g.breakpoints();
    auto ys = g.values();
    std::vector<Interval> comps;
    auto add = [&](double lo, double hi) {
        if (!comps.empty() && lo <= comps.back().hi) {
            comps.back().hi = std::max(comps.back().hi, hi);
        } else {
            comps.push_back({lo, hi, true, true});
        }
    };
    for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
        double x0 = xs[i], x1 = xs[i + 1], y0 = ys[i], y1 = ys[i + 1];
        bool in0 = y0 <= a, in1 = y1 <= a;
        if (in0 && in1) {
            add(x0, x1);
        } else if (in0 || in1) {
            double xc = x0 + (x1 - x0) * ((a - y0) / (y1 - y0));
            if (in0) add(x0, xc);
            else add(xc, x1);
        }
    }
    return IntervalSet(std::move(comps));
}

IntervalSet level_set(const PLFunction& g, double a) {
    auto xs = g.breakpoints();
    auto ys = g.values();
    std::vector<Interval> comps;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (ys[i] == a) comps.push_back({xs[i], xs[i], true, true});
        if (i + 1 == xs.size()) break;
        double y0 = ys[i], y1 = ys[i + 1];
        if (y0 == a && y1 == a) {
            comps.push_back({xs[i], xs[i + 1], true, true});
        } else if ((y0 < a && y1 > a) || (y0 > a && y1 < a)) {
            double xc = xs[i] + (xs[i + 1] - xs[i]) * ((a - y0) / (y1 - y0));
            comps.push_back({xc, xc, true, true});
        }
    }
    return IntervalSet(std::move(comps));
}

PLFunction distance_function(const IntervalSet& a, double slope, double offset) {
    if (a.empty()) throw std::invalid_argument("distance to an empty set");
    auto comps = a.components();
    std::vector<double> k{0.0, 1.0};
    for (std::size_t i = 0; i < comps.size(); ++i) {
        k.push_back(comps[i].lo);
        k.push_back(comps[i].hi);
        if (i + 1 < comps.size()) k.push_back(0.5 * (comps[i].hi + comps[i + 1].lo));
    }
    std::sort(k.begin(), k.end());
    std::vector<double> xs;
    for (double t : k) {
        if (xs.empty() || t - xs.back() > kGeomEps) xs.push_back(t);
    }
    xs.back() = 1.0;
    std::vector<double> ys;
    for (double x : xs) {
        double d = kInf;
        for (const auto& c : comps) d = std::min(d, x < c.lo ? c.lo - x : (x > c.hi ? x - c.hi : 0.0));
        ys.push_back(slope * d + offset);
    }
    return PLFunction(std::move(xs), std::move(ys));
}

}  // namespace pel
