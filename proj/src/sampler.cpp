#include "pel/sampler.hpp"

#include <algorithm>
#include <cmath>

namespace pel {

std::vector<double> Sampler::sorted_points(int count, double min_gap) {
    // rejection keeps the gap condition without biasing towards the ends
    for (int attempt = 0; attempt < 1000; ++attempt) {
        std::vector<double> pts{0.0, 1.0};
        for (int i = 0; i < count; ++i) pts.push_back(uniform());
        std::sort(pts.begin(), pts.end());
        bool ok = true;
        for (std::size_t i = 0; i + 1 < pts.size(); ++i) ok = ok && pts[i + 1] - pts[i] >= min_gap;
        if (ok) return pts;
    }
    std::vector<double> pts;
    for (int i = 0; i <= count + 1; ++i) pts.push_back(static_cast<double>(i) / (count + 1));
    return pts;
}

PLFunction Sampler::pl_function(int max_breakpoints, double lo, double hi, double min_gap) {
    int interior = integer(0, std::max(0, max_breakpoints - 2));
    auto xs = sorted_points(interior, min_gap);
    std::vector<double> ys;
    for (std::size_t i = 0; i < xs.size(); ++i) ys.push_back(uniform(lo, hi));
    return PLFunction(std::move(xs), std::move(ys));
}

PLFunction Sampler::sloped_pl_function(double min_slope, int max_breakpoints) {
    int interior = integer(0, std::max(0, max_breakpoints - 2));
    auto xs = sorted_points(interior, 0.02);
    std::vector<double> ys{uniform(-1.0, 1.0)};
    for (std::size_t i = 1; i < xs.size(); ++i) {
        double mag = uniform(min_slope, 4.0);
        double sign = uniform() < 0.5 ? -1.0 : 1.0;
        ys.push_back(ys.back() + sign * mag * (xs[i] - xs[i - 1]));
    }
    return PLFunction(std::move(xs), std::move(ys));
}

PLMap Sampler::lipschitz_map(double lo, double hi, double lip, int pieces) {
    std::vector<double> k{lo};
    for (int i = 1; i < pieces; ++i) k.push_back(lo + (hi - lo) * (i + 0.25 * uniform()) / pieces);
    k.push_back(hi);
    std::vector<double> slopes;
    for (int i = 0; i < pieces; ++i) slopes.push_back(uniform(-lip, lip));
    std::vector<double> v(k.size(), 0.0);
    for (std::size_t i = 1; i < k.size(); ++i) v[i] = v[i - 1] + slopes[i - 1] * (k[i] - k[i - 1]);
    if (lo <= 0.0 && hi >= 0.0) {
        PLMap raw(k, v);
        double shift = raw(0.0);
        for (double& y : v) y -= shift;
    }
    return PLMap(std::move(k), std::move(v));
}

std::vector<double> Sampler::vector(std::size_t n, double lo, double hi) {
    std::vector<double> v(n);
    for (double& x : v) x = uniform(lo, hi);
    return v;
}

IntervalSet Sampler::interval_set(int max_components) {
    int count = integer(1, max_components);
    std::vector<double> ends;
    for (int i = 0; i < 2 * count; ++i) ends.push_back(uniform());
    std::sort(ends.begin(), ends.end());
    std::vector<Interval> comps;
    for (int i = 0; i < count; ++i) comps.push_back({ends[2 * i], ends[2 * i + 1], true, true});
    return IntervalSet(std::move(comps));
}

Sampler Sampler::child(std::uint64_t index) const {
    // splitmix64 of (seed, index)
    std::uint64_t z = seed_ + 0x9E3779B97F4A7C15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return Sampler(z ^ (z >> 31));
}

}  // namespace pel
