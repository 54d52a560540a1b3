#include "pel/measure.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pel {

void FoldSchedule::validate() const {
    if (n_min < 1 || n_min > n_max || n_max > kFoldCap)
        throw std::invalid_argument("fold schedule needs 1 <= n_min <= n_max <= " + std::to_string(kFoldCap));
    if (!(rel_tol > 0.0)) throw std::invalid_argument("fold schedule rel_tol must be positive");
    if (stall_count < 1) throw std::invalid_argument("fold schedule stall_count must be >= 1");
}

// EnergyMeasure --------------------------------------------------------------------

double EnergyMeasure::density_at(double x) const {
    if (is_graph()) return 0.0;
    auto it = std::upper_bound(partition.begin(), partition.end(), x);
    auto i = std::clamp<std::ptrdiff_t>(it - partition.begin() - 1, 0, static_cast<std::ptrdiff_t>(density.size()) - 1);
    return density[static_cast<std::size_t>(i)];
}

double EnergyMeasure::evaluate(double lo, double hi) const {
    if (is_graph()) throw std::invalid_argument("interval evaluation of a graph measure");
    double m = 0.0;
    for (std::size_t i = 0; i < density.size(); ++i) {
        double len = std::min(hi, partition[i + 1]) - std::max(lo, partition[i]);
        if (len > 0.0) m += density[i] * len;
    }
    return m;
}

double EnergyMeasure::evaluate(const IntervalSet& a) const {
    double m = 0.0;
    for (const auto& c : a.components()) m += evaluate(c.lo, c.hi);
    return m;
}

// Cell functions ---------------------------------------------------------------------

PLFunction cell_function(const PLFunction& f, const PLFunction& g, double a, int n) {
    if (n < 1) throw std::invalid_argument("fold level must be >= 1");
    return pl_min(triangle_fold(f, n), shifted_cut(g, a, n));
}

namespace {

constexpr double kFoldEnumerationCap = 4'000'000;

// Lebesgue measure of {tau in [0, t] : T(tau) < c} extended as an odd-free
// antiderivative, with T the triangle wave of half-period h.
double below_count(double t, double h, double c) {
    double period = 2.0 * h;
    double k = std::floor(t / period);
    double r = t - k * period;
    return k * 2.0 * c + std::min(r, c) + std::max(0.0, r - (period - c));
}

// Energy of min(T o f, m) on [y0, y1] where f and the cap m are affine.
double transition_energy(double p, double w, double y0, double y1, double u0, double u1, double m0, double m1,
                         bool cap_constant, double h) {
    double len = y1 - y0;
    if (len <= 0.0 || w == 0.0) return 0.0;
    double s = (u1 - u0) / len;
    if (cap_constant) {
        if (s == 0.0) return 0.0;
        double c = std::clamp(0.5 * (m0 + m1), 0.0, h);
        double below = std::abs(below_count(u1, h, c) - below_count(u0, h, c));
        return w * std::pow(std::abs(s), p - 1.0) * below;
    }
    double delta = (m1 - m0) / len;
    double abs_s = std::pow(std::abs(s), p), abs_d = std::pow(std::abs(delta), p);

    double lo_t = std::min(u0, u1), hi_t = std::max(u0, u1);
    double k_first = std::floor(lo_t / h) + 1.0;
    double k_last = std::ceil(hi_t / h) - 1.0;
    if (k_last - k_first > kFoldEnumerationCap)
        throw PieceCapExceeded("fold enumeration in a transition band exceeds the cap");

    auto tri = [h](double t) {
        double k = std::round(t / (2.0 * h));
        return std::abs(t - 2.0 * h * k);
    };
    auto piece = [&](double z0, double z1, double t0, double t1) {
        double l = z1 - z0;
        if (l <= 0.0) return 0.0;
        double c0 = m0 + delta * (z0 - y0), c1 = m0 + delta * (z1 - y0);
        double d0 = t0 - c0, d1 = t1 - c1;  // T - m
        double neg;
        if (d0 <= 0.0 && d1 <= 0.0) {
            neg = l;
        } else if (d0 >= 0.0 && d1 >= 0.0) {
            neg = 0.0;
        } else {
            double z = l * d0 / (d0 - d1);
            neg = d0 < 0.0 ? z : l - z;
        }
        return w * (abs_s * neg + abs_d * (l - neg));
    };

    double e = 0.0;
    if (s == 0.0 || k_first > k_last) {
        return piece(y0, y1, tri(u0), tri(u1));
    }
    // walk from y0 towards y1 through the fold points of f
    double z_prev = y0, t_prev = tri(u0);
    auto fold_value = [h](double k) { return std::fmod(std::abs(k), 2.0) == 1.0 ? h : 0.0; };
    if (s > 0.0) {
        for (double k = k_first; k <= k_last; k += 1.0) {
            double z = y0 + (k * h - u0) / s;
            double tv = fold_value(k);
            e += piece(z_prev, z, t_prev, tv);
            z_prev = z;
            t_prev = tv;
        }
    } else {
        for (double k = k_last; k >= k_first; k -= 1.0) {
            double z = y0 + (k * h - u0) / s;
            double tv = fold_value(k);
            e += piece(z_prev, z, t_prev, tv);
            z_prev = z;
            t_prev = tv;
        }
    }
    e += piece(z_prev, y1, t_prev, tri(u1));
    return e;
}

}  // namespace

namespace {

// Merged cells of the weight partition, f and every cap, with values cached at
// the cell ends so that each fold level is a single pass without lookups.
struct CellPlan {
    double p = 2.0;
    std::vector<double> xs, w, fv, full;  // full: w |f'|^p * length
    std::vector<std::vector<double>> gv;
    std::vector<double> a;
};

CellPlan make_plan(const PLIntervalForm& form, const PLFunction& f, const std::vector<Cap>& caps) {
    CellPlan plan;
    plan.p = form.p();
    std::vector<double> xs(form.weight_breaks().begin(), form.weight_breaks().end());
    xs = merge_breakpoints(xs, f.breakpoints());
    for (const auto& c : caps) xs = merge_breakpoints(xs, c.g.breakpoints());
    plan.xs = xs;
    for (double x : xs) plan.fv.push_back(f(x));
    for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
        double w = form.weight_at(0.5 * (xs[i] + xs[i + 1]));
        double len = xs[i + 1] - xs[i];
        double s = (plan.fv[i + 1] - plan.fv[i]) / len;
        plan.w.push_back(w);
        plan.full.push_back(s == 0.0 || w == 0.0 ? 0.0 : w * std::pow(std::abs(s), plan.p) * len);
    }
    for (const auto& c : caps) {
        std::vector<double> g;
        for (double x : xs) g.push_back(c.g(x));
        plan.gv.push_back(std::move(g));
        plan.a.push_back(c.a);
    }
    return plan;
}

double plan_energy(const CellPlan& plan, int n) {
    if (n < 1 || n > kFoldCap) throw std::invalid_argument("fold level out of range");
    const double h = std::ldexp(1.0, -n);
    const double p = plan.p;
    const std::size_t m = plan.a.size();
    std::vector<double> cut_points;
    std::vector<double> l0(m), l1(m);
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < plan.xs.size(); ++i) {
        const double x0 = plan.xs[i], x1 = plan.xs[i + 1];
        const double w = plan.w[i];
        if (w == 0.0) continue;
        const double f0 = plan.fv[i], f1 = plan.fv[i + 1];
        // cap lines L_j = a_j + h - g_j, clamped to [0, h]
        bool all_saturated = true, some_zero = false;
        for (std::size_t j = 0; j < m; ++j) {
            l0[j] = plan.a[j] + h - plan.gv[j][i];
            l1[j] = plan.a[j] + h - plan.gv[j][i + 1];
            if (l0[j] < h || l1[j] < h) all_saturated = false;
            if (l0[j] <= 0.0 && l1[j] <= 0.0) some_zero = true;
        }
        if (some_zero) continue;
        if (all_saturated) {
            total += plan.full[i];
            continue;
        }
        cut_points.assign({x0, x1});
        auto crossing = [&](double a0, double a1, double level) {
            if ((a0 - level) * (a1 - level) < 0.0) cut_points.push_back(x0 + (x1 - x0) * (level - a0) / (a1 - a0));
        };
        for (std::size_t j = 0; j < m; ++j) {
            crossing(l0[j], l1[j], 0.0);
            crossing(l0[j], l1[j], h);
            for (std::size_t k = j + 1; k < m; ++k) crossing(l0[j] - l0[k], l1[j] - l1[k], 0.0);
        }
        std::sort(cut_points.begin(), cut_points.end());
        for (std::size_t c = 0; c + 1 < cut_points.size(); ++c) {
            const double y0 = cut_points[c], y1 = cut_points[c + 1];
            if (y1 <= y0) continue;
            const double r0 = (y0 - x0) / (x1 - x0), r1 = (y1 - x0) / (x1 - x0);
            const double ym = 0.5 * (r0 + r1);
            double m0 = h, m1 = h;
            bool zero = false, saturated = true, constant = true;
            for (std::size_t j = 0; j < m; ++j) {
                double lm = l0[j] + (l1[j] - l0[j]) * ym;
                if (lm <= 0.0) zero = true;
                if (lm >= h) continue;
                saturated = false;
                double a0 = l0[j] + (l1[j] - l0[j]) * r0, a1 = l0[j] + (l1[j] - l0[j]) * r1;
                m0 = std::min(m0, std::clamp(a0, 0.0, h));
                m1 = std::min(m1, std::clamp(a1, 0.0, h));
                if (l0[j] != l1[j]) constant = false;
            }
            if (zero) continue;
            const double u0 = f0 + (f1 - f0) * r0, u1 = f0 + (f1 - f0) * r1;
            if (saturated) {
                total += plan.full[i] * (y1 - y0) / (x1 - x0);
                continue;
            }
            total += transition_energy(p, w, y0, y1, u0, u1, m0, m1, constant, h);
        }
    }
    return total;
}

double plan_excess_bound(const CellPlan& plan, int n) {
    if (n < 1 || n > kFoldCap) throw std::invalid_argument("fold level out of range");
    const double h = std::ldexp(1.0, -n);
    double bound = 0.0;
    for (std::size_t i = 0; i + 1 < plan.xs.size(); ++i) {
        const double len = plan.xs[i + 1] - plan.xs[i];
        const double w = plan.w[i];
        if (w == 0.0) continue;
        double slope = std::abs(plan.fv[i + 1] - plan.fv[i]) / len;
        double band = 0.0;
        bool some_zero = false;
        for (std::size_t j = 0; j < plan.a.size(); ++j) {
            double l0 = plan.a[j] + h - plan.gv[j][i], l1 = plan.a[j] + h - plan.gv[j][i + 1];
            if (l0 <= 0.0 && l1 <= 0.0) some_zero = true;
            slope = std::max(slope, std::abs(l1 - l0) / len);
            // length of {0 < L < h} for the affine L on the cell
            if (l0 == l1) {
                if (l0 > 0.0 && l0 < h) band += len;
            } else {
                double r0 = (0.0 - l0) / (l1 - l0), r1 = (h - l0) / (l1 - l0);
                if (r0 > r1) std::swap(r0, r1);
                band += len * std::max(0.0, std::min(r1, 1.0) - std::max(r0, 0.0));
            }
        }
        if (some_zero) continue;
        bound += w * std::pow(slope, plan.p) * std::min(band, len);
    }
    return bound;
}

}  // namespace

double cell_energy(const PLIntervalForm& form, const PLFunction& f, const std::vector<Cap>& caps, int n) {
    return plan_energy(make_plan(form, f, caps), n);
}

double band_excess_bound(const PLIntervalForm& form, const PLFunction& f, const std::vector<Cap>& caps, int n) {
    return plan_excess_bound(make_plan(form, f, caps), n);
}

ConvergenceTrace limit_energy(const PLIntervalForm& form, const PLFunction& f, const std::vector<Cap>& caps,
                              const FoldSchedule& sched) {
    sched.validate();
    ConvergenceTrace tr;
    const double ef = form.energy(f);
    if (ef == 0.0) {
        tr.n.push_back(sched.n_min);
        tr.energy.push_back(0.0);
        tr.inf_so_far.push_back(0.0);
        tr.excess_bound.push_back(0.0);
        tr.converged = true;
        return tr;
    }
    const CellPlan plan = make_plan(form, f, caps);
    double best = kInf;
    int stable = 0;
    for (int n = sched.n_min; n <= sched.n_max; ++n) {
        double e = plan_energy(plan, n);
        double excess = plan_excess_bound(plan, n);
        tr.excess_bound.push_back(excess);
        if (!tr.energy.empty() && std::abs(e - tr.energy.back()) <= sched.rel_tol * ef) {
            ++stable;
        } else {
            stable = 0;
        }
        best = std::min(best, e);
        tr.n.push_back(n);
        tr.energy.push_back(e);
        tr.inf_so_far.push_back(best);
        if (stable >= sched.stall_count && excess <= sched.rel_tol * ef) {
            tr.converged = true;
            break;
        }
    }
    tr.value = best;
    return tr;
}

ConvergenceTrace F_value(const PLIntervalForm& form, const PLFunction& f, const PLFunction& g, double a,
                         const FoldSchedule& sched) {
    return limit_energy(form, f, {Cap{g, a}}, sched);
}

// Distribution ---------------------------------------------------------------------

namespace {

double require(const ConvergenceTrace& tr, bool& ok) {
    ok = ok && tr.converged;
    return tr.value;
}

}  // namespace

DistributionReport distribution(const PLIntervalForm& form, const PLFunction& f, const PLFunction& g,
                                const std::vector<double>& a_grid, const FoldSchedule& sched) {
    if (!std::is_sorted(a_grid.begin(), a_grid.end())) throw std::invalid_argument("a_grid must be sorted");
    DistributionReport rep;
    rep.a_grid = a_grid;
    rep.total = form.energy(f);
    const double slack = sched.rel_tol * rep.total;
    const PLFunction neg_g = -1.0 * g;
    // F_f^{-g}(-a - eps) is affine in eps until a + eps reaches g at a knot of g, f or w
    std::vector<double> gv;
    for (double x : merge_breakpoints(merge_breakpoints(g.breakpoints(), f.breakpoints()), form.weight_breaks()))
        gv.push_back(g(x));
    std::sort(gv.begin(), gv.end());
    // F(a) + 2 r1 - r2 stays within 2 rel_tol E(f) when r1, r2 carry a quarter of it
    FoldSchedule fine = sched;
    fine.rel_tol = 0.25 * sched.rel_tol;

    for (double a : a_grid) {
        double fa = require(F_value(form, f, g, a, sched), rep.all_converged);
        rep.values.push_back(fa);
        // lim_{eps -> 0} F_f^{-g}(-a - eps) from two steps inside the affine regime
        auto next = std::upper_bound(gv.begin(), gv.end(), a + kGeomEps);
        double room = next == gv.end() ? 1.0 : *next - a;
        double eps = std::min(1e-6, 0.25 * room);
        double r1 = require(F_value(form, f, neg_g, -a - eps, fine), rep.all_converged);
        double r2 = require(F_value(form, f, neg_g, -a - 2.0 * eps, fine), rep.all_converged);
        double limit = 2.0 * r1 - r2;
        rep.reflection_gap = std::max(rep.reflection_gap, std::abs(fa + limit - rep.total));
    }
    rep.monotone_slack = kInf;
    for (std::size_t i = 0; i + 1 < rep.values.size(); ++i)
        rep.monotone_slack = std::min(rep.monotone_slack, rep.values[i + 1] - rep.values[i]);
    if (rep.values.size() < 2) rep.monotone_slack = 0.0;
    if (!a_grid.empty() && a_grid.front() < g.min_value()) rep.lower_gap = std::abs(rep.values.front());
    if (!a_grid.empty() && a_grid.back() >= g.max_value()) rep.upper_gap = std::abs(rep.values.back() - rep.total);
    rep.pass = rep.all_converged && rep.monotone_slack >= -slack && rep.lower_gap <= slack &&
               rep.upper_gap <= slack && rep.reflection_gap <= 2.0 * slack;
    return rep;
}

// Outer measure ----------------------------------------------------------------------

bool closed_set_inside(const IntervalSet& closed, const IntervalSet& u) {
    for (const auto& c : closed.components()) {
        bool inside = std::any_of(u.components().begin(), u.components().end(), [&](const Interval& o) {
            bool lo_ok = o.lo < c.lo || (o.lo == c.lo && o.lo_closed);
            bool hi_ok = c.hi < o.hi || (o.hi == c.hi && o.hi_closed);
            return lo_ok && hi_ok;
        });
        if (!inside) return false;
    }
    return true;
}

Cap closed_set_witness(const IntervalSet& a, double slope) {
    if (!(slope > 0.0) || !std::isfinite(slope)) throw std::invalid_argument("witness slope must be positive");
    return Cap{distance_function(a.closure(), slope, -1.0), -1.0};
}

double witness_slope(const PLIntervalForm& form, const PLFunction& f) {
    double mass = 0.0;
    form.for_each_cell({}, [&](double x0, double x1, double w) { mass += w * (x1 - x0); });
    double e = form.energy(f);
    if (!(e > 0.0) || !(mass > 0.0)) return 1.0;
    return std::pow(e / mass, 1.0 / form.p());
}

double measure_of_closed_set(const PLIntervalForm& form, const PLFunction& f, const IntervalSet& a,
                             const FoldSchedule& sched) {
    if (a.empty()) return 0.0;
    auto tr = limit_energy(form, f, {closed_set_witness(a, witness_slope(form, f))}, sched);
    if (!tr.converged)
        throw TraceNonConvergence("cell energies did not stabilize by n = " + std::to_string(tr.n.back()) +
                                      " (excess bound " + std::to_string(tr.excess_bound.back()) + ")",
                                  tr);
    return tr.value;
}

std::vector<Cap> canonical_family(const IntervalSet& u, int depth) {
    std::vector<Cap> family;
    if (u.empty()) return family;
    for (int k = 1; k <= depth; ++k) {
        std::vector<Interval> inner;
        for (const auto& c : u.components()) {
            double shrink = c.length() * std::ldexp(1.0, -k);
            double lo = c.lo_closed ? c.lo : c.lo + shrink;
            double hi = c.hi_closed ? c.hi : c.hi - shrink;
            if (lo <= hi) inner.push_back({lo, hi, true, true});
        }
        if (inner.empty()) continue;
        family.push_back(closed_set_witness(IntervalSet(std::move(inner))));
        if (std::all_of(u.components().begin(), u.components().end(),
                        [](const Interval& c) { return c.lo_closed && c.hi_closed; }))
            break;
    }
    return family;
}

OuterMeasureReport outer_measure_lb(const PLIntervalForm& form, const PLFunction& f, const IntervalSet& u,
                                    const std::vector<Cap>& family, const FoldSchedule& sched) {
    OuterMeasureReport rep;
    for (std::size_t i = 0; i < family.size(); ++i) {
        const auto& w = family[i];
        if (!(w.a < 0.0)) {
            ++rep.skipped;
            rep.warnings.push_back("witness " + std::to_string(i) + ": a >= 0");
            continue;
        }
        if (!closed_set_inside(sublevel_set(w.g, w.a), u)) {
            ++rep.skipped;
            rep.warnings.push_back("witness " + std::to_string(i) + ": sublevel set not inside U");
            continue;
        }
        auto tr = limit_energy(form, f, {w}, sched);
        if (!tr.converged) throw NonConvergence("cell energies did not stabilize");
        rep.values.push_back(tr.value);
        ++rep.admissible;
    }
    if (rep.admissible == 0) throw std::invalid_argument("no admissible witness for the outer measure");
    auto [lo, hi] = std::minmax_element(rep.values.begin(), rep.values.end());
    rep.value = *hi;
    rep.family_spread = *hi - *lo;
    return rep;
}

// Densities --------------------------------------------------------------------------

EnergyMeasure energy_measure(const PLIntervalForm& form, const PLFunction& f, int resolution,
                             const FoldSchedule& sched) {
    if (resolution < 1) throw std::invalid_argument("resolution must be >= 1");
    const double ef = form.energy(f);
    const double slack = sched.rel_tol * ef;
    const PLFunction id = PLFunction::identity();
    EnergyMeasure m;
    std::vector<double> cdf;
    for (int k = 0; k <= resolution; ++k) {
        double a = static_cast<double>(k) / resolution;
        auto tr = F_value(form, f, id, a, sched);
        if (!tr.converged)
            throw TraceNonConvergence("cell energies did not stabilize at a = " + std::to_string(a), tr);
        cdf.push_back(tr.value);
        m.partition.push_back(a);
    }
    for (int k = 0; k < resolution; ++k) {
        double d = cdf[static_cast<std::size_t>(k) + 1] - cdf[static_cast<std::size_t>(k)];
        if (d < -slack) throw std::runtime_error("negative cell mass in the constructed measure");
        m.density.push_back(std::max(d, 0.0) * resolution);
    }
    m.total_mass = cdf.back();
    return m;
}

EnergyMeasure reference_measure(const PLIntervalForm& form, const PLFunction& f) {
    EnergyMeasure m;
    m.partition.push_back(0.0);
    form.for_each_cell({f.breakpoints()}, [&](double x0, double x1, double w) {
        double s = (f(x1) - f(x0)) / (x1 - x0);
        double d = w * std::pow(std::abs(s), form.p());
        m.partition.push_back(x1);
        m.density.push_back(d);
        m.total_mass += d * (x1 - x0);
    });
    return m;
}

EnergyMeasure graph_energy_measure(const GraphForm& form, std::span<const double> f) {
    if (f.size() != form.vertex_count()) throw std::invalid_argument("vertex value count mismatch");
    EnergyMeasure m;
    for (const auto& e : form.edges()) {
        double a = e.conductance *
                   std::pow(std::abs(f[static_cast<std::size_t>(e.u)] - f[static_cast<std::size_t>(e.v)]), form.p());
        m.atoms.push_back(a);
        m.total_mass += a;
    }
    return m;
}

std::vector<double> cell_averages(const EnergyMeasure& m, int resolution) {
    std::vector<double> d;
    for (int k = 0; k < resolution; ++k) {
        double lo = static_cast<double>(k) / resolution, hi = static_cast<double>(k + 1) / resolution;
        d.push_back(m.evaluate(lo, hi) * resolution);
    }
    return d;
}

double sup_relative_gap(const EnergyMeasure& built, const EnergyMeasure& reference, int resolution) {
    auto a = cell_averages(built, resolution), b = cell_averages(reference, resolution);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num = std::max(num, std::abs(a[i] - b[i]));
        den = std::max(den, std::abs(b[i]));
    }
    if (den == 0.0) return num;
    return num / den;
}

// Covering and capacity ----------------------------------------------------------------

CoverReport covering_check(const PLIntervalForm& form, const PLFunction& f, const PLFunction& g, double a,
                           const std::vector<Cap>& covers, const FoldSchedule& sched) {
    IntervalSet covered;
    for (const auto& c : covers) covered = covered.unite(sublevel_set(c.g, c.a));
    auto target = sublevel_set(g, a);
    if (!target.subset_of(covered)) throw std::invalid_argument("cover hypothesis fails");
    CoverReport rep;
    bool ok = true;
    rep.lhs = require(F_value(form, f, g, a, sched), ok);
    for (const auto& c : covers) rep.rhs += require(limit_energy(form, f, {c}, sched), ok);
    if (!ok) throw NonConvergence("cell energies did not stabilize");
    rep.slack = rep.rhs - rep.lhs;
    rep.pass = rep.slack >= -sched.rel_tol * form.energy(f);
    return rep;
}

CapacityReport capacity_check(const PLIntervalForm& form, const PLFunction& f, const PLFunction& g, double a,
                              double a_prime, double b, const FoldSchedule& sched) {
    if (!(a < a_prime && a_prime < b)) throw std::invalid_argument("capacity check needs a < a' < b");
    CapacityReport rep;
    bool ok = true;
    rep.two_sided = require(limit_energy(form, f, {Cap{g, b}, Cap{-1.0 * g, -a_prime}}, sched), ok);
    rep.increment = require(F_value(form, f, g, b, sched), ok) - require(F_value(form, f, g, a, sched), ok);
    if (!ok) throw NonConvergence("cell energies did not stabilize");
    rep.slack = rep.increment - rep.two_sided;
    rep.pass = rep.slack >= -sched.rel_tol * form.energy(f);
    return rep;
}

}  // namespace pel
