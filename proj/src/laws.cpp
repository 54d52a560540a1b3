#include "pel/laws.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <functional>
#include <iomanip>
#include <mutex>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace pel {

std::string route_name(MeasureRoute route) {
    return route == MeasureRoute::oracle ? "oracle" : "construction";
}

MeasureRoute parse_route(const std::string& name) {
    if (name == "oracle") return MeasureRoute::oracle;
    if (name == "construction") return MeasureRoute::construction;
    throw std::invalid_argument("unknown measure route: " + name);
}

double MeasureEvaluator::operator()(const PLFunction& f, const IntervalSet& a) const {
    if (route_ == MeasureRoute::oracle) return reference_measure(form_, f).evaluate(a);
    return measure_of_closed_set(form_, f, a, sched_);
}

std::vector<IntervalSet> a_family(std::uint64_t seed, int max_level, int random_sets) {
    std::vector<IntervalSet> fam;
    for (int k = 0; k <= max_level; ++k) {
        int cells = 1 << k;
        for (int j = 0; j < cells; ++j)
            fam.push_back(IntervalSet::closed(static_cast<double>(j) / cells, static_cast<double>(j + 1) / cells));
    }
    Sampler s(seed);
    for (int i = 0; i < random_sets; ++i) fam.push_back(s.child(1000 + static_cast<std::uint64_t>(i)).interval_set(3));
    return fam;
}

std::string describe(const PLIntervalForm& form) {
    std::ostringstream os;
    os << std::setprecision(12) << "pl p=" << form.p() << " w=";
    auto b = form.weight_breaks();
    auto w = form.weight_values();
    for (std::size_t i = 0; i < w.size(); ++i) os << (i ? ";" : "") << "[" << b[i] << "," << b[i + 1] << "]:" << w[i];
    return os.str();
}

namespace {

struct Trial {
    double slack = kInf;
    std::string witness;

    void consider(double s, const std::string& what) {
        if (s < slack) {
            slack = s;
            witness = what;
        }
    }
};

std::vector<Trial> run_trials(int trials, int jobs, const std::function<Trial(int)>& fn) {
    if (trials < 1) throw std::invalid_argument("trials must be >= 1");
    std::vector<Trial> out(static_cast<std::size_t>(trials));
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (int t = next++; t < trials; t = next++) {
            try {
                out[static_cast<std::size_t>(t)] = fn(t);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        }
    };
    int n = std::clamp(jobs, 1, trials);
    std::vector<std::thread> pool;
    for (int i = 1; i < n; ++i) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
    return out;
}

LawReport finish(std::string law, const PLIntervalForm& form, std::uint64_t seed, const LawOptions& opt,
                 const std::vector<Trial>& trials, double tolerance) {
    LawReport r;
    r.law = std::move(law);
    r.form = describe(form);
    r.route = route_name(opt.route);
    r.seed = seed;
    r.trials = static_cast<int>(trials.size());
    r.tolerance = tolerance;
    r.worst_slack = kInf;
    for (std::size_t i = 0; i < trials.size(); ++i) {
        double s = std::isfinite(trials[i].slack) ? trials[i].slack : 0.0;
        r.trial_slack.push_back(s);
        if (s < r.worst_slack) {
            r.worst_slack = s;
            r.witness = "trial " + std::to_string(i) + ": " + trials[i].witness;
        }
    }
    r.pass = r.worst_slack >= -tolerance;
    return r;
}

double route_tol(const LawOptions& opt) {
    return opt.route == MeasureRoute::oracle ? opt.tol.oracle : opt.tol.construction;
}

double derivative_tol(const PLIntervalForm& form, const LawOptions& opt) {
    return form.p() < 2.0 ? opt.tol.derivative_low_p : opt.tol.derivative;
}

// schedule for differenced measures: the quotient amplifies construction error
FoldSchedule derivative_schedule(const FoldSchedule& s) {
    FoldSchedule d = s;
    d.rel_tol = std::min(s.rel_tol, 1e-12);
    d.n_max = kFoldCap;
    return d;
}

double slope_at(const PLFunction& f, double x) {
    auto xs = f.breakpoints();
    auto it = std::upper_bound(xs.begin(), xs.end(), x);
    auto i = std::clamp<std::ptrdiff_t>(it - xs.begin() - 1, 0, static_cast<std::ptrdiff_t>(f.pieces()) - 1);
    return f.slope(static_cast<std::size_t>(i));
}

double dual_power(double s, double p) {
    if (s == 0.0) return 0.0;
    return std::pow(std::abs(s), p - 1.0) * (s > 0.0 ? 1.0 : -1.0);
}

// Sum of fn(x0, x1, w) over the cells of the common refinement of the form's
// weight partition and `fns`, clipped to A.
double integrate_over(const PLIntervalForm& form, const IntervalSet& a, std::initializer_list<const PLFunction*> fns,
                      const std::function<double(double, double, double)>& fn) {
    std::vector<double> xs(form.weight_breaks().begin(), form.weight_breaks().end());
    for (const auto* f : fns) xs = merge_breakpoints(xs, f->breakpoints());
    double total = 0.0;
    for (const auto& c : a.components()) {
        for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
            double x0 = std::max(xs[i], c.lo), x1 = std::min(xs[i + 1], c.hi);
            if (x1 <= x0) continue;
            total += fn(x0, x1, form.weight_at(0.5 * (xs[i] + xs[i + 1])));
        }
    }
    return total;
}

// 5-point Gauss-Legendre on [x0, x1]
double gauss5(double x0, double x1, const std::function<double(double)>& fn) {
    static constexpr std::array<double, 5> node{0.0, -0.5384693101056831, 0.5384693101056831, -0.9061798459386640,
                                                0.9061798459386640};
    static constexpr std::array<double, 5> weight{0.5688888888888889, 0.4786286704993665, 0.4786286704993665,
                                                  0.2369268850561891, 0.2369268850561891};
    double mid = 0.5 * (x0 + x1), half = 0.5 * (x1 - x0), s = 0.0;
    for (int i = 0; i < 5; ++i) s += weight[i] * fn(mid + half * node[i]);
    return s * half;
}

std::string set_name(std::size_t index) { return "A#" + std::to_string(index); }

// denominators below this fraction of the total energy are floored
constexpr double kMassFloor = 1e-6;

}  // namespace

// Measure-level laws --------------------------------------------------------------------

LawReport law_total_mass(const PLIntervalForm& form, std::uint64_t seed, const LawOptions& opt) {
    MeasureEvaluator mu(form, opt.route, opt.sched);
    auto trials = run_trials(opt.trials, opt.jobs, [&](int t) {
        Sampler s = Sampler(seed).child(static_cast<std::uint64_t>(t));
        Trial tr;
        auto f = s.pl_function(10);
        double e = form.energy(f);
        double m = mu(f, IntervalSet::whole());
        tr.consider(-std::abs(m - e) / std::max(e, 1e-300), "total mass");
        auto fp = cut(f, 0.0, kInf);
        double ep = form.energy(fp);
        std::vector<Interval> flat;
        auto zeros = level_set(fp, 0.0);
        for (const auto& c : zeros.components())
            if (c.length() > 0.0) flat.push_back(c);
        if (!flat.empty() && ep > 0.0) tr.consider(-mu(fp, IntervalSet(flat)) / ep, "zero set of f^+");
        return tr;
    });
    return finish("total_mass", form, seed, opt, trials, route_tol(opt));
}

LawReport law_homogeneity_shift(const PLIntervalForm& form, std::uint64_t seed, const LawOptions& opt) {
    MeasureEvaluator mu(form, opt.route, opt.sched);
    const auto fam = a_family(seed);
    const double p = form.p();
    auto trials = run_trials(opt.trials, opt.jobs, [&](int t) {
        Sampler s = Sampler(seed).child(static_cast<std::uint64_t>(t));
        Trial tr;
        auto f = s.pl_function(10);
        double a = s.uniform(-3.0, 3.0);
        double b = t % 4 == 0 ? f.max_value() : s.uniform(f.min_value(), f.max_value());
        double e = form.energy(f);
        if (e == 0.0) return tr;
        auto af = a * f;
        auto shifted = abs(f + (-b)) + (-std::abs(b));
        double scale = std::pow(std::abs(a), p);
        for (std::size_t i = 0; i < fam.size(); ++i) {
            double m = mu(f, fam[i]);
            tr.consider(-std::abs(mu(af, fam[i]) - scale * m) / (scale * e), "scaling " + set_name(i));
            tr.consider(-std::abs(mu(shifted, fam[i]) - m) / e, "reflected shift " + set_name(i));
        }
        return tr;
    });
    return finish("homogeneity_shift", form, seed, opt, trials, route_tol(opt));
}

LawReport law_measure_clarkson(const PLIntervalForm& form, std::uint64_t seed, const LawOptions& opt) {
    MeasureEvaluator mu(form, opt.route, opt.sched);
    const auto fam = a_family(seed);
    const double p = form.p();
    auto trials = run_trials(opt.trials, opt.jobs, [&](int t) {
        Sampler s = Sampler(seed).child(static_cast<std::uint64_t>(t));
        Trial tr;
        auto u = s.pl_function(10);
        auto v = t % 10 == 0 ? PLFunction::constant(0.0) : s.pl_function(10);
        auto sum = u + v, diff = u - v;
        double floor = kMassFloor * 2.0 * (form.energy(u) + form.energy(v));
        for (std::size_t i = 0; i < fam.size(); ++i) {
            double mu_u = mu(u, fam[i]), mu_v = mu(v, fam[i]);
            double c = 2.0 * (mu_u + mu_v);
            auto sl = clarkson_slacks(p, std::pow(mu_u, 1 / p), std::pow(mu_v, 1 / p),
                                      std::pow(mu(sum, fam[i]), 1 / p), std::pow(mu(diff, fam[i]), 1 / p));
            double rescale = c > 0.0 ? c / std::max(c, floor) : 1.0;
            for (int k = 0; k < 4; ++k)
                if (!std::isnan(sl[k])) tr.consider(sl[k] * rescale, "CI" + std::to_string(k + 1) + " " + set_name(i));
        }
        return tr;
    });
    return finish("measure_clarkson", form, seed, opt, trials, route_tol(opt));
}

LawReport law_measure_triangle(const PLIntervalForm& form, std::uint64_t seed, const LawOptions& opt) {
    MeasureEvaluator mu(form, opt.route, opt.sched);
    const auto fam = a_family(seed);
    const double p = form.p();
    auto trials = run_trials(opt.trials, opt.jobs, [&](int t) {
        Sampler s = Sampler(seed).child(static_cast<std::uint64_t>(t));
        Trial tr;
        auto f = s.pl_function(10);
        auto g = t % 10 == 0 ? f : s.pl_function(10);
        auto sum = f + g;
        double floor = std::pow(kMassFloor * (form.energy(f) + form.energy(g)), 1 / p);
        for (std::size_t i = 0; i < fam.size(); ++i) {
            double r = std::pow(mu(f, fam[i]), 1 / p) + std::pow(mu(g, fam[i]), 1 / p);
            double l = std::pow(mu(sum, fam[i]), 1 / p);
            double den = std::max(r, floor);
            if (den > 0.0) tr.consider((r - l) / den, "triangle " + set_name(i));
        }
        return tr;
    });
    return finish("measure_triangle", form, seed, opt, trials, route_tol(opt));
}

LawReport law_locality(const PLIntervalForm& form, std::uint64_t seed, const LawOptions& opt) {
    MeasureEvaluator mu(form, opt.route, opt.sched);
    auto trials = run_trials(opt.trials, opt.jobs, [&](int t) {
        Sampler s = Sampler(seed).child(static_cast<std::uint64_t>(t));
        Trial tr;
        auto a = s.interval_set(3);
        auto f = s.pl_function(10);
        double c = s.uniform(-2.0, 2.0);
        auto r = abs(s.pl_function(10));
        auto bump = pl_min(distance_function(a, s.uniform(1.0, 20.0)), r);
        auto g = f + c + (s.uniform() < 0.5 ? -1.0 : 1.0) * bump;
        double scale = form.energy(f) + form.energy(g);
        if (scale > 0.0) tr.consider(-std::abs(mu(f, a) - mu(g, a)) / scale, "f - g constant on A");
        double eb = form.energy(bump);
        if (eb > 0.0) tr.consider(-mu(bump, a) / eb, "f constant on A");
        return tr;
    });
    double tol = opt.route == MeasureRoute::oracle ? opt.tol.oracle : std::min(opt.tol.construction, 1e-6);
    return finish("locality", form, seed, opt, trials, tol);
}

LawReport law_minmax_bound(const PLIntervalForm& form, std::uint64_t seed, const LawOptions& opt) {
    MeasureEvaluator mu(form, opt.route, opt.sched);
    const auto fam = a_family(seed);
    const double cp = std::pow(2.0, std::abs(form.p() - 2.0));
    auto trials = run_trials(opt.trials, opt.jobs, [&](int t) {
        Sampler s = Sampler(seed).child(static_cast<std::uint64_t>(t));
        Trial tr;
        auto f = s.pl_function(10);
        auto g = t % 10 == 0 ? f : s.pl_function(10);
        double a = t % 10 == 0 ? 0.0 : s.uniform(0.0, 2.0);
        auto hi = pl_max(f, g + (-a));
        auto lo = pl_min(f, g + a);
        double floor = kMassFloor * cp * (form.energy(f) + form.energy(g));
        for (std::size_t i = 0; i < fam.size(); ++i) {
            double rhs = cp * (mu(f, fam[i]) + mu(g, fam[i]));
            double lhs = std::max(mu(hi, fam[i]), mu(lo, fam[i]));
            double den = std::max(rhs, floor);
            if (den > 0.0) tr.consider((rhs - lhs) / den, "min/max " + set_name(i));
        }
        return tr;
    });
    return finish("minmax_bound", form, seed, opt, trials, route_tol(opt));
}

// Two-variable measures ------------------------------------------------------------------

double two_variable_closed_form(const PLIntervalForm& form, const PLFunction& u, const PLFunction& v,
                                const IntervalSet& a) {
    const double p = form.p();
    return integrate_over(form, a, {&u, &v}, [&](double x0, double x1, double w) {
        double mid = 0.5 * (x0 + x1);
        return w * dual_power(slope_at(u, mid), p) * slope_at(v, mid) * (x1 - x0);
    });
}

SignedMeasureSample two_variable_measure(const PLIntervalForm& form, const PLFunction& u, const PLFunction& v,
                                         const std::vector<IntervalSet>& family, const std::vector<double>& steps,
                                         MeasureRoute route, const FoldSchedule& sched) {
    if (steps.size() < 2) throw std::invalid_argument("two-variable measure needs at least two steps");
    for (std::size_t i = 0; i < steps.size(); ++i) {
        if (!(steps[i] > 0.0)) throw std::invalid_argument("steps must be positive");
        if (i > 0 && std::abs(steps[i] - 0.5 * steps[i - 1]) > 1e-12 * steps[i - 1])
            throw std::invalid_argument("steps must halve successively");
    }
    const double p = form.p();
    SignedMeasureSample out;
    out.steps = steps;
    MeasureEvaluator mu(form, route, route == MeasureRoute::construction ? derivative_schedule(sched) : sched);
    std::vector<PLFunction> plus, minus;
    for (double t : steps) {
        plus.push_back(u + t * v);
        minus.push_back(u + (-t) * v);
    }
    for (const auto& a : family) {
        std::vector<double> d;
        for (std::size_t i = 0; i < steps.size(); ++i)
            d.push_back((mu(plus[i], a) - mu(minus[i], a)) / (2.0 * p * steps[i]));
        std::vector<double> r;
        for (std::size_t i = 0; i + 1 < d.size(); ++i) r.push_back((4.0 * d[i + 1] - d[i]) / 3.0);
        double err = r.size() >= 2 ? std::abs(r.back() - r[r.size() - 2]) : std::abs(d.back() - d[d.size() - 2]);
        out.values.push_back(r.back());
        out.error.push_back(err);
        out.closed_form.push_back(two_variable_closed_form(form, u, v, a));
    }
    return out;
}

namespace {

double max_abs_slope(const PLFunction& f) {
    double m = 0.0;
    for (std::size_t i = 0; i < f.pieces(); ++i) m = std::max(m, std::abs(f.slope(i)));
    return m;
}

double min_abs_slope(const PLFunction& f) {
    double m = kInf;
    for (std::size_t i = 0; i < f.pieces(); ++i) m = std::min(m, std::abs(f.slope(i)));
    return m;
}

// v rescaled so its largest slope equals the smallest slope of u
PLFunction matched_direction(const PLFunction& u, const PLFunction& v) {
    double mv = max_abs_slope(v);
    return mv > 0.0 ? (min_abs_slope(u) / mv) * v : v;
}

}  // namespace

LawReport law_two_variable(const PLIntervalForm& form, std::uint64_t seed, const LawOptions& opt) {
    const auto fam = a_family(seed);
    const double p = form.p();
    MeasureEvaluator mu(form, opt.route, opt.sched);
    // normalizers only; v is scaled down and its tiny energy is not under test
    MeasureEvaluator scale_mu(form, MeasureRoute::oracle);
    auto trials = run_trials(opt.trials, opt.jobs, [&](int t) {
        Sampler s = Sampler(seed).child(static_cast<std::uint64_t>(t));
        Trial tr;
        auto u = s.sloped_pl_function(0.05, 10);
        auto v = matched_direction(u, s.sloped_pl_function(0.05, 10));
        double eu = form.energy(u), ev = form.energy(v);
        double floor = kMassFloor * std::pow(eu, (p - 1) / p) * std::pow(ev, 1 / p);
        auto nv = two_variable_measure(form, u, v, fam, opt.steps, opt.route, opt.sched);
        auto nu = two_variable_measure(form, u, u, fam, opt.steps, opt.route, opt.sched);
        auto z = matched_direction(u, s.sloped_pl_function(0.05, 10));
        double a = s.uniform(-1.0, 1.0), b = s.uniform(-1.0, 1.0);
        auto nz = two_variable_measure(form, u, z, fam, opt.steps, opt.route, opt.sched);
        auto nmix = two_variable_measure(form, u, a * v + b * z, fam, opt.steps, opt.route, opt.sched);
        double ez = form.energy(z);
        for (std::size_t i = 0; i < fam.size(); ++i) {
            double mu_u = mu(u, fam[i]);
            double holder = std::pow(mu_u, (p - 1) / p) * std::pow(scale_mu(v, fam[i]), 1 / p);
            double holder_z = std::pow(mu_u, (p - 1) / p) * std::pow(scale_mu(z, fam[i]), 1 / p);
            double lin_gap = std::abs(nmix.values[i] - a * nv.values[i] - b * nz.values[i]) - nmix.error[i] -
                             std::abs(a) * nv.error[i] - std::abs(b) * nz.error[i];
            tr.consider(-std::max(lin_gap, 0.0) /
                            std::max(std::abs(a) * holder + std::abs(b) * holder_z,
                                     kMassFloor * std::pow(eu, (p - 1) / p) * std::pow(ev + ez, 1 / p)),
                        "linearity in v " + set_name(i));
            tr.consider(-std::abs(nv.values[i] - nv.closed_form[i]) / std::max(holder, floor),
                        "nu<u;v> vs closed form " + set_name(i));
            tr.consider(-std::abs(nu.values[i] - mu_u) / std::max(mu_u, kMassFloor * eu),
                        "nu<u;u> vs mu<u> " + set_name(i));
        }
        return tr;
    });
    return finish("two_variable", form, seed, opt, trials, derivative_tol(form, opt));
}

// Chain rules ------------------------------------------------------------------------------

std::vector<PLMap> chain_map_family(double lo, double hi, std::uint64_t seed) {
    std::vector<PLMap> maps;
    maps.push_back(PLMap::absolute(lo, hi));
    maps.push_back(PLMap::triangle(1, lo, hi));
    maps.push_back(PLMap::triangle(2, lo, hi));
    maps.push_back(PLMap::cut(-0.5, 0.5, lo, hi));
    maps.push_back(PLMap::cut(0.0, kInf, lo, hi));
    maps.push_back(PLMap::scale(3.0, lo, hi));
    maps.push_back(PLMap::scale(-0.5, lo, hi));
    const double a = 0.3;
    maps.push_back(PLMap({lo, a, hi}, {std::abs(lo - a) - a, -a, std::abs(hi - a) - a}));
    maps.push_back(Sampler(seed).lipschitz_map(lo, hi, 2.0, 7));
    {
        auto c = PLMap::cut(-1.0, 1.0, lo, hi);
        std::vector<double> k(c.knots().begin(), c.knots().end()), v;
        for (double y : c.values()) v.push_back(2.0 * y);
        maps.push_back(PLMap(std::move(k), std::move(v)));
    }
    return maps;
}

LawReport law_chain_rule(const PLIntervalForm& form, std::uint64_t seed, const LawOptions& opt) {
    const double p = form.p();
    auto trials = run_trials(opt.trials, opt.jobs, [&](int t) {
        Sampler s = Sampler(seed).child(static_cast<std::uint64_t>(t));
        Trial tr;
        auto f = s.pl_function(10);
        double lo = std::min(f.min_value(), 0.0) - 1.0, hi = std::max(f.max_value(), 0.0) + 1.0;
        auto maps = chain_map_family(lo, hi, seed + static_cast<std::uint64_t>(t));
        double ef = form.energy(f);
        if (ef == 0.0) return tr;
        for (std::size_t k = 0; k < maps.size(); ++k) {
            const auto& phi = maps[k];
            auto pf = compose(phi, f);
            auto cells = merge_breakpoints(pf.breakpoints(), f.breakpoints());
            cells = merge_breakpoints(cells, form.weight_breaks());
            for (std::size_t i = 0; i + 1 < cells.size(); ++i) {
                double x0 = cells[i], x1 = cells[i + 1], len = x1 - x0;
                auto cell = IntervalSet::closed(x0, x1);
                double mid = 0.5 * (x0 + x1);
                double d = phi.derivative(f(mid));
                double l, r;
                if (opt.route == MeasureRoute::oracle) {
                    l = reference_measure(form, pf).evaluate(x0, x1);
                    r = std::pow(std::abs(d), p) * reference_measure(form, f).evaluate(x0, x1);
                } else {
                    FoldSchedule cs = opt.sched;
                    cs.rel_tol = std::max(opt.sched.rel_tol * std::min(1.0, len), 1e-16);
                    cs.n_max = kFoldCap;
                    l = measure_of_closed_set(form, pf, cell, cs);
                    r = std::pow(std::abs(d), p) * measure_of_closed_set(form, f, cell, cs);
                }
                double den = std::max({l, r, len * ef});
                std::string what = "map " + std::to_string(k) + " cell [" + std::to_string(x0) + "," +
                                   std::to_string(x1) + "]";
                tr.consider(-std::abs(l - r) / den, "measure " + what);
            }
        }
        return tr;
    });
    return finish("chain_rule", form, seed, opt, trials, route_tol(opt));
}

LawReport law_chain_rule_two_variable(const PLIntervalForm& form, std::uint64_t seed, const LawOptions& opt) {
    const double p = form.p();
    MeasureEvaluator mu_f(form, MeasureRoute::oracle);
    auto trials = run_trials(opt.trials, opt.jobs, [&](int t) {
        Sampler s = Sampler(seed).child(static_cast<std::uint64_t>(t));
        Trial tr;
        auto f = s.sloped_pl_function(0.05, 8);
        auto g = matched_direction(f, s.sloped_pl_function(0.05, 8));
        double lo = std::min(f.min_value(), 0.0) - 1.0, hi = std::max(f.max_value(), 0.0) + 1.0;
        auto maps = chain_map_family(lo, hi, seed + static_cast<std::uint64_t>(t));
        double floor = kMassFloor * std::pow(form.energy(f), (p - 1) / p) * std::pow(form.energy(g), 1 / p);
        for (std::size_t k = 0; k < maps.size(); ++k) {
            const auto& phi = maps[k];
            auto pf = compose(phi, f);
            auto cells = merge_breakpoints(merge_breakpoints(pf.breakpoints(), f.breakpoints()), form.weight_breaks());
            std::vector<IntervalSet> fam;
            std::vector<double> weight;
            for (std::size_t i = 0; i + 1 < cells.size(); ++i) {
                double mid = 0.5 * (cells[i] + cells[i + 1]);
                double d = phi.derivative(f(mid));
                // the composite slope must stay away from 0 for the differences to be smooth in t
                if (std::abs(d) < 1e-12) continue;
                fam.push_back(IntervalSet::closed(cells[i], cells[i + 1]));
                weight.push_back((d > 0 ? 1.0 : -1.0) * std::pow(std::abs(d), p - 1.0));
            }
            if (fam.empty()) continue;
            auto lhs = two_variable_measure(form, pf, g, fam, opt.steps, opt.route, opt.sched);
            auto base = two_variable_measure(form, f, g, fam, opt.steps, opt.route, opt.sched);
            for (std::size_t i = 0; i < fam.size(); ++i) {
                double holder = std::pow(mu_f(f, fam[i]), (p - 1) / p) * std::pow(mu_f(g, fam[i]), 1 / p);
                double scale = std::abs(weight[i]) * std::max(holder, floor);
                double gap = std::abs(lhs.values[i] - weight[i] * base.values[i]) - lhs.error[i] -
                             std::abs(weight[i]) * base.error[i];
                tr.consider(-std::max(gap, 0.0) / scale,
                            "map " + std::to_string(k) + " cell [" + std::to_string(cells[i]) + "]");
            }
        }
        return tr;
    });
    return finish("chain_rule_two_variable", form, seed, opt, trials, derivative_tol(form, opt));
}

LawReport law_continuity(const PLIntervalForm& form, std::uint64_t seed, const LawOptions& opt) {
    const double p = form.p();
    constexpr int kSweep = 41;
    MeasureEvaluator mu(form, opt.route, opt.sched);
    auto trials = run_trials(opt.trials, opt.jobs, [&](int t) {
        Sampler s = Sampler(seed).child(static_cast<std::uint64_t>(t));
        Trial tr;
        auto f = s.pl_function(10);
        auto g = s.pl_function(10);
        auto a = s.interval_set(3);
        std::vector<double> ts, vals;
        for (int i = 0; i < kSweep; ++i) {
            double tt = -1.0 + 2.0 * i / (kSweep - 1);
            ts.push_back(tt);
            vals.push_back(mu(f + tt * g, a));
        }
        // sup over the sweep of d/dt mu_<f+tg>(A) = p * int_A w |f'+tg'|^{p-2}(f'+tg') g'
        double lip = 0.0;
        for (double tt : ts) {
            auto ft = f + tt * g;
            lip = std::max(lip, p * (integrate_over(form, a, {&ft, &g}, [&](double x0, double x1, double w) {
                                                 double mid = 0.5 * (x0 + x1);
                                                 return w * std::pow(std::abs(slope_at(ft, mid)), p - 1.0) *
                                                        std::abs(slope_at(g, mid)) * (x1 - x0);
                                             })));
        }
        double e = form.energy(f) + form.energy(g);
        for (int i = 0; i + 1 < kSweep; ++i) {
            double dt = ts[static_cast<std::size_t>(i) + 1] - ts[static_cast<std::size_t>(i)];
            double jump = std::abs(vals[static_cast<std::size_t>(i) + 1] - vals[static_cast<std::size_t>(i)]);
            // |f'+sg'| on a step is at most its value at one of the two ends
            double bound = 2.0 * lip * dt;
            tr.consider((bound - jump) / std::max(bound + e * dt, 1e-300), "sweep step " + std::to_string(i));
        }
        return tr;
    });
    return finish("continuity", form, seed, opt, trials, route_tol(opt));
}

LawReport law_leibniz(const PLIntervalForm& form, std::uint64_t seed, const LawOptions& opt) {
    const auto fam = a_family(seed);
    const double p = form.p();
    auto trials = run_trials(opt.trials, opt.jobs, [&](int t) {
        Sampler s = Sampler(seed).child(static_cast<std::uint64_t>(t));
        Trial tr;
        auto f = s.sloped_pl_function(0.05, 10);
        auto g = s.pl_function(8);
        auto h = t % 10 == 0 ? PLFunction::constant(1.0) : (t % 10 == 1 ? g : s.pl_function(8));
        auto prod = pl_product(g, h, opt.refine);
        auto lhs = two_variable_measure(form, f, prod.fn, fam, opt.steps, opt.route, opt.sched);
        for (std::size_t i = 0; i < fam.size(); ++i) {
            double rhs = 0.0, scale = 0.0, budget = 0.0;
            integrate_over(form, fam[i], {&f, &g, &h}, [&](double x0, double x1, double w) {
                double mid = 0.5 * (x0 + x1);
                double k = w * dual_power(slope_at(f, mid), p);
                double gs = slope_at(g, mid), hs = slope_at(h, mid);
                // g h' + h g' is affine on the cell, midpoint rule is exact
                rhs += k * (g(mid) * hs + h(mid) * gs) * (x1 - x0);
                scale += std::abs(k) * gauss5(x0, x1, [&](double x) { return std::abs(g(x) * hs) + std::abs(h(x) * gs); });
                return 0.0;
            });
            for (std::size_t j = 0; j < f.pieces(); ++j) {
                double x0 = f.breakpoints()[j], x1 = f.breakpoints()[j + 1];
                if (fam[i].overlap(x0, x1) > 0.0)
                    budget += 2.0 * prod.sup_error * std::pow(std::abs(f.slope(j)), p - 1.0) *
                              *std::max_element(form.weight_values().begin(), form.weight_values().end());
            }
            double gap = std::abs(lhs.values[i] - rhs) - budget - lhs.error[i];
            tr.consider(-std::max(gap, 0.0) / std::max(scale, 1e-300), "Leibniz " + set_name(i));
        }
        return tr;
    });
    return finish("leibniz", form, seed, opt, trials, derivative_tol(form, opt));
}

FunctionalIdentityTerms functional_identity_terms(const PLIntervalForm& form, const PLFunction& f,
                                                  const PLFunction& g, int refine) {
    if (refine < 1) throw std::invalid_argument("refine must be >= 1");
    const double p = form.p();
    const double q = p / (p - 1.0);
    const double coef = std::pow((p - 1.0) / p, p - 1.0);
    FunctionalIdentityTerms out;
    integrate_over(form, IntervalSet::whole(), {&f, &g}, [&](double x0, double x1, double w) {
        double mid = 0.5 * (x0 + x1);
        double d = w * std::pow(std::abs(slope_at(f, mid)), p);
        out.lhs += d * g(mid) * (x1 - x0);
        out.scale += d * gauss5(x0, x1, [&](double x) { return std::abs(g(x)); });
        return 0.0;
    });
    auto knots = merge_breakpoints(g.breakpoints(), form.weight_breaks());
    double first = form.energy_drv(f, pl_product(f, g, refine, knots).fn);
    double second = form.energy_drv(pl_abs_power(f, q, refine, knots).fn, g);
    double second_fine = form.energy_drv(pl_abs_power(f, q, 2 * refine, knots).fn, g);
    out.rhs = first - coef * second_fine;
    out.budget = 2.0 * coef * std::abs(second - second_fine);
    return out;
}

LawReport law_functional_identity(const PLIntervalForm& form, std::uint64_t seed, const LawOptions& opt) {
    auto trials = run_trials(opt.trials, opt.jobs, [&](int t) {
        Sampler s = Sampler(seed).child(static_cast<std::uint64_t>(t));
        Trial tr;
        auto f = s.pl_function(10);
        auto g = t % 10 == 0 ? PLFunction::constant(1.0) : s.pl_function(10);
        auto terms = functional_identity_terms(form, f, g, opt.refine);
        if (terms.scale == 0.0) {
            tr.consider(-std::abs(terms.lhs - terms.rhs), "degenerate f");
            return tr;
        }
        double gap = std::abs(terms.lhs - terms.rhs) - terms.budget;
        tr.consider(-std::max(gap, 0.0) / terms.scale, "functional identity");
        return tr;
    });
    LawOptions o = opt;
    o.route = MeasureRoute::oracle;
    return finish("functional_identity", form, seed, o, trials, opt.tol.derivative);
}

// n-variable chain rule ------------------------------------------------------------------

double Polynomial::operator()(const std::array<double, 3>& x) const {
    double s = 0.0;
    for (const auto& t : terms)
        s += t.coef * std::pow(x[0], t.exps[0]) * std::pow(x[1], t.exps[1]) * std::pow(x[2], t.exps[2]);
    return s;
}

double Polynomial::partial(int i, const std::array<double, 3>& x) const {
    double s = 0.0;
    for (const auto& t : terms) {
        int e = t.exps[static_cast<std::size_t>(i)];
        if (e == 0) continue;
        double v = t.coef * e;
        for (int j = 0; j < 3; ++j) v *= std::pow(x[static_cast<std::size_t>(j)], t.exps[static_cast<std::size_t>(j)] - (j == i ? 1 : 0));
        s += v;
    }
    return s;
}

int Polynomial::degree() const {
    int d = 0;
    for (const auto& t : terms) d = std::max(d, t.exps[0] + t.exps[1] + t.exps[2]);
    return d;
}

Polynomial Polynomial::named(const std::string& name) {
    if (name == "sum") return {{{1.0, {1, 0, 0}}, {1.0, {0, 1, 0}}}, 2};
    if (name == "product") return {{{1.0, {1, 1, 0}}}, 2};
    if (name == "square") return {{{1.0, {2, 0, 0}}}, 1};
    if (name == "cubic") return {{{1.0, {1, 1, 1}}, {-0.5, {2, 0, 0}}, {2.0, {0, 1, 0}}}, 3};
    throw std::invalid_argument("unknown polynomial: " + name);
}

LawReport law_multivariable_chain(const PLIntervalForm& form, const Polynomial& phi, std::uint64_t seed,
                                  const LawOptions& opt) {
    if (phi.arity < 1 || phi.arity > 3) throw std::invalid_argument("polynomial arity must be 1..3");
    if (phi({0.0, 0.0, 0.0}) != 0.0) throw std::invalid_argument("polynomial must vanish at 0");
    const auto fam = a_family(seed);
    const double p = form.p();
    std::vector<double> family_ends;
    for (const auto& a : fam)
        for (const auto& c : a.components()) {
            family_ends.push_back(c.lo);
            family_ends.push_back(c.hi);
        }
    std::sort(family_ends.begin(), family_ends.end());
    auto trials = run_trials(opt.trials, opt.jobs, [&](int t) {
        Sampler s = Sampler(seed).child(static_cast<std::uint64_t>(t));
        Trial tr;
        auto f = s.sloped_pl_function(0.05, 10);
        std::vector<PLFunction> g;
        for (int i = 0; i < 3; ++i) g.push_back(i < phi.arity ? s.pl_function(8, -1.5, 1.5) : PLFunction::constant(0.0));
        // PL interpolant of phi o g on f, g_i and family breakpoints, refined
        std::vector<double> knots = merge_breakpoints(f.breakpoints(), family_ends);
        knots = merge_breakpoints(knots, form.weight_breaks());
        for (const auto& gi : g) knots = merge_breakpoints(knots, gi.breakpoints());
        std::vector<double> xs{0.0};
        for (std::size_t i = 0; i + 1 < knots.size(); ++i)
            for (int r = 1; r <= opt.refine; ++r) xs.push_back(knots[i] + (knots[i + 1] - knots[i]) * r / opt.refine);
        xs.back() = 1.0;
        std::vector<double> ys;
        for (double x : xs) ys.push_back(phi({g[0](x), g[1](x), g[2](x)}));
        PLFunction comp(xs, ys);
        SignedMeasureSample lhs;
        if (opt.route == MeasureRoute::construction) {
            // difference along a slope-matched multiple of phi o g; nu is linear in v
            double mc = max_abs_slope(comp);
            double c = mc > 0.0 ? min_abs_slope(f) / mc : 1.0;
            lhs = two_variable_measure(form, f, c * comp, fam, opt.steps, opt.route, opt.sched);
            for (auto& v : lhs.values) v /= c;
            for (auto& e : lhs.error) e /= c;
        }
        for (std::size_t i = 0; i < fam.size(); ++i) {
            double l = opt.route == MeasureRoute::oracle ? two_variable_closed_form(form, f, comp, fam[i])
                                                         : lhs.values[i];
            double err = opt.route == MeasureRoute::oracle ? 0.0 : lhs.error[i];
            double rhs = 0.0, scale = 0.0;
            integrate_over(form, fam[i], {&f, &g[0], &g[1], &g[2]}, [&](double x0, double x1, double w) {
                double mid = 0.5 * (x0 + x1);
                double k = w * dual_power(slope_at(f, mid), p);
                for (int j = 0; j < phi.arity; ++j) {
                    double gs = slope_at(g[static_cast<std::size_t>(j)], mid);
                    auto dphi = [&](double x) { return phi.partial(j, {g[0](x), g[1](x), g[2](x)}); };
                    rhs += k * gs * gauss5(x0, x1, dphi);
                    scale += std::abs(k * gs) * gauss5(x0, x1, [&](double x) { return std::abs(dphi(x)); });
                }
                return 0.0;
            });
            double gap = std::max(std::abs(l - rhs) - err, 0.0);
            if (scale > 0.0) tr.consider(-gap / scale, "n-variable chain " + set_name(i));
        }
        return tr;
    });
    double tol = opt.route == MeasureRoute::oracle ? opt.tol.oracle : derivative_tol(form, opt);
    return finish("multivariable_chain", form, seed, opt, trials, tol);
}

LatticeChainReport lattice_chain_counterexample(const PLIntervalForm& form, const PLFunction& f,
                                                const PLFunction& g) {
    LatticeChainReport r;
    r.lhs = form.energy_drv(f, pl_max(g, g));
    // both one-sided partials of x1 v x2 equal 1 on the diagonal
    r.rhs = 2.0 * form.energy_drv(f, g);
    r.mismatch = r.lhs != 0.0 ? std::abs(r.lhs - r.rhs) / std::abs(r.lhs) : std::abs(r.rhs);
    r.identity_fails = r.mismatch > 1e-6;
    return r;
}

// Domination -------------------------------------------------------------------------------

LawReport law_domination(const PLIntervalForm& lo, const PLIntervalForm& hi, std::uint64_t seed,
                         const LawOptions& opt) {
    if (lo.p() != hi.p()) throw std::invalid_argument("domination needs equal exponents");
    auto cells = merge_breakpoints(lo.weight_breaks(), hi.weight_breaks());
    for (std::size_t i = 0; i + 1 < cells.size(); ++i) {
        double mid = 0.5 * (cells[i] + cells[i + 1]);
        if (lo.weight_at(mid) > hi.weight_at(mid)) throw std::invalid_argument("domination needs w_lo <= w_hi");
    }
    const auto fam = a_family(seed);
    MeasureEvaluator mu(lo, opt.route, opt.sched), nu(hi, opt.route, opt.sched);
    auto trials = run_trials(opt.trials, opt.jobs, [&](int t) {
        Sampler s = Sampler(seed).child(static_cast<std::uint64_t>(t));
        Trial tr;
        auto f = s.pl_function(10);
        double total = hi.energy(f);
        if (total == 0.0) return tr;
        for (std::size_t i = 0; i < fam.size(); ++i)
            tr.consider((nu(f, fam[i]) - mu(f, fam[i])) / total, "domination " + set_name(i));
        return tr;
    });
    auto r = finish("domination", lo, seed, opt, trials, opt.tol.oracle);
    r.form += " <= " + describe(hi);
    return r;
}

LawReport law_minimal_dominant(const PLIntervalForm& form, const std::vector<PLFunction>& basis,
                               std::uint64_t seed, const LawOptions& opt) {
    if (basis.empty()) throw std::invalid_argument("basis must be nonempty");
    std::vector<double> coef;
    std::vector<double> cells(form.weight_breaks().begin(), form.weight_breaks().end());
    for (std::size_t i = 0; i < basis.size(); ++i) {
        double e = form.energy(basis[i]);
        if (!(e > 0.0)) throw std::invalid_argument("basis functions need positive energy");
        coef.push_back(std::ldexp(1.0, -static_cast<int>(i + 1)) / e);
        cells = merge_breakpoints(cells, basis[i].breakpoints());
    }
    MeasureEvaluator mu(form, opt.route, opt.sched);
    // nu on the cells where every basis density is constant
    std::vector<double> nu_cell;
    double nu_total = 0.0;
    for (std::size_t c = 0; c + 1 < cells.size(); ++c) {
        auto cell = IntervalSet::closed(cells[c], cells[c + 1]);
        double m = 0.0;
        for (std::size_t i = 0; i < basis.size(); ++i) m += coef[i] * mu(basis[i], cell);
        nu_cell.push_back(m);
        nu_total += m;
    }
    const double thresh = route_tol(opt) * nu_total;
    auto trials = run_trials(opt.trials, opt.jobs, [&](int t) {
        Sampler s = Sampler(seed).child(static_cast<std::uint64_t>(t));
        Trial tr;
        auto f = PLFunction::constant(s.uniform(-1.0, 1.0));
        for (const auto& u : basis) f = f + s.uniform(-2.0, 2.0) * u;
        if (t % 2 == 1) {
            auto phi = s.lipschitz_map(f.min_value() - 1.0, f.max_value() + 1.0, 1.0);
            f = compose(phi, f);
        }
        double ef = form.energy(f);
        if (ef == 0.0) return tr;
        for (std::size_t c = 0; c < nu_cell.size(); ++c) {
            if (nu_cell[c] > thresh) continue;
            double m = mu(f, IntervalSet::closed(cells[c], cells[c + 1]));
            tr.consider(-m / ef, "nu-null cell [" + std::to_string(cells[c]) + "," + std::to_string(cells[c + 1]) + "]");
        }
        return tr;
    });
    return finish("minimal_dominant", form, seed, opt, trials, route_tol(opt));
}

// Image density -----------------------------------------------------------------------------

double pushforward_density(const PLIntervalForm& form, const PLFunction& f, double t) {
    const double p = form.p();
    double d = 0.0;
    form.for_each_cell({f.breakpoints()}, [&](double x0, double x1, double w) {
        double a = f(x0), b = f(x1);
        if (a == b) return;
        if (t >= std::min(a, b) && t < std::max(a, b))
            d += w * std::pow(std::abs((b - a) / (x1 - x0)), p - 1.0);
    });
    return d;
}

LawReport law_image_density(const PLIntervalForm& form, std::uint64_t seed, const LawOptions& opt) {
    // any finite E_n bounds the limit from above, so run every level
    FoldSchedule point_sched{opt.sched.n_min, kFoldCap, 1e-300, 2};
    auto trials = run_trials(opt.trials, opt.jobs, [&](int t) {
        Sampler s = Sampler(seed).child(static_cast<std::uint64_t>(t));
        Trial tr;
        auto f = s.pl_function(10);
        if (t % 2 == 0) {
            double a = s.uniform(f.min_value(), f.max_value());
            double b = s.uniform(a, f.max_value());
            f = cut(f, a, b);
        }
        std::vector<double> probes(f.values().begin(), f.values().end());
        std::sort(probes.begin(), probes.end());
        probes.erase(std::unique(probes.begin(), probes.end()), probes.end());
        if (probes.size() > 50) probes.resize(50);
        while (probes.size() < 50) probes.push_back(s.uniform(f.min_value(), f.max_value()));
        auto ref = reference_measure(form, f);
        for (double v : probes) {
            auto level = level_set(f, v);
            if (level.empty()) continue;
            double atom;
            if (opt.route == MeasureRoute::oracle) {
                atom = ref.evaluate(level);
            } else {
                auto trace = limit_energy(form, f, {closed_set_witness(level, witness_slope(form, f))}, point_sched);
                atom = trace.value;
            }
            tr.consider(-atom, "atom at " + std::to_string(v));
        }
        return tr;
    });
    double tol = opt.route == MeasureRoute::oracle ? opt.tol.oracle : 1e-8;
    return finish("image_density", form, seed, opt, trials, tol);
}

// Dispatch -----------------------------------------------------------------------------------

std::vector<std::string> law_ids() {
    return {"total_mass",     "homogeneity_shift", "measure_clarkson", "measure_triangle", "locality",
            "minmax_bound",   "two_variable",      "chain_rule",       "leibniz",          "functional_identity",
            "multivariable_chain", "domination",   "minimal_dominant", "image_density", "chain_rule_two_variable",
            "continuity"};
}

LawReport run_law(const std::string& id, const PLIntervalForm& form, std::uint64_t seed, const LawOptions& opt) {
    if (id == "total_mass") return law_total_mass(form, seed, opt);
    if (id == "homogeneity_shift") return law_homogeneity_shift(form, seed, opt);
    if (id == "measure_clarkson") return law_measure_clarkson(form, seed, opt);
    if (id == "measure_triangle") return law_measure_triangle(form, seed, opt);
    if (id == "locality") return law_locality(form, seed, opt);
    if (id == "minmax_bound") return law_minmax_bound(form, seed, opt);
    if (id == "two_variable") return law_two_variable(form, seed, opt);
    if (id == "chain_rule") return law_chain_rule(form, seed, opt);
    if (id == "leibniz") return law_leibniz(form, seed, opt);
    if (id == "functional_identity") return law_functional_identity(form, seed, opt);
    if (id == "multivariable_chain") {
        LawReport worst;
        for (const char* name : {"sum", "product", "square", "cubic"}) {
            auto r = law_multivariable_chain(form, Polynomial::named(name), seed, opt);
            r.witness = std::string(name) + " " + r.witness;
            if (worst.law.empty() || r.worst_slack < worst.worst_slack) worst = r;
        }
        return worst;
    }
    if (id == "domination") {
        std::vector<WeightCell> hi_cells;
        auto b = form.weight_breaks();
        auto w = form.weight_values();
        for (std::size_t i = 0; i < w.size(); ++i) {
            double mid = std::clamp(0.5, b[i], b[i + 1]);
            if (mid > b[i] && mid < b[i + 1]) {
                hi_cells.push_back({b[i], mid, 2.0 * w[i]});
                hi_cells.push_back({mid, b[i + 1], w[i]});
            } else {
                hi_cells.push_back({b[i], b[i + 1], b[i] < 0.5 ? 2.0 * w[i] : w[i]});
            }
        }
        return law_domination(form, PLIntervalForm(form.p(), hi_cells), seed, opt);
    }
    if (id == "minimal_dominant") {
        std::vector<PLFunction> basis{cut(PLFunction::identity(), -kInf, 0.5), PLFunction({0.0, 0.2, 0.4, 1.0}, {0.0, 0.2, 0.0, 0.0}),
                                      PLFunction({0.0, 0.1, 0.3, 0.45, 1.0}, {0.0, 0.4, -0.2, 0.1, 0.1})};
        return law_minimal_dominant(form, basis, seed, opt);
    }
    if (id == "image_density") return law_image_density(form, seed, opt);
    if (id == "chain_rule_two_variable") return law_chain_rule_two_variable(form, seed, opt);
    if (id == "continuity") return law_continuity(form, seed, opt);
    throw std::invalid_argument("unknown law: " + id);
}

}  // namespace pel
