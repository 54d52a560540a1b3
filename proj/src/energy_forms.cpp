#include "pel/energy_forms.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

namespace pel {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double slope_at(const PLFunction& f, double x) {
    auto xs = f.breakpoints();
    auto it = std::upper_bound(xs.begin(), xs.end(), x);
    auto i = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(it - xs.begin() - 1, 0,
                                                                 static_cast<std::ptrdiff_t>(f.pieces() - 1)));
    return f.slope(i);
}

// |s|^{p-2} s, zero at s = 0
double dual_power(double s, double p) {
    if (s == 0.0) return 0.0;
    return std::pow(std::abs(s), p - 1.0) * (s > 0.0 ? 1.0 : -1.0);
}

template <class Form>
double seminorm(const Form& form, const auto& f) {
    return std::pow(form.energy(f), 1.0 / form.p());
}

}  // namespace

// PLIntervalForm ---------------------------------------------------------------

PLIntervalForm::PLIntervalForm(double p, std::vector<WeightCell> weight) : p_(p) {
    if (!(p > 1.0) || !std::isfinite(p)) throw std::invalid_argument("p must be a finite real > 1");
    if (weight.empty()) {
        breaks_ = {0.0, 1.0};
        weights_ = {1.0};
        return;
    }
    std::sort(weight.begin(), weight.end(), [](const WeightCell& a, const WeightCell& b) { return a.lo < b.lo; });
    if (std::abs(weight.front().lo) > kGeomEps || std::abs(weight.back().hi - 1.0) > kGeomEps)
        throw std::invalid_argument("weight cells must cover [0,1]");
    breaks_.push_back(0.0);
    for (std::size_t i = 0; i < weight.size(); ++i) {
        const auto& c = weight[i];
        if (!(c.w >= 0.0) || !std::isfinite(c.w)) throw std::invalid_argument("weights must be finite and >= 0");
        if (!(c.hi > c.lo)) throw std::invalid_argument("weight cell with hi <= lo");
        if (i > 0 && std::abs(c.lo - weight[i - 1].hi) > kGeomEps)
            throw std::invalid_argument("weight cells must be contiguous");
        breaks_.push_back(i + 1 == weight.size() ? 1.0 : c.hi);
        weights_.push_back(c.w);
    }
}

double PLIntervalForm::weight_at(double x) const {
    auto it = std::upper_bound(breaks_.begin(), breaks_.end(), x);
    auto i = std::clamp<std::ptrdiff_t>(it - breaks_.begin() - 1, 0, static_cast<std::ptrdiff_t>(weights_.size() - 1));
    return weights_[static_cast<std::size_t>(i)];
}

void PLIntervalForm::for_each_cell(std::initializer_list<std::span<const double>> knots,
                                   const std::function<void(double, double, double)>& fn) const {
    std::vector<double> xs(breaks_.begin(), breaks_.end());
    for (auto k : knots) xs = merge_breakpoints(xs, k);
    for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
        double x0 = xs[i], x1 = xs[i + 1];
        fn(x0, x1, weight_at(0.5 * (x0 + x1)));
    }
}

double PLIntervalForm::energy(const PLFunction& f) const {
    double e = 0.0;
    for_each_cell({f.breakpoints()}, [&](double x0, double x1, double w) {
        double s = slope_at(f, 0.5 * (x0 + x1));
        if (s != 0.0 && w != 0.0) e += w * std::pow(std::abs(s), p_) * (x1 - x0);
    });
    return e;
}

double PLIntervalForm::energy_drv(const PLFunction& u, const PLFunction& v) const {
    double e = 0.0;
    for_each_cell({u.breakpoints(), v.breakpoints()}, [&](double x0, double x1, double w) {
        double mid = 0.5 * (x0 + x1);
        e += w * dual_power(slope_at(u, mid), p_) * slope_at(v, mid) * (x1 - x0);
    });
    return e;
}

double PLIntervalForm::energy_on(const PLFunction& f, double lo, double hi) const {
    double e = 0.0;
    for_each_cell({f.breakpoints()}, [&](double x0, double x1, double w) {
        double a = std::max(x0, lo), b = std::min(x1, hi);
        if (b <= a) return;
        double s = slope_at(f, 0.5 * (x0 + x1));
        if (s != 0.0) e += w * std::pow(std::abs(s), p_) * (b - a);
    });
    return e;
}

// GraphForm ----------------------------------------------------------------------

GraphForm::GraphForm(double p, std::vector<double> vertex_weights, std::vector<GraphEdge> edges)
    : p_(p), vertex_weights_(std::move(vertex_weights)), edges_(std::move(edges)) {
    if (!(p > 1.0) || !std::isfinite(p)) throw std::invalid_argument("p must be a finite real > 1");
    const auto n = vertex_weights_.size();
    if (n == 0) throw std::invalid_argument("graph needs at least one vertex");
    for (double w : vertex_weights_)
        if (!(w >= 0.0)) throw std::invalid_argument("vertex weights must be >= 0");
    std::vector<std::vector<int>> adj(n);
    for (const auto& e : edges_) {
        if (e.u < 0 || e.v < 0 || static_cast<std::size_t>(e.u) >= n || static_cast<std::size_t>(e.v) >= n)
            throw std::invalid_argument("edge endpoint out of range");
        if (!(e.conductance > 0.0)) throw std::invalid_argument("conductances must be positive");
        adj[static_cast<std::size_t>(e.u)].push_back(e.v);
        adj[static_cast<std::size_t>(e.v)].push_back(e.u);
    }
    std::vector<bool> seen(n, false);
    std::queue<int> q;
    q.push(0);
    seen[0] = true;
    std::size_t reached = 1;
    while (!q.empty()) {
        int x = q.front();
        q.pop();
        for (int y : adj[static_cast<std::size_t>(x)]) {
            if (!seen[static_cast<std::size_t>(y)]) {
                seen[static_cast<std::size_t>(y)] = true;
                ++reached;
                q.push(y);
            }
        }
    }
    if (reached != n) throw std::invalid_argument("graph must be connected");
}

double GraphForm::energy(std::span<const double> f) const {
    if (f.size() != vertex_count()) throw std::invalid_argument("vertex value count mismatch");
    double e = 0.0;
    for (const auto& ed : edges_)
        e += ed.conductance * std::pow(std::abs(f[static_cast<std::size_t>(ed.u)] - f[static_cast<std::size_t>(ed.v)]), p_);
    return e;
}

double GraphForm::energy_drv(std::span<const double> u, std::span<const double> v) const {
    if (u.size() != vertex_count() || v.size() != vertex_count())
        throw std::invalid_argument("vertex value count mismatch");
    double e = 0.0;
    for (const auto& ed : edges_) {
        auto i = static_cast<std::size_t>(ed.u), j = static_cast<std::size_t>(ed.v);
        e += ed.conductance * dual_power(u[i] - u[j], p_) * (v[i] - v[j]);
    }
    return e;
}

// SGForm ---------------------------------------------------------------------------

SGForm::SGForm(double p, int level, double rho) : p_(p), rho_(rho), graph_(SGGraph::build(level)) {
    if (!(p > 1.0) || !std::isfinite(p)) throw std::invalid_argument("p must be a finite real > 1");
    if (rho_ <= 0.0) rho_ = sg_renormalization_constant(p);
}

double SGForm::energy(std::span<const double> f) const {
    return std::pow(rho_, graph_.level) * sg_graph_energy(graph_, f, p_);
}

double SGForm::energy_drv(std::span<const double> u, std::span<const double> v) const {
    if (u.size() != vertex_count() || v.size() != vertex_count())
        throw std::invalid_argument("vertex value count mismatch");
    double e = 0.0;
    for (const auto& [i, j] : graph_.edges) e += dual_power(u[i] - u[j], p_) * (v[i] - v[j]);
    return std::pow(rho_, graph_.level) * e;
}

double form_p(const EnergyForm& form) {
    return std::visit([](const auto& f) { return f.p(); }, form);
}

std::string form_kind(const EnergyForm& form) {
    switch (form.index()) {
        case 0: return "pl";
        case 1: return "graph";
        default: return "sg";
    }
}

// Checks -------------------------------------------------------------------------

std::array<double, 4> clarkson_slacks(double p, double fu, double fv, double fsum, double fdiff) {
    const double q = p / (p - 1.0);
    double a = 2.0 * std::pow(std::pow(fu, q) + std::pow(fv, q), p - 1.0);
    double b = std::pow(fsum, p) + std::pow(fdiff, p);
    double c = 2.0 * (std::pow(fu, p) + std::pow(fv, p));
    double scale = c > 0.0 ? c : 1.0;
    std::array<double, 4> s{kNaN, kNaN, kNaN, kNaN};
    if (p <= 2.0) {
        s[0] = (b - a) / scale;
        s[1] = (c - b) / scale;
    }
    if (p >= 2.0) {
        s[2] = (a - b) / scale;
        s[3] = (b - c) / scale;
    }
    return s;
}

namespace {

void fold_worst(std::array<double, 4>& worst, const std::array<double, 4>& s) {
    for (int k = 0; k < 4; ++k) {
        if (std::isnan(s[k])) continue;
        worst[k] = std::isnan(worst[k]) ? s[k] : std::min(worst[k], s[k]);
    }
}

std::vector<double> add(std::span<const double> a, std::span<const double> b, double sign) {
    std::vector<double> r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] + sign * b[i];
    return r;
}

}  // namespace

ClarksonReport check_clarkson(const EnergyForm& form, Sampler& sampler, int trials) {
    if (trials < 1) throw std::invalid_argument("trials must be >= 1");
    ClarksonReport rep;
    rep.p = form_p(form);
    rep.seed = sampler.seed();
    rep.pairs = trials;
    rep.worst_slack = {kNaN, kNaN, kNaN, kNaN};
    std::visit(
        [&](const auto& fm) {
            using T = std::decay_t<decltype(fm)>;
            for (int t = 0; t < trials; ++t) {
                if constexpr (std::is_same_v<T, PLIntervalForm>) {
                    auto u = sampler.pl_function();
                    auto v = sampler.pl_function();
                    fold_worst(rep.worst_slack, clarkson_slacks(rep.p, seminorm(fm, u), seminorm(fm, v),
                                                                seminorm(fm, u + v), seminorm(fm, u - v)));
                } else {
                    auto u = sampler.vector(fm.vertex_count());
                    auto v = sampler.vector(fm.vertex_count());
                    auto s = add(u, v, 1.0), d = add(u, v, -1.0);
                    fold_worst(rep.worst_slack, clarkson_slacks(rep.p, seminorm(fm, std::span<const double>(u)),
                                                                seminorm(fm, std::span<const double>(v)),
                                                                seminorm(fm, std::span<const double>(s)),
                                                                seminorm(fm, std::span<const double>(d))));
                }
            }
        },
        form);
    rep.pass = std::all_of(rep.worst_slack.begin(), rep.worst_slack.end(),
                           [](double s) { return std::isnan(s) || s >= -1e-9; });
    return rep;
}

bool AssumptionReport::pass() const {
    return std::none_of(items.begin(), items.end(), [](const CheckItem& c) { return c.status == "fail"; });
}

namespace {

CheckItem make_item(std::string name, double worst, std::string note = {}) {
    return {std::move(name), worst >= -1e-9 ? "pass" : "fail", worst, std::move(note)};
}

}  // namespace

AssumptionReport check_assumptions(const EnergyForm& form, Sampler& sampler, int trials) {
    AssumptionReport rep;
    rep.kind = form_kind(form);
    rep.p = form_p(form);
    rep.seed = sampler.seed();
    const double p = rep.p;

    rep.items.push_back({"F1 Banach space", "recorded", 0.0, "model-level fact: finite-dimensional or W^{1,p} closure"});

    double tri = kInf, hom = kInf, unit = kInf, normal = kInf, local = kInf;
    std::visit(
        [&](const auto& fm) {
            using T = std::decay_t<decltype(fm)>;
            for (int t = 0; t < trials; ++t) {
                double a = sampler.uniform(-3.0, 3.0);
                if constexpr (std::is_same_v<T, PLIntervalForm>) {
                    auto f = sampler.pl_function();
                    auto g = sampler.pl_function();
                    double ef = fm.energy(f), eg = fm.energy(g);
                    double scale = std::pow(ef, 1 / p) + std::pow(eg, 1 / p);
                    tri = std::min(tri, scale > 0 ? (scale - seminorm(fm, f + g)) / scale : 0.0);
                    double eaf = fm.energy(a * f), ref = std::pow(std::abs(a), p) * ef;
                    hom = std::min(hom, ref > 0 ? -std::abs(eaf - ref) / ref : 0.0);
                    auto uc = cut(f, 0.0, 1.0);  // (f ^ 1)^+
                    unit = std::min(unit, ef > 0 ? (ef - fm.energy(uc)) / ef : 0.0);
                    auto phi = sampler.lipschitz_map(f.min_value() - 1.0, f.max_value() + 1.0, 1.0);
                    normal = std::min(normal, ef > 0 ? (ef - fm.energy(compose(phi, f))) / ef : 0.0);
                    // disjoint supports: tents on [0, s] and [s + gap, 1]
                    double s = sampler.uniform(0.2, 0.6), gap = sampler.uniform(0.01, 0.2);
                    auto left = PLFunction({0.0, 0.5 * s, s, 1.0}, {0.0, sampler.uniform(-2, 2), 0.0, 0.0});
                    double r0 = s + gap;
                    auto right = PLFunction({0.0, r0, 0.5 * (r0 + 1.0), 1.0}, {0.0, 0.0, sampler.uniform(-2, 2), 0.0});
                    right = right + a;  // supp[g + a] disjoint from supp[f] for the shifted copy
                    double el = fm.energy(left), er = fm.energy(right);
                    double sum = el + er;
                    local = std::min(local, sum > 0 ? -std::abs(fm.energy(left + right) - sum) / sum : 0.0);
                } else {
                    auto f = sampler.vector(fm.vertex_count());
                    auto g = sampler.vector(fm.vertex_count());
                    double ef = fm.energy(f), eg = fm.energy(g);
                    auto fg = add(f, g, 1.0);
                    double scale = std::pow(ef, 1 / p) + std::pow(eg, 1 / p);
                    tri = std::min(tri, scale > 0 ? (scale - std::pow(fm.energy(fg), 1 / p)) / scale : 0.0);
                    std::vector<double> af(f), uc(f), nc(f);
                    for (auto& x : af) x *= a;
                    for (auto& x : uc) x = std::clamp(x, 0.0, 1.0);
                    double lo = *std::min_element(f.begin(), f.end()) - 1.0;
                    double hi = *std::max_element(f.begin(), f.end()) + 1.0;
                    auto phi = sampler.lipschitz_map(lo, hi, 1.0);
                    for (auto& x : nc) x = phi(x);
                    double ref = std::pow(std::abs(a), p) * ef;
                    hom = std::min(hom, ref > 0 ? -std::abs(fm.energy(af) - ref) / ref : 0.0);
                    unit = std::min(unit, ef > 0 ? (ef - fm.energy(uc)) / ef : 0.0);
                    normal = std::min(normal, ef > 0 ? (ef - fm.energy(nc)) / ef : 0.0);
                }
            }
        },
        form);

    // homogeneity is an identity; allow relative rounding
    rep.items.push_back(make_item("seminorm: triangle inequality", tri));
    rep.items.push_back({"seminorm: homogeneity", hom >= -1e-12 ? "pass" : "fail", hom, "relative deviation"});
    auto clk = check_clarkson(form, sampler, trials);
    double worst_clk = kInf;
    for (double s : clk.worst_slack)
        if (!std::isnan(s)) worst_clk = std::min(worst_clk, s);
    rep.items.push_back(make_item("F2 Clarkson inequalities", worst_clk));
    rep.items.push_back(make_item("F3 unit contraction", unit, "E((f^1)^+) <= E(f)"));
    rep.items.push_back(make_item("normal contraction", normal, "E(phi o f) <= E(f), LIP(phi) <= 1, phi(0) = 0"));
    if (form.index() == 0) {
        rep.items.push_back({"F4 strong locality", local >= -1e-12 ? "pass" : "fail", local,
                             "E(f+g) = E(f)+E(g) for separated supports"});
    } else {
        rep.items.push_back({"F4 strong locality", "skipped: model deviation", 0.0,
                             "graph energies couple neighbouring vertices"});
    }
    rep.items.push_back({"F5 regularity", "recorded", 0.0, "model-level fact: PL / vertex functions are dense"});
    return rep;
}

FoldIdentityReport check_fold_identity(const PLIntervalForm& form, const PLFunction& f, const PLMap& phi,
                                       std::span<const double> partition) {
    if (partition.size() < 2) throw std::invalid_argument("partition needs at least two points");
    if (!std::is_sorted(partition.begin(), partition.end()) ||
        std::adjacent_find(partition.begin(), partition.end()) != partition.end())
        throw std::invalid_argument("partition must be strictly increasing");
    if (partition.front() > f.min_value() || partition.back() < f.max_value())
        throw std::invalid_argument("partition does not span the range of f");
    for (double k : phi.knots()) {
        bool on_partition = std::any_of(partition.begin(), partition.end(),
                                        [k](double a) { return std::abs(a - k) <= kGeomEps; });
        bool inside = k > partition.front() && k < partition.back();
        if (inside && !on_partition) throw std::invalid_argument("map is not affine on the partition cells");
    }

    FoldIdentityReport rep;
    rep.lhs = form.energy(compose(phi, f));
    for (std::size_t i = 0; i + 1 < partition.size(); ++i) {
        double a = partition[i], b = partition[i + 1];
        double lip = phi.lipschitz_on(std::max(a, phi.lo()), std::min(b, phi.hi()));
        // only cells overlapping the range of f contribute
        if (b <= f.min_value() || a >= f.max_value()) continue;
        rep.rhs += std::pow(lip, form.p()) * form.energy(cut(f, a, b));
    }
    double scale = std::max(std::abs(rep.lhs), std::abs(rep.rhs));
    rep.rel_gap = scale > 0 ? std::abs(rep.lhs - rep.rhs) / scale : 0.0;

    double ef = form.energy(f);
    for (int n = 1; n <= kFoldCap; ++n) {
        double est = f.variation() * std::ldexp(1.0, n) + static_cast<double>(f.pieces());
        if (est > static_cast<double>(kPieceCap)) break;
        double e = form.energy(triangle_fold(f, n));
        rep.worst_fold_gap = std::max(rep.worst_fold_gap, ef > 0 ? std::abs(e - ef) / ef : e);
        rep.max_fold_level = n;
    }
    rep.pass = rep.rel_gap <= 1e-9 && rep.worst_fold_gap <= 1e-9;
    return rep;
}

}  // namespace pel
