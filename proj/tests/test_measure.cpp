#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "pel/measure.hpp"
#include "pel/sampler.hpp"

using namespace pel;

namespace {

// mu<f>(A) from the density w |f'|^p, integrated piece by piece.
double density_integral(const PLIntervalForm& form, const PLFunction& f, const IntervalSet& a) {
    std::vector<double> knots(f.breakpoints().begin(), f.breakpoints().end());
    for (double b : form.weight_breaks()) knots.push_back(b);
    for (const auto& c : a.components()) knots.insert(knots.end(), {c.lo, c.hi});
    std::sort(knots.begin(), knots.end());
    double total = 0;
    for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
        double lo = knots[i], hi = knots[i + 1];
        if (hi <= lo) continue;
        double mid = 0.5 * (lo + hi);
        if (!a.closure().contains(mid)) continue;
        double slope = (f(hi) - f(lo)) / (hi - lo);
        total += form.weight_at(mid) * std::pow(std::abs(slope), form.p()) * (hi - lo);
    }
    return total;
}

}  // namespace

TEST_CASE("cell functions") {
    auto id = PLFunction::identity();
    auto plateau = cell_function(id, PLFunction::constant(0.0), 0.5, 4);
    for (int i = 0; i <= 200; ++i) {
        double x = i / 200.0;
        CHECK(std::abs(plateau(x) - triangle_wave(x, 4)) <= 1e-15);
    }
    CHECK(cell_function(id, PLFunction::constant(2.0), 0.5, 3).max_value() == 0.0);
}

TEST_CASE("limits of cell energies") {
    PLIntervalForm form(2.0);
    auto id = PLFunction::identity();
    Sampler s(31);
    auto f = s.pl_function();
    auto g = s.pl_function();
    auto full = F_value(form, f, g, g.max_value() + 0.1);
    CHECK(full.converged);
    CHECK(full.value == doctest::Approx(form.energy(f)).epsilon(1e-10));
    auto none = F_value(form, f, g, g.min_value() - 1.5);
    CHECK(none.value == 0.0);
    auto half = F_value(form, id, id, 0.5);
    CHECK(half.converged);
    CHECK(std::abs(half.value - 0.5) <= 1e-10);
}

TEST_CASE("traces record the infimum") {
    for (std::uint64_t k = 0; k < 10; ++k) {
        Sampler s = Sampler(32).child(k);
        PLIntervalForm form(s.uniform(1.2, 4.0));
        auto f = s.pl_function(), g = s.pl_function();
        FoldSchedule sched;
        auto tr = F_value(form, f, g, s.uniform(-1, 1), sched);
        if (tr.converged) CHECK(tr.excess_bound.back() <= sched.rel_tol * form.energy(f));
        for (std::size_t i = 0; i < tr.energy.size(); ++i) {
            CHECK(tr.value <= tr.energy[i] + sched.rel_tol * form.energy(f));
            CHECK(tr.excess_bound[i] >= 0.0);
        }
        CHECK(tr.value == *std::min_element(tr.inf_so_far.begin(), tr.inf_so_far.end()));
    }
}

TEST_CASE("distribution functions") {
    PLIntervalForm form(3.0);
    Sampler s(33);
    auto f = s.pl_function(), g = s.pl_function();
    std::vector<double> grid;
    for (int i = 0; i <= 20; ++i) grid.push_back(g.min_value() - 1 + (g.max_value() - g.min_value() + 2) * i / 20.0);
    auto d = distribution(form, f, g, grid);
    CHECK(d.pass);
    CHECK(d.values.front() == 0.0);
    CHECK(d.values.back() == doctest::Approx(form.energy(f)).epsilon(1e-9));
    CHECK(d.monotone_slack >= -1e-10 * form.energy(f));
    CHECK(d.reflection_gap <= 2e-10 * form.energy(f));
    auto flat = distribution(form, PLFunction::constant(1), g, grid);
    for (double v : flat.values) CHECK(v == 0.0);
    CHECK_THROWS_AS(distribution(form, f, g, {0.5, 0.1}), std::invalid_argument);
}

TEST_CASE("outer measure lower bounds") {
    PLIntervalForm form(2.0);
    auto id = PLFunction::identity();
    std::vector<Cap> everything{{PLFunction::constant(-1), -0.5}};
    auto whole = outer_measure_lb(form, id, IntervalSet::whole(), everything);
    CHECK(whole.value == doctest::Approx(1.0).epsilon(1e-10));
    CHECK_THROWS_AS(outer_measure_lb(form, id, IntervalSet(), everything), std::invalid_argument);
    auto half = outer_measure_lb(form, id, IntervalSet::closed(0, 0.5), canonical_family(IntervalSet::closed(0, 0.5)));
    CHECK(half.value == doctest::Approx(0.5).epsilon(1e-9));
    auto open = IntervalSet({{0.2, 0.6, false, false}});
    auto rep = outer_measure_lb(form, id, open, canonical_family(open));
    CHECK(rep.value <= 0.4 + 1e-9);
    CHECK(rep.value >= 0.4 - 1e-6);
}

TEST_CASE("constructed and reference measures") {
    for (double p : {1.5, 2.0, 3.0}) {
        PLIntervalForm form(p);
        auto m = energy_measure(form, PLFunction::identity(), 16);
        for (double d : m.density) CHECK(d == doctest::Approx(1.0).epsilon(1e-9));
        auto z = energy_measure(form, PLFunction::constant(0.3), 16);
        CHECK(z.total_mass == 0.0);
    }
    PLIntervalForm form3(3.0);
    auto t = energy_measure(form3, PLFunction::tent(), 32);
    for (double d : t.density) CHECK(d == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(t.total_mass == doctest::Approx(1.0).epsilon(1e-10));
    auto r = reference_measure(PLIntervalForm(2.0), PLFunction::linear(2, -1));
    CHECK(r.total_mass == doctest::Approx(4.0));
    CHECK(r.density_at(0.3) == doctest::Approx(4.0));
    PLIntervalForm weighted(2.0, {{0, 0.25, 3}, {0.25, 1, 1}});
    CHECK(reference_measure(weighted, PLFunction::identity()).evaluate(0, 0.5) == doctest::Approx(0.75 + 0.25));
    CHECK(reference_measure(weighted, PLFunction::constant(2)).total_mass == 0.0);
}

TEST_CASE("construction matches the density oracle on closed sets") {
    for (std::uint64_t k = 0; k < 10; ++k) {
        Sampler s = Sampler(34).child(k);
        PLIntervalForm form(s.uniform(1.3, 3.5), {{0, 0.4, s.uniform(0.5, 2)}, {0.4, 1, s.uniform(0.5, 2)}});
        auto f = s.pl_function(10);
        auto a = s.interval_set(3);
        double oracle = density_integral(form, f, a);
        double built = measure_of_closed_set(form, f, a);
        CHECK(std::abs(built - oracle) <= 1e-6 * std::max(form.energy(f), 1e-300));
        CHECK(reference_measure(form, f).evaluate(a) == doctest::Approx(oracle).epsilon(1e-12));
        auto m = energy_measure(form, f, 32);
        CHECK(sup_relative_gap(m, reference_measure(form, f), 32) <= 1e-4);
    }
}

TEST_CASE("outer measure stays below the measure of U") {
    PLIntervalForm form(2.5);
    for (std::uint64_t k = 0; k < 5; ++k) {
        Sampler s = Sampler(35).child(k);
        auto f = s.pl_function(8);
        auto u = IntervalSet({{s.uniform(0, 0.4), s.uniform(0.5, 1), false, true}});
        auto rep = outer_measure_lb(form, f, u, canonical_family(u, 20));
        CHECK(rep.value <= reference_measure(form, f).evaluate(u) + 1e-9 * form.energy(f));
    }
}

TEST_CASE("covering and capacity") {
    PLIntervalForm form(2.0);
    Sampler s(36);
    auto f = s.pl_function();
    auto id = PLFunction::identity();
    auto same = covering_check(form, f, id, 0.4, {{id, 0.4}});
    CHECK(same.pass);
    CHECK(std::abs(same.slack) <= 1e-10 * form.energy(f));
    auto left = closed_set_witness(IntervalSet::closed(0, 0.5));
    auto right = closed_set_witness(IntervalSet::closed(0.5, 1));
    auto whole = covering_check(form, f, PLFunction::constant(-1), -0.5, {left, right});
    CHECK(whole.pass);
    CHECK(covering_check(form, f, id, -1.0, {{id, -3.0}}).lhs == 0.0);
    CHECK_THROWS_AS(covering_check(form, f, id, 0.6, {{id, 0.2}}), std::invalid_argument);
    for (std::uint64_t k = 0; k < 5; ++k) {
        Sampler t = Sampler(37).child(k);
        auto g = t.pl_function();
        double a = t.uniform(-1.5, 0.5);
        double ap = a + t.uniform(0.01, 0.5), b = ap + t.uniform(0.01, 0.5);
        CHECK(capacity_check(form, f, g, a, ap, b).pass);
    }
}

TEST_CASE("schedule validation") {
    CHECK_THROWS_AS((FoldSchedule{5, 4, 1e-6, 2}.validate()), std::invalid_argument);
    CHECK_THROWS_AS((FoldSchedule{1, 60, 1e-6, 2}.validate()), std::invalid_argument);
    CHECK_THROWS_AS((FoldSchedule{1, 10, 0.0, 2}.validate()), std::invalid_argument);
    PLIntervalForm form(2.0);
    CHECK_THROWS_AS(measure_of_closed_set(form, Sampler(38).pl_function(), IntervalSet::closed(0.1, 0.7),
                                          FoldSchedule{1, 1, 1e-14, 3}),
                    TraceNonConvergence);
}
