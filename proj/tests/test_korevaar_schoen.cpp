#include <doctest.h>

#include <cmath>

#include "pel/korevaar_schoen.hpp"

using namespace pel;

namespace {

// Direct double loop over a cell-centred grid with strict balls.
double brute_ks(const std::vector<double>& u, double h, double p, double r) {
    const std::size_t n = u.size();
    long double total = 0;
    for (std::size_t i = 0; i < n; ++i) {
        long double inner = 0, mass = 0;
        for (std::size_t j = 0; j < n; ++j) {
            double d = std::abs(static_cast<double>(i) - static_cast<double>(j)) * h;
            if (d >= r) continue;
            inner += h * std::pow(std::abs(static_cast<long double>(u[i]) - u[j]), p);
            mass += h;
        }
        total += h * inner / (std::pow(static_cast<long double>(r), p) * mass);
    }
    return static_cast<double>(total);
}

}  // namespace

TEST_CASE("ball measures") {
    auto space = SampledSpace::interval(2000);
    const double h = space.spacing();
    CHECK(space.total_mass() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(ball_measure(space, {0.5, 0}, 0.05) - 0.1) <= 2 * h);
    CHECK(std::abs(ball_measure(space, {0.0, 0}, 0.05) - 0.05) <= 2 * h);
    CHECK(ball_measure(space, {0.3, 0}, 1.5) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(ball_measure(space, space.point(10), 1.5 * h) == doctest::Approx(3.0 / 2000));
    auto four = SampledSpace::interval(4);
    CHECK(ball_measure(four, {0.125, 0}, 0.25) == 0.25);
    CHECK(ball_measure(four, {0.125, 0}, 0.2500001) == 0.5);
    CHECK_THROWS_AS(ball_measure(space, {0.5, 0}, 0.0), std::invalid_argument);

    auto torus = SampledSpace::torus(128);
    CHECK(std::abs(ball_measure(torus, {0.1, 0.9}, 0.2) - M_PI * 0.04) <= 0.01 * M_PI * 0.04);
    CHECK(torus.distance(0, 127) == doctest::Approx(1.0 / 128));
    CHECK(torus.distance(5, 5) == 0.0);
    CHECK(torus.distance(3, 700) == torus.distance(700, 3));
}

TEST_CASE("KS energies of linear profiles") {
    auto space = SampledSpace::interval(2000);
    auto lin = space.sample([](double x) { return x; });
    CHECK(ks_energy(space, space.sample([](double) { return 2.0; }), {2.0, 0.05, {}}) == 0.0);
    const double h = space.spacing();
    for (auto [p, r] : {std::pair{2.0, 0.05}, std::pair{3.0, 0.02}}) {
        CHECK(ks_energy(space, lin, {p, r, {}}) == doctest::Approx(brute_ks(lin, h, p, r)).epsilon(1e-12));
        double off_grid = r + 0.5 * h;
        CHECK(std::abs(ks_energy(space, lin, {p, off_grid, {}}) * (p + 1) - 1) <= 0.02);
    }
    auto fine = SampledSpace::interval(20000);
    CHECK(std::abs(ks_energy(fine, fine.sample([](double x) { return x; }), {3.0, 0.02, {}}) * 4 - 1) <= 0.02);
    CHECK_THROWS_AS(ks_energy(space, std::vector<double>(10, 0.0), {2.0, 0.05, {}}), std::invalid_argument);
}

TEST_CASE("limit scans") {
    auto space = SampledSpace::interval(2000);
    auto r = grid_scales(space, 0.08, 5);
    REQUIRE(r.size() == 5);
    auto flat = ks_limit_scan(space, space.sample([](double) { return -1.0; }), 2.0, r);
    for (double j : flat.J) CHECK(j == 0.0);
    CHECK_FALSE(flat.divergent);

    auto sine = ks_limit_scan(space, space.sample([](double x) { return std::sin(2 * M_PI * x); }), 2.0, r);
    const double oracle = 2 * M_PI * M_PI / 3;  // (1/3) int |u'|^2
    CHECK(std::abs(sine.extrapolated - oracle) <= 0.03 * oracle);
    CHECK_FALSE(sine.divergent);

    for (double p : {1.5, 2.0, 3.0}) {
        auto step = ks_limit_scan(space, space.sample([](double x) { return x < 0.5 ? 0.0 : 1.0; }), p, r);
        CHECK(step.divergent);
        CHECK(step.loglog_slope == doctest::Approx(-(p - 1)).epsilon(0.05));
    }

    auto lin = space.sample([](double x) { return x; });
    auto scan = ks_limit_scan(space, lin, 2.0, r);
    for (std::size_t i = 0; i < r.size(); ++i) {
        CHECK(scan.sup_so_far[i] >= scan.J[i]);
        CHECK(std::abs(scan.J[i] - 1.0 / 3) <= std::abs(scan.linear_coefficient) * r[i] * 1.5 + 1e-3);
    }
    CHECK(scan.dispersion >= 0.0);
    CHECK_THROWS_AS(ks_limit_scan(space, lin, 2.0, {0.1, 0.2}), std::invalid_argument);
    CHECK_THROWS_AS(ks_limit_scan(space, lin, 2.0, {0.1, 0.001}), std::invalid_argument);
}

TEST_CASE("weak monotonicity") {
    auto space = SampledSpace::interval(4000);
    auto r = grid_scales(space, 0.1, 6);
    auto lin = check_weak_monotonicity(space, space.sample([](double x) { return x; }), 2.0, r);
    CHECK(lin.finite);
    CHECK(std::abs(lin.c_star - 1) <= 0.05);
    auto flat = check_weak_monotonicity(space, space.sample([](double) { return 0.0; }), 2.0, r);
    CHECK(flat.skipped);
    auto smooth = check_weak_monotonicity(space, space.sample([](double x) { return std::cos(3 * x) + x * x; }), 3.0, r);
    CHECK(smooth.finite);
    CHECK(smooth.c_star <= 1.2);
}

TEST_CASE("comparison with the canonical energy") {
    auto space = SampledSpace::interval(4000);
    auto r = grid_scales(space, 0.08, 5);
    for (double p : {2.0, 3.0}) {
        auto lin = ks_vs_canonical(space, PLFunction::identity(), p, r);
        CHECK(lin.form_energy == 1.0);
        CHECK(lin.energy_deviation <= 0.03);
        CHECK(lin.measure_deviation <= 0.03);
        auto tent = ks_vs_canonical(space, PLFunction::tent(), p, r);
        CHECK(tent.energy_deviation <= 0.03);
        CHECK(tent.measure_deviation <= 0.03);
        auto flat = ks_vs_canonical(space, PLFunction::constant(0.5), p, r);
        CHECK(flat.ks_energy == 0.0);
        CHECK(flat.form_energy == 0.0);
    }
    CHECK_THROWS_AS(ks_vs_canonical(SampledSpace::torus(32), PLFunction::identity(), 2.0, {0.2}),
                    std::invalid_argument);
}

TEST_CASE("kernel invariants") {
    auto space = SampledSpace::interval(1500);
    auto u = space.sample([](double x) { return std::sin(5 * x) + 0.3 * std::abs(x - 0.4); });
    for (double p : {1.5, 2.0, 3.0}) {
        KSKernel k{p, 0.03, {}};
        double j = ks_energy(space, u, k);
        for (double a : {-2.5, 0.3, 4.0}) {
            std::vector<double> au(u);
            for (double& v : au) v *= a;
            CHECK(ks_energy(space, au, k) == doctest::Approx(std::pow(std::abs(a), p) * j).epsilon(1e-12));
        }
        KSKernel small{p, 0.03, IntervalSet::closed(0.2, 0.5)};
        KSKernel large{p, 0.03, IntervalSet::closed(0.1, 0.7)};
        CHECK(ks_energy(space, u, small) <= ks_energy(space, u, large));
        CHECK(ks_energy(space, u, large) <= j);
        std::vector<double> cu(u);
        for (double& v : cu) v = std::clamp(v, -0.2, 0.4);
        CHECK(ks_energy(space, cu, k) <= j);
    }
}

TEST_CASE("tiling does not change the sums") {
    auto space = SampledSpace::interval(9000);
    auto u = space.sample([](double x) { return std::exp(x) * std::cos(7 * x); });
    KSKernel k{2.5, 0.01, {}};
    double one = ks_energy(space, u, k, 1);
    CHECK(ks_energy(space, u, k, 3) == one);
    CHECK(ks_energy(space, u, k, 8) == one);
    auto torus = SampledSpace::torus(48);
    auto v = torus.sample([](double x) { return std::sin(2 * M_PI * x); });
    KSKernel kt{2.0, 0.15, {}};
    CHECK(ks_energy(torus, v, kt, 1) == ks_energy(torus, v, kt, 4));
}

TEST_CASE("torus scans") {
    // In two dimensions the disk average of (h . e)^2 is r^2 / 4.
    auto torus = SampledSpace::torus(192);
    auto u = torus.sample([](double x) { return std::sin(2 * M_PI * x); });
    auto scan = ks_limit_scan(torus, u, 2.0, grid_scales(torus, 0.16, 3));
    const double oracle = 2 * M_PI * M_PI / 4;
    CHECK(std::abs(scan.extrapolated - oracle) <= 0.03 * oracle);
    CHECK_THROWS_AS(SampledSpace::torus(600), std::invalid_argument);
    CHECK_THROWS_AS(SampledSpace::interval(1), std::invalid_argument);
}
