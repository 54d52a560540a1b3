#include <doctest.h>

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "pel/energy_forms.hpp"
#include "pel/sampler.hpp"

using namespace pel;

namespace {

// p = 2 harmonic extension by a dense solve of the graph Laplacian.
std::vector<double> linear_harmonic(const SGGraph& g, std::array<double, 3> boundary) {
    const int n = static_cast<int>(g.vertex_count);
    Eigen::MatrixXd lap = Eigen::MatrixXd::Zero(n, n);
    for (auto [a, b] : g.edges) {
        lap(a, a) += 1;
        lap(b, b) += 1;
        lap(a, b) -= 1;
        lap(b, a) -= 1;
    }
    const int m = n - 3;
    Eigen::MatrixXd aii = lap.bottomRightCorner(m, m);
    Eigen::VectorXd rhs = -lap.bottomLeftCorner(m, 3) * Eigen::Vector3d(boundary[0], boundary[1], boundary[2]);
    Eigen::VectorXd x = aii.ldlt().solve(rhs);
    std::vector<double> out(boundary.begin(), boundary.end());
    for (int i = 0; i < m; ++i) out.push_back(x(i));
    return out;
}

}  // namespace

TEST_CASE("PL energies") {
    for (double p : {1.5, 2.0, 3.0, 4.5}) CHECK(PLIntervalForm(p).energy(PLFunction::identity()) == 1.0);
    CHECK(PLIntervalForm(2).energy(PLFunction::tent()) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(PLIntervalForm(2).energy(PLFunction::constant(3)) == 0.0);
    CHECK_THROWS_AS(PLIntervalForm(1.0), std::invalid_argument);
    CHECK_THROWS_AS(PLIntervalForm(2, {{0, 0.5, 1}}), std::invalid_argument);
}

TEST_CASE("energy derivative") {
    Sampler s(21);
    for (double p : {1.5, 2.0, 3.0}) {
        PLIntervalForm form(p, {{0, 0.3, 2}, {0.3, 1, 0.5}});
        auto u = s.pl_function();
        CHECK(form.energy_drv(u, u) == doctest::Approx(form.energy(u)).epsilon(1e-13));
        CHECK(form.energy_drv(u, PLFunction::constant(2)) == 0.0);
    }
    CHECK(PLIntervalForm(2).energy_drv(PLFunction::identity(), PLFunction::identity()) == 1.0);
}

TEST_CASE("energy derivative against extrapolated differences") {
    for (double p : {1.5, 2.0, 3.0}) {
        PLIntervalForm form(p);
        for (std::uint64_t k = 0; k < 10; ++k) {
            Sampler s = Sampler(22).child(k);
            auto u = s.sloped_pl_function(0.05), v = s.pl_function();
            auto diff = [&](double t) {
                return (form.energy(u + t * v) - form.energy(u + (-t) * v)) / (2 * p * t);
            };
            double d1 = diff(1e-3), d2 = diff(5e-4);
            double rich = (4 * d2 - d1) / 3;
            double exact = form.energy_drv(u, v);
            double scale = std::max(std::abs(exact), 1e-3 * form.energy(u));
            CHECK(std::abs(rich - exact) <= (p >= 2 ? 1e-6 : 1e-4) * scale);
        }
    }
}

TEST_CASE("graph and gasket energies") {
    GraphForm g(3, {1, 1, 1}, {{0, 1, 2.0}, {1, 2, 0.5}});
    std::vector<double> f{0, 1, 3};
    CHECK(g.energy(f) == doctest::Approx(2.0 + 0.5 * 8.0));
    CHECK_THROWS_AS(g.energy(std::vector<double>{1, 2}), std::invalid_argument);
    for (int level : {0, 1, 2, 3}) {
        auto sg = SGGraph::build(level);
        CHECK(sg.vertex_count == static_cast<std::size_t>(3 * (std::pow(3, level) + 1) / 2));
        CHECK(sg.cells.size() == static_cast<std::size_t>(std::pow(3, level)));
        CHECK(sg.edges.size() == 3 * sg.cells.size());
    }
    SGForm sg(2, 2, 5.0 / 3.0);
    std::vector<double> lin(sg.vertex_count(), 0.0);
    CHECK(sg.energy(lin) == 0.0);
}

TEST_CASE("Clarkson slacks at the equality cases") {
    for (double p : {1.5, 2.0, 3.0}) {
        auto zero_v = clarkson_slacks(p, 1.3, 0.0, 1.3, 1.3);
        for (double x : zero_v)
            if (!std::isnan(x)) CHECK(std::abs(x) <= 1e-15);
    }
    auto same = clarkson_slacks(2.0, 1.0, 1.0, 2.0, 0.0);
    CHECK(std::abs(same[3]) <= 1e-15);
    Sampler s(23);
    auto rep = check_clarkson(EnergyForm(PLIntervalForm(3.0)), s, 200);
    CHECK(rep.pass);
    CHECK(std::isnan(rep.worst_slack[0]));
    CHECK(rep.worst_slack[2] >= -1e-9);
    Sampler s2(24);
    CHECK(check_clarkson(EnergyForm(GraphForm(1.5, {1, 1, 1}, {{0, 1, 1}, {1, 2, 1}, {0, 2, 1}})), s2, 200).pass);
}

TEST_CASE("assumption checklist") {
    Sampler s(25);
    auto pl = check_assumptions(EnergyForm(PLIntervalForm(2.0)), s, 50);
    CHECK(pl.pass());
    Sampler s2(26);
    auto gr = check_assumptions(EnergyForm(GraphForm(2.0, {1, 1, 1}, {{0, 1, 1}, {1, 2, 1}})), s2, 50);
    CHECK(gr.pass());
    bool skipped = false;
    for (const auto& it : gr.items)
        if (it.name.find("locality") != std::string::npos) skipped = it.status == "skipped: model deviation";
    CHECK(skipped);
}

TEST_CASE("strong locality, contractions and seminorm properties") {
    for (double p : {1.5, 2.0, 3.0}) {
        PLIntervalForm form(p, {{0, 0.5, 1}, {0.5, 1, 3}});
        auto f = PLFunction({0, 0.1, 0.2, 0.3, 1}, {0, 0, 0.7, 0, 0});
        auto g = PLFunction({0, 0.5, 0.7, 0.9, 1}, {0, 0, -1.2, 0, 0});
        CHECK(form.energy(f + g) == doctest::Approx(form.energy(f) + form.energy(g)).epsilon(1e-15));
        auto half = compose(PLMap::scale(0.5, -2, 2), f);
        CHECK(form.energy(half) == doctest::Approx(std::pow(2.0, -p) * form.energy(f)).epsilon(1e-14));
        auto low = PLFunction({0, 0.4, 1}, {0.2, 0.9, 0.1});
        CHECK(form.energy(cut(low, 0, 1)) == doctest::Approx(form.energy(low)).epsilon(1e-15));
        for (std::uint64_t k = 0; k < 30; ++k) {
            Sampler s = Sampler(27).child(k);
            auto u = s.pl_function(), v = s.pl_function();
            double a = s.uniform(-3, 3), c = s.uniform(0, 2);
            CHECK(form.energy(a * u) == doctest::Approx(std::pow(std::abs(a), p) * form.energy(u)).epsilon(1e-12));
            double ru = std::pow(form.energy(u), 1 / p), rv = std::pow(form.energy(v), 1 / p);
            CHECK(std::pow(form.energy(u + v), 1 / p) <= ru + rv + 1e-9);
            CHECK(std::pow(form.energy(pl_max(u, v + (-c))), 1 / p) <= ru + rv + 1e-9);
            CHECK(form.energy(cut(u, 0, 1)) <= form.energy(u) + 1e-9);
            auto phi = s.lipschitz_map(-2.5, 2.5, 1.0, 6);
            CHECK(form.energy(compose(phi, u)) <= form.energy(u) * (1 + 1e-12) + 1e-12);
        }
    }
}

TEST_CASE("fold identity") {
    PLIntervalForm form(2.5);
    Sampler s(28);
    auto f = s.pl_function();
    std::vector<double> part{f.min_value() - 0.1, 0.0, f.max_value() + 0.1};
    auto rep = check_fold_identity(form, f, PLMap::identity(part.front(), part.back()), part);
    CHECK(rep.pass);
    CHECK(rep.lhs == doctest::Approx(form.energy(f)).epsilon(1e-12));
    auto id = PLFunction::identity();
    auto r2 = check_fold_identity(form, id, PLMap::triangle(1, 0, 1), std::vector<double>{0, 0.5, 1});
    CHECK(r2.pass);
    CHECK(r2.lhs == doctest::Approx(1.0));
    CHECK(r2.rhs == doctest::Approx(1.0));
    CHECK(r2.max_fold_level >= 10);
    auto phi1 = PLMap({0, 0.5, 1}, {0, 0.25, 0});
    CHECK(form.energy(compose(phi1, id)) == doctest::Approx(std::pow(0.5, 2.5)));
    CHECK_THROWS_AS(check_fold_identity(form, f, PLMap::identity(-3, 3), std::vector<double>{0.0, 0.1}),
                    std::invalid_argument);
}

TEST_CASE("gasket harmonic extension") {
    auto flat = sg_harmonic_extension(3.0, {0.4, 0.4, 0.4}, 2, 1e-12);
    for (double v : flat.values) CHECK(v == doctest::Approx(0.4).epsilon(1e-12));
    CHECK(flat.energy <= 1e-20);

    auto h = sg_harmonic_extension(2.0, {1, 0, 0}, 1, 1e-12);
    auto oracle = linear_harmonic(SGGraph::build(1), {1, 0, 0});
    for (std::size_t i = 0; i < oracle.size(); ++i) CHECK(std::abs(h.values[i] - oracle[i]) <= 1e-10);
    std::vector<double> inner(h.values.begin() + 3, h.values.end());
    std::sort(inner.begin(), inner.end());
    CHECK(inner[0] == doctest::Approx(0.2));
    CHECK(inner[1] == doctest::Approx(0.4));
    CHECK(inner[2] == doctest::Approx(0.4));
    CHECK(h.energy == doctest::Approx(1.2));

    auto deep = sg_harmonic_extension(2.0, {0.3, -1, 2}, 3, 1e-12);
    auto deep_oracle = linear_harmonic(SGGraph::build(3), {0.3, -1, 2});
    for (std::size_t i = 0; i < deep_oracle.size(); ++i) CHECK(std::abs(deep.values[i] - deep_oracle[i]) <= 1e-10);

    const double tol = 1e-10;
    auto g = SGGraph::build(2);
    Sampler s(29);
    auto a = sg_harmonic_extension(3.0, {1, 0, 0}, 2, tol, s.vector(g.vertex_count, -1, 1));
    auto b = sg_harmonic_extension(3.0, {1, 0, 0}, 2, tol, s.vector(g.vertex_count, -1, 1));
    for (std::size_t i = 0; i < a.values.size(); ++i) CHECK(std::abs(a.values[i] - b.values[i]) <= 10 * tol);
}

TEST_CASE("gasket renormalization") {
    CHECK(sg_graph_energy(SGGraph::build(0), std::vector<double>{1, 0, 0}, 2.0) == 2.0);
    auto r = sg_renormalization(2.0, 1e-12);
    CHECK(std::abs(r.rho - 5.0 / 3.0) <= 1e-8);
    CHECK(r.residual <= 1e-8);
    CHECK(sg_renormalization_constant(2.0) == doctest::Approx(5.0 / 3.0).epsilon(1e-9));
}
