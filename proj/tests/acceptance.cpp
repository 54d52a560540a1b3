// Acceptance run: one PASS/FAIL line per criterion; exit status 1 if any fails.
// Usage: acceptance [output-dir]

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <thread>

#include <Eigen/Dense>

#include "pel/io.hpp"
#include "pel/korevaar_schoen.hpp"
#include "pel/laws.hpp"
#include "pel/sierpinski.hpp"

using namespace pel;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kSeed = 20240611;

int jobs() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, x);
    return buf;
}

LawOptions options(MeasureRoute route, int trials) {
    LawOptions o;
    o.route = route;
    o.trials = trials;
    o.jobs = jobs();
    return o;
}

// Runs a law and folds it into an outcome; the detail keeps the worst case.
void fold(Outcome& out, const LawReport& r, double required) {
    bool ok = r.pass && r.worst_slack >= -required;
    if (!ok) out.pass = false;
    out.detail += r.law + "[" + r.route + " p=" + fmt("%g", std::stod(r.form.substr(r.form.find("p=") + 2))) +
                  "] " + fmt("%.2e", r.worst_slack) + (ok ? "" : " FAIL at " + r.witness) + "; ";
}

struct MeasureRow {
    double p;
    int index;
    double energy;
    double mass;
    double gap;
};

std::vector<MeasureRow> construction_workload() {
    std::vector<MeasureRow> rows;
    for (double p : {1.5, 2.0, 3.0}) {
        PLIntervalForm form(p);
        for (int i = 0; i < 20; ++i) {
            auto f = Sampler(kSeed).child(static_cast<std::uint64_t>(i)).pl_function(10);
            auto built = energy_measure(form, f, 64);
            auto ref = reference_measure(form, f);
            rows.push_back({p, i, form.energy(f), built.total_mass, sup_relative_gap(built, ref, 64)});
        }
    }
    return rows;
}

void write_workload(const fs::path& path, const std::vector<MeasureRow>& rows) {
    CsvWriter csv(path, nlohmann::json{{"seed", kSeed}, {"resolution", 64}},
                  {"p", "index", "energy", "total_mass", "sup_gap"});
    for (const auto& r : rows)
        csv.row({format_number(r.p), std::to_string(r.index), format_number(r.energy), format_number(r.mass),
                 format_number(r.gap)});
}

Outcome construction_correctness() {
    auto t0 = std::chrono::steady_clock::now();
    auto rows = construction_workload();
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    double worst_gap = 0, worst_mass = 0;
    for (const auto& r : rows) {
        worst_gap = std::max(worst_gap, r.gap);
        worst_mass = std::max(worst_mass, r.energy > 0 ? std::abs(r.mass - r.energy) / r.energy : r.mass);
    }
    Outcome o;
    o.pass = worst_gap <= 1e-4 && worst_mass <= 1e-6 && secs <= 60;
    o.detail = "60 functions, sup density gap " + fmt("%.2e", worst_gap) + ", mass gap " + fmt("%.2e", worst_mass) +
               ", " + fmt("%.1f", secs) + " s";
    return o;
}

Outcome chain_rule() {
    Outcome o{true, ""};
    for (double p : {1.5, 2.0, 3.0}) fold(o, law_chain_rule(PLIntervalForm(p), kSeed, options(MeasureRoute::construction, 20)), 1e-4);
    return o;
}

Outcome clarkson_triangle() {
    Outcome o{true, ""};
    for (double p : {1.5, 3.0}) {
        PLIntervalForm form(p);
        fold(o, law_measure_clarkson(form, kSeed, options(MeasureRoute::oracle, 200)), 1e-9);
        fold(o, law_measure_triangle(form, kSeed, options(MeasureRoute::oracle, 200)), 1e-9);
        fold(o, law_measure_clarkson(form, kSeed, options(MeasureRoute::construction, 200)), 1e-4);
        fold(o, law_measure_triangle(form, kSeed, options(MeasureRoute::construction, 200)), 1e-4);
    }
    return o;
}

Outcome locality() {
    Outcome o{true, ""};
    for (double p : {1.5, 2.0, 3.0}) fold(o, law_locality(PLIntervalForm(p), kSeed, options(MeasureRoute::construction, 100)), 1e-6);
    return o;
}

Outcome functional_identity() {
    Outcome o{true, ""};
    for (double p : {2.0, 3.0}) fold(o, law_functional_identity(PLIntervalForm(p), kSeed, options(MeasureRoute::oracle, 20)), 1e-3);
    auto t = functional_identity_terms(PLIntervalForm(2.0), PLFunction::identity(), PLFunction::identity(), 8);
    bool ok = std::abs(t.lhs - 0.5) <= 1e-6 && std::abs(t.rhs - 0.5) <= 1e-6;
    o.pass = o.pass && ok;
    o.detail += "x*x instance lhs " + fmt("%.15g", t.lhs) + " rhs " + fmt("%.15g", t.rhs);
    return o;
}

Outcome domination() {
    Outcome o{true, ""};
    const std::vector<std::pair<std::vector<WeightCell>, std::vector<WeightCell>>> pairs{
        {{{0, 1, 1}}, {{0, 0.5, 2}, {0.5, 1, 1}}},
        {{{0, 1, 1}}, {{0, 1, 2}}},
        {{{0, 0.3, 0.5}, {0.3, 1, 1}}, {{0, 0.6, 1}, {0.6, 1, 3}}},
    };
    for (const auto& [lo, hi] : pairs)
        fold(o, law_domination(PLIntervalForm(2.5, lo), PLIntervalForm(2.5, hi), kSeed,
                               options(MeasureRoute::construction, 50)),
             1e-9);
    return o;
}

Outcome two_variable() {
    Outcome o{true, ""};
    for (double p : {1.5, 2.0, 3.0})
        fold(o, law_two_variable(PLIntervalForm(p), kSeed, options(MeasureRoute::construction, 20)), p >= 2 ? 1e-3 : 1e-2);
    return o;
}

Outcome image_density() {
    Outcome o{true, ""};
    for (double p : {1.5, 2.0, 3.0}) fold(o, law_image_density(PLIntervalForm(p), kSeed, options(MeasureRoute::construction, 20)), 1e-8);
    return o;
}

Outcome korevaar_schoen() {
    auto t0 = std::chrono::steady_clock::now();
    auto space = SampledSpace::interval(20000);
    auto r = grid_scales(space, 0.08, 5);
    auto lin = space.sample([](double x) { return x; });
    auto step = space.sample([](double x) { return x < 0.5 ? 0.0 : 1.0; });
    Outcome o{true, ""};
    for (double p : {2.0, 3.0}) {
        auto scan = ks_limit_scan(space, lin, p, r, jobs());
        double dev = std::abs(scan.extrapolated * (p + 1) - 1);
        auto cl = ks_vs_canonical(space, PLFunction::identity(), p, r, jobs());
        auto ct = ks_vs_canonical(space, PLFunction::tent(), p, r, jobs());
        double canon = std::max({cl.energy_deviation, cl.measure_deviation, ct.energy_deviation, ct.measure_deviation});
        auto st = ks_limit_scan(space, step, p, r, jobs());
        bool ok = dev <= 0.02 && canon <= 0.03 && st.divergent;
        o.pass = o.pass && ok;
        o.detail += "p=" + fmt("%g", p) + " limit dev " + fmt("%.2e", dev) + ", canonical dev " + fmt("%.2e", canon) +
                    ", step slope " + fmt("%.3f", st.loglog_slope) + (st.divergent ? " divergent" : " NOT flagged") +
                    "; ";
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    o.pass = o.pass && secs <= 120;
    o.detail += fmt("%.1f", secs) + " s";
    return o;
}

// Minimum level-1 extension energy of (1,0,0) at p = 2 by a linear solve,
// against the base triangle energy 2.
double linear_solve_rho() {
    auto g = SGGraph::build(1);
    const int n = static_cast<int>(g.vertex_count);
    Eigen::MatrixXd lap = Eigen::MatrixXd::Zero(n, n);
    for (auto [a, b] : g.edges) {
        lap(a, a) += 1;
        lap(b, b) += 1;
        lap(a, b) -= 1;
        lap(b, a) -= 1;
    }
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    x(0) = 1;
    x.tail(n - 3) = lap.bottomRightCorner(n - 3, n - 3).ldlt().solve(-lap.bottomLeftCorner(n - 3, 3) * x.head(3));
    double e = x.dot(lap * x);
    return 2.0 / e;
}

Outcome sg_plumbing() {
    double oracle = linear_solve_rho();
    auto r2 = sg_renormalization(2.0, 1e-12);
    auto r3 = sg_renormalization(3.0, 1e-10);
    Outcome o;
    o.pass = std::abs(r2.rho - oracle) <= 1e-8 && r3.residual <= 1e-6;
    o.detail = "rho_2 " + fmt("%.12f", r2.rho) + " vs linear solve " + fmt("%.12f", oracle) + "; rho_3 " +
               fmt("%.9f", r3.rho) + ", fixed-point residual " + fmt("%.2e", r3.residual) + " after " +
               std::to_string(r3.iterations) + " iterations";
    return o;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

int run(const std::string& args) {
    std::string cmd = std::string(PELAB_PATH) + " " + args + " > /dev/null 2>&1";
    int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome determinism(const fs::path& out) {
    Outcome o{true, ""};
    int compared = 0;
    auto a = out / "replay_a", b = out / "replay_b";
    fs::remove_all(a);
    fs::remove_all(b);
    fs::create_directories(a);
    fs::create_directories(b);
    write_workload(a / "construction.csv", construction_workload());
    write_workload(b / "construction.csv", construction_workload());
    std::ofstream(out / "replay.json") << R"({"seed": )" << kSeed
                                        << R"(, "route": "construction", "trials": 10, "targets": ["random", "tent"], )"
                                        << R"("ks": {"n": 20000, "p": 3}, "p_list": [2]})";
    const std::string cfg = " --config " + (out / "replay.json").string();
    for (const char* cmd : {"check-laws", "build-measure", "ks-energy", "sg-renorm"}) {
        int ca = run(std::string(cmd) + cfg + " --jobs 1 --out " + a.string());
        int cb = run(std::string(cmd) + cfg + " --jobs " + std::to_string(std::max(2, jobs())) + " --out " + b.string());
        if (ca != 0 || cb != 0) {
            o.pass = false;
            o.detail += std::string(cmd) + " exit " + std::to_string(ca) + "/" + std::to_string(cb) + "; ";
        }
    }
    for (const auto& e : fs::directory_iterator(a)) {
        if (e.path().extension() != ".csv") continue;
        ++compared;
        if (slurp(e.path()) != slurp(b / e.path().filename())) {
            o.pass = false;
            o.detail += e.path().filename().string() + " differs; ";
        }
    }
    o.pass = o.pass && compared >= 7;
    o.detail += std::to_string(compared) + " CSV files byte-identical across two runs";
    return o;
}

}  // namespace

int main(int argc, char** argv) {
    fs::path out = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "pelab_acceptance";
    fs::create_directories(out);
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"construction correctness", construction_correctness},
        {"chain rule", chain_rule},
        {"measure Clarkson and triangle", clarkson_triangle},
        {"locality", locality},
        {"functional identity", functional_identity},
        {"domination", domination},
        {"two-variable measure", two_variable},
        {"image density", image_density},
        {"Korevaar-Schoen scans", korevaar_schoen},
        {"gasket renormalization", sg_plumbing},
        {"determinism", [&] { return determinism(out); }},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        if (!o.pass) ++failed;
        std::printf("%s %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), o.detail.c_str());
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
