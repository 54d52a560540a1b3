// pelab: reproducible experiments on p-energy forms and their energy measures.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pel/io.hpp"
#include "pel/korevaar_schoen.hpp"
#include "pel/laws.hpp"
#include "pel/sierpinski.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace pel;

namespace {

enum Exit { kPass = 0, kLawFailure = 1, kConfigError = 2, kNonConvergence = 3 };

struct Globals {
    std::string config;
    std::string out = ".";
    std::optional<std::uint64_t> seed;
    int jobs = 1;
    bool plot = false;
};

struct KsFlags {
    std::optional<std::string> space;
    std::optional<std::size_t> n;
    std::optional<double> p;
    std::optional<std::vector<double>> r_list;
    std::optional<std::string> profile;
    std::optional<std::string> profile_file;
};

std::string num(double x) { return format_number(x); }

ExperimentConfig resolve_config(const Globals& g, const KsFlags* ks) {
    json raw = json::object();
    if (!g.config.empty()) {
        std::ifstream in(g.config);
        if (!in) throw ConfigError("cannot open config " + g.config);
        try {
            raw = json::parse(in);
        } catch (const json::parse_error& e) {
            throw ConfigError(std::string("config is not valid JSON: ") + e.what());
        }
        if (!raw.is_object()) throw ConfigError("config must be a JSON object");
    } else if (!g.seed) {
        throw ConfigError("seed is mandatory: pass --seed or a config with a seed");
    }
    if (ks) {
        json& k = raw["ks"];
        if (k.is_null()) k = json::object();
        if (ks->space) k["space"] = *ks->space;
        if (ks->n) k["n"] = *ks->n;
        if (ks->p) k["p"] = *ks->p;
        if (ks->r_list) k["r_list"] = *ks->r_list;
        if (ks->profile) k["profile"] = *ks->profile;
        if (ks->profile_file) k["profile_file"] = *ks->profile_file;
    }
    return parse_config(raw, g.seed);
}

json header(const std::string& command, const ExperimentConfig& cfg) {
    json h = to_json(cfg);
    h["command"] = command;
    return h;
}

void dump_trace(const fs::path& out, const json& head, const ConvergenceTrace& tr) {
    CsvWriter csv(out / "nonconvergence_trace.csv", head, {"n", "energy", "inf_so_far", "excess_bound"});
    for (std::size_t i = 0; i < tr.n.size(); ++i)
        csv.row({std::to_string(tr.n[i]), num(tr.energy[i]), num(tr.inf_so_far[i]),
                 i < tr.excess_bound.size() ? num(tr.excess_bound[i]) : "nan"});
}

int cmd_validate_form(const Globals& g, const ExperimentConfig& cfg) {
    auto head = header("validate-form", cfg);
    auto form = make_form(cfg.form);
    Sampler sampler(cfg.seed);
    auto ar = check_assumptions(form, sampler, cfg.assumption_trials);
    auto cr = check_clarkson(form, sampler, cfg.clarkson_pairs);
    CsvWriter csv(fs::path(g.out) / "validate_form.csv", head, {"check", "status", "worst_slack", "note"});
    for (const auto& it : ar.items) csv.row({it.name, it.status, num(it.worst_slack), it.note});
    for (int k = 0; k < 4; ++k) {
        double s = cr.worst_slack[static_cast<std::size_t>(k)];
        std::string status = std::isnan(s) ? "skipped: not applicable at this p" : (s >= -1e-9 ? "pass" : "fail");
        csv.row({"clarkson CI" + std::to_string(k + 1), status, num(s), std::to_string(cr.pairs) + " pairs"});
    }
    bool pass = ar.pass() && cr.pass;
    std::cout << "validate-form " << ar.kind << " p=" << num(ar.p) << ": " << (pass ? "PASS" : "FAIL") << '\n';
    for (const auto& it : ar.items) std::cout << "  " << it.name << ": " << it.status << '\n';
    return pass ? kPass : kLawFailure;
}

int cmd_build_measure(const Globals& g, const ExperimentConfig& cfg) {
    auto head = header("build-measure", cfg);
    auto form = make_pl_form(cfg.form);
    fs::path out(g.out);
    CsvWriter dens(out / "measure_density.csv", head, {"target", "cell", "lo", "hi", "built", "reference"});
    CsvWriter summ(out / "measure_summary.csv", head, {"target", "energy", "total_mass", "sup_gap", "pass"});
    bool pass = true;
    for (std::size_t t = 0; t < cfg.targets.size(); ++t) {
        auto f = make_target(cfg.targets[t], cfg.seed, t);
        EnergyMeasure built;
        try {
            built = energy_measure(form, f, cfg.resolution, cfg.schedule);
        } catch (const TraceNonConvergence& e) {
            dump_trace(out, head, e.trace);
            throw;
        }
        auto ref = reference_measure(form, f);
        double gap = sup_relative_gap(built, ref, cfg.resolution);
        bool ok = gap <= cfg.gap_tolerance;
        pass = pass && ok;
        auto a = cell_averages(built, cfg.resolution), b = cell_averages(ref, cfg.resolution);
        const std::string name = cfg.targets[t].name + "#" + std::to_string(t);
        for (int k = 0; k < cfg.resolution; ++k) {
            auto i = static_cast<std::size_t>(k);
            dens.row({name, std::to_string(k), num(static_cast<double>(k) / cfg.resolution),
                      num(static_cast<double>(k + 1) / cfg.resolution), num(a[i]), num(b[i])});
        }
        summ.row({name, num(form.energy(f)), num(built.total_mass), num(gap), ok ? "1" : "0"});
        std::cout << name << ": E=" << num(form.energy(f)) << " mu(X)=" << num(built.total_mass)
                  << " sup gap=" << num(gap) << (ok ? " PASS" : " FAIL") << '\n';
        if (g.plot) {
            SvgChart ch{"energy density, " + name, "x", "density", false, false, {}};
            std::vector<double> xs;
            for (int k = 0; k < cfg.resolution; ++k) xs.push_back((k + 0.5) / cfg.resolution);
            ch.series.push_back({"constructed", xs, a});
            ch.series.push_back({"reference", xs, b});
            write_svg(out / ("measure_density_" + std::to_string(t) + ".svg"), ch);
        }
    }
    return pass ? kPass : kLawFailure;
}

int cmd_check_laws(const Globals& g, const ExperimentConfig& cfg) {
    auto head = header("check-laws", cfg);
    auto form = make_pl_form(cfg.form);
    LawOptions opt;
    opt.trials = cfg.trials;
    opt.route = parse_route(cfg.route);
    opt.sched = cfg.schedule;
    opt.jobs = g.jobs;
    opt.refine = cfg.refine;
    auto ids = cfg.laws.empty() ? law_ids() : cfg.laws;
    fs::path out(g.out);
    CsvWriter rows(out / "law_trials.csv", head, {"law", "trial", "slack", "tolerance", "pass"});
    CsvWriter summ(out / "law_summary.csv", head,
                   {"law", "form", "route", "seed", "trials", "worst_slack", "tolerance", "pass", "witness"});
    bool pass = true;
    std::cout << "law                      route         worst slack   tolerance  result\n";
    for (const auto& id : ids) {
        LawReport r;
        if (id == "domination" && cfg.dominating_weight)
            r = law_domination(form, PLIntervalForm(cfg.form.p, *cfg.dominating_weight), cfg.seed, opt);
        else
            r = run_law(id, form, cfg.seed, opt);
        for (std::size_t t = 0; t < r.trial_slack.size(); ++t)
            rows.row({id, std::to_string(t), num(r.trial_slack[t]), num(r.tolerance),
                      r.trial_slack[t] >= -r.tolerance ? "1" : "0"});
        summ.row({id, r.form, r.route, std::to_string(r.seed), std::to_string(r.trials), num(r.worst_slack),
                  num(r.tolerance), r.pass ? "1" : "0", r.witness});
        pass = pass && r.pass;
        char line[160];
        std::snprintf(line, sizeof line, "%-24s %-12s %12.4e %11.1e  %s", id.c_str(), r.route.c_str(), r.worst_slack,
                      r.tolerance, r.pass ? "PASS" : "FAIL");
        std::cout << line << '\n';
    }
    return pass ? kPass : kLawFailure;
}

std::vector<double> ks_profile(const SampledSpace& space, const KSConfig& k) {
    if (k.profile == "linear") return space.sample([](double x) { return x; });
    if (k.profile == "sine") return space.sample([](double x) { return std::sin(2.0 * M_PI * x); });
    if (k.profile == "tent") return space.sample(PLFunction::tent());
    if (k.profile == "step") return space.sample([](double x) { return x < 0.5 ? 0.0 : 1.0; });
    std::ifstream in(k.profile_file);
    if (!in) throw ConfigError("cannot open profile file " + k.profile_file);
    std::vector<double> u;
    double v;
    while (in >> v) u.push_back(v);
    if (!in.eof()) throw ConfigError("profile file holds a non-numeric entry");
    if (u.size() != space.size())
        throw ConfigError("profile file has " + std::to_string(u.size()) + " values, the space has " +
                          std::to_string(space.size()) + " points");
    return u;
}

int cmd_ks_energy(const Globals& g, const ExperimentConfig& cfg) {
    auto head = header("ks-energy", cfg);
    const auto& k = cfg.ks;
    SampledSpace space = k.space == "interval" ? SampledSpace::interval(k.n) : SampledSpace::torus(k.n);
    auto r = k.r_list.empty() ? grid_scales(space, 0.08, 5) : k.r_list;
    auto u = ks_profile(space, k);
    std::optional<CanonicalComparison> canon;
    KSScan scan;
    if (space.kind() == SpaceKind::interval && (k.profile == "linear" || k.profile == "tent")) {
        canon = ks_vs_canonical(space, k.profile == "linear" ? PLFunction::identity() : PLFunction::tent(), k.p, r,
                                g.jobs);
        scan = canon->scan;
    } else {
        scan = ks_limit_scan(space, u, k.p, r, g.jobs);
    }
    fs::path out(g.out);
    CsvWriter csv(out / "ks_scan.csv", head, {"r", "J", "sup_so_far"});
    for (std::size_t i = 0; i < scan.r.size(); ++i) csv.row({num(scan.r[i]), num(scan.J[i]), num(scan.sup_so_far[i])});
    CsvWriter summ(out / "ks_summary.csv", head, {"statistic", "value"});
    summ.row({"extrapolated", num(scan.extrapolated)});
    summ.row({"liminf_estimate", num(scan.liminf_estimate)});
    summ.row({"sup", num(scan.sup_so_far.back())});
    summ.row({"dispersion", num(scan.dispersion)});
    summ.row({"loglog_slope", num(scan.loglog_slope)});
    summ.row({"linear_coefficient", num(scan.linear_coefficient)});
    summ.row({"divergent", scan.divergent ? "1" : "0"});
    if (canon) {
        summ.row({"ks_energy", num(canon->ks_energy)});
        summ.row({"form_energy", num(canon->form_energy)});
        summ.row({"measure_total", num(canon->measure_total)});
        summ.row({"energy_deviation", num(canon->energy_deviation)});
        summ.row({"measure_deviation", num(canon->measure_deviation)});
    }
    std::cout << "ks-energy " << space.name() << " n=" << k.n << " p=" << num(k.p) << " profile=" << k.profile
              << ": limit " << num(scan.extrapolated) << ", dispersion " << num(scan.dispersion)
              << (scan.divergent ? ", divergent" : "") << '\n';
    if (g.plot) {
        SvgChart ch{"J_{p,r} scan, " + k.profile, "r", "J", true, true, {{"J", scan.r, scan.J}}};
        write_svg(out / "ks_scan.svg", ch);
    }
    return kPass;
}

int cmd_sg(const Globals& g, const ExperimentConfig& cfg) {
    auto head = header("sg-renorm", cfg);
    fs::path out(g.out);
    CsvWriter csv(out / "sg_renorm.csv", head, {"p", "rho", "residual", "iterations"});
    SvgChart ch{"renormalization iterates", "iteration", "rho", false, false, {}};
    for (double p : cfg.p_list) {
        auto r = sg_renormalization(p, cfg.sg_tol);
        csv.row({num(p), num(r.rho), num(r.residual), std::to_string(r.iterations)});
        std::cout << "p=" << num(p) << " rho=" << num(r.rho) << " residual=" << num(r.residual)
                  << " iterations=" << r.iterations << '\n';
        std::vector<double> it;
        for (std::size_t i = 0; i < r.rho_history.size(); ++i) it.push_back(static_cast<double>(i + 1));
        ch.series.push_back({"p=" + num(p), it, r.rho_history});
    }
    if (g.plot) write_svg(out / "sg_renorm.svg", ch);
    return kPass;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"pelab: energy measures of p-energy forms, their laws, and Korevaar-Schoen scans"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--config", g.config, "JSON experiment config")->check(CLI::ExistingFile);
    app.add_option("--out", g.out, "output directory");
    app.add_option("--seed", g.seed, "sampler seed, overrides the config");
    app.add_option("--jobs", g.jobs, "worker threads")->check(CLI::PositiveNumber);
    app.add_flag("--plot", g.plot, "write SVG charts");

    auto* validate = app.add_subcommand("validate-form", "check the form surrogates and Clarkson inequalities");
    auto* build = app.add_subcommand("build-measure", "construct energy densities and compare with w|f'|^p");
    auto* laws = app.add_subcommand("check-laws", "run the energy-measure laws on seeded samples");
    auto* ks = app.add_subcommand("ks-energy", "scan J_{p,r} as r decreases");
    auto* sg = app.add_subcommand("sg-renorm", "gasket renormalization constants");

    KsFlags kf;
    ks->add_option("--space", kf.space, "interval or torus");
    ks->add_option("--n", kf.n, "grid points (interval) or side (torus)");
    ks->add_option("--p", kf.p, "exponent");
    ks->add_option("--r-list", kf.r_list, "decreasing scales")->delimiter(',');
    ks->add_option("--profile", kf.profile, "linear, sine, tent, step or file");
    ks->add_option("--profile-file", kf.profile_file, "values, one per grid point");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kPass : kConfigError;
    }

    try {
        fs::create_directories(g.out);
        if (ks->parsed()) return cmd_ks_energy(g, resolve_config(g, &kf));
        auto cfg = resolve_config(g, nullptr);
        if (validate->parsed()) return cmd_validate_form(g, cfg);
        if (build->parsed()) return cmd_build_measure(g, cfg);
        if (laws->parsed()) return cmd_check_laws(g, cfg);
        if (sg->parsed()) return cmd_sg(g, cfg);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const std::invalid_argument& e) {
        std::cerr << "precondition error: " << e.what() << '\n';
        return kConfigError;
    } catch (const NonConvergence& e) {
        std::cerr << "non-convergence: " << e.what() << '\n';
        return kNonConvergence;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kNonConvergence;
    }
    return kConfigError;
}
