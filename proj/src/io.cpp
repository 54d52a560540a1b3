#include "pel/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "pel/laws.hpp"
#include "pel/sampler.hpp"

namespace pel {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) throw ConfigError(where + " must be an object");
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!ok.count(it.key())) throw ConfigError("unknown key '" + it.key() + "' in " + where);
}

template <class T>
void read(const json& j, const char* key, T& out, const std::string& where) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(where + "." + key + " has the wrong type");
    }
}

double read_number(const json& j, const std::string& where) {
    if (!j.is_number()) throw ConfigError(where + " must be a number");
    return j.get<double>();
}

std::vector<WeightCell> read_weight(const json& j, const std::string& where) {
    if (!j.is_array() || j.empty()) throw ConfigError(where + " must be a nonempty array of [lo, hi, w]");
    std::vector<WeightCell> cells;
    for (const auto& c : j) {
        if (!c.is_array() || c.size() != 3) throw ConfigError(where + " entries must be [lo, hi, w]");
        cells.push_back({read_number(c[0], where), read_number(c[1], where), read_number(c[2], where)});
    }
    return cells;
}

json weight_json(const std::vector<WeightCell>& cells) {
    json a = json::array();
    for (const auto& c : cells) a.push_back({c.lo, c.hi, c.w});
    return a;
}

void require(bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
}

FormConfig parse_form(const json& j) {
    reject_unknown(j, "form", {"kind", "p", "weight", "vertex_weights", "edges", "level", "rho"});
    FormConfig f;
    read(j, "kind", f.kind, "form");
    require(f.kind == "pl" || f.kind == "graph" || f.kind == "sg", "form.kind must be pl, graph or sg");
    if (j.contains("p")) f.p = read_number(j["p"], "form.p");
    require(f.p > 1.0 && std::isfinite(f.p), "form.p must be a finite real > 1");
    if (j.contains("weight")) f.weight = read_weight(j["weight"], "form.weight");
    read(j, "vertex_weights", f.vertex_weights, "form");
    if (j.contains("edges")) {
        const auto& e = j["edges"];
        require(e.is_array(), "form.edges must be an array of [u, v, c]");
        f.edges.clear();
        for (const auto& x : e) {
            require(x.is_array() && x.size() == 3 && x[0].is_number_integer() && x[1].is_number_integer(),
                    "form.edges entries must be [u, v, c]");
            f.edges.push_back({x[0].get<int>(), x[1].get<int>(), read_number(x[2], "form.edges")});
        }
    }
    read(j, "level", f.level, "form");
    require(f.level >= 0 && f.level <= 7, "form.level must be in [0, 7]");
    if (j.contains("rho")) f.rho = read_number(j["rho"], "form.rho");
    try {
        make_form(f);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("form: ") + e.what());
    }
    return f;
}

TargetConfig parse_target(const json& j) {
    TargetConfig t;
    if (j.is_string()) {
        t.name = j.get<std::string>();
        require(t.name == "identity" || t.name == "tent" || t.name == "constant" || t.name == "random",
                "targets: unknown name '" + t.name + "'");
        return t;
    }
    t.name = "custom";
    auto f = pl_function_from_json(j);
    t.xs.assign(f.breakpoints().begin(), f.breakpoints().end());
    t.ys.assign(f.values().begin(), f.values().end());
    return t;
}

KSConfig parse_ks(const json& j) {
    reject_unknown(j, "ks", {"space", "n", "p", "r_list", "profile", "profile_file"});
    KSConfig k;
    read(j, "space", k.space, "ks");
    require(k.space == "interval" || k.space == "torus", "ks.space must be interval or torus");
    read(j, "n", k.n, "ks");
    if (j.contains("p")) k.p = read_number(j["p"], "ks.p");
    require(k.p >= 1.0 && std::isfinite(k.p), "ks.p must be a finite real >= 1");
    read(j, "r_list", k.r_list, "ks");
    read(j, "profile", k.profile, "ks");
    require(k.profile == "linear" || k.profile == "sine" || k.profile == "tent" || k.profile == "step" ||
                k.profile == "file",
            "ks.profile must be linear, sine, tent, step or file");
    read(j, "profile_file", k.profile_file, "ks");
    require(k.profile != "file" || !k.profile_file.empty(), "ks.profile file needs ks.profile_file");
    return k;
}

}  // namespace

ExperimentConfig parse_config(const json& j, std::optional<std::uint64_t> seed_override) {
    reject_unknown(j, "config",
                   {"seed", "form", "laws", "route", "trials", "schedule", "refine", "resolution",
                    "assumption_trials", "clarkson_pairs", "targets", "gap_tolerance", "dominating_weight", "p_list",
                    "sg_tol", "ks"});
    ExperimentConfig c;
    if (seed_override) {
        c.seed = *seed_override;
    } else {
        require(j.contains("seed"), "seed is mandatory");
        require(j["seed"].is_number_unsigned() || (j["seed"].is_number_integer() && j["seed"].get<long long>() >= 0),
                "seed must be a nonnegative integer");
        c.seed = j["seed"].get<std::uint64_t>();
    }
    if (j.contains("form")) c.form = parse_form(j["form"]);
    read(j, "laws", c.laws, "config");
    auto ids = law_ids();
    for (const auto& l : c.laws)
        require(std::find(ids.begin(), ids.end(), l) != ids.end(), "laws: unknown law '" + l + "'");
    read(j, "route", c.route, "config");
    require(c.route == "oracle" || c.route == "construction", "route must be oracle or construction");
    read(j, "trials", c.trials, "config");
    require(c.trials >= 1, "trials must be >= 1");
    if (j.contains("schedule")) {
        const auto& s = j["schedule"];
        reject_unknown(s, "schedule", {"n_min", "n_max", "rel_tol", "stall_count"});
        read(s, "n_min", c.schedule.n_min, "schedule");
        read(s, "n_max", c.schedule.n_max, "schedule");
        if (s.contains("rel_tol")) c.schedule.rel_tol = read_number(s["rel_tol"], "schedule.rel_tol");
        read(s, "stall_count", c.schedule.stall_count, "schedule");
        try {
            c.schedule.validate();
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("schedule: ") + e.what());
        }
    }
    read(j, "refine", c.refine, "config");
    require(c.refine >= 1, "refine must be >= 1");
    read(j, "resolution", c.resolution, "config");
    require(c.resolution >= 1 && c.resolution <= 4096, "resolution must be in [1, 4096]");
    read(j, "assumption_trials", c.assumption_trials, "config");
    require(c.assumption_trials >= 1, "assumption_trials must be >= 1");
    read(j, "clarkson_pairs", c.clarkson_pairs, "config");
    require(c.clarkson_pairs >= 1, "clarkson_pairs must be >= 1");
    if (j.contains("targets")) {
        require(j["targets"].is_array() && !j["targets"].empty(), "targets must be a nonempty array");
        c.targets.clear();
        for (const auto& t : j["targets"]) c.targets.push_back(parse_target(t));
    }
    if (j.contains("gap_tolerance")) c.gap_tolerance = read_number(j["gap_tolerance"], "gap_tolerance");
    require(c.gap_tolerance > 0.0, "gap_tolerance must be positive");
    if (j.contains("dominating_weight")) c.dominating_weight = read_weight(j["dominating_weight"], "dominating_weight");
    read(j, "p_list", c.p_list, "config");
    require(!c.p_list.empty(), "p_list must be nonempty");
    for (double p : c.p_list) require(p > 1.0 && std::isfinite(p), "p_list entries must be finite reals > 1");
    if (j.contains("sg_tol")) c.sg_tol = read_number(j["sg_tol"], "sg_tol");
    require(c.sg_tol > 0.0, "sg_tol must be positive");
    if (j.contains("ks")) c.ks = parse_ks(j["ks"]);
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path, std::optional<std::uint64_t> seed_override) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    return parse_config(j, seed_override);
}

json to_json(const ExperimentConfig& c) {
    json edges = json::array();
    for (const auto& e : c.form.edges) edges.push_back({e.u, e.v, e.conductance});
    json targets = json::array();
    for (const auto& t : c.targets) {
        if (t.name == "custom")
            targets.push_back({{"x", t.xs}, {"y", t.ys}});
        else
            targets.push_back(t.name);
    }
    json laws = c.laws;
    json j = {
        {"seed", c.seed},
        {"form",
         {{"kind", c.form.kind},
          {"p", c.form.p},
          {"weight", weight_json(c.form.weight)},
          {"vertex_weights", c.form.vertex_weights},
          {"edges", edges},
          {"level", c.form.level},
          {"rho", c.form.rho}}},
        {"laws", laws},
        {"route", c.route},
        {"trials", c.trials},
        {"schedule",
         {{"n_min", c.schedule.n_min},
          {"n_max", c.schedule.n_max},
          {"rel_tol", c.schedule.rel_tol},
          {"stall_count", c.schedule.stall_count}}},
        {"refine", c.refine},
        {"resolution", c.resolution},
        {"assumption_trials", c.assumption_trials},
        {"clarkson_pairs", c.clarkson_pairs},
        {"targets", targets},
        {"gap_tolerance", c.gap_tolerance},
        {"p_list", c.p_list},
        {"sg_tol", c.sg_tol},
        {"ks",
         {{"space", c.ks.space},
          {"n", c.ks.n},
          {"p", c.ks.p},
          {"r_list", c.ks.r_list},
          {"profile", c.ks.profile},
          {"profile_file", c.ks.profile_file}}},
    };
    if (c.dominating_weight) j["dominating_weight"] = weight_json(*c.dominating_weight);
    return j;
}

EnergyForm make_form(const FormConfig& f) {
    if (f.kind == "pl") return make_pl_form(f);
    if (f.kind == "graph") return GraphForm(f.p, f.vertex_weights, f.edges);
    return SGForm(f.p, f.level, f.rho);
}

PLIntervalForm make_pl_form(const FormConfig& f) {
    if (f.kind != "pl") throw ConfigError("this command needs a pl form");
    return PLIntervalForm(f.p, f.weight);
}

PLFunction make_target(const TargetConfig& t, std::uint64_t seed, std::size_t index) {
    if (t.name == "identity") return PLFunction::identity();
    if (t.name == "tent") return PLFunction::tent();
    if (t.name == "constant") return PLFunction::constant(1.0);
    if (t.name == "random") return Sampler(seed).child(2000 + index).pl_function(10);
    return PLFunction(t.xs, t.ys);
}

json to_json(const PLFunction& f) {
    return {{"x", std::vector<double>(f.breakpoints().begin(), f.breakpoints().end())},
            {"y", std::vector<double>(f.values().begin(), f.values().end())}};
}

PLFunction pl_function_from_json(const json& j) {
    reject_unknown(j, "PL function", {"x", "y"});
    std::vector<double> xs, ys;
    read(j, "x", xs, "PL function");
    read(j, "y", ys, "PL function");
    try {
        return PLFunction(xs, ys);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("PL function: ") + e.what());
    }
}

json to_json(const IntervalSet& a) {
    json out = json::array();
    for (const auto& c : a.components())
        out.push_back({c.lo, c.hi, std::string(c.lo_closed ? "[" : "(") + (c.hi_closed ? "]" : ")")});
    return out;
}

IntervalSet interval_set_from_json(const json& j) {
    if (!j.is_array()) throw ConfigError("interval set must be an array");
    std::vector<Interval> parts;
    for (const auto& c : j) {
        if (!c.is_array() || c.size() != 3 || !c[2].is_string())
            throw ConfigError("interval set entries must be [lo, hi, flags]");
        auto flags = c[2].get<std::string>();
        if (flags.size() != 2 || (flags[0] != '[' && flags[0] != '(') || (flags[1] != ']' && flags[1] != ')'))
            throw ConfigError("interval flags must be one of [] [) (] ()");
        parts.push_back({read_number(c[0], "interval"), read_number(c[1], "interval"), flags[0] == '[', flags[1] == ']'});
    }
    try {
        return IntervalSet(parts);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("interval set: ") + e.what());
    }
}

std::string format_number(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

CsvWriter::CsvWriter(const std::filesystem::path& path, const json& header, std::vector<std::string> columns)
    : out_(path), width_(columns.size()) {
    if (!out_) throw std::runtime_error("cannot write " + path.string());
    out_ << "# " << header.dump() << '\n';
    for (std::size_t i = 0; i < columns.size(); ++i) out_ << (i ? "," : "") << columns[i];
    out_ << '\n';
}

void CsvWriter::row(const std::vector<std::string>& cells) {
    if (cells.size() != width_) throw std::logic_error("csv row width mismatch");
    for (std::size_t i = 0; i < cells.size(); ++i) {
        const auto& c = cells[i];
        if (i) out_ << ',';
        if (c.find_first_of(",\"\n") != std::string::npos) {
            out_ << '"';
            for (char ch : c) out_ << (ch == '"' ? "\"\"" : std::string(1, ch));
            out_ << '"';
        } else {
            out_ << c;
        }
    }
    out_ << '\n';
}

namespace {

std::string escape_xml(const std::string& s) {
    std::string r;
    for (char c : s) {
        switch (c) {
        case '<': r += "&lt;"; break;
        case '>': r += "&gt;"; break;
        case '&': r += "&amp;"; break;
        case '"': r += "&quot;"; break;
        default: r += c;
        }
    }
    return r;
}

std::string fixed(double v) {
    std::ostringstream o;
    o.precision(2);
    o << std::fixed << v;
    return o.str();
}

std::string tick(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

}  // namespace

void write_svg(const std::filesystem::path& path, const SvgChart& chart) {
    constexpr double W = 640, H = 400, L = 70, R = 20, T = 40, B = 50;
    auto tx = [&](double v) { return chart.log_x ? std::log10(v) : v; };
    auto ty = [&](double v) { return chart.log_y ? std::log10(v) : v; };
    double x0 = kInf, x1 = -kInf, y0 = kInf, y1 = -kInf;
    for (const auto& s : chart.series)
        for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
            double a = tx(s.x[i]), b = ty(s.y[i]);
            if (!std::isfinite(a) || !std::isfinite(b)) continue;
            x0 = std::min(x0, a), x1 = std::max(x1, a), y0 = std::min(y0, b), y1 = std::max(y1, b);
        }
    if (!(x0 <= x1)) x0 = 0, x1 = 1;
    if (!(y0 <= y1)) y0 = 0, y1 = 1;
    if (x1 == x0) x0 -= 0.5, x1 += 0.5;
    if (y1 == y0) y0 -= 0.5, y1 += 0.5;
    auto px = [&](double a) { return L + (a - x0) / (x1 - x0) * (W - L - R); };
    auto py = [&](double b) { return H - B - (b - y0) / (y1 - y0) * (H - T - B); };
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" << escape_xml(chart.title)
        << "</text>\n";
    out << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R << "\" height=\"" << H - T - B
        << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        double a = x0 + (x1 - x0) * k / 4, b = y0 + (y1 - y0) * k / 4;
        double av = chart.log_x ? std::pow(10.0, a) : a, bv = chart.log_y ? std::pow(10.0, b) : b;
        out << "<text x=\"" << fixed(px(a)) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\" font-size=\"10\">"
            << tick(av) << "</text>\n";
        out << "<text x=\"" << L - 6 << "\" y=\"" << fixed(py(b) + 3) << "\" text-anchor=\"end\" font-size=\"10\">"
            << tick(bv) << "</text>\n";
    }
    out << "<text x=\"" << W / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\" font-size=\"12\">"
        << escape_xml(chart.x_label) << "</text>\n";
    out << "<text x=\"16\" y=\"" << H / 2 << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 16 "
        << H / 2 << ")\">" << escape_xml(chart.y_label) << "</text>\n";
    for (std::size_t k = 0; k < chart.series.size(); ++k) {
        const auto& s = chart.series[k];
        const char* col = colors[k % 6];
        out << "<polyline fill=\"none\" stroke=\"" << col << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
            double a = tx(s.x[i]), b = ty(s.y[i]);
            if (!std::isfinite(a) || !std::isfinite(b)) continue;
            out << fixed(px(a)) << ',' << fixed(py(b)) << ' ';
        }
        out << "\"/>\n";
        out << "<text x=\"" << W - R - 6 << "\" y=\"" << T + 16 + 14 * static_cast<double>(k)
            << "\" text-anchor=\"end\" font-size=\"11\" fill=\"" << col << "\">" << escape_xml(s.name) << "</text>\n";
    }
    out << "</svg>\n";
}

}  // namespace pel
