#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "pel/io.hpp"

using namespace pel;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    auto dir = fs::temp_directory_path() / ("pelab_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

int pelab(const std::string& args) {
    std::string cmd = std::string(PELAB_PATH) + " " + args + " > /dev/null 2>&1";
    int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

}  // namespace

TEST_CASE("config parsing is strict") {
    CHECK_THROWS_AS(parse_config(json::object()), ConfigError);
    CHECK_THROWS_AS(parse_config(json{{"seed", 1}, {"sed", 2}}), ConfigError);
    CHECK_THROWS_AS(parse_config(json{{"seed", -4}}), ConfigError);
    CHECK_THROWS_AS(parse_config(json{{"seed", 1}, {"form", {{"kind", "pl"}, {"p", 0.5}}}}), ConfigError);
    CHECK_THROWS_AS(parse_config(json{{"seed", 1}, {"form", {{"p", 2}, {"colour", 1}}}}), ConfigError);
    CHECK_THROWS_AS(parse_config(json{{"seed", 1}, {"p_list", json::array()}}), ConfigError);
    CHECK_THROWS_AS(parse_config(json{{"seed", 1}, {"laws", {"nonsense"}}}), ConfigError);
    CHECK_THROWS_AS(parse_config(json{{"seed", 1}, {"trials", "many"}}), ConfigError);
    CHECK_THROWS_AS(parse_config(json{{"seed", 1}, {"schedule", {{"n_min", 9}, {"n_max", 3}}}}), ConfigError);
    CHECK_THROWS_AS(parse_config(json{{"seed", 1}, {"ks", {{"profile", "file"}}}}), ConfigError);
    auto c = parse_config(json::object(), 9);
    CHECK(c.seed == 9);
}

TEST_CASE("materialized configs round trip") {
    json raw = {{"seed", 17},
                {"form", {{"kind", "pl"}, {"p", 3}, {"weight", {{0, 0.5, 2}, {0.5, 1, 1}}}}},
                {"targets", {"tent", {{"x", {0, 0.3, 1}}, {"y", {0, 1, 0}}}}},
                {"laws", {"locality", "chain_rule"}}};
    auto c = parse_config(raw);
    auto full = to_json(c);
    CHECK(full["trials"] == 20);
    CHECK(full["schedule"]["n_min"] == c.schedule.n_min);
    CHECK(to_json(parse_config(full)) == full);
    auto t = make_target(c.targets[1], c.seed, 1);
    CHECK(t(0.3) == 1.0);
}

TEST_CASE("PL and interval set serialization") {
    auto f = PLFunction({0, 0.25, 1}, {1, -1, 0.5});
    auto j = to_json(f);
    CHECK(j == json{{"x", {0, 0.25, 1}}, {"y", {1, -1, 0.5}}});
    auto g = pl_function_from_json(j);
    CHECK(g(0.6) == f(0.6));
    IntervalSet a({{0, 0.2, true, false}, {0.5, 0.7, false, true}});
    auto ja = to_json(a);
    CHECK(ja[0][2] == "[)");
    CHECK(interval_set_from_json(ja) == a);
    CHECK_THROWS_AS(interval_set_from_json(json::parse(R"([[0, 0.5, "[>"]])")), ConfigError);
    CHECK_THROWS_AS(pl_function_from_json(json{{"x", {0, 1}}, {"y", {1}}}), ConfigError);
}

TEST_CASE("number formatting and csv") {
    for (double x : {0.1, 1.0 / 3, 1e-300, -2.5e17, 15.588457268119896}) CHECK(std::stod(format_number(x)) == x);
    CHECK(format_number(2.0) == "2");
    auto dir = scratch("csv");
    {
        CsvWriter w(dir / "t.csv", json{{"k", 1}}, {"a", "b"});
        w.row({"x,y", "say \"hi\""});
        CHECK_THROWS_AS(w.row({"only one"}), std::logic_error);
    }
    CHECK(slurp(dir / "t.csv") == "# {\"k\":1}\na,b\n\"x,y\",\"say \"\"hi\"\"\"\n");
    SvgChart ch{"t", "x", "y", true, true, {{"s", {0.1, 0.01}, {1, 10}}}};
    write_svg(dir / "c.svg", ch);
    CHECK(slurp(dir / "c.svg").find("<polyline") != std::string::npos);
}

TEST_CASE("validate-form") {
    auto dir = scratch("validate");
    CHECK(pelab("validate-form --seed 3 --out " + dir.string()) == 0);
    CHECK(slurp(dir / "validate_form.csv").find("fail") == std::string::npos);
    write(dir / "graph.json", R"({"seed": 3, "form": {"kind": "graph", "p": 2.5}})");
    CHECK(pelab("validate-form --config " + (dir / "graph.json").string() + " --out " + dir.string()) == 0);
    CHECK(slurp(dir / "validate_form.csv").find("skipped: model deviation") != std::string::npos);
    write(dir / "bad.json", R"({"seed": 3, "form": {"kind": "pl", "p": 0.5}})");
    CHECK(pelab("validate-form --config " + (dir / "bad.json").string() + " --out " + dir.string()) == 2);
    CHECK(pelab("validate-form --out " + dir.string()) == 2);
}

TEST_CASE("build-measure") {
    auto dir = scratch("build");
    write(dir / "c.json", R"({"seed": 5, "form": {"p": 3}, "targets": ["identity", "tent", "constant"]})");
    CHECK(pelab("build-measure --plot --config " + (dir / "c.json").string() + " --out " + dir.string()) == 0);
    auto summary = slurp(dir / "measure_summary.csv");
    CHECK(summary.find("constant#2,0,0,0,1") != std::string::npos);
    CHECK(fs::exists(dir / "measure_density_1.svg"));
    write(dir / "slow.json", R"({"seed": 5, "targets": ["random"], "schedule": {"n_min": 1, "n_max": 1, "rel_tol": 1e-14}})");
    CHECK(pelab("build-measure --config " + (dir / "slow.json").string() + " --out " + dir.string()) == 3);
    CHECK(fs::exists(dir / "nonconvergence_trace.csv"));
    write(dir / "sg.json", R"({"seed": 5, "form": {"kind": "graph"}})");
    CHECK(pelab("build-measure --config " + (dir / "sg.json").string() + " --out " + dir.string()) == 2);
}

TEST_CASE("check-laws") {
    auto dir = scratch("laws");
    CHECK(pelab("check-laws --seed 11 --jobs 2 --out " + (dir / "a").string()) == 0);
    CHECK(pelab("check-laws --seed 11 --jobs 1 --out " + (dir / "b").string()) == 0);
    CHECK(slurp(dir / "a" / "law_trials.csv") == slurp(dir / "b" / "law_trials.csv"));
    CHECK(slurp(dir / "a" / "law_summary.csv") == slurp(dir / "b" / "law_summary.csv"));
    write(dir / "crossed.json", R"({"seed": 1, "laws": ["domination"], "dominating_weight": [[0, 1, 0.5]]})");
    CHECK(pelab("check-laws --config " + (dir / "crossed.json").string() + " --out " + dir.string()) == 2);
    write(dir / "strict.json", R"({"seed": 1, "laws": ["total_mass"], "trials": 3})");
    CHECK(pelab("check-laws --config " + (dir / "strict.json").string() + " --out " + dir.string()) == 0);
    std::istringstream rows(slurp(dir / "law_trials.csv"));
    std::string line;
    int count = 0;
    while (std::getline(rows, line)) ++count;
    CHECK(count == 2 + 3);
}

TEST_CASE("ks-energy and sg-renorm") {
    auto dir = scratch("ks");
    CHECK(pelab("ks-energy --seed 1 --n 3000 --p 3 --profile linear --plot --out " + dir.string()) == 0);
    CHECK(fs::exists(dir / "ks_scan.svg"));
    CHECK(slurp(dir / "ks_scan.csv").find("r,J,sup_so_far") != std::string::npos);
    CHECK(pelab("ks-energy --seed 1 --n 3000 --r-list 0.1,0.2 --out " + dir.string()) == 2);
    CHECK(pelab("ks-energy --seed 1 --space sphere --out " + dir.string()) == 2);
    write(dir / "u.txt", "0 1 2\n");
    CHECK(pelab("ks-energy --seed 1 --profile file --profile-file " + (dir / "u.txt").string() + " --out " +
                dir.string()) == 2);
    write(dir / "sg.json", R"({"seed": 1, "p_list": [2]})");
    CHECK(pelab("sg-renorm --config " + (dir / "sg.json").string() + " --out " + dir.string()) == 0);
    CHECK(slurp(dir / "sg_renorm.csv").find("\n2,1.66666666") != std::string::npos);
    write(dir / "empty.json", R"({"seed": 1, "p_list": []})");
    CHECK(pelab("sg-renorm --config " + (dir / "empty.json").string() + " --out " + dir.string()) == 2);
}
