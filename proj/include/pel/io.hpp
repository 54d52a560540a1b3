#pragma once

// Experiment configuration, CSV reports and static SVG charts.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "pel/energy_forms.hpp"
#include "pel/measure.hpp"

namespace pel {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct FormConfig {
    std::string kind = "pl";  // pl, graph, sg
    double p = 2.0;
    std::vector<WeightCell> weight{{0.0, 1.0, 1.0}};
    std::vector<double> vertex_weights{1.0, 1.0, 1.0, 1.0};
    std::vector<GraphEdge> edges{{0, 1, 1.0}, {1, 2, 1.0}, {2, 3, 1.0}};
    int level = 3;
    double rho = 0.0;  // sg; <= 0 means estimate
};

/// A PL target: a named profile or explicit breakpoints.
struct TargetConfig {
    std::string name = "identity";  // identity, tent, constant, random, custom
    std::vector<double> xs;
    std::vector<double> ys;
};

struct KSConfig {
    std::string space = "interval";  // interval, torus
    std::size_t n = 2000;            // points (interval) or side (torus)
    double p = 2.0;
    std::vector<double> r_list;      // empty: grid scales from r0 = 0.08, five halvings
    std::string profile = "linear";  // linear, sine, tent, step, file
    std::string profile_file;
};

struct ExperimentConfig {
    std::uint64_t seed = 0;
    FormConfig form;
    std::vector<std::string> laws;  // empty: every law
    std::string route = "oracle";
    int trials = 20;
    FoldSchedule schedule;
    int refine = 8;
    int resolution = 64;
    int assumption_trials = 50;
    int clarkson_pairs = 200;
    std::vector<TargetConfig> targets{{"identity", {}, {}}, {"tent", {}, {}}};
    double gap_tolerance = 1e-4;
    std::optional<std::vector<WeightCell>> dominating_weight;
    std::vector<double> p_list{2.0, 3.0};
    double sg_tol = 1e-10;
    KSConfig ks;
};

/// Strict parse: unknown keys, wrong types and out-of-range values throw
/// ConfigError. A missing seed is an error unless `seed_override` is given.
ExperimentConfig parse_config(const nlohmann::json& j, std::optional<std::uint64_t> seed_override = std::nullopt);
ExperimentConfig load_config(const std::filesystem::path& path,
                             std::optional<std::uint64_t> seed_override = std::nullopt);
/// Every field, defaults included.
nlohmann::json to_json(const ExperimentConfig& cfg);

EnergyForm make_form(const FormConfig& form);
PLIntervalForm make_pl_form(const FormConfig& form);
PLFunction make_target(const TargetConfig& target, std::uint64_t seed, std::size_t index);

/// {"x": [...], "y": [...]}.
nlohmann::json to_json(const PLFunction& f);
PLFunction pl_function_from_json(const nlohmann::json& j);
/// [[lo, hi, "[]" | "[)" | "(]" | "()"], ...].
nlohmann::json to_json(const IntervalSet& a);
IntervalSet interval_set_from_json(const nlohmann::json& j);

/// Shortest decimal text that reads back to the same double.
std::string format_number(double x);

/// CSV with a leading "# " comment line holding the materialized config.
class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, const nlohmann::json& header, std::vector<std::string> columns);
    void row(const std::vector<std::string>& cells);

private:
    std::ofstream out_;
    std::size_t width_;
};

struct SvgSeries {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
};

struct SvgChart {
    std::string title;
    std::string x_label;
    std::string y_label;
    bool log_x = false;
    bool log_y = false;
    std::vector<SvgSeries> series;
};

void write_svg(const std::filesystem::path& path, const SvgChart& chart);

}  // namespace pel
