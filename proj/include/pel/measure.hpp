#pragma once

// Energy measures built from cell functions T_n o f ^ S_n^a o g, and the
// density oracle they are compared against.

#include <string>
#include <utility>
#include <vector>

#include "pel/energy_forms.hpp"
#include "pel/pl_function.hpp"

namespace pel {

struct FoldSchedule {
    int n_min = 4;
    int n_max = 48;
    double rel_tol = 1e-10;  // relative to E(f)
    int stall_count = 2;

    void validate() const;
};

struct ConvergenceTrace {
    std::vector<int> n;
    std::vector<double> energy;
    std::vector<double> inf_so_far;
    std::vector<double> excess_bound;  // certified bound on E_n - limit
    bool converged = false;
    double value = 0.0;
};

/// Non-convergence of a cell-energy limit, with the sequence that failed.
struct TraceNonConvergence : NonConvergence {
    TraceNonConvergence(const std::string& what, ConvergenceTrace t) : NonConvergence(what), trace(std::move(t)) {}
    ConvergenceTrace trace;
};

/// Piecewise-constant density over a partition of [0,1] (PL model), or edge
/// atoms (graph model).
struct EnergyMeasure {
    std::vector<double> partition;
    std::vector<double> density;
    std::vector<double> atoms;
    double total_mass = 0.0;

    bool is_graph() const { return partition.empty(); }
    double density_at(double x) const;
    /// Measure of an interval set; endpoint flags do not matter.
    double evaluate(const IntervalSet& a) const;
    double evaluate(double lo, double hi) const;
};

/// One truncation S_n^a o g in a cell function.
struct Cap {
    PLFunction g;
    double a;
};

/// T_n o f ^ S_n^a o g, materialized.
PLFunction cell_function(const PLFunction& f, const PLFunction& g, double a, int n);

/// E(T_n o f ^ min_j S_n^{a_j} o g_j) evaluated piece by piece without
/// materializing the fold: saturated and zero regions are closed form, folds
/// are enumerated only where some cap is strictly between 0 and 2^{-n}.
double cell_energy(const PLIntervalForm& form, const PLFunction& f, const std::vector<Cap>& caps, int n);

/// Upper bound on cell_energy(n) minus its limit: the cell function equals
/// T_n o f wherever every cap is saturated, so the excess lives on the bands
/// {a_j < g_j < a_j + 2^{-n}} where its slope is at most max(|f'|, |g_j'|).
double band_excess_bound(const PLIntervalForm& form, const PLFunction& f, const std::vector<Cap>& caps, int n);

/// Limit of cell_energy as n grows: converged once the value is stable for
/// stall_count steps and the band bound is below rel_tol * E(f).
ConvergenceTrace limit_energy(const PLIntervalForm& form, const PLFunction& f, const std::vector<Cap>& caps,
                              const FoldSchedule& sched = {});

/// F_f^g(a) = lim_n E(T_n o f ^ S_n^a o g).
ConvergenceTrace F_value(const PLIntervalForm& form, const PLFunction& f, const PLFunction& g, double a,
                         const FoldSchedule& sched = {});

struct DistributionReport {
    std::vector<double> a_grid;
    std::vector<double> values;
    bool all_converged = true;
    double total = 0.0;              // E(f)
    double monotone_slack = 0.0;     // min of F(a_{i+1}) - F(a_i)
    double lower_gap = 0.0;          // |F(a_0)| if a_0 < min g, else 0
    double upper_gap = 0.0;          // |F(a_last) - E(f)| if a_last >= max g, else 0
    double reflection_gap = 0.0;     // max |F_f^g(a) + F_f^{-g}(-a-0) - E(f)|
    bool pass = false;
};

DistributionReport distribution(const PLIntervalForm& form, const PLFunction& f, const PLFunction& g,
                                const std::vector<double>& a_grid, const FoldSchedule& sched = {});

/// Sublevel set {g <= a} lies inside U, honouring open endpoints of U.
bool closed_set_inside(const IntervalSet& closed, const IntervalSet& u);

/// Distance witness (g, a) with {g <= a} = the closure of A and a < 0;
/// g has the given slope away from A.
Cap closed_set_witness(const IntervalSet& a, double slope = 1.0);

/// (E(f) / sum of w)^{1/p}, the mean slope of f; 1 when f is constant.
double witness_slope(const PLIntervalForm& form, const PLFunction& f);

/// mu(A) for the closure of A via a distance witness of slope witness_slope(f);
/// 0 for empty A.
double measure_of_closed_set(const PLIntervalForm& form, const PLFunction& f, const IntervalSet& a,
                             const FoldSchedule& sched = {});

/// Witnesses whose sublevel sets exhaust U from inside: closed ends exactly,
/// open ends shrunk by len * 2^{-k}, k = 1..depth.
std::vector<Cap> canonical_family(const IntervalSet& u, int depth = 40);

struct OuterMeasureReport {
    double value = 0.0;
    int admissible = 0;
    int skipped = 0;
    std::vector<double> values;  // F per admissible pair, family order
    std::vector<std::string> warnings;
    double family_spread = 0.0;  // max - min over the admissible values
};

/// sup of F_f^g(a) over admissible (g, a): a < 0 and {g <= a} inside U.
OuterMeasureReport outer_measure_lb(const PLIntervalForm& form, const PLFunction& f, const IntervalSet& u,
                                    const std::vector<Cap>& family, const FoldSchedule& sched = {});

/// Cell densities from mu([0, k/res]) = F_f^{x}(k/res).
EnergyMeasure energy_measure(const PLIntervalForm& form, const PLFunction& f, int resolution,
                             const FoldSchedule& sched = {});

/// w |f'|^p on the merged partition.
EnergyMeasure reference_measure(const PLIntervalForm& form, const PLFunction& f);

/// c_xy |f(x) - f(y)|^p per edge.
EnergyMeasure graph_energy_measure(const GraphForm& form, std::span<const double> f);

/// Cell-averaged densities of `m` on the uniform grid of `resolution` cells.
std::vector<double> cell_averages(const EnergyMeasure& m, int resolution);

/// sup |d - d_ref| / sup |d_ref| over the uniform cells.
double sup_relative_gap(const EnergyMeasure& built, const EnergyMeasure& reference, int resolution);

struct CoverReport {
    double lhs = 0.0;
    double rhs = 0.0;
    double slack = 0.0;  // rhs - lhs
    bool pass = false;
};

/// F_f^g(a) <= sum_i F_f^{h_i}(b_i) when {g <= a} is covered by the {h_i <= b_i}.
CoverReport covering_check(const PLIntervalForm& form, const PLFunction& f, const PLFunction& g, double a,
                           const std::vector<Cap>& covers, const FoldSchedule& sched = {});

struct CapacityReport {
    double two_sided = 0.0;  // lim E(T_n o f ^ S_n^b o g ^ S_n^{-a'} o (-g))
    double increment = 0.0;  // F(b) - F(a)
    double slack = 0.0;
    bool pass = false;
};

/// Two-sided cut energy against nu((a, b]) for a < a' < b.
CapacityReport capacity_check(const PLIntervalForm& form, const PLFunction& f, const PLFunction& g, double a,
                              double a_prime, double b, const FoldSchedule& sched = {});

}  // namespace pel
