#pragma once

// Executable versions of the energy-measure laws, each run on seeded samples
// against either the density oracle or the cell-function construction.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "pel/energy_forms.hpp"
#include "pel/measure.hpp"
#include "pel/sampler.hpp"

namespace pel {

enum class MeasureRoute { oracle, construction };
std::string route_name(MeasureRoute route);
MeasureRoute parse_route(const std::string& name);

struct Tolerances {
    double oracle = 1e-9;
    double construction = 1e-4;
    double derivative = 1e-3;
    double derivative_low_p = 1e-2;  // p < 2
};

struct LawOptions {
    int trials = 20;
    MeasureRoute route = MeasureRoute::oracle;
    FoldSchedule sched{};
    int jobs = 1;
    int refine = 8;
    std::vector<double> steps{1e-2, 5e-3, 2.5e-3};
    Tolerances tol{};
};

struct LawReport {
    std::string law;
    std::string form;
    std::string route;
    std::uint64_t seed = 0;
    int trials = 0;
    double worst_slack = 0.0;
    double tolerance = 0.0;
    bool pass = false;
    std::string witness;
    std::vector<double> trial_slack;
};

/// mu_<f>(A) by the chosen route.
class MeasureEvaluator {
public:
    MeasureEvaluator(const PLIntervalForm& form, MeasureRoute route, FoldSchedule sched = {})
        : form_(form), route_(route), sched_(sched) {}

    double operator()(const PLFunction& f, const IntervalSet& a) const;
    const PLIntervalForm& form() const { return form_; }
    MeasureRoute route() const { return route_; }

private:
    const PLIntervalForm& form_;
    MeasureRoute route_;
    FoldSchedule sched_;
};

/// Dyadic intervals of levels 0..max_level plus `random_sets` seeded unions.
std::vector<IntervalSet> a_family(std::uint64_t seed, int max_level = 5, int random_sets = 8);

/// Descriptor string of a PL form, e.g. "pl p=2 w=[0,1]:1".
std::string describe(const PLIntervalForm& form);

LawReport law_total_mass(const PLIntervalForm& form, std::uint64_t seed, const LawOptions& opt);
LawReport law_homogeneity_shift(const PLIntervalForm& form, std::uint64_t seed, const LawOptions& opt);
LawReport law_measure_clarkson(const PLIntervalForm& form, std::uint64_t seed, const LawOptions& opt);
LawReport law_measure_triangle(const PLIntervalForm& form, std::uint64_t seed, const LawOptions& opt);
LawReport law_locality(const PLIntervalForm& form, std::uint64_t seed, const LawOptions& opt);
LawReport law_minmax_bound(const PLIntervalForm& form, std::uint64_t seed, const LawOptions& opt);

struct SignedMeasureSample {
    std::vector<double> values;       // extrapolated nu_<u;v>(A) per set
    std::vector<double> closed_form;  // integral over A of w |u'|^{p-2} u' v'
    std::vector<double> error;        // |last two extrapolants|
    std::vector<double> steps;
};

/// (mu_<u+tv>(A) - mu_<u-tv>(A)) / (2pt), Richardson extrapolated in t
/// (order 2); steps must halve from one to the next.
SignedMeasureSample two_variable_measure(const PLIntervalForm& form, const PLFunction& u, const PLFunction& v,
                                         const std::vector<IntervalSet>& family, const std::vector<double>& steps,
                                         MeasureRoute route, const FoldSchedule& sched = {});

/// Integral over A of w |u'|^{p-2} u' v'.
double two_variable_closed_form(const PLIntervalForm& form, const PLFunction& u, const PLFunction& v,
                                const IntervalSet& a);

LawReport law_two_variable(const PLIntervalForm& form, std::uint64_t seed, const LawOptions& opt);

/// Ten piecewise-affine maps on [lo, hi]: |t|, T_1, T_2, cuts, scalings,
/// reflected shifts and a random Lipschitz map.
std::vector<PLMap> chain_map_family(double lo, double hi, std::uint64_t seed);

LawReport law_chain_rule(const PLIntervalForm& form, std::uint64_t seed, const LawOptions& opt);
/// sgn(phi' o f)|phi' o f|^{p-1} weighting of nu_<f;g> per cell, through two_variable_measure.
LawReport law_chain_rule_two_variable(const PLIntervalForm& form, std::uint64_t seed, const LawOptions& opt);
/// t -> mu_<f+tg>(A) on a sweep; jumps are bounded by the Lipschitz modulus of the density oracle.
LawReport law_continuity(const PLIntervalForm& form, std::uint64_t seed, const LawOptions& opt);
LawReport law_leibniz(const PLIntervalForm& form, std::uint64_t seed, const LawOptions& opt);

struct FunctionalIdentityTerms {
    double lhs = 0.0;      // integral of g d mu_<f>
    double rhs = 0.0;      // E(f; fg) - ((p-1)/p)^{p-1} E(|f|^{p/(p-1)}; g)
    double budget = 0.0;   // approximation budget of the PL power
    double scale = 0.0;    // integral of |g| d mu_<f>
};

FunctionalIdentityTerms functional_identity_terms(const PLIntervalForm& form, const PLFunction& f,
                                                  const PLFunction& g, int refine);
LawReport law_functional_identity(const PLIntervalForm& form, std::uint64_t seed, const LawOptions& opt);

/// Polynomial in up to three variables, sum of coef * x1^e1 x2^e2 x3^e3.
struct Polynomial {
    struct Term {
        double coef;
        std::array<int, 3> exps;
    };
    std::vector<Term> terms;
    int arity = 1;

    double operator()(const std::array<double, 3>& x) const;
    double partial(int i, const std::array<double, 3>& x) const;
    int degree() const;

    static Polynomial named(const std::string& name);  // sum, product, square, cubic
};

LawReport law_multivariable_chain(const PLIntervalForm& form, const Polynomial& phi, std::uint64_t seed,
                                  const LawOptions& opt);

struct LatticeChainReport {
    double lhs = 0.0;        // nu_<f; g v g>(X)
    double rhs = 0.0;        // sum of one-sided partials times nu_<f;g>(X)
    double mismatch = 0.0;   // |lhs - rhs| / |lhs|
    bool identity_fails = false;
};

/// phi(x1, x2) = x1 v x2 at (g, g): the n-variable rule has no valid partials.
LatticeChainReport lattice_chain_counterexample(const PLIntervalForm& form, const PLFunction& f,
                                                const PLFunction& g);

LawReport law_domination(const PLIntervalForm& lo, const PLIntervalForm& hi, std::uint64_t seed,
                         const LawOptions& opt);
LawReport law_minimal_dominant(const PLIntervalForm& form, const std::vector<PLFunction>& basis,
                               std::uint64_t seed, const LawOptions& opt);

/// Density of f_* mu_<f> at t: sum over preimage pieces of w |f'|^{p-1}.
double pushforward_density(const PLIntervalForm& form, const PLFunction& f, double t);
LawReport law_image_density(const PLIntervalForm& form, std::uint64_t seed, const LawOptions& opt);

/// All laws that take a single form, by id.
std::vector<std::string> law_ids();
LawReport run_law(const std::string& id, const PLIntervalForm& form, std::uint64_t seed, const LawOptions& opt);

}  // namespace pel
