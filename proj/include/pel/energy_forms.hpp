#pragma once

// Concrete p-energy forms and the testable surrogates of the standing
// assumptions (seminorm, Clarkson, Markov contractions, strong locality).

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "pel/pl_function.hpp"
#include "pel/sampler.hpp"
#include "pel/sierpinski.hpp"

namespace pel {

struct WeightCell {
    double lo;
    double hi;
    double w;
};

/// E(f) = sum over pieces of w |f'|^p * length on [0,1], reference measure
/// Lebesgue, weight piecewise constant.
class PLIntervalForm {
public:
    explicit PLIntervalForm(double p, std::vector<WeightCell> weight = {});

    double p() const { return p_; }
    std::span<const double> weight_breaks() const { return breaks_; }
    std::span<const double> weight_values() const { return weights_; }
    double weight_at(double x) const;
    bool unit_weight() const { return weights_.size() == 1 && weights_[0] == 1.0; }

    double energy(const PLFunction& f) const;
    /// (1/p) d/dt E(u + t v) at t = 0, i.e. the integral of w |u'|^{p-2} u' v'.
    double energy_drv(const PLFunction& u, const PLFunction& v) const;
    /// Energy density integrated over [lo, hi].
    double energy_on(const PLFunction& f, double lo, double hi) const;

    /// Calls fn(x0, x1, w) over the common refinement of the weight partition
    /// and the given breakpoint lists.
    void for_each_cell(std::initializer_list<std::span<const double>> knots,
                       const std::function<void(double, double, double)>& fn) const;

private:
    double p_;
    std::vector<double> breaks_;
    std::vector<double> weights_;
};

struct GraphEdge {
    int u;
    int v;
    double conductance;
};

/// E(f) = sum over edges of c_xy |f(x) - f(y)|^p. Not strongly local.
class GraphForm {
public:
    GraphForm(double p, std::vector<double> vertex_weights, std::vector<GraphEdge> edges);

    double p() const { return p_; }
    std::size_t vertex_count() const { return vertex_weights_.size(); }
    std::span<const GraphEdge> edges() const { return edges_; }
    std::span<const double> vertex_weights() const { return vertex_weights_; }

    double energy(std::span<const double> f) const;
    double energy_drv(std::span<const double> u, std::span<const double> v) const;

private:
    double p_;
    std::vector<double> vertex_weights_;
    std::vector<GraphEdge> edges_;
};

/// Renormalized level-L gasket energy rho^L * sum over level-L cell edges.
class SGForm {
public:
    /// rho <= 0 requests the renormalization estimate.
    SGForm(double p, int level, double rho = 0.0);

    double p() const { return p_; }
    int level() const { return graph_.level; }
    double rho() const { return rho_; }
    const SGGraph& graph() const { return graph_; }
    std::size_t vertex_count() const { return graph_.vertex_count; }

    double energy(std::span<const double> f) const;
    double energy_drv(std::span<const double> u, std::span<const double> v) const;

private:
    double p_;
    double rho_;
    SGGraph graph_;
};

using EnergyForm = std::variant<PLIntervalForm, GraphForm, SGForm>;

double form_p(const EnergyForm& form);
std::string form_kind(const EnergyForm& form);

// Property checks ---------------------------------------------------------------

struct ClarksonReport {
    double p = 0.0;
    int pairs = 0;
    std::uint64_t seed = 0;
    // worst signed slack of CI1..CI4, NaN where inapplicable for p
    std::array<double, 4> worst_slack{};
    bool pass = false;
};

/// Signed slacks of the four Clarkson inequalities for a seminorm-like F,
/// given F(u), F(v), F(u+v), F(u-v); inapplicable entries are NaN. Slacks are
/// divided by 2(F(u)^p + F(v)^p) so they are scale invariant.
std::array<double, 4> clarkson_slacks(double p, double fu, double fv, double fsum, double fdiff);

ClarksonReport check_clarkson(const EnergyForm& form, Sampler& sampler, int trials);

struct CheckItem {
    std::string name;
    std::string status;  // "pass", "fail", "skipped: ...", "recorded"
    double worst_slack = 0.0;
    std::string note;
};

struct AssumptionReport {
    std::string kind;
    double p = 0.0;
    std::uint64_t seed = 0;
    std::vector<CheckItem> items;
    bool pass() const;
};

AssumptionReport check_assumptions(const EnergyForm& form, Sampler& sampler, int trials = 50);

struct FoldIdentityReport {
    double lhs = 0.0;  // E(phi o f)
    double rhs = 0.0;  // sum LIP^p E(C_{a_{i-1}}^{a_i} o f)
    double rel_gap = 0.0;
    int max_fold_level = 0;       // largest n with E(T_n o f) checked
    double worst_fold_gap = 0.0;  // relative |E(T_n o f) - E(f)|
    bool pass = false;
};

/// Checks E(phi o f) = sum_i LIP(phi on cell i)^p E(C_{a_{i-1}}^{a_i} o f) for
/// phi affine on every cell of `partition`, and E(T_n o f) = E(f) for every
/// fold level whose materialization fits the piece cap.
FoldIdentityReport check_fold_identity(const PLIntervalForm& form, const PLFunction& f, const PLMap& phi,
                                       std::span<const double> partition);

}  // namespace pel
