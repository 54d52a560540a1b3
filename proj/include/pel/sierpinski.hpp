#pragma once

// Sierpinski gasket graph approximations and the p-energy renormalization
// constant.

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace pel {

struct NonConvergence : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Level-L graph approximation V_L of the gasket. Vertices 0, 1, 2 are V_0.
struct SGGraph {
    int level = 0;
    std::size_t vertex_count = 0;
    std::vector<std::array<int, 3>> cells;
    std::vector<std::pair<int, int>> edges;

    static SGGraph build(int level);
};

/// Sum over edges of |f(x) - f(y)|^p.
double sg_graph_energy(const SGGraph& graph, std::span<const double> values, double p);

struct HarmonicExtension {
    std::vector<double> values;
    double energy = 0.0;  // unrenormalized graph energy
    int iterations = 0;
    double gradient_norm = 0.0;
};

/// Minimizer of the level-`level` graph p-energy with the three boundary
/// values prescribed. Newton iterations on the strictly convex energy with a
/// floored Hessian and Armijo backtracking, started from `init` or the p=2
/// harmonic extension; stops once the sup-norm of the interior gradient is at
/// most `tol`.
HarmonicExtension sg_harmonic_extension(double p, std::array<double, 3> boundary, int level, double tol,
                                        std::optional<std::vector<double>> init = std::nullopt);

struct Renormalization {
    double rho = 0.0;
    double residual = 0.0;  // sup over the sampled circle of |E_{k+1} - E_k|
    int iterations = 0;
    std::vector<double> rho_history;
    std::vector<double> residual_history;
};

/// Normalized boundary energy on V_0, stored through its D6 symmetry as a
/// cosine series in the angle of the mean-free part of the boundary datum.
class BoundaryEnergy {
public:
    BoundaryEnergy(double p, std::vector<double> samples);

    /// Sum over the triangle edges of |du|^p, normalized so (1,0,0) has unit energy.
    static BoundaryEnergy base(double p, std::size_t samples = 65);

    double operator()(const std::array<double, 3>& u) const;
    /// Energy and gradient with respect to the three vertex values.
    double value_and_gradient(const std::array<double, 3>& u, std::array<double, 3>& grad) const;
    /// Profile on the unit circle of mean-free data, angle in radians.
    double profile(double theta) const;

    double p() const { return p_; }
    std::span<const double> samples() const { return samples_; }
    static double sample_angle(std::size_t j, std::size_t count);
    static std::array<double, 3> circle_datum(double theta);

private:
    double profile_derivative(double theta) const;

    double p_;
    std::vector<double> samples_;
    std::vector<double> coeffs_;
};

/// Minimum over the three level-1 midpoint values of the summed cell energies.
double sg_level1_min(const BoundaryEnergy& energy, const std::array<double, 3>& boundary,
                     std::array<double, 3>* argmin = nullptr);

/// One application of E -> rho * min{level-1 energy of extensions}, with rho
/// fixed by requiring unit energy for (1,0,0). Returns the new energy and rho.
std::pair<BoundaryEnergy, double> sg_renormalization_step(const BoundaryEnergy& energy);

/// Iterates the renormalization map from the base triangle energy until
/// successive rho estimates differ by less than tol.
Renormalization sg_renormalization(double p, double tol, int max_iterations = 200);

/// rho_p from sg_renormalization(p, 1e-10), computed once per p per process.
double sg_renormalization_constant(double p);

}  // namespace pel
