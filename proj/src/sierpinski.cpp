#include "pel/sierpinski.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>

namespace pel {

namespace {

double signed_pow(double d, double q) { return d < 0.0 ? -std::pow(-d, q) : std::pow(d, q); }

const double kInvSqrt2 = 1.0 / std::sqrt(2.0);
const double kInvSqrt6 = 1.0 / std::sqrt(6.0);
// orthonormal basis of the mean-free plane in R^3
const std::array<double, 3> kE1{kInvSqrt2, -kInvSqrt2, 0.0};
const std::array<double, 3> kE2{kInvSqrt6, kInvSqrt6, -2.0 * kInvSqrt6};

double dot(const std::array<double, 3>& a, const std::array<double, 3>& b) {
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

}  // namespace

SGGraph SGGraph::build(int level) {
    if (level < 0) throw std::invalid_argument("level must be nonnegative");
    SGGraph g;
    g.level = level;
    g.vertex_count = 3;
    g.cells = {{0, 1, 2}};
    for (int l = 0; l < level; ++l) {
        std::map<std::pair<int, int>, int> mid;
        auto midpoint = [&](int i, int j) {
            auto key = std::minmax(i, j);
            auto [it, inserted] = mid.try_emplace(key, static_cast<int>(g.vertex_count));
            if (inserted) ++g.vertex_count;
            return it->second;
        };
        std::vector<std::array<int, 3>> next;
        next.reserve(g.cells.size() * 3);
        for (const auto& [a, b, c] : g.cells) {
            int ab = midpoint(a, b), bc = midpoint(b, c), ca = midpoint(c, a);
            next.push_back({a, ab, ca});
            next.push_back({ab, b, bc});
            next.push_back({ca, bc, c});
        }
        g.cells = std::move(next);
    }
    for (const auto& [a, b, c] : g.cells) {
        g.edges.emplace_back(a, b);
        g.edges.emplace_back(b, c);
        g.edges.emplace_back(c, a);
    }
    return g;
}

double sg_graph_energy(const SGGraph& graph, std::span<const double> values, double p) {
    if (values.size() != graph.vertex_count) throw std::invalid_argument("vertex value count mismatch");
    double e = 0.0;
    for (const auto& [i, j] : graph.edges) e += std::pow(std::abs(values[i] - values[j]), p);
    return e;
}

HarmonicExtension sg_harmonic_extension(double p, std::array<double, 3> boundary, int level, double tol,
                                        std::optional<std::vector<double>> init) {
    if (level < 1) throw std::invalid_argument("harmonic extension needs level >= 1");
    if (!(tol > 0.0)) throw std::invalid_argument("tolerance must be positive");
    if (!(p > 1.0)) throw std::invalid_argument("p must exceed 1");
    auto graph = SGGraph::build(level);
    const auto n = graph.vertex_count;
    const auto m = static_cast<Eigen::Index>(n - 3);
    auto idx = [](int v) { return static_cast<Eigen::Index>(v - 3); };

    std::vector<double> u(n, 0.0);
    std::copy(boundary.begin(), boundary.end(), u.begin());

    // Assembles H (edge weights w_e) and the interior gradient.
    auto assemble = [&](double q, double floor, Eigen::VectorXd& grad) {
        std::vector<Eigen::Triplet<double>> trip;
        trip.reserve(graph.edges.size() * 4);
        grad.setZero(m);
        for (const auto& [i, j] : graph.edges) {
            double d = u[i] - u[j];
            double gw = q * signed_pow(d, q - 1.0);
            double hw = q == 2.0 ? 2.0 : q * (q - 1.0) * std::pow(std::max(std::abs(d), floor), q - 2.0);
            bool fi = i >= 3, fj = j >= 3;
            if (fi) {
                grad[idx(i)] += gw;
                trip.emplace_back(idx(i), idx(i), hw);
            }
            if (fj) {
                grad[idx(j)] -= gw;
                trip.emplace_back(idx(j), idx(j), hw);
            }
            if (fi && fj) {
                trip.emplace_back(idx(i), idx(j), -hw);
                trip.emplace_back(idx(j), idx(i), -hw);
            }
        }
        Eigen::SparseMatrix<double> h(m, m);
        h.setFromTriplets(trip.begin(), trip.end());
        return h;
    };

    Eigen::VectorXd grad;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver;
    if (init) {
        if (init->size() != n) throw std::invalid_argument("initial guess has wrong size");
        for (std::size_t v = 3; v < n; ++v) u[v] = (*init)[v];
    } else {
        auto h = assemble(2.0, 1.0, grad);
        solver.compute(h);
        Eigen::VectorXd step = solver.solve(grad);
        for (Eigen::Index k = 0; k < m; ++k) u[static_cast<std::size_t>(k + 3)] -= step[k];
    }

    double scale = std::max({std::abs(boundary[0] - boundary[1]), std::abs(boundary[1] - boundary[2]),
                             std::abs(boundary[2] - boundary[0])});
    HarmonicExtension out;
    if (scale == 0.0) {
        std::fill(u.begin(), u.end(), boundary[0]);
        out.values = u;
        return out;
    }
    const double floor = 1e-8 * scale;
    const int max_iter = 500;
    int it = 0;
    for (; it < max_iter; ++it) {
        auto h = assemble(p, floor, grad);
        double gnorm = grad.lpNorm<Eigen::Infinity>();
        out.gradient_norm = gnorm;
        if (gnorm <= tol) break;
        solver.compute(h);
        Eigen::VectorXd dir = -solver.solve(grad);
        double slope = grad.dot(dir);
        double e0 = sg_graph_energy(graph, u, p);
        double t = 1.0;
        std::vector<double> trial = u;
        bool accepted = false;
        for (int bt = 0; bt < 60; ++bt) {
            for (Eigen::Index k = 0; k < m; ++k) trial[static_cast<std::size_t>(k + 3)] =
                                                      u[static_cast<std::size_t>(k + 3)] + t * dir[k];
            double e1 = sg_graph_energy(graph, trial, p);
            if (e1 <= e0 + 1e-4 * t * slope) {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if (!accepted) {
            // no representable decrease left: accept if the gradient is at rounding level
            if (gnorm <= 1e3 * tol) break;
            throw NonConvergence("harmonic extension line search stalled");
        }
        u.swap(trial);
    }
    if (it == max_iter) throw NonConvergence("harmonic extension did not converge");
    out.iterations = it;
    out.energy = sg_graph_energy(graph, u, p);
    out.values = std::move(u);
    return out;
}

// BoundaryEnergy -----------------------------------------------------------------

double BoundaryEnergy::sample_angle(std::size_t j, std::size_t count) {
    return std::numbers::pi * static_cast<double>(j) / (6.0 * static_cast<double>(count - 1));
}

std::array<double, 3> BoundaryEnergy::circle_datum(double theta) {
    double c = std::cos(theta), s = std::sin(theta);
    return {c * kE1[0] + s * kE2[0], c * kE1[1] + s * kE2[1], c * kE1[2] + s * kE2[2]};
}

BoundaryEnergy::BoundaryEnergy(double p, std::vector<double> samples) : p_(p), samples_(std::move(samples)) {
    if (samples_.size() < 3) throw std::invalid_argument("need at least three samples");
    // DCT-I: e(theta_j) = sum'' a_m cos(pi m j / N), theta_j = pi j / (6N)
    const std::size_t big_n = samples_.size() - 1;
    coeffs_.assign(samples_.size(), 0.0);
    for (std::size_t mm = 0; mm <= big_n; ++mm) {
        double acc = 0.0;
        for (std::size_t j = 0; j <= big_n; ++j) {
            double w = (j == 0 || j == big_n) ? 0.5 : 1.0;
            acc += w * samples_[j] * std::cos(std::numbers::pi * static_cast<double>(mm * j) / big_n);
        }
        double a = 2.0 * acc / static_cast<double>(big_n);
        coeffs_[mm] = (mm == 0 || mm == big_n) ? 0.5 * a : a;
    }
}

BoundaryEnergy BoundaryEnergy::base(double p, std::size_t samples) {
    std::vector<double> s(samples);
    for (std::size_t j = 0; j < samples; ++j) {
        auto u = circle_datum(sample_angle(j, samples));
        double e = std::pow(std::abs(u[0] - u[1]), p) + std::pow(std::abs(u[1] - u[2]), p) +
                   std::pow(std::abs(u[2] - u[0]), p);
        s[j] = e / 2.0;  // (1,0,0) has raw energy 2
    }
    return BoundaryEnergy(p, std::move(s));
}

double BoundaryEnergy::profile(double theta) const {
    double acc = 0.0;
    for (std::size_t mm = 0; mm < coeffs_.size(); ++mm) acc += coeffs_[mm] * std::cos(6.0 * mm * theta);
    return acc;
}

double BoundaryEnergy::profile_derivative(double theta) const {
    double acc = 0.0;
    for (std::size_t mm = 0; mm < coeffs_.size(); ++mm) acc -= 6.0 * mm * coeffs_[mm] * std::sin(6.0 * mm * theta);
    return acc;
}

double BoundaryEnergy::operator()(const std::array<double, 3>& u) const {
    std::array<double, 3> g;
    return value_and_gradient(u, g);
}

double BoundaryEnergy::value_and_gradient(const std::array<double, 3>& u, std::array<double, 3>& grad) const {
    double a = dot(u, kE1), b = dot(u, kE2);
    double r = std::hypot(a, b);
    grad = {0.0, 0.0, 0.0};
    if (r == 0.0) return 0.0;
    double th = std::atan2(b, a);
    double c = a / r, s = b / r;
    double e = profile(th), de = profile_derivative(th);
    double rp1 = std::pow(r, p_ - 1.0);
    double da = rp1 * (p_ * e * c - de * s);
    double db = rp1 * (p_ * e * s + de * c);
    for (int k = 0; k < 3; ++k) grad[k] = da * kE1[k] + db * kE2[k];
    return rp1 * r * e;
}

double sg_level1_min(const BoundaryEnergy& energy, const std::array<double, 3>& u, std::array<double, 3>* argmin) {
    // unknowns: x0 = m01, x1 = m12, x2 = m20
    auto objective = [&](const std::array<double, 3>& x, std::array<double, 3>* g) {
        std::array<double, 3> c1{u[0], x[0], x[2]}, c2{x[0], u[1], x[1]}, c3{x[2], x[1], u[2]};
        std::array<double, 3> g1, g2, g3;
        double v = energy.value_and_gradient(c1, g1) + energy.value_and_gradient(c2, g2) +
                   energy.value_and_gradient(c3, g3);
        if (g) *g = {g1[1] + g2[0], g2[2] + g3[1], g1[2] + g3[0]};
        return v;
    };
    std::array<double, 3> x{(2 * u[0] + 2 * u[1] + u[2]) / 5, (u[0] + 2 * u[1] + 2 * u[2]) / 5,
                            (2 * u[0] + u[1] + 2 * u[2]) / 5};
    double scale = std::max({std::abs(u[0] - u[1]), std::abs(u[1] - u[2]), std::abs(u[2] - u[0])});
    if (scale == 0.0) {
        if (argmin) *argmin = x;
        return 0.0;
    }
    const double fd = 1e-6 * scale;
    std::array<double, 3> g;
    double val = objective(x, &g);
    for (int it = 0; it < 200; ++it) {
        double gn = std::max({std::abs(g[0]), std::abs(g[1]), std::abs(g[2])});
        if (gn <= 1e-14 * std::pow(scale, energy.p() - 1.0)) break;
        // Hessian by central differences of the analytic gradient
        double h[3][3];
        for (int k = 0; k < 3; ++k) {
            auto xp = x, xm = x;
            xp[k] += fd;
            xm[k] -= fd;
            std::array<double, 3> gp, gm;
            objective(xp, &gp);
            objective(xm, &gm);
            for (int r = 0; r < 3; ++r) h[r][k] = (gp[r] - gm[r]) / (2 * fd);
        }
        Eigen::Matrix3d hm;
        for (int r = 0; r < 3; ++r)
            for (int k = 0; k < 3; ++k) hm(r, k) = 0.5 * (h[r][k] + h[k][r]);
        Eigen::Vector3d gv(g[0], g[1], g[2]);
        Eigen::LLT<Eigen::Matrix3d> llt(hm);
        Eigen::Vector3d dir = llt.info() == Eigen::Success ? Eigen::Vector3d(-llt.solve(gv)) : Eigen::Vector3d(-gv);
        double slope = gv.dot(dir);
        if (slope >= 0.0) {
            dir = -gv;
            slope = -gv.squaredNorm();
        }
        double t = 1.0;
        bool moved = false;
        for (int bt = 0; bt < 60; ++bt) {
            std::array<double, 3> xt{x[0] + t * dir[0], x[1] + t * dir[1], x[2] + t * dir[2]};
            std::array<double, 3> gt;
            double vt = objective(xt, &gt);
            if (vt <= val + 1e-4 * t * slope) {
                x = xt;
                val = vt;
                g = gt;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if (!moved) break;
    }
    if (argmin) *argmin = x;
    return val;
}

std::pair<BoundaryEnergy, double> sg_renormalization_step(const BoundaryEnergy& energy) {
    auto count = energy.samples().size();
    std::vector<double> next(count);
    for (std::size_t j = 0; j < count; ++j)
        next[j] = sg_level1_min(energy, BoundaryEnergy::circle_datum(BoundaryEnergy::sample_angle(j, count)));
    double unit = sg_level1_min(energy, {1.0, 0.0, 0.0});
    double rho = 1.0 / unit;
    for (double& v : next) v *= rho;
    return {BoundaryEnergy(energy.p(), std::move(next)), rho};
}

Renormalization sg_renormalization(double p, double tol, int max_iterations) {
    if (!(p > 1.0)) throw std::invalid_argument("p must exceed 1");
    if (!(tol > 0.0)) throw std::invalid_argument("tolerance must be positive");
    Renormalization out;
    auto current = BoundaryEnergy::base(p);
    for (int k = 0; k < max_iterations; ++k) {
        auto [next, rho] = sg_renormalization_step(current);
        double res = 0.0;
        for (std::size_t j = 0; j < next.samples().size(); ++j)
            res = std::max(res, std::abs(next.samples()[j] - current.samples()[j]));
        out.rho_history.push_back(rho);
        out.residual_history.push_back(res);
        current = std::move(next);
        if (k >= 1 && std::abs(rho - out.rho_history[k - 1]) < tol) {
            out.rho = rho;
            out.residual = res;
            out.iterations = k + 1;
            return out;
        }
    }
    throw NonConvergence("renormalization constant did not settle within the iteration cap");
}

double sg_renormalization_constant(double p) {
    static std::mutex mutex;
    static std::map<double, double> cache;
    std::lock_guard lock(mutex);
    auto it = cache.find(p);
    if (it != cache.end()) return it->second;
    double rho = sg_renormalization(p, 1e-10).rho;
    cache.emplace(p, rho);
    return rho;
}

}  // namespace pel
