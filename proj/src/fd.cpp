#include "kbm/fd.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <cmath>
#include <stdexcept>
#include <vector>

namespace kbm {

namespace {

// Fraction theta in (0,1] of the grid spacing from x to the boundary along
// direction dir (sd(x) > 0, sd(x + h dir) <= 0), by bisection on the SDF.
double boundary_fraction(const Domain& dom, const Vec& x, const Vec& step_vec) {
    double lo = 0.0, hi = 1.0;
    for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        Vec y = x;
        for (int i = 0; i < x.dim; ++i) y[i] += mid * step_vec[i];
        if (dom.signed_distance(y) > 0.0)
            lo = mid;
        else
            hi = mid;
    }
    return std::max(0.5 * (lo + hi), 1e-6);
}

}  // namespace

SolutionField fd_solve(const Problem& problem, const PathConfig& paths, int resolution,
                       double damping, int max_iters, double tol) {
    if (problem.domain.dim() != 2) throw std::invalid_argument("fd_solve supports d = 2 only");
    const Problem prob = problem.prepared(paths);
    const int n = prob.n_components();

    SolutionField u(prob.domain, GridSpec::covering(prob.domain, resolution), n);
    const auto& nodes = u.interior_nodes();
    const long n_unknowns = static_cast<long>(nodes.size());
    if (n_unknowns == 0) throw std::runtime_error("fd_solve: no interior nodes at this resolution");

    std::vector<long> rank(static_cast<size_t>(u.node_count()), -1);
    for (size_t i = 0; i < nodes.size(); ++i)
        rank[static_cast<size_t>(nodes[i])] = static_cast<long>(i);

    const int rx = u.grid().res[0];
    const double hx = u.grid().spacing(0), hy = u.grid().spacing(1);

    // Shortley-Weller stencil: arms cut at the zero level set get their true
    // fractional spacing, which keeps the curved Dirichlet boundary at
    // second order instead of the staircase's first.
    using Triplet = Eigen::Triplet<double>;
    std::vector<Triplet> triplets;
    triplets.reserve(static_cast<size_t>(5 * n_unknowns));
    for (size_t i = 0; i < nodes.size(); ++i) {
        const long idx = nodes[i];
        const Vec x = u.grid().node_position(idx);
        const long nb[4] = {idx - 1, idx + 1, idx - rx, idx + rx};
        const double h_axis[4] = {hx, hx, hy, hy};
        double theta[4];
        for (int s = 0; s < 4; ++s) {
            if (rank[static_cast<size_t>(nb[s])] >= 0) {
                theta[s] = 1.0;
                continue;
            }
            Vec sv(2);
            sv[s / 2] = (s % 2 == 0 ? -1.0 : 1.0) * h_axis[s];
            theta[s] = boundary_fraction(prob.domain, x, sv);
        }
        double diag = 0.0;
        for (int axis = 0; axis < 2; ++axis) {
            const double tm = theta[2 * axis], tp = theta[2 * axis + 1];
            const double h2 = h_axis[2 * axis] * h_axis[2 * axis];
            diag += 1.0 / (h2 * tm * tp);
            for (int s = 0; s < 2; ++s) {
                const long r = rank[static_cast<size_t>(nb[2 * axis + s])];
                if (r < 0) continue;  // Dirichlet-0 at the cut point
                const double t_own = s == 0 ? tm : tp;
                triplets.emplace_back(static_cast<int>(i), static_cast<int>(r),
                                      -1.0 / (h2 * t_own * (tm + tp)));
            }
        }
        triplets.emplace_back(static_cast<int>(i), static_cast<int>(i), diag);
    }
    Eigen::SparseMatrix<double> A(static_cast<int>(n_unknowns), static_cast<int>(n_unknowns));
    A.setFromTriplets(triplets.begin(), triplets.end());
    A.makeCompressed();
    Eigen::SparseLU<Eigen::SparseMatrix<double>> factor;
    factor.analyzePattern(A);
    factor.factorize(A);
    if (factor.info() != Eigen::Success)
        throw std::runtime_error("fd_solve: factorization failed");

    // static part of the right-hand side: the (mollified) measure densities
    std::vector<Eigen::VectorXd> base(static_cast<size_t>(n),
                                      Eigen::VectorXd::Zero(n_unknowns));
    for (int k = 0; k < n; ++k)
        for (size_t i = 0; i < nodes.size(); ++i)
            base[static_cast<size_t>(k)][static_cast<long>(i)] =
                prob.measures[static_cast<size_t>(k)].signed_density(
                    u.grid().node_position(nodes[i]));

    const bool has_f = !prob.f.is_zero();
    Eigen::VectorXd rhs(n_unknowns);
    for (int iter = 0; iter < max_iters; ++iter) {
        double change = 0.0, scale = 0.0;
        std::vector<Eigen::VectorXd> solved(static_cast<size_t>(n));
        for (int k = 0; k < n; ++k) {
            rhs = base[static_cast<size_t>(k)];
            if (has_f) {
                for (size_t i = 0; i < nodes.size(); ++i) {
                    const Vec x = u.grid().node_position(nodes[i]);
                    Vec y(n);
                    const auto uv = u.node_values(nodes[i]);
                    for (int kk = 0; kk < n; ++kk) y[kk] = uv[static_cast<size_t>(kk)];
                    rhs[static_cast<long>(i)] += prob.f.evaluate(x, y)[k];
                }
            }
            solved[static_cast<size_t>(k)] = factor.solve(rhs);
            if (factor.info() != Eigen::Success)
                throw std::runtime_error("fd_solve: linear solve failed");
        }
        const double theta = has_f ? damping : 1.0;
        for (size_t i = 0; i < nodes.size(); ++i) {
            auto uv = u.node_values(nodes[i]);
            for (int k = 0; k < n; ++k) {
                const double updated = (1.0 - theta) * uv[static_cast<size_t>(k)] +
                                       theta * solved[static_cast<size_t>(k)][static_cast<long>(i)];
                change = std::max(change, std::abs(updated - uv[static_cast<size_t>(k)]));
                uv[static_cast<size_t>(k)] = updated;
                scale = std::max(scale, std::abs(updated));
            }
        }
        if (!has_f) return u;
        if (change <= tol * std::max(1.0, scale)) return u;
    }
    throw std::runtime_error("fd_solve: Picard iteration did not converge");
}

}  // namespace kbm
