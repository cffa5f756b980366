#pragma once

#include <optional>
#include <string>
#include <vector>

#include "kbm/domain.hpp"
#include "kbm/field.hpp"
#include "kbm/measure.hpp"
#include "kbm/nonlinearity.hpp"
#include "kbm/path.hpp"

namespace kbm {

// The Dirichlet system: -1/2 Lap u^k = f^k(x, u) + mu^k on Omega, u = 0 on
// the boundary, k = 1..n.
struct Problem {
    Domain domain;
    std::vector<DiffuseMeasure> measures;  // one per component
    Nonlinearity f;

    int n_components() const { return f.n_components(); }

    // Resolves surface mollifications against the step and validates
    // everything; returns the problem actually solved.
    Problem prepared(const PathConfig& paths) const;
};

struct SolverConfig {
    int grid_resolution = 33;
    int paths_per_node = 1000;
    int barrier_paths_per_node = 0;  // 0: max(1000, paths_per_node/8)
    int max_sweeps = 30;
    double tol = 0.0;    // 0: max(3*median SE, 1e-3 * field scale)
    double damping = 1.0;
    double truncation_base = 8.0;  // Picard sweep m uses level n0 * 2^m
    int quad_cells = 32;
    int threads = 1;
    PathConfig paths;

    int resolved_barrier_paths() const {
        return barrier_paths_per_node > 0 ? barrier_paths_per_node
                                          : std::max(1000, paths_per_node / 8);
    }
};

struct StampacchiaResult {
    bool applicable = false;
    double lhs = 0.0, rhs = 0.0;
    bool ok = true;
};

struct SolveReport {
    bool converged = false;
    std::string failure;  // empty on success
    int sweeps = 0;
    std::vector<double> sup_change;         // per sweep
    std::vector<double> truncation_levels;  // per sweep
    int paths_per_node = 0;
    double truncated_path_fraction = 0.0;
    double field_scale = 0.0;
    std::vector<double> se_median, se_max;  // per component, final sweep
    long barrier_nodes = 0;
    long barrier_violations = 0;            // |u| > v + 3*pooled SE at convergence
    long barrier_violations_after_resample = 0;
    StampacchiaResult stampacchia_a5, stampacchia_a4pp;
};

// Barrier v_k(x) = E_x int_0^zeta d|A^{mu_k}| estimated at grid nodes.
// Throws if more than 1% of paths hit the step cap.
SolutionField estimate_barrier(const Problem& problem, const SolverConfig& cfg);

// Picard iteration on u(x) = E_x[ int_0^zeta T_n(f)(X,u(X)) dt + A^mu_zeta ]
// with common random numbers across sweeps and one fresh final sweep that
// produces the reported field and its standard errors.
std::pair<SolutionField, SolveReport> picard_solve(const Problem& problem,
                                                   const SolverConfig& cfg,
                                                   const SolutionField* initial_guess = nullptr);

struct MartingaleCheckpoint {
    double t = 0.0;
    Vec mean, se;  // per component
};

// Mean of D(t) = u(X_{t^zeta}) - u(X_0) + int_0^{t^zeta} f(u)(X_s) ds
// + A^mu_{t^zeta} over paths from a fixed start; zero for solutions.
std::vector<MartingaleCheckpoint> martingale_residual(const SolutionField& u,
                                                      const Problem& problem, const Vec& start,
                                                      std::span<const double> checkpoints,
                                                      int n_paths, const SolverConfig& cfg,
                                                      uint64_t stream_salt = 0);

// ||f(u)||_{L^1} against the total-variation budget: rhs is sum_k ||mu^k||_TV
// under A4'' and alpha^{-1} of it under A5; ok iff lhs <= 1.05 * rhs.
StampacchiaResult stampacchia_check(const SolutionField& u, const Problem& problem,
                                    Condition which, int quad_cells = 32);

struct UniquenessProbe {
    bool all_converged = true;
    double max_pairwise_distance = 0.0;
    double max_pooled_se = 0.0;  // largest per-node pooled SE across pairs
};

// Re-runs the Picard solve from each initial guess and reports the largest
// pairwise sup distance between converged fields.
UniquenessProbe uniqueness_probe(const Problem& problem, const SolverConfig& cfg,
                                 std::span<const SolutionField> guesses);

}  // namespace kbm
