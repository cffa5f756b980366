#pragma once

#include "kbm/solver.hpp"

namespace kbm {

// Deterministic 2-D reference: 5-point discretization of
// -1/2 Lap u = f(x, u) + g with zero values at exterior nodes, damped Picard
// for the nonlinearity, a direct sparse factorization per component. Surface
// measure terms enter through their mollified densities, so pass a problem
// prepared with the same step as the path engine for matched mollification.
SolutionField fd_solve(const Problem& problem, const PathConfig& paths, int resolution,
                       double damping = 0.8, int max_iters = 300, double tol = 1e-11);

}  // namespace kbm
