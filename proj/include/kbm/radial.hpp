#pragma once

#include <utility>
#include <vector>

#include "kbm/solver.hpp"

namespace kbm {

// Radial reference solution on a ball or annulus: values on a fine 1-D grid
// in r, one set per component. Flux jumps record concentric sphere-surface
// terms; the profile is continuous there while its derivative jumps.
struct RadialProfile {
    double r_min = 0.0, r_max = 0.0;
    int n_components = 1;
    std::vector<double> radii;
    std::vector<double> values;  // radii-major: values[j*n + k]
    std::vector<std::pair<double, double>> flux_jumps;  // (radius, |[u']|)

    double value(double r, int component) const;
    Vec value_vec(double r) const;
};

// Deterministic oracle for radially symmetric problems: integrates
//   -1/2 (u'' + (d-1) u'/r) = f(r, u) + density(r)
// with u(R) = 0 and u'(0) = 0 (ball) or u(r_in) = 0 (annulus), second-order
// finite differences on `resolution` points, damped Picard for the
// nonlinearity. Concentric sphere terms enter as exact derivative jumps
// (the oracle does not share the path engine's mollification).
// Radial symmetry of f and the measures is the caller's responsibility.
RadialProfile radial_solve(const Problem& problem, int resolution = 10001,
                           double damping = 0.7, int max_iters = 300, double tol = 1e-11);

}  // namespace kbm
