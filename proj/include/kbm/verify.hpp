#pragma once

#include <span>
#include <vector>

#include "kbm/solver.hpp"

namespace kbm {

// Tensor product of 1-D bumps exp(1 - 1/(1-s^2)), s = (x_i-c_i)/w_i, supported
// on the box c +- w. Smooth, compactly supported, value 1 at the center.
struct BumpFunction {
    Vec center, width;

    double value(const Vec& x) const;
    Vec gradient(const Vec& x) const;
    // support box strictly inside Omega (corner and face-center samples)
    bool supported_inside(const Domain& domain) const;
};

// `count` bumps at varied interior centers, widths scaled to stay inside
// Omega with margin; deterministic for a given seed. min_width keeps the
// supports resolvable by a grid quadrature (pass a few grid spacings).
std::vector<BumpFunction> default_bumps(const Domain& domain, int count, uint64_t seed = 0xB0B5u,
                                        double min_width = 0.0);

struct DualityResidual {
    int component = 0;
    int bump = 0;
    double energy = 0.0;   // 1/2 int grad(u).grad(v)
    double f_term = 0.0;   //     int f_k(u) v
    double mu_term = 0.0;  //     <mu_k, v>
    double residual = 0.0; // energy - f_term - mu_term
    double budget = 0.0;   // propagated MC error + quadrature refinement + layer
    bool ok = false;
};

// Variational identity E(u^k, v) = (f^k(u), v) + <mu^k, v> tested against a
// catalog of interior bumps. Gradients of u by central differences at grid
// spacing; the one-cell boundary layer (where the exterior clamp kinks the
// interpolant) is excluded from the quadrature and priced into the budget.
// Sphere-term pairings use an exact fixed-order surface quadrature,
// independent of the path engine's mollification.
std::vector<DualityResidual> duality_residual(const SolutionField& u, const Problem& problem,
                                              std::span<const BumpFunction> bumps,
                                              uint64_t seed = 0xD0Au);

struct DynkinResult {
    Vec start;
    Vec discrepancy, se;  // per component
};

// Sub-domain localization u(x) = E_x u(X_{tau_G ^ zeta})
// + E_x int_0^{tau_G ^ zeta} f(u)(X) dt + E_x A^mu_{tau_G ^ zeta}:
// the restriction of u to G solves the problem on G with its own trace as
// boundary data. Reports the Monte Carlo discrepancy per start.
std::vector<DynkinResult> dynkin_consistency(const SolutionField& u, const Problem& problem,
                                             const Domain& g_domain, std::span<const Vec> starts,
                                             int n_paths, const SolverConfig& cfg,
                                             uint64_t stream_salt = 0);

}  // namespace kbm
