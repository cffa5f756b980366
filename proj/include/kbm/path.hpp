#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "kbm/domain.hpp"
#include "kbm/rng.hpp"
#include "kbm/vec.hpp"

namespace kbm {

// Discretization parameters for killed Brownian paths.
//
// Killing is detected when the signed distance drops to
// delta = exit_tolerance_factor * sqrt(step). The default factor 0.5826
// (-zeta(1/2)/sqrt(2*pi)) is the standard continuity correction for
// discretely monitored killing: it cancels the O(sqrt(h)) exit-time bias of
// checking the boundary only on the time grid.
struct PathConfig {
    double step = 1e-3;
    int max_steps = 0;  // 0: resolved from the domain, see resolved_for()
    double exit_tolerance_factor = 0.5826;
    uint64_t base_seed = 1;

    double kill_tolerance() const { return exit_tolerance_factor * std::sqrt(step); }

    // Validates and fills max_steps so that max_steps*h covers 20x the worst
    // mean exit time; keeps the truncated fraction far below 0.1%.
    PathConfig resolved_for(const Domain& domain) const {
        if (!(step > 0.0)) throw std::invalid_argument("path step must be positive");
        if (exit_tolerance_factor < 0.0)
            throw std::invalid_argument("exit_tolerance_factor must be >= 0");
        PathConfig out = *this;
        if (out.max_steps <= 0) {
            const double r = domain.bounding_radius();
            const double worst = r * r / static_cast<double>(domain.dim());
            out.max_steps = static_cast<int>(std::ceil(20.0 * worst / step)) + 1;
        }
        return out;
    }
};

// One recorded trajectory. positions holds the interior points x_0..x_{L-1}
// (flattened); the path leaves Omega between x_{L-1} and exit_point, so
// zeta = lifetime_index * step with lifetime_index = L. For truncated paths
// (max_steps reached while interior) exit_point is the last interior point.
struct KilledPath {
    int dim = 0;
    double step = 0.0;
    double kill_tolerance = 0.0;
    std::vector<double> positions;
    int lifetime_index = 0;
    Vec exit_point;
    bool truncated = false;

    int interior_count() const { return static_cast<int>(positions.size()) / dim; }
    Vec position(int j) const {
        Vec x(dim);
        for (int i = 0; i < dim; ++i) x[i] = positions[static_cast<size_t>(j) * dim + i];
        return x;
    }
    double lifetime() const { return lifetime_index * step; }
};

// Trapezoidal accumulator matched to the walk visitor protocol: weight h/2 on
// the start sample, h on interior arrivals, and the final half-step freezes
// the last interior sample (fields vanish at the boundary, so the exit value
// is not evaluated). For g == 1 the total is exactly lifetime_index * step.
class OccupationAccumulator {
  public:
    explicit OccupationAccumulator(double step) : h_(step) {}

    void start(double g0) {
        total_ = 0.5 * h_ * g0;
        last_ = g0;
    }
    void interior(double g) {
        total_ += h_ * g;
        last_ = g;
    }
    // On a killed exit the last interior sample gains the closing half step;
    // on truncation the open end is trimmed back to the trapezoid rule.
    double finish(bool truncated) const {
        return truncated ? total_ - 0.5 * h_ * last_ : total_ + 0.5 * h_ * last_;
    }

  private:
    double h_;
    double total_ = 0.0;
    double last_ = 0.0;
};

// Core stepping loop shared by the recording and streaming consumers.
// Visitor protocol:
//   void start(const Vec& x0);
//   void interior(const Vec& x, int j);            // arrival that stayed inside
//   void finish(const Vec& exit_point, int lifetime_index, bool truncated);
// Trajectories are a deterministic function of (base_seed, stream_id).
template <class Visitor>
inline void walk_killed(const Domain& domain, const Vec& start, const PathConfig& cfg,
                        uint64_t stream_id, Visitor&& vis) {
    const int d = domain.dim();
    const double delta = cfg.kill_tolerance();
    double sd_prev = domain.signed_distance(start);
    if (!(sd_prev > 0.0)) throw std::invalid_argument("walk_killed: start point not inside Omega");

    RandomStream rng(cfg.base_seed, stream_id);
    const double sqrt_h = std::sqrt(cfg.step);

    Vec x = start;
    vis.start(x);
    for (int j = 1; j <= cfg.max_steps; ++j) {
        Vec xn = x;
        for (int i = 0; i < d; ++i) xn[i] += sqrt_h * rng.normal();
        const double s = domain.signed_distance(xn);
        if (s <= delta) {
            // Project to the zero level set along the last increment,
            // linearly in signed distance (clamped against flat spots).
            const double denom = sd_prev - s;
            double t = denom > 1e-300 ? sd_prev / denom : 1.0;
            if (t > 2.0) t = 2.0;
            Vec exit = x;
            for (int i = 0; i < d; ++i) exit[i] += t * (xn[i] - x[i]);
            vis.finish(exit, j, false);
            return;
        }
        x = xn;
        sd_prev = s;
        vis.interior(x, j);
    }
    vis.finish(x, cfg.max_steps, true);
}

// Simulates one killed path and records it. start must lie in Omega;
// truncation (max_steps reached) is reported on the path, not an error.
KilledPath simulate_killed_path(const Domain& domain, const Vec& start, const PathConfig& cfg,
                                uint64_t path_index);

// Trapezoidal approximation of the occupation integral of g along the path;
// g is evaluated at interior positions only.
double occupation_integral(const KilledPath& path, const std::function<double(const Vec&)>& g);

// Trapezoid of a vector integrand over [0, (horizon wedge zeta) * h], with
// the same endpoint conventions as OccupationAccumulator: a path killed
// within the horizon closes on its last interior sample, a path alive at the
// horizon ends with a plain half weight there. g(x, out) fills n values.
template <class G>
inline void capped_occupation(const KilledPath& path, long horizon_steps, int n, G&& g,
                              double* out) {
    for (int k = 0; k < n; ++k) out[k] = 0.0;
    const int count = path.interior_count();
    if (count == 0 || horizon_steps <= 0) return;
    const bool killed_inside = !path.truncated && path.lifetime_index <= horizon_steps;
    const int m = killed_inside ? count - 1
                                : static_cast<int>(std::min<long>(count - 1, horizon_steps));
    if (!killed_inside && m <= 0) return;

    double cur[kMaxDim];
    g(path.position(0), cur);
    for (int k = 0; k < n; ++k) out[k] = 0.5 * path.step * cur[k];
    for (int j = 1; j <= m; ++j) {
        g(path.position(j), cur);
        const double w = (j == m && !killed_inside) ? 0.5 * path.step : path.step;
        for (int k = 0; k < n; ++k) out[k] += w * cur[k];
    }
    if (killed_inside)
        for (int k = 0; k < n; ++k) out[k] += 0.5 * path.step * cur[k];
}

// Index of the first recorded position within tolerance of leaving g_domain,
// capped at lifetime_index (tau_G wedge zeta on the grid). tolerance < 0
// uses the path's own kill tolerance so sub-domain exits carry the same
// boundary-shift correction as the killing rule.
int subdomain_exit(const KilledPath& path, const Domain& g_domain, double tolerance = -1.0);

}  // namespace kbm
