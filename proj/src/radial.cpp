#include "kbm/radial.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace kbm {

namespace {

// Thomas solve; the coefficient vectors are clobbered, the solution lands in rhs.
void solve_tridiagonal(std::vector<double>& lower, std::vector<double>& diag,
                       std::vector<double>& upper, std::vector<double>& rhs) {
    const size_t m = diag.size();
    for (size_t i = 1; i < m; ++i) {
        const double w = lower[i] / diag[i - 1];
        diag[i] -= w * upper[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    rhs[m - 1] /= diag[m - 1];
    for (size_t i = m - 1; i-- > 0;) rhs[i] = (rhs[i] - upper[i] * rhs[i + 1]) / diag[i];
}

}  // namespace

double RadialProfile::value(double r, int component) const {
    if (radii.empty()) return 0.0;
    if (r <= radii.front()) return values[static_cast<size_t>(component)];
    if (r >= radii.back()) return 0.0;
    const double dr = radii[1] - radii[0];
    const size_t j = std::min(radii.size() - 2, static_cast<size_t>((r - radii.front()) / dr));
    const double t = (r - radii[j]) / dr;
    const size_t n = static_cast<size_t>(n_components);
    return (1.0 - t) * values[j * n + static_cast<size_t>(component)] +
           t * values[(j + 1) * n + static_cast<size_t>(component)];
}

Vec RadialProfile::value_vec(double r) const {
    Vec v(n_components);
    for (int k = 0; k < n_components; ++k) v[k] = value(r, k);
    return v;
}

RadialProfile radial_solve(const Problem& problem, int resolution, double damping,
                           int max_iters, double tol) {
    if (resolution < 100) throw std::invalid_argument("radial_solve: resolution too small");
    const int d = problem.domain.dim();
    const int n = problem.n_components();
    if (static_cast<int>(problem.measures.size()) != n)
        throw std::invalid_argument("radial_solve: measures not prepared for every component");

    const std::string& desc = problem.domain.describe();
    const bool is_ball = desc.rfind("ball", 0) == 0;
    if (!is_ball && desc.rfind("annulus", 0) != 0)
        throw std::invalid_argument("radial_solve: domain must be a ball or an annulus");

    Vec lo, hi;
    problem.domain.bounding_box(lo, hi);
    const Vec center = 0.5 * (lo + hi);
    const double r_max = 0.5 * (hi[0] - lo[0]);
    Vec e1(d);
    e1[0] = 1.0;

    double r_min = 0.0;
    if (!is_ball) {
        // inner radius by bisection of the SDF along +e1
        double in = 0.0, out = r_max;
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (in + out);
            if (problem.domain.signed_distance(center + mid * e1) > 0.0)
                out = mid;
            else
                in = mid;
        }
        r_min = 0.5 * (in + out);
    }

    const int m = resolution;
    const double dr = (r_max - r_min) / (m - 1);

    RadialProfile prof;
    prof.r_min = r_min;
    prof.r_max = r_max;
    prof.n_components = n;
    prof.radii.resize(static_cast<size_t>(m));
    for (int j = 0; j < m; ++j) prof.radii[static_cast<size_t>(j)] = r_min + j * dr;
    prof.values.assign(static_cast<size_t>(m) * static_cast<size_t>(n), 0.0);

    // static right-hand side: densities sampled along the radial ray plus
    // discrete deltas for concentric sphere terms
    std::vector<double> base_rhs(prof.values.size(), 0.0);
    for (int k = 0; k < n; ++k) {
        const DiffuseMeasure& mu = problem.measures[static_cast<size_t>(k)];
        for (size_t ti = 0; ti < mu.terms().size(); ++ti) {
            const MeasureTerm& t = mu.terms()[ti];
            if (t.kind == MeasureKind::Density) {
                for (int j = 0; j < m; ++j) {
                    const Vec x = center + prof.radii[static_cast<size_t>(j)] * e1;
                    base_rhs[static_cast<size_t>(j) * n + k] +=
                        t.sign * mu.term_density(static_cast<int>(ti), x);
                }
            } else if (t.kind == MeasureKind::SphereSurface) {
                if (distance(t.center, center) > 1e-9 * std::max(1.0, r_max))
                    throw std::invalid_argument("radial_solve: sphere term not concentric");
                const int j0 = static_cast<int>(std::lround((t.radius - r_min) / dr));
                if (j0 <= 0 || j0 >= m - 1)
                    throw std::invalid_argument("radial_solve: sphere term outside the domain");
                const double sigma = t.mass / sphere_area(d, t.radius);
                base_rhs[static_cast<size_t>(j0) * n + k] += t.sign * sigma / dr;
                prof.flux_jumps.emplace_back(t.radius, 2.0 * sigma);
            } else {
                throw std::invalid_argument("radial_solve: box-face terms are not radial");
            }
        }
    }

    // unknowns: j = 1..m-2, plus j = 0 for the ball (regular center)
    const int first = is_ball ? 0 : 1;
    const int unknowns = m - 1 - first;
    std::vector<double> lower(static_cast<size_t>(unknowns)), diag(static_cast<size_t>(unknowns)),
        upper(static_cast<size_t>(unknowns)), rhs(static_cast<size_t>(unknowns));

    std::vector<double> next(prof.values.size(), 0.0);
    const bool has_f = !problem.f.is_zero();
    for (int iter = 0; iter < max_iters; ++iter) {
        for (int k = 0; k < n; ++k) {
            for (int j = first; j < m - 1; ++j) {
                const int row = j - first;
                const double r = prof.radii[static_cast<size_t>(j)];
                double rhs_val = base_rhs[static_cast<size_t>(j) * n + k];
                if (has_f) {
                    const Vec x = center + r * e1;
                    Vec y(n);
                    for (int kk = 0; kk < n; ++kk)
                        y[kk] = prof.values[static_cast<size_t>(j) * n + kk];
                    rhs_val += problem.f.evaluate(x, y)[k];
                }
                rhs[static_cast<size_t>(row)] = rhs_val;
                if (is_ball && j == 0) {
                    // symmetry at the origin: -d (u_1 - u_0)/dr^2 = rhs
                    diag[static_cast<size_t>(row)] = d / (dr * dr);
                    upper[static_cast<size_t>(row)] = -d / (dr * dr);
                    lower[static_cast<size_t>(row)] = 0.0;
                } else {
                    const double a = 0.5 / (dr * dr);
                    const double b = 0.5 * (d - 1) / (r * 2.0 * dr);
                    diag[static_cast<size_t>(row)] = 2.0 * a;
                    lower[static_cast<size_t>(row)] = -a + b;
                    upper[static_cast<size_t>(row)] = -a - b;
                }
            }
            auto lo_c = lower;
            auto di_c = diag;
            auto up_c = upper;
            solve_tridiagonal(lo_c, di_c, up_c, rhs);
            for (int j = first; j < m - 1; ++j)
                next[static_cast<size_t>(j) * n + k] = rhs[static_cast<size_t>(j - first)];
        }
        double change = 0.0, scale = 0.0;
        const double theta = has_f ? damping : 1.0;
        for (size_t i = 0; i < prof.values.size(); ++i) {
            const double updated = (1.0 - theta) * prof.values[i] + theta * next[i];
            change = std::max(change, std::abs(updated - prof.values[i]));
            prof.values[i] = updated;
            scale = std::max(scale, std::abs(updated));
        }
        if (!has_f) return prof;
        if (change <= tol * std::max(1.0, scale)) return prof;
    }
    throw std::runtime_error("radial_solve: Picard iteration did not converge");
}

}  // namespace kbm
