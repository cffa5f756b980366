#include "kbm/verify.hpp"

#include <algorithm>
#include <cmath>

#include "kbm/rng.hpp"

namespace kbm {

namespace {

double bump1(double s) {
    const double q = 1.0 - s * s;
    if (q <= 0.0) return 0.0;
    return std::exp(1.0 - 1.0 / q);
}

double bump1_log_deriv(double s) {  // phi'/phi
    const double q = 1.0 - s * s;
    return -2.0 * s / (q * q);
}

// Gauss-Legendre nodes/weights on [-1,1] by Newton on Legendre polynomials.
void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
    x.resize(static_cast<size_t>(n));
    w.resize(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        double t = std::cos(3.14159265358979323846 * (i + 0.75) / (n + 0.5));
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = t;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2 * k - 1) * t * p1 - (k - 1) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            const double dp = n * (t * p1 - p0) / (t * t - 1.0);
            const double dt = p1 / dp;
            t -= dt;
            if (std::abs(dt) < 1e-15) {
                x[static_cast<size_t>(i)] = t;
                w[static_cast<size_t>(i)] = 2.0 / ((1.0 - t * t) * dp * dp);
                break;
            }
        }
    }
}

// Exact-for-smooth fixed-order quadrature of v over the sphere |y-c| = r,
// normalized to the average. Trapezoid in angle for d=2, Gauss-Legendre in
// cos(theta) x trapezoid in phi for d=3.
double sphere_average(const Vec& center, double r, int dim,
                      const std::function<double(const Vec&)>& v) {
    if (dim == 2) {
        const int n = 512;
        double sum = 0.0;
        for (int i = 0; i < n; ++i) {
            const double a = 2.0 * 3.14159265358979323846 * i / n;
            Vec y = center;
            y[0] += r * std::cos(a);
            y[1] += r * std::sin(a);
            sum += v(y);
        }
        return sum / n;
    }
    if (dim == 3) {
        std::vector<double> gx, gw;
        gauss_legendre(24, gx, gw);
        const int nphi = 48;
        double sum = 0.0, wsum = 0.0;
        for (size_t i = 0; i < gx.size(); ++i) {
            const double ct = gx[i];
            const double st = std::sqrt(std::max(0.0, 1.0 - ct * ct));
            for (int j = 0; j < nphi; ++j) {
                const double phi = 2.0 * 3.14159265358979323846 * j / nphi;
                Vec y = center;
                y[0] += r * st * std::cos(phi);
                y[1] += r * st * std::sin(phi);
                y[2] += r * ct;
                sum += gw[i] * v(y);
                wsum += gw[i];
            }
        }
        return sum / wsum;
    }
    throw std::invalid_argument("sphere pairing quadrature supports d = 2, 3 only");
}

// Midpoint integral of fn over the box restricted to Omega.
double box_midpoint(const Domain& dom, int cells, const std::function<double(const Vec&)>& fn) {
    Vec lo, hi;
    dom.bounding_box(lo, hi);
    const int d = dom.dim();
    Vec width(d);
    double cell_vol = 1.0;
    for (int i = 0; i < d; ++i) {
        width[i] = (hi[i] - lo[i]) / cells;
        cell_vol *= width[i];
    }
    std::vector<int> idx(static_cast<size_t>(d), 0);
    Vec x(d);
    double sum = 0.0;
    for (;;) {
        for (int i = 0; i < d; ++i) x[i] = lo[i] + (idx[static_cast<size_t>(i)] + 0.5) * width[i];
        if (dom.contains(x)) sum += fn(x);
        int axis = 0;
        while (axis < d && ++idx[static_cast<size_t>(axis)] == cells) {
            idx[static_cast<size_t>(axis)] = 0;
            ++axis;
        }
        if (axis == d) break;
    }
    return sum * cell_vol;
}

// <mu_k, v> with an error estimate: densities by two-level midpoint
// quadrature, sphere terms by exact surface quadrature, faces by a fine
// midpoint rule over the face box.
std::pair<double, double> measure_pairing(const DiffuseMeasure& mu, const Domain& dom,
                                          const std::function<double(const Vec&)>& v,
                                          int cells) {
    double total = 0.0, err = 0.0;
    for (size_t ti = 0; ti < mu.terms().size(); ++ti) {
        const MeasureTerm& t = mu.terms()[ti];
        if (t.kind == MeasureKind::Density) {
            auto gv = [&](const Vec& x) { return mu.term_density(static_cast<int>(ti), x) * v(x); };
            const double coarse = box_midpoint(dom, cells, gv);
            const double fine = box_midpoint(dom, 2 * cells, gv);
            total += t.sign * fine;
            err += std::abs(fine - coarse);
        } else if (t.kind == MeasureKind::SphereSurface) {
            total += t.sign * t.mass * sphere_average(t.center, t.radius, dom.dim(), v);
        } else {
            const int d = dom.dim();
            auto face_avg = [&](int cells_f) {
                std::vector<int> idx(static_cast<size_t>(d), 0);
                Vec x(d);
                x[t.face_axis] = t.face_coord;
                double sum = 0.0;
                long count = 0;
                for (;;) {
                    for (int i = 0; i < d; ++i) {
                        if (i == t.face_axis) continue;
                        x[i] = t.face_lo[i] + (idx[static_cast<size_t>(i)] + 0.5) *
                                                  (t.face_hi[i] - t.face_lo[i]) / cells_f;
                    }
                    sum += v(x);
                    ++count;
                    int axis = 0;
                    while (axis < d) {
                        if (axis == t.face_axis) {
                            ++axis;
                            continue;
                        }
                        if (++idx[static_cast<size_t>(axis)] < cells_f) break;
                        idx[static_cast<size_t>(axis)] = 0;
                        ++axis;
                    }
                    if (axis == d) break;
                }
                return sum / static_cast<double>(count);
            };
            const double coarse = face_avg(64);
            const double fine = face_avg(128);
            total += t.sign * t.mass * fine;
            err += t.mass * std::abs(fine - coarse);
        }
    }
    return {total, err};
}

}  // namespace

double BumpFunction::value(const Vec& x) const {
    double v = 1.0;
    for (int i = 0; i < x.dim; ++i) {
        v *= bump1((x[i] - center[i]) / width[i]);
        if (v == 0.0) return 0.0;
    }
    return v;
}

Vec BumpFunction::gradient(const Vec& x) const {
    Vec g(x.dim);
    const double v = value(x);
    if (v == 0.0) return g;
    for (int i = 0; i < x.dim; ++i) {
        const double s = (x[i] - center[i]) / width[i];
        g[i] = v * bump1_log_deriv(s) / width[i];
    }
    return g;
}

bool BumpFunction::supported_inside(const Domain& domain) const {
    const int d = center.dim;
    // corners and face centers of the support box
    for (int c = 0; c < (1 << d); ++c) {
        Vec x = center;
        for (int i = 0; i < d; ++i) x[i] += (c & (1 << i)) ? width[i] : -width[i];
        if (!domain.contains(x)) return false;
    }
    for (int i = 0; i < d; ++i) {
        for (double s : {-1.0, 1.0}) {
            Vec x = center;
            x[i] += s * width[i];
            if (!domain.contains(x)) return false;
        }
    }
    return true;
}

std::vector<BumpFunction> default_bumps(const Domain& domain, int count, uint64_t seed,
                                        double min_width) {
    std::vector<BumpFunction> bumps;
    RandomStream rng(seed, stream_ids::kVerifySalt);
    const double r = domain.bounding_radius();
    const int d = domain.dim();
    const double sd_floor =
        std::max(0.12 * r, min_width * std::sqrt(static_cast<double>(d)) / 0.75);
    int guard = 0;
    while (static_cast<int>(bumps.size()) < count && ++guard < 200000) {
        const Vec c = domain.sample_interior(rng);
        const double sd = domain.signed_distance(c);
        if (sd < sd_floor) continue;
        BumpFunction b;
        b.center = c;
        b.width = Vec(d);
        const double w = 0.75 * sd / std::sqrt(static_cast<double>(d));
        for (int i = 0; i < d; ++i) b.width[i] = w;
        if (!b.supported_inside(domain)) continue;
        bumps.push_back(b);
    }
    if (static_cast<int>(bumps.size()) < count)
        throw std::runtime_error(
            "default_bumps: could not place enough test functions (domain too small for the "
            "requested width?)");
    return bumps;
}

std::vector<DualityResidual> duality_residual(const SolutionField& u, const Problem& problem,
                                              std::span<const BumpFunction> bumps,
                                              uint64_t seed) {
    const int n = u.n_components();
    const int d = u.grid().dim;
    const Domain& dom = u.domain();
    for (const BumpFunction& b : bumps) {
        if (!b.supported_inside(dom))
            throw std::invalid_argument("duality_residual: test function support escapes Omega");
        for (int i = 0; i < u.grid().dim; ++i)
            if (b.width[i] < 3.0 * u.grid().spacing(i))
                throw std::invalid_argument(
                    "duality_residual: test function narrower than 3 grid cells; the grid "
                    "quadrature cannot resolve it");
    }

    // node strides and deep-node mask (all 2d axis neighbors interior)
    std::array<long, kMaxDim> stride{};
    long s = 1;
    for (int i = 0; i < d; ++i) {
        stride[static_cast<size_t>(i)] = s;
        s *= u.grid().res[static_cast<size_t>(i)];
    }
    const auto& values = u.raw_values();
    auto interior = [&](long idx) { return u.node_interior(idx); };
    std::vector<long> deep;
    std::vector<long> layer;
    for (long idx : u.interior_nodes()) {
        bool ok = true;
        for (int i = 0; i < d && ok; ++i)
            ok = interior(idx - stride[static_cast<size_t>(i)]) &&
                 interior(idx + stride[static_cast<size_t>(i)]);
        (ok ? deep : layer).push_back(idx);
    }
    const double cell = u.grid().cell_volume();

    // energy and f terms: node quadrature over the deep region, gradients of
    // u by central differences at grid spacing
    auto pass = [&](const std::vector<double>& vals, const BumpFunction& b, int k) {
        double energy = 0.0, fterm = 0.0;
        for (long idx : deep) {
            const Vec x = u.grid().node_position(idx);
            const double vx = b.value(x);
            const Vec gv = b.gradient(x);
            if (vx == 0.0 && gv.squared_norm() == 0.0) continue;
            double dot_grad = 0.0;
            for (int i = 0; i < d; ++i) {
                const double du =
                    (vals[static_cast<size_t>((idx + stride[static_cast<size_t>(i)]) * n + k)] -
                     vals[static_cast<size_t>((idx - stride[static_cast<size_t>(i)]) * n + k)]) /
                    (2.0 * u.grid().spacing(i));
                dot_grad += du * gv[i];
            }
            energy += 0.5 * cell * dot_grad;
            if (vx != 0.0 && !problem.f.is_zero()) {
                Vec y(n);
                for (int kk = 0; kk < n; ++kk) y[kk] = vals[static_cast<size_t>(idx * n + kk)];
                fterm += cell * problem.f.evaluate(x, y)[k] * vx;
            }
        }
        return std::pair<double, double>(energy, fterm);
    };

    const int quad_cells = std::max(16, 2 * (u.grid().res[0] - 1));

    // Lattice-resolvability of a bump at the grid spacing, measured on the
    // bump alone: relative defect of the node sum of |grad v|^2 against a
    // 4x finer lattice. This prices the energy-term quadrature error without
    // ever looking at u, so corrupted fields cannot inflate their own budget.
    auto lattice_defect = [&](const BumpFunction& b) {
        auto node_sum = [&](double h_scale) {
            double sum = 0.0;
            const double hx = u.grid().spacing(0) * h_scale;
            long count[kMaxDim];
            long total = 1;
            for (int i = 0; i < d; ++i) {
                count[i] = static_cast<long>(std::ceil(2.0 * b.width[i] / hx)) + 1;
                total *= count[i];
            }
            for (long it = 0; it < total; ++it) {
                Vec x(d);
                long rem = it;
                for (int i = 0; i < d; ++i) {
                    x[i] = b.center[i] - b.width[i] + hx * static_cast<double>(rem % count[i]);
                    rem /= count[i];
                }
                sum += b.gradient(x).squared_norm();
            }
            double cellv = 1.0;
            for (int i = 0; i < d; ++i) cellv *= hx;
            return sum * cellv;
        };
        const double coarse = node_sum(1.0);
        const double fine = node_sum(0.25);
        return std::abs(coarse - fine) / std::max(fine, 1e-300);
    };

    std::vector<DualityResidual> out;
    for (size_t bi = 0; bi < bumps.size(); ++bi) {
        const BumpFunction& b = bumps[bi];
        const double rel_v = lattice_defect(b);
        for (int k = 0; k < n; ++k) {
            DualityResidual r;
            r.component = k;
            r.bump = static_cast<int>(bi);
            const auto [energy, fterm] = pass(values, b, k);
            const auto [mu_term, mu_err] = measure_pairing(
                problem.measures[static_cast<size_t>(k)], dom,
                [&](const Vec& x) { return b.value(x); }, quad_cells);
            r.energy = energy;
            r.f_term = fterm;
            r.mu_term = mu_term;
            r.residual = energy - fterm - mu_term;

            // error budget: lattice defect scaled by an L1 bound on the
            // energy integrand, excluded layer, quadrature of the pairing,
            // and propagated MC noise
            double bound_e = 0.0;
            for (long idx : deep) {
                const Vec x = u.grid().node_position(idx);
                const Vec gv = b.gradient(x);
                if (gv.squared_norm() == 0.0) continue;
                double gu2 = 0.0;
                for (int i = 0; i < d; ++i) {
                    const double du =
                        (values[static_cast<size_t>((idx + stride[static_cast<size_t>(i)]) * n + k)] -
                         values[static_cast<size_t>((idx - stride[static_cast<size_t>(i)]) * n + k)]) /
                        (2.0 * u.grid().spacing(i));
                    gu2 += du * du;
                }
                bound_e += 0.5 * cell * std::sqrt(gu2) * gv.norm();
            }
            double budget = mu_err + 3.0 * rel_v * (bound_e + std::abs(fterm));
            for (long idx : layer) {
                const Vec x = u.grid().node_position(idx);
                const Vec gv = b.gradient(x);
                if (gv.squared_norm() == 0.0) continue;
                double gb = 0.0;
                for (int i = 0; i < d; ++i) {
                    const double up =
                        values[static_cast<size_t>((idx + stride[static_cast<size_t>(i)]) * n + k)];
                    const double dn =
                        values[static_cast<size_t>((idx - stride[static_cast<size_t>(i)]) * n + k)];
                    const double uc = values[static_cast<size_t>(idx * n + k)];
                    gb += std::abs(gv[i]) *
                          std::max(std::abs(up - uc), std::abs(uc - dn)) / u.grid().spacing(i);
                }
                budget += 0.5 * cell * gb;
            }
            // propagate the per-node standard errors by resampled perturbation
            bool has_se = false;
            for (long idx : u.interior_nodes())
                if (u.node_se(idx)[static_cast<size_t>(k)] > 0.0) has_se = true;
            if (has_se) {
                RandomStream rng(seed, stream_ids::kVerifySalt + 17 + bi);
                std::vector<double> pert(values.size());
                double acc = 0.0, acc2 = 0.0;
                const int draws = 8;
                for (int t = 0; t < draws; ++t) {
                    pert = values;
                    for (long idx : u.interior_nodes()) {
                        const auto se = u.node_se(idx);
                        for (int kk = 0; kk < n; ++kk)
                            pert[static_cast<size_t>(idx * n + kk)] +=
                                se[static_cast<size_t>(kk)] * rng.normal();
                    }
                    const auto [ep, fp] = pass(pert, b, k);
                    const double res_p = ep - fp - mu_term;
                    acc += res_p;
                    acc2 += res_p * res_p;
                }
                const double mean = acc / draws;
                const double sd = std::sqrt(std::max(0.0, acc2 / draws - mean * mean));
                budget += 3.0 * sd;
            }
            r.budget = budget + 1e-12 * std::max(1.0, std::abs(energy));
            r.ok = std::abs(r.residual) <= r.budget;
            out.push_back(r);
        }
    }
    return out;
}

std::vector<DynkinResult> dynkin_consistency(const SolutionField& u, const Problem& problem,
                                             const Domain& g_domain, std::span<const Vec> starts,
                                             int n_paths, const SolverConfig& cfg,
                                             uint64_t stream_salt) {
    const PathConfig pc = cfg.paths.resolved_for(problem.domain);
    const Problem prob = problem.prepared(pc);
    const int n = prob.n_components();

    std::vector<DynkinResult> out;
    uint64_t salt = stream_ids::kVerifySalt + stream_salt + 0x9000;
    for (const Vec& x0 : starts) {
        if (!g_domain.contains(x0))
            throw std::invalid_argument("dynkin_consistency: start outside the sub-domain");
        std::array<double, kMaxDim> sum{}, sum2{}, fint{};
        for (int p = 0; p < n_paths; ++p) {
            const auto path =
                simulate_killed_path(prob.domain, x0, pc, salt + static_cast<uint64_t>(p));
            const int jstar = subdomain_exit(path, g_domain);
            Vec boundary_val(n);
            if (jstar < path.interior_count()) boundary_val = u.evaluate(path.position(jstar));
            capped_occupation(path, jstar, n,
                              [&](const Vec& x, double* o) {
                                  const Vec ux = u.evaluate(x);
                                  const Vec fx = prob.f.evaluate(x, ux);
                                  for (int k = 0; k < n; ++k) o[k] = fx[k];
                              },
                              fint.data());
            for (int k = 0; k < n; ++k) {
                const double a = prob.measures[static_cast<size_t>(k)].weighted_accumulation(
                    path, [](const Vec&) { return 1.0; }, jstar * pc.step);
                const double val = boundary_val[k] + fint[static_cast<size_t>(k)] + a;
                sum[static_cast<size_t>(k)] += val;
                sum2[static_cast<size_t>(k)] += val * val;
            }
        }
        DynkinResult r;
        r.start = x0;
        r.discrepancy = Vec(n);
        r.se = Vec(n);
        const Vec ux0 = u.evaluate(x0);
        for (int k = 0; k < n; ++k) {
            const double mean = sum[static_cast<size_t>(k)] / n_paths;
            const double var =
                std::max(0.0, sum2[static_cast<size_t>(k)] / n_paths - mean * mean);
            r.discrepancy[k] = mean - ux0[k];
            r.se[k] = std::sqrt(var / n_paths);
        }
        out.push_back(r);
        salt += static_cast<uint64_t>(n_paths) + 17;
    }
    return out;
}

}  // namespace kbm
