#include "kbm/measure.hpp"

#include <algorithm>
#include <cmath>

namespace kbm {

namespace {

double box_volume(const Vec& lo, const Vec& hi) {
    double v = 1.0;
    for (int i = 0; i < lo.dim; ++i) v *= hi[i] - lo[i];
    return v;
}

// Midpoint rule over the bounding box restricted to Omega.
double midpoint_integral(const Domain& dom, int cells,
                         const std::function<double(const Vec&)>& g) {
    Vec lo, hi;
    dom.bounding_box(lo, hi);
    const int d = dom.dim();
    double total_cells = 1.0;
    for (int i = 0; i < d; ++i) total_cells *= cells;
    if (total_cells > 2.2e7)
        throw std::invalid_argument("quadrature grid too large; lower cells_per_axis");

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
        if (dom.contains(x)) sum += g(x);
        int axis = 0;
        while (axis < d && ++idx[static_cast<size_t>(axis)] == cells) {
            idx[static_cast<size_t>(axis)] = 0;
            ++axis;
        }
        if (axis == d) break;
    }
    return sum * cell_vol;
}

Vec sample_direction(int dim, RandomStream& rng) {
    Vec dir(dim);
    for (;;) {
        double n2 = 0.0;
        for (int i = 0; i < dim; ++i) {
            dir[i] = rng.normal();
            n2 += dir[i] * dir[i];
        }
        if (n2 > 1e-30) {
            dir *= 1.0 / std::sqrt(n2);
            return dir;
        }
    }
}

struct MeanSe {
    double mean = 0.0, se = 0.0;
};

class RunningMean {
  public:
    void add(double x) {
        ++n_;
        s_ += x;
        s2_ += x * x;
    }
    MeanSe result() const {
        const double n = static_cast<double>(n_);
        const double m = s_ / n;
        const double var = std::max(0.0, s2_ / n - m * m);
        return {m, std::sqrt(var / n)};
    }

  private:
    long n_ = 0;
    double s_ = 0.0, s2_ = 0.0;
};

double term_density_impl(const MeasureTerm& t, int dim, const Vec& x) {
    switch (t.kind) {
        case MeasureKind::Density:
            return t.density.eval(std::span<const double>(x.c.data(), static_cast<size_t>(dim)));
        case MeasureKind::SphereSurface: {
            const double rho = distance(x, t.center);
            if (std::abs(rho - t.radius) >= t.mollification) return 0.0;
            return t.mass / (sphere_area(dim, t.radius) * 2.0 * t.mollification);
        }
        case MeasureKind::BoxFaceSurface: {
            if (std::abs(x[t.face_axis] - t.face_coord) >= t.mollification) return 0.0;
            double area = 1.0;
            for (int i = 0; i < dim; ++i) {
                if (i == t.face_axis) continue;
                if (x[i] < t.face_lo[i] || x[i] > t.face_hi[i]) return 0.0;
                area *= t.face_hi[i] - t.face_lo[i];
            }
            return t.mass / (area * 2.0 * t.mollification);
        }
    }
    return 0.0;
}

}  // namespace

double sphere_area(int dim, double r) {
    // 2 pi^{d/2} r^{d-1} / Gamma(d/2)
    return 2.0 * std::pow(3.14159265358979323846, dim / 2.0) * std::pow(r, dim - 1) /
           std::tgamma(dim / 2.0);
}

void DiffuseMeasure::add_density(int sign, Expression g) {
    MeasureTerm t;
    t.sign = sign >= 0 ? +1 : -1;
    t.kind = MeasureKind::Density;
    t.density = std::move(g);
    terms_.push_back(std::move(t));
}

void DiffuseMeasure::add_sphere_surface(int sign, Vec center, double radius, double mass,
                                        double mollification) {
    if (center.dim != dim_) throw std::invalid_argument("sphere center has wrong dimension");
    if (!(radius > 0.0)) throw std::invalid_argument("sphere radius must be positive");
    if (mass < 0.0) throw std::invalid_argument("surface mass must be non-negative");
    MeasureTerm t;
    t.sign = sign >= 0 ? +1 : -1;
    t.kind = MeasureKind::SphereSurface;
    t.center = center;
    t.radius = radius;
    t.mass = mass;
    t.mollification = mollification;
    terms_.push_back(std::move(t));
}

void DiffuseMeasure::add_box_face_surface(int sign, int axis, double coord, Vec lo, Vec hi,
                                          double mass, double mollification) {
    if (lo.dim != dim_ || hi.dim != dim_)
        throw std::invalid_argument("face bounds have wrong dimension");
    if (axis < 0 || axis >= dim_) throw std::invalid_argument("face axis out of range");
    for (int i = 0; i < dim_; ++i)
        if (i != axis && !(lo[i] < hi[i]))
            throw std::invalid_argument("face has empty extent on some axis");
    if (mass < 0.0) throw std::invalid_argument("surface mass must be non-negative");
    MeasureTerm t;
    t.sign = sign >= 0 ? +1 : -1;
    t.kind = MeasureKind::BoxFaceSurface;
    t.face_axis = axis;
    t.face_coord = coord;
    t.face_lo = lo;
    t.face_hi = hi;
    t.mass = mass;
    t.mollification = mollification;
    terms_.push_back(std::move(t));
}

DiffuseMeasure DiffuseMeasure::resolved(double step) const {
    DiffuseMeasure out = *this;
    const double eps = 5.0 * std::sqrt(step);
    for (MeasureTerm& t : out.terms_) {
        if (t.kind != MeasureKind::Density && t.mollification <= 0.0) t.mollification = eps;
    }
    return out;
}

void DiffuseMeasure::validate(const Domain& domain) const {
    if (domain.dim() != dim_) throw std::invalid_argument("measure/domain dimension mismatch");
    for (size_t ti = 0; ti < terms_.size(); ++ti) {
        const MeasureTerm& t = terms_[ti];
        const std::string tag = "measure term " + std::to_string(ti + 1);
        if (t.kind == MeasureKind::Density) {
            midpoint_integral(domain, 12, [&](const Vec& x) {
                const double g = term_density_impl(t, dim_, x);
                if (!std::isfinite(g))
                    throw MeasureError(MeasureError::Code::NonFiniteDensity,
                                       tag + ": density is not finite");
                if (g < 0.0)
                    throw MeasureError(MeasureError::Code::NegativeDensity,
                                       tag + ": density is negative (signs belong on the term)");
                return g;
            });
            continue;
        }
        if (t.mollification <= 0.0)
            throw MeasureError(MeasureError::Code::Unresolved,
                               tag + ": mollification width unresolved; call resolved(step) first");
        RandomStream rng(0xA11CEu, 0x5u * (ti + 1));
        if (t.kind == MeasureKind::SphereSurface) {
            for (int k = 0; k < 256; ++k) {
                const Vec dir = sample_direction(dim_, rng);
                for (double rho : {t.radius - t.mollification, t.radius + t.mollification}) {
                    if (rho <= 0.0) continue;
                    if (domain.signed_distance(t.center + rho * dir) <= 0.0)
                        throw MeasureError(MeasureError::Code::SurfaceOutsideDomain,
                                           tag + ": mollified sphere shell leaves the domain");
                }
            }
        } else {
            for (int k = 0; k < 256; ++k) {
                Vec x(dim_);
                for (int i = 0; i < dim_; ++i)
                    x[i] = t.face_lo[i] + (t.face_hi[i] - t.face_lo[i]) * rng.uniform();
                for (double off : {-t.mollification, t.mollification}) {
                    x[t.face_axis] = t.face_coord + off;
                    if (domain.signed_distance(x) <= 0.0)
                        throw MeasureError(MeasureError::Code::SurfaceOutsideDomain,
                                           tag + ": mollified face slab leaves the domain");
                }
            }
        }
    }
}

double DiffuseMeasure::term_density(int term, const Vec& x) const {
    return term_density_impl(terms_[static_cast<size_t>(term)], dim_, x);
}

double DiffuseMeasure::signed_density(const Vec& x) const {
    double s = 0.0;
    for (const MeasureTerm& t : terms_) s += t.sign * term_density_impl(t, dim_, x);
    return s;
}

double DiffuseMeasure::abs_density(const Vec& x) const {
    double s = 0.0;
    for (const MeasureTerm& t : terms_) s += term_density_impl(t, dim_, x);
    return s;
}

QuadratureResult DiffuseMeasure::total_variation(const Domain& domain,
                                                 int cells_per_axis) const {
    QuadratureResult out;
    for (const MeasureTerm& t : terms_) {
        if (t.kind != MeasureKind::Density) {
            out.value += t.mass;  // stored exactly
            continue;
        }
        auto g = [&](const Vec& x) { return term_density_impl(t, dim_, x); };
        const double coarse = midpoint_integral(domain, cells_per_axis, g);
        const double fine = midpoint_integral(domain, 2 * cells_per_axis, g);
        if (!std::isfinite(fine))
            throw MeasureError(MeasureError::Code::NonFiniteDensity,
                               "total_variation: density quadrature diverged");
        out.value += fine;
        out.error_estimate += std::abs(fine - coarse);
    }
    return out;
}

AdditiveAccumulation DiffuseMeasure::accumulate(const KilledPath& path,
                                                bool with_partials) const {
    AdditiveAccumulation out;
    const int n = path.interior_count();
    if (n == 0 || terms_.empty()) return out;
    // Per-term accumulation keeps superposition and scaling exact per path.
    std::vector<OccupationAccumulator> acc(terms_.size(), OccupationAccumulator(path.step));
    if (with_partials) out.partials.resize(static_cast<size_t>(n), 0.0);

    double run = 0.0;
    for (size_t ti = 0; ti < terms_.size(); ++ti) {
        const double g = term_density_impl(terms_[ti], dim_, path.position(0));
        acc[ti].start(g);
        run += terms_[ti].sign * 0.5 * path.step * g;
    }
    if (with_partials) out.partials[0] = run;
    for (int j = 1; j < n; ++j) {
        const Vec x = path.position(j);
        double inc = 0.0;
        for (size_t ti = 0; ti < terms_.size(); ++ti) {
            const double g = term_density_impl(terms_[ti], dim_, x);
            acc[ti].interior(g);
            inc += terms_[ti].sign * path.step * g;
        }
        if (with_partials)
            out.partials[static_cast<size_t>(j)] = out.partials[static_cast<size_t>(j) - 1] + inc;
    }
    for (size_t ti = 0; ti < terms_.size(); ++ti)
        out.total += terms_[ti].sign * acc[ti].finish(path.truncated);
    return out;
}

double DiffuseMeasure::weighted_accumulation(const KilledPath& path,
                                             const std::function<double(const Vec&)>& f,
                                             double t) const {
    const int n = path.interior_count();
    if (n == 0 || terms_.empty()) return 0.0;
    const long horizon = std::lround(t / path.step);
    auto integrand = [&](const Vec& x) { return f(x) * signed_density(x); };

    if (!path.truncated && path.lifetime_index <= horizon) {
        // killed before the horizon: full pathwise accumulation
        OccupationAccumulator acc(path.step);
        acc.start(integrand(path.position(0)));
        for (int j = 1; j < n; ++j) acc.interior(integrand(path.position(j)));
        return acc.finish(false);
    }
    // alive at the horizon: plain trapezoid over [0, horizon*h]
    const int m = static_cast<int>(std::min<long>(n - 1, horizon));
    if (m <= 0) return 0.0;
    double sum = 0.5 * (integrand(path.position(0)) + integrand(path.position(m)));
    for (int j = 1; j < m; ++j) sum += integrand(path.position(j));
    return sum * path.step;
}

RevuzResult revuz_check(const DiffuseMeasure& measure, const Domain& domain,
                        const PathConfig& cfg, const std::function<double(const Vec&)>& f,
                        const std::function<double(const Vec&)>& h, double t, int n_paths,
                        uint64_t stream_salt) {
    PathConfig rc = cfg.resolved_for(domain);
    const long horizon = std::lround(t / rc.step);

    Vec lo, hi;
    domain.bounding_box(lo, hi);
    const double vol_box = box_volume(lo, hi);
    const int d = domain.dim();

    RevuzResult out;
    if (horizon <= 0 || measure.empty()) return out;
    rc.max_steps = static_cast<int>(std::min<long>(rc.max_steps, horizon));

    // lhs: paths started from h.m (box sampling with an indicator weight)
    const uint64_t salt = stream_salt + stream_ids::kVerifySalt;
    RunningMean lhs;
    for (int i = 0; i < n_paths; ++i) {
        const uint64_t base = salt + 2ull * static_cast<uint64_t>(i);
        RandomStream sampler(rc.base_seed, base);
        Vec x(d);
        for (int k = 0; k < d; ++k) x[k] = lo[k] + (hi[k] - lo[k]) * sampler.uniform();
        if (!domain.contains(x)) {
            lhs.add(0.0);
            continue;
        }
        const auto path = simulate_killed_path(domain, x, rc, base + 1);
        lhs.add(vol_box * h(x) * measure.weighted_accumulation(path, f, t));
    }
    const auto lres = lhs.result();
    out.lhs = lres.mean;
    out.se_lhs = lres.se;

    // rhs: paths started from mu itself, one batch per term
    double rhs = 0.0, var_rhs = 0.0;
    for (size_t ti = 0; ti < measure.terms().size(); ++ti) {
        const MeasureTerm& term = measure.terms()[ti];
        const uint64_t salt2 = salt + 2ull * static_cast<uint64_t>(n_paths) * (ti + 1) + 977ull;
        RunningMean acc;
        for (int i = 0; i < n_paths; ++i) {
            const uint64_t base = salt2 + 2ull * static_cast<uint64_t>(i);
            RandomStream sampler(rc.base_seed, base);
            Vec y(d);
            double w = 0.0;
            if (term.kind == MeasureKind::Density) {
                for (int k = 0; k < d; ++k) y[k] = lo[k] + (hi[k] - lo[k]) * sampler.uniform();
                if (domain.contains(y)) w = vol_box * measure.term_density(static_cast<int>(ti), y);
            } else if (term.kind == MeasureKind::SphereSurface) {
                const Vec dir = sample_direction(d, sampler);
                const double rho =
                    term.radius + term.mollification * (2.0 * sampler.uniform() - 1.0);
                y = term.center + rho * dir;
                if (rho > 0.0) w = term.mass * std::pow(rho / term.radius, d - 1);
            } else {
                for (int k = 0; k < d; ++k)
                    y[k] = term.face_lo[k] + (term.face_hi[k] - term.face_lo[k]) * sampler.uniform();
                y[term.face_axis] =
                    term.face_coord + term.mollification * (2.0 * sampler.uniform() - 1.0);
                w = term.mass;
            }
            if (w == 0.0 || !domain.contains(y)) {
                acc.add(0.0);
                continue;
            }
            const auto path = simulate_killed_path(domain, y, rc, base + 1);
            acc.add(w * f(y) * occupation_integral(path, h));
        }
        const auto r = acc.result();
        rhs += term.sign * r.mean;
        var_rhs += r.se * r.se;
    }
    out.rhs = rhs;
    out.se_rhs = std::sqrt(var_rhs);
    return out;
}

}  // namespace kbm
