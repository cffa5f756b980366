#include "kbm/domain.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace kbm {

namespace {

std::string vec_str(const Vec& v) {
    std::string s = "(";
    for (int i = 0; i < v.dim; ++i) s += (i ? "," : "") + std::to_string(v.c[i]);
    return s + ")";
}

}  // namespace

Domain Domain::ball(Vec center, double radius) {
    if (center.dim < 2) throw std::invalid_argument("domain dimension must be >= 2");
    if (!(radius > 0.0)) throw std::invalid_argument("ball radius must be positive");
    Domain d;
    d.shape_ = Ball{center, radius};
    d.dim_ = center.dim;
    d.bounding_radius_ = center.norm() + radius;
    d.box_lo_ = center;
    d.box_hi_ = center;
    for (int i = 0; i < d.dim_; ++i) {
        d.box_lo_[i] -= radius;
        d.box_hi_[i] += radius;
    }
    d.description_ = "ball" + vec_str(center) + " r=" + std::to_string(radius);
    return d;
}

Domain Domain::box(Vec lo, Vec hi) {
    if (lo.dim < 2) throw std::invalid_argument("domain dimension must be >= 2");
    if (lo.dim != hi.dim) throw std::invalid_argument("box corners have different dimensions");
    for (int i = 0; i < lo.dim; ++i)
        if (!(lo[i] < hi[i])) throw std::invalid_argument("box has empty extent on some axis");
    Domain d;
    d.shape_ = Box{lo, hi};
    d.dim_ = lo.dim;
    double r2 = 0.0;
    for (int i = 0; i < lo.dim; ++i) {
        const double m = std::max(std::abs(lo[i]), std::abs(hi[i]));
        r2 += m * m;
    }
    d.bounding_radius_ = std::sqrt(r2);
    d.box_lo_ = lo;
    d.box_hi_ = hi;
    d.description_ = "box" + vec_str(lo) + "-" + vec_str(hi);
    return d;
}

Domain Domain::annulus(Vec center, double r_in, double r_out) {
    if (center.dim < 2) throw std::invalid_argument("domain dimension must be >= 2");
    if (!(0.0 < r_in && r_in < r_out))
        throw std::invalid_argument("annulus needs 0 < r_in < r_out");
    Domain d;
    d.shape_ = Annulus{center, r_in, r_out};
    d.dim_ = center.dim;
    d.bounding_radius_ = center.norm() + r_out;
    d.box_lo_ = center;
    d.box_hi_ = center;
    for (int i = 0; i < d.dim_; ++i) {
        d.box_lo_[i] -= r_out;
        d.box_hi_[i] += r_out;
    }
    d.description_ = "annulus" + vec_str(center) + " " + std::to_string(r_in) + ".." +
                     std::to_string(r_out);
    return d;
}

Domain Domain::intersection(std::vector<Domain> parts) {
    if (parts.empty()) throw std::invalid_argument("intersection needs at least one part");
    Domain d;
    d.dim_ = parts[0].dim_;
    d.bounding_radius_ = std::numeric_limits<double>::infinity();
    d.box_lo_ = parts[0].box_lo_;
    d.box_hi_ = parts[0].box_hi_;
    for (const Domain& p : parts) {
        if (p.dim_ != d.dim_) throw std::invalid_argument("intersection parts differ in dimension");
        d.bounding_radius_ = std::min(d.bounding_radius_, p.bounding_radius_);
        for (int i = 0; i < d.dim_; ++i) {
            d.box_lo_[i] = std::max(d.box_lo_[i], p.box_lo_[i]);
            d.box_hi_[i] = std::min(d.box_hi_[i], p.box_hi_[i]);
        }
    }
    d.description_ = "intersection(" + std::to_string(parts.size()) + ")";
    d.shape_ = Intersection{std::move(parts)};
    return d;
}

Domain Domain::difference(Domain a, Domain b) {
    if (a.dim_ != b.dim_) throw std::invalid_argument("difference parts differ in dimension");
    Domain d;
    d.dim_ = a.dim_;
    d.bounding_radius_ = a.bounding_radius_;
    d.box_lo_ = a.box_lo_;
    d.box_hi_ = a.box_hi_;
    d.description_ = "difference(" + a.description_ + ", " + b.description_ + ")";
    d.shape_ = Difference{{std::move(a), std::move(b)}};
    return d;
}

double Domain::sd_box(const Vec& x, const Box& s) const {
    double out2 = 0.0;
    double max_q = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < dim_; ++i) {
        const double q = std::max(s.lo[i] - x[i], x[i] - s.hi[i]);
        max_q = std::max(max_q, q);
        if (q > 0.0) out2 += q * q;
    }
    if (max_q > 0.0) return -std::sqrt(out2);
    return -max_q;
}

double Domain::sd_csg(const Vec& x) const {
    if (const Intersection* s = std::get_if<Intersection>(&shape_)) {
        double m = std::numeric_limits<double>::infinity();
        for (const Domain& p : s->parts) m = std::min(m, p.sd(x));
        return m;
    }
    const Difference& s = std::get<Difference>(shape_);
    return std::min(s.parts[0].sd(x), -s.parts[1].sd(x));
}

double Domain::exit_time_bound(const Vec& x) const {
    check_dim(x);
    const double r2 = x.squared_norm();
    const double R2 = bounding_radius_ * bounding_radius_;
    if (r2 > R2 * (1.0 + 1e-12))
        throw std::domain_error("exit_time_bound: point outside the bounding ball");
    return std::max(0.0, R2 - r2) / static_cast<double>(dim_);
}

Vec Domain::sample_interior(RandomStream& rng) const {
    Vec x(dim_);
    for (int attempt = 0; attempt < 200000; ++attempt) {
        for (int i = 0; i < dim_; ++i)
            x[i] = box_lo_[i] + (box_hi_[i] - box_lo_[i]) * rng.uniform();
        if (contains(x)) return x;
    }
    throw std::runtime_error("sample_interior: rejection sampling failed (empty domain?)");
}

}  // namespace kbm
