#pragma once

#include <memory>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "kbm/rng.hpp"
#include "kbm/vec.hpp"

namespace kbm {

// Bounded open domain in R^d (d >= 2) from a closed shape catalog, queried
// through an inside-positive signed distance. CSG distances are conservative
// lower bounds inside (never overestimates), which is all the killing rule
// needs.
class Domain {
  public:
    struct Ball {
        Vec center;
        double radius;
    };
    struct Box {
        Vec lo, hi;
    };
    struct Annulus {
        Vec center;
        double r_in, r_out;
    };
    struct Intersection {
        std::vector<Domain> parts;
    };
    struct Difference {
        std::vector<Domain> parts;  // parts[0] minus parts[1]
    };

    static Domain ball(Vec center, double radius);
    static Domain box(Vec lo, Vec hi);
    static Domain annulus(Vec center, double r_in, double r_out);
    static Domain intersection(std::vector<Domain> parts);
    static Domain difference(Domain a, Domain b);

    int dim() const { return dim_; }

    // Positive inside, non-positive outside.
    double signed_distance(const Vec& x) const {
        check_dim(x);
        return sd(x);
    }

    // Strict interior membership: signed_distance(x) > 0.
    bool contains(const Vec& x) const { return signed_distance(x) > 0.0; }

    // R with Omega contained in B(0, R).
    double bounding_radius() const { return bounding_radius_; }

    // Axis-aligned box containing Omega.
    void bounding_box(Vec& lo, Vec& hi) const {
        lo = box_lo_;
        hi = box_hi_;
    }

    // (R^2 - |x|^2)/d, the mean exit time of Brownian motion from B(0, R):
    // an upper bound for E_x zeta on any Omega inside B(0, R). Defined on
    // the closed bounding ball; throws for |x| > R.
    double exit_time_bound(const Vec& x) const;

    // Uniform sample from the interior by rejection from the bounding box.
    Vec sample_interior(RandomStream& rng) const;

    const std::string& describe() const { return description_; }

  private:
    Domain() = default;
    void check_dim(const Vec& x) const {
        if (x.dim != dim_)
            throw std::invalid_argument("point dimension " + std::to_string(x.dim) +
                                        " does not match domain dimension " +
                                        std::to_string(dim_));
    }

    // Inline: this runs once per path step.
    double sd(const Vec& x) const {
        if (const Ball* s = std::get_if<Ball>(&shape_)) {
            double r2 = 0.0;
            for (int i = 0; i < dim_; ++i) {
                const double di = x.c[i] - s->center.c[i];
                r2 += di * di;
            }
            return s->radius - std::sqrt(r2);
        }
        if (const Box* s = std::get_if<Box>(&shape_)) return sd_box(x, *s);
        if (const Annulus* s = std::get_if<Annulus>(&shape_)) {
            const double rho = distance(x, s->center);
            return std::min(s->r_out - rho, rho - s->r_in);
        }
        return sd_csg(x);
    }

    double sd_box(const Vec& x, const Box& s) const;
    double sd_csg(const Vec& x) const;

    std::variant<Ball, Box, Annulus, Intersection, Difference> shape_;
    int dim_ = 0;
    double bounding_radius_ = 0.0;
    Vec box_lo_, box_hi_;
    std::string description_;
};

}  // namespace kbm
