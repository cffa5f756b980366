#pragma once

#include <functional>
#include <string>
#include <vector>

#include "kbm/domain.hpp"
#include "kbm/expression.hpp"
#include "kbm/path.hpp"
#include "kbm/vec.hpp"

namespace kbm {

class MeasureError : public std::runtime_error {
  public:
    enum class Code { SurfaceOutsideDomain, NonFiniteDensity, NegativeDensity, Unresolved };
    MeasureError(Code c, const std::string& what) : std::runtime_error(what), code(c) {}
    Code code;
};

enum class MeasureKind { Density, SphereSurface, BoxFaceSurface };

// One Jordan-form term: the sign is carried separately, the term itself is a
// non-negative measure. Surface terms are realized as epsilon-shell
// mollifications; atoms are unrepresentable by construction.
struct MeasureTerm {
    int sign = +1;
    MeasureKind kind = MeasureKind::Density;

    Expression density;  // Density: g >= 0 over x1..xd

    Vec center;            // SphereSurface
    double radius = 0.0;   // SphereSurface
    double mass = 0.0;     // surface kinds: stored total mass

    int face_axis = 0;       // BoxFaceSurface
    double face_coord = 0.0;
    Vec face_lo, face_hi;  // bounds on the remaining axes (axis entry ignored)

    double mollification = 0.0;  // epsilon; 0 means "resolve from the step"
};

struct QuadratureResult {
    double value = 0.0;
    double error_estimate = 0.0;
};

// A^mu at the path end, with optional per-step cumulative values.
struct AdditiveAccumulation {
    double total = 0.0;
    std::vector<double> partials;
};

// Surface area of the (d-1)-sphere of radius r in R^d.
double sphere_area(int dim, double r);

// Signed diffuse measure mu = mu+ - mu- over a domain of dimension dim.
class DiffuseMeasure {
  public:
    explicit DiffuseMeasure(int dim) : dim_(dim) {}

    void add_density(int sign, Expression g);
    void add_sphere_surface(int sign, Vec center, double radius, double mass,
                            double mollification = 0.0);
    void add_box_face_surface(int sign, int axis, double coord, Vec lo, Vec hi, double mass,
                              double mollification = 0.0);

    int dim() const { return dim_; }
    const std::vector<MeasureTerm>& terms() const { return terms_; }
    bool empty() const { return terms_.empty(); }

    // Copy with unset surface mollifications filled in as 5*sqrt(step).
    DiffuseMeasure resolved(double step) const;

    // Throws MeasureError: surface terms must fit inside Omega with margin
    // epsilon (checked by direction sampling), densities must be finite and
    // non-negative on a sample grid.
    void validate(const Domain& domain) const;

    // Sum of term masses; density masses by midpoint quadrature over Omega
    // at two resolutions (the difference is the error estimate).
    QuadratureResult total_variation(const Domain& domain, int cells_per_axis = 32) const;

    // Pointwise density of the mollified measure.
    double signed_density(const Vec& x) const;
    double abs_density(const Vec& x) const;  // |mu| in stored Jordan form
    double term_density(int term, const Vec& x) const;

    // A^mu along a recorded path (trapezoid over the recorded grid,
    // accumulated per term so scaling and superposition are exact).
    AdditiveAccumulation accumulate(const KilledPath& path, bool with_partials = false) const;

    // int_0^{t wedge zeta} f(X) dA^mu along a recorded path; the horizon t is
    // rounded to the step grid.
    double weighted_accumulation(const KilledPath& path,
                                 const std::function<double(const Vec&)>& f, double t) const;

  private:
    int dim_;
    std::vector<MeasureTerm> terms_;
};

struct RevuzResult {
    double lhs = 0.0, rhs = 0.0;
    double se_lhs = 0.0, se_rhs = 0.0;
    double pooled_se() const { return std::sqrt(se_lhs * se_lhs + se_rhs * se_rhs); }
};

// Monte Carlo check of the Revuz pairing at horizon t:
//   lhs: E_{h.m} int_0^t f(X_theta) dA^mu_theta  (paths from h.m, box-sampled)
//   rhs: int_0^t <f.mu, p_theta h> dtheta        (paths from mu itself)
// Both sides use the same step grid; they agree within MC noise.
RevuzResult revuz_check(const DiffuseMeasure& measure, const Domain& domain,
                        const PathConfig& cfg, const std::function<double(const Vec&)>& f,
                        const std::function<double(const Vec&)>& h, double t, int n_paths,
                        uint64_t stream_salt = 0);

}  // namespace kbm
