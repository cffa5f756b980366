#pragma once

#include <span>
#include <string>
#include <vector>

#include "kbm/domain.hpp"
#include "kbm/expression.hpp"
#include "kbm/vec.hpp"

namespace kbm {

struct EvaluationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class Condition { A4, A4Prime, A4DoublePrime, A5 };

std::string condition_name(Condition c);

// Radial projection onto the closed ball of radius r: T_r(y) = r y / (|y| v r).
Vec truncate(const Vec& y, double r);

// Carathéodory right-hand side f: Omega x R^n -> R^n from a closed catalog.
// Conditions (A4, A4', A4'', A5) are declared by the user and guarded by the
// sampling falsifier in check_condition, never proven.
class Nonlinearity {
  public:
    enum class Kind { Zero, LinearDecay, Rotation, CubicDecay, Componentwise, ExpressionVector };

    static Nonlinearity zero(int n_components);
    static Nonlinearity linear_decay(int n_components, double alpha);
    static Nonlinearity rotation();  // n = 2, f(y) = (-y2, y1)
    static Nonlinearity cubic_decay(int n_components);
    // One scalar expression per component over x1..xd and z (own component).
    static Nonlinearity componentwise(int dim, std::vector<Expression> per_component);
    // Expressions over x1..xd and y1..yn.
    static Nonlinearity expression_vector(int dim, std::vector<Expression> components);

    Kind kind() const { return kind_; }
    int n_components() const { return n_; }
    bool is_zero() const { return kind_ == Kind::Zero; }
    double alpha() const { return alpha_; }
    void set_alpha(double a) { alpha_ = a; }

    void declare(Condition c) { declared_.push_back(c); }
    bool declares(Condition c) const;
    const std::vector<Condition>& declared() const { return declared_; }

    // y and out have n_components entries. Expression kinds are checked for
    // finite output; the closed-form kinds are finite by construction.
    void evaluate(const Vec& x, std::span<const double> y, std::span<double> out) const;

    Vec evaluate(const Vec& x, const Vec& y) const {
        Vec out(n_);
        evaluate(x, std::span<const double>(y.c.data(), static_cast<size_t>(n_)),
                 std::span<double>(out.c.data(), static_cast<size_t>(n_)));
        return out;
    }

  private:
    Kind kind_ = Kind::Zero;
    int n_ = 1;
    double alpha_ = 0.0;
    std::vector<Expression> exprs_;
    std::vector<Condition> declared_;
};

struct ConditionReport {
    Condition condition;
    bool holds_on_sample = true;
    double tol = 0.0;
    double worst_value = 0.0;  // largest excess over the condition's threshold
    Vec worst_x, worst_y, worst_y2;
};

// Sampling falsifier: x uniform in Omega, y uniform in [-B, B]^n. A4':
// pairwise monotonicity on (y, y'); A4'': per-coordinate sign on slices
// (worst_y2[k] holds the tested z). Finds counterexamples, proves nothing.
ConditionReport check_condition(const Nonlinearity& f, Condition condition, const Domain& domain,
                                int n_samples, double box_radius, uint64_t seed = 0x5eedu);

}  // namespace kbm
