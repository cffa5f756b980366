#include "kbm/nonlinearity.hpp"

#include <algorithm>
#include <cmath>

#include "kbm/rng.hpp"

namespace kbm {

std::string condition_name(Condition c) {
    switch (c) {
        case Condition::A4: return "A4";
        case Condition::A4Prime: return "A4'";
        case Condition::A4DoublePrime: return "A4''";
        case Condition::A5: return "A5";
    }
    return "?";
}

Vec truncate(const Vec& y, double r) {
    const double norm = y.norm();
    if (norm <= r) return y;
    Vec out = y;
    out *= r / norm;
    return out;
}

Nonlinearity Nonlinearity::zero(int n_components) {
    Nonlinearity f;
    f.kind_ = Kind::Zero;
    f.n_ = n_components;
    return f;
}

Nonlinearity Nonlinearity::linear_decay(int n_components, double alpha) {
    if (!(alpha > 0.0)) throw std::invalid_argument("linear_decay needs alpha > 0");
    Nonlinearity f;
    f.kind_ = Kind::LinearDecay;
    f.n_ = n_components;
    f.alpha_ = alpha;
    return f;
}

Nonlinearity Nonlinearity::rotation() {
    Nonlinearity f;
    f.kind_ = Kind::Rotation;
    f.n_ = 2;
    return f;
}

Nonlinearity Nonlinearity::cubic_decay(int n_components) {
    Nonlinearity f;
    f.kind_ = Kind::CubicDecay;
    f.n_ = n_components;
    return f;
}

Nonlinearity Nonlinearity::componentwise(int, std::vector<Expression> per_component) {
    if (per_component.empty()) throw std::invalid_argument("componentwise needs expressions");
    Nonlinearity f;
    f.kind_ = Kind::Componentwise;
    f.n_ = static_cast<int>(per_component.size());
    f.exprs_ = std::move(per_component);
    return f;
}

Nonlinearity Nonlinearity::expression_vector(int, std::vector<Expression> components) {
    if (components.empty()) throw std::invalid_argument("expression_vector needs expressions");
    Nonlinearity f;
    f.kind_ = Kind::ExpressionVector;
    f.n_ = static_cast<int>(components.size());
    f.exprs_ = std::move(components);
    return f;
}

bool Nonlinearity::declares(Condition c) const {
    return std::find(declared_.begin(), declared_.end(), c) != declared_.end();
}

void Nonlinearity::evaluate(const Vec& x, std::span<const double> y,
                            std::span<double> out) const {
    switch (kind_) {
        case Kind::Zero:
            for (int k = 0; k < n_; ++k) out[static_cast<size_t>(k)] = 0.0;
            return;
        case Kind::LinearDecay:
            for (int k = 0; k < n_; ++k)
                out[static_cast<size_t>(k)] = -alpha_ * y[static_cast<size_t>(k)];
            return;
        case Kind::Rotation:
            out[0] = -y[1];
            out[1] = y[0];
            return;
        case Kind::CubicDecay: {
            double n2 = 0.0;
            for (int k = 0; k < n_; ++k) n2 += y[static_cast<size_t>(k)] * y[static_cast<size_t>(k)];
            for (int k = 0; k < n_; ++k) out[static_cast<size_t>(k)] = -y[static_cast<size_t>(k)] * n2;
            return;
        }
        case Kind::Componentwise: {
            // variables: x1..xd, z
            double vars[kMaxDim + 1];
            for (int i = 0; i < x.dim; ++i) vars[i] = x[i];
            for (int k = 0; k < n_; ++k) {
                vars[x.dim] = y[static_cast<size_t>(k)];
                const double v = exprs_[static_cast<size_t>(k)].eval(
                    std::span<const double>(vars, static_cast<size_t>(x.dim) + 1));
                if (!std::isfinite(v))
                    throw EvaluationError("componentwise nonlinearity produced a non-finite value");
                out[static_cast<size_t>(k)] = v;
            }
            return;
        }
        case Kind::ExpressionVector: {
            double vars[2 * kMaxDim];
            for (int i = 0; i < x.dim; ++i) vars[i] = x[i];
            for (int k = 0; k < n_; ++k) vars[x.dim + k] = y[static_cast<size_t>(k)];
            for (int k = 0; k < n_; ++k) {
                const double v = exprs_[static_cast<size_t>(k)].eval(std::span<const double>(
                    vars, static_cast<size_t>(x.dim) + static_cast<size_t>(n_)));
                if (!std::isfinite(v))
                    throw EvaluationError("expression nonlinearity produced a non-finite value");
                out[static_cast<size_t>(k)] = v;
            }
            return;
        }
    }
}

ConditionReport check_condition(const Nonlinearity& f, Condition condition, const Domain& domain,
                                int n_samples, double box_radius, uint64_t seed) {
    const int n = f.n_components();
    ConditionReport report;
    report.condition = condition;
    double scale = (1.0 + box_radius) * (1.0 + box_radius);
    if (condition == Condition::A5) scale *= 1.0 + std::abs(f.alpha());
    report.tol = 1e-12 * scale;
    report.worst_value = -std::numeric_limits<double>::infinity();

    RandomStream rng(seed, stream_ids::kCheckerSalt);
    Vec y(n), y2(n);
    for (int s = 0; s < n_samples; ++s) {
        const Vec x = domain.sample_interior(rng);
        for (int k = 0; k < n; ++k) y[k] = box_radius * (2.0 * rng.uniform() - 1.0);
        double value = 0.0;
        switch (condition) {
            case Condition::A4: {
                value = dot(f.evaluate(x, y), y);
                break;
            }
            case Condition::A5: {
                value = dot(f.evaluate(x, y), y) + f.alpha() * y.squared_norm();
                break;
            }
            case Condition::A4Prime: {
                for (int k = 0; k < n; ++k) y2[k] = box_radius * (2.0 * rng.uniform() - 1.0);
                const Vec diff = y - y2;
                value = dot(f.evaluate(x, y) - f.evaluate(x, y2), diff);
                break;
            }
            case Condition::A4DoublePrime: {
                const int k = s % n;
                const double z = box_radius * (2.0 * rng.uniform() - 1.0);
                y2 = y;
                y2[k] = z;
                value = f.evaluate(x, y2)[k] * z;
                break;
            }
        }
        if (value > report.worst_value) {
            report.worst_value = value;
            report.worst_x = x;
            report.worst_y = y;
            report.worst_y2 = y2;
        }
    }
    report.holds_on_sample = report.worst_value <= report.tol;
    return report;
}

}  // namespace kbm
