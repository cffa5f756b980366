#include "kbm/field.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace kbm {

GridSpec GridSpec::covering(const Domain& domain, int resolution) {
    if (resolution < 2) throw std::invalid_argument("grid resolution must be >= 2");
    GridSpec g;
    g.dim = domain.dim();
    domain.bounding_box(g.lo, g.hi);
    for (int i = 0; i < g.dim; ++i) g.res[static_cast<size_t>(i)] = resolution;
    return g;
}

bool GridSpec::matches(const GridSpec& o) const {
    if (dim != o.dim) return false;
    for (int i = 0; i < dim; ++i) {
        if (res[static_cast<size_t>(i)] != o.res[static_cast<size_t>(i)]) return false;
        if (std::abs(lo[i] - o.lo[i]) > 1e-12 || std::abs(hi[i] - o.hi[i]) > 1e-12) return false;
    }
    return true;
}

SolutionField::SolutionField(Domain domain, GridSpec grid, int n_components)
    : domain_(std::move(domain)), grid_(grid), n_(n_components) {
    const long nodes = grid_.node_count();
    values_.assign(static_cast<size_t>(nodes * n_), 0.0);
    se_.assign(static_cast<size_t>(nodes * n_), 0.0);
    interior_.assign(static_cast<size_t>(nodes), 0);
    long stride = 1;
    for (int i = 0; i < grid_.dim; ++i) {
        stride_[static_cast<size_t>(i)] = stride;
        stride *= grid_.res[static_cast<size_t>(i)];
        inv_spacing_[static_cast<size_t>(i)] = 1.0 / grid_.spacing(i);
    }
    for (long idx = 0; idx < nodes; ++idx) {
        if (domain_.contains(grid_.node_position(idx))) {
            interior_[static_cast<size_t>(idx)] = 1;
            interior_list_.push_back(idx);
        }
    }
}

SolutionField SolutionField::from_function(Domain domain, GridSpec grid, int n_components,
                                           const std::function<Vec(const Vec&)>& fn) {
    SolutionField f(std::move(domain), grid, n_components);
    for (long idx : f.interior_list_) {
        const Vec v = fn(f.grid_.node_position(idx));
        auto slot = f.node_values(idx);
        for (int k = 0; k < n_components; ++k) slot[static_cast<size_t>(k)] = v[k];
    }
    return f;
}

void SolutionField::interpolate(const Vec& x, std::span<double> out) const {
    const int d = grid_.dim;
    long base = 0;
    double frac[kMaxDim];
    for (int i = 0; i < d; ++i) {
        double t = (x[i] - grid_.lo[i]) * inv_spacing_[static_cast<size_t>(i)];
        const int max_cell = grid_.res[static_cast<size_t>(i)] - 2;
        int j = static_cast<int>(t);
        if (j < 0) j = 0;
        if (j > max_cell) j = max_cell;
        frac[i] = t - j;
        if (frac[i] < 0.0) frac[i] = 0.0;
        if (frac[i] > 1.0) frac[i] = 1.0;
        base += j * stride_[static_cast<size_t>(i)];
    }
    for (int k = 0; k < n_; ++k) out[static_cast<size_t>(k)] = 0.0;
    const int corners = 1 << d;
    for (int c = 0; c < corners; ++c) {
        double w = 1.0;
        long idx = base;
        for (int i = 0; i < d; ++i) {
            if (c & (1 << i)) {
                w *= frac[i];
                idx += stride_[static_cast<size_t>(i)];
            } else {
                w *= 1.0 - frac[i];
            }
        }
        if (w == 0.0) continue;
        const double* node = values_.data() + idx * n_;
        for (int k = 0; k < n_; ++k) out[static_cast<size_t>(k)] += w * node[k];
    }
}

double SolutionField::sup_norm() const {
    double m = 0.0;
    for (long idx : interior_list_) {
        for (double v : node_values(idx)) m = std::max(m, std::abs(v));
    }
    return m;
}

}  // namespace kbm
