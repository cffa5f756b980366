#pragma once

#include <array>
#include <functional>
#include <span>
#include <vector>

#include "kbm/domain.hpp"
#include "kbm/vec.hpp"

namespace kbm {

// Tensor grid of nodes over an axis-aligned box, res[i] nodes per axis.
struct GridSpec {
    int dim = 0;
    Vec lo, hi;
    std::array<int, kMaxDim> res{};

    static GridSpec covering(const Domain& domain, int resolution);

    long node_count() const {
        long n = 1;
        for (int i = 0; i < dim; ++i) n *= res[static_cast<size_t>(i)];
        return n;
    }
    double spacing(int axis) const {
        return (hi[axis] - lo[axis]) / (res[static_cast<size_t>(axis)] - 1);
    }
    double cell_volume() const {
        double v = 1.0;
        for (int i = 0; i < dim; ++i) v *= spacing(i);
        return v;
    }
    Vec node_position(long idx) const {
        Vec x(dim);
        for (int i = 0; i < dim; ++i) {
            const int r = res[static_cast<size_t>(i)];
            x[i] = lo[i] + spacing(i) * static_cast<double>(idx % r);
            idx /= r;
        }
        return x;
    }
    bool matches(const GridSpec& o) const;
};

// n-component grid field with multilinear interpolation, identically 0
// outside Omega (the cemetery convention). Exterior nodes are stored as 0 and
// never written, so interpolation decays to 0 across boundary cells.
class SolutionField {
  public:
    SolutionField(Domain domain, GridSpec grid, int n_components);

    static SolutionField from_function(Domain domain, GridSpec grid, int n_components,
                                       const std::function<Vec(const Vec&)>& fn);

    const Domain& domain() const { return domain_; }
    const GridSpec& grid() const { return grid_; }
    int n_components() const { return n_; }
    long node_count() const { return grid_.node_count(); }

    bool node_interior(long idx) const { return interior_[static_cast<size_t>(idx)] != 0; }
    const std::vector<long>& interior_nodes() const { return interior_list_; }

    std::span<double> node_values(long idx) {
        return {values_.data() + idx * n_, static_cast<size_t>(n_)};
    }
    std::span<const double> node_values(long idx) const {
        return {values_.data() + idx * n_, static_cast<size_t>(n_)};
    }
    std::span<double> node_se(long idx) {
        return {se_.data() + idx * n_, static_cast<size_t>(n_)};
    }
    std::span<const double> node_se(long idx) const {
        return {se_.data() + idx * n_, static_cast<size_t>(n_)};
    }

    // Multilinear interpolation; out must hold n_components doubles.
    void evaluate(const Vec& x, std::span<double> out) const {
        if (!domain_.contains(x)) {
            for (int k = 0; k < n_; ++k) out[static_cast<size_t>(k)] = 0.0;
            return;
        }
        interpolate(x, out);
    }
    Vec evaluate(const Vec& x) const {
        Vec out(n_);
        evaluate(x, std::span<double>(out.c.data(), static_cast<size_t>(n_)));
        return out;
    }

    // Largest |value| over interior nodes and components.
    double sup_norm() const;

    std::vector<double>& raw_values() { return values_; }
    const std::vector<double>& raw_values() const { return values_; }

  private:
    void interpolate(const Vec& x, std::span<double> out) const;

    Domain domain_;
    GridSpec grid_;
    int n_;
    std::vector<double> values_;       // node-major, n per node
    std::vector<double> se_;           // same layout
    std::vector<uint8_t> interior_;    // node mask
    std::vector<long> interior_list_;
    std::array<double, kMaxDim> inv_spacing_{};
    std::array<long, kMaxDim> stride_{};
};

}  // namespace kbm
