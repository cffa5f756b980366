#pragma once

#include <array>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <initializer_list>

namespace kbm {

// Maximum spatial dimension / system size supported by the fixed-capacity
// value types. Catalog problems live in d <= 4, n <= 4; 8 leaves headroom.
inline constexpr int kMaxDim = 8;

// Small fixed-capacity vector for points in R^d and system values in R^n.
struct Vec {
    std::array<double, kMaxDim> c{};
    int dim = 0;

    Vec() = default;
    explicit Vec(int d) : dim(d) { assert(d >= 0 && d <= kMaxDim); }
    Vec(std::initializer_list<double> vals) {
        assert(static_cast<int>(vals.size()) <= kMaxDim);
        dim = static_cast<int>(vals.size());
        int i = 0;
        for (double v : vals) c[i++] = v;
    }

    static Vec zero(int d) { return Vec(d); }

    double& operator[](int i) { return c[static_cast<size_t>(i)]; }
    double operator[](int i) const { return c[static_cast<size_t>(i)]; }

    Vec& operator+=(const Vec& o) {
        for (int i = 0; i < dim; ++i) c[i] += o.c[i];
        return *this;
    }
    Vec& operator-=(const Vec& o) {
        for (int i = 0; i < dim; ++i) c[i] -= o.c[i];
        return *this;
    }
    Vec& operator*=(double s) {
        for (int i = 0; i < dim; ++i) c[i] *= s;
        return *this;
    }

    friend Vec operator+(Vec a, const Vec& b) { return a += b; }
    friend Vec operator-(Vec a, const Vec& b) { return a -= b; }
    friend Vec operator*(double s, Vec a) { return a *= s; }

    double squared_norm() const {
        double s = 0.0;
        for (int i = 0; i < dim; ++i) s += c[i] * c[i];
        return s;
    }
    double norm() const { return std::sqrt(squared_norm()); }
};

inline double dot(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (int i = 0; i < a.dim; ++i) s += a.c[i] * b.c[i];
    return s;
}

inline double distance(const Vec& a, const Vec& b) { return (a - b).norm(); }

}  // namespace kbm
