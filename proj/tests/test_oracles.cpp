#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "kbm/fd.hpp"
#include "kbm/radial.hpp"

using namespace kbm;

namespace {

Expression density_expr(const std::string& s, int dim) {
    const std::vector<std::string> names = {"x1", "x2", "x3", "x4"};
    return Expression::parse(s, std::span<const std::string>(names.data(), static_cast<size_t>(dim)));
}

Problem poisson_ball(int dim) {
    Problem p{Domain::ball(Vec::zero(dim), 1.0), {}, Nonlinearity::zero(1)};
    DiffuseMeasure mu(dim);
    mu.add_density(+1, density_expr("1.0", dim));
    p.measures.push_back(std::move(mu));
    return p;
}

}  // namespace

TEST_CASE("radial solve reproduces the closed-form linear profile") {
    for (int dim : {2, 3, 4}) {
        const auto prof = radial_solve(poisson_ball(dim), 4001);
        for (double r : {0.0, 0.25, 0.5, 0.9}) {
            CHECK(prof.value(r, 0) ==
                  doctest::Approx((1.0 - r * r) / dim).epsilon(1e-5));
        }
        CHECK(prof.value(1.0, 0) == 0.0);
    }
}

TEST_CASE("radial solve with zero data is zero") {
    Problem p{Domain::ball(Vec::zero(3), 1.0), {DiffuseMeasure(3)}, Nonlinearity::zero(1)};
    const auto prof = radial_solve(p, 1001);
    for (double v : prof.values) CHECK(v == 0.0);
}

TEST_CASE("radial sphere-surface term: flat core, 1/r tail, derivative jump") {
    Problem p{Domain::ball(Vec::zero(3), 1.0), {}, Nonlinearity::zero(1)};
    DiffuseMeasure mu(3);
    mu.add_sphere_surface(+1, Vec::zero(3), 0.5, 1.0, 0.01);
    p.measures.push_back(std::move(mu));
    const auto prof = radial_solve(p, 8001);

    REQUIRE(prof.flux_jumps.size() == 1);
    CHECK(prof.flux_jumps[0].first == doctest::Approx(0.5));
    // [u'] = 2 sigma = 2 M / (4 pi r0^2)
    CHECK(prof.flux_jumps[0].second ==
          doctest::Approx(2.0 / (4.0 * 3.14159265358979323846 * 0.25)).epsilon(1e-12));

    const double c = 1.0 / (2.0 * 3.14159265358979323846);
    auto exact = [&](double r) { return c * (1.0 / std::max(r, 0.5) - 1.0); };
    for (double r : {0.0, 0.2, 0.45, 0.5, 0.55, 0.8, 0.95})
        CHECK(prof.value(r, 0) == doctest::Approx(exact(r)).epsilon(2e-3));
    // flat inside, continuous across the jump
    CHECK(prof.value(0.0, 0) == doctest::Approx(prof.value(0.4, 0)).epsilon(1e-6));
}

TEST_CASE("radial annulus profile satisfies the operator") {
    Problem p{Domain::annulus(Vec::zero(2), 0.5, 1.0), {}, Nonlinearity::zero(1)};
    DiffuseMeasure mu(2);
    mu.add_density(+1, density_expr("1.0", 2));
    p.measures.push_back(std::move(mu));
    const auto prof = radial_solve(p, 8001);

    CHECK(std::abs(prof.value(0.5, 0)) < 1e-8);
    CHECK(prof.value(1.0, 0) == 0.0);
    // closed form: u = (1 - r^2)/2 + b ln r with b fixed by u(1/2) = 0
    const double b = 3.0 / (8.0 * std::log(2.0));
    auto exact = [&](double r) { return (1.0 - r * r) / 2.0 + b * std::log(r); };
    for (double r : {0.55, 0.7, 0.9})
        CHECK(prof.value(r, 0) == doctest::Approx(exact(r)).epsilon(1e-4));
}

TEST_CASE("radial semilinear coupled rotation agrees with a Picard fixed point") {
    // sanity: the converged profile satisfies the discrete operator with the
    // nonlinearity evaluated at the solution itself
    Problem p{Domain::ball(Vec::zero(2), 1.0), {}, Nonlinearity::rotation()};
    p.f.declare(Condition::A4);
    DiffuseMeasure mu1(2);
    mu1.add_density(+1, density_expr("1.0", 2));
    p.measures.push_back(std::move(mu1));
    p.measures.emplace_back(2);
    const auto prof = radial_solve(p, 4001);

    // residual of -1/2(u'' + u'/r) - f(u) - g at a few interior radii
    const double dr = prof.radii[1] - prof.radii[0];
    auto at = [&](size_t j, int k) { return prof.values[j * 2 + static_cast<size_t>(k)]; };
    for (size_t j : {size_t(400), size_t(1700), size_t(3100)}) {
        const double r = prof.radii[j];
        for (int k = 0; k < 2; ++k) {
            const double lap = (at(j + 1, k) - 2 * at(j, k) + at(j - 1, k)) / (dr * dr) +
                               (at(j + 1, k) - at(j - 1, k)) / (2 * dr * r);
            const double fk = k == 0 ? -at(j, 1) : at(j, 0);
            const double g = k == 0 ? 1.0 : 0.0;
            CHECK(std::abs(-0.5 * lap - fk - g) < 1e-5);
        }
    }
}

TEST_CASE("fd solve recovers a manufactured solution at second order") {
    // u* = sin(pi x) sin(pi y) on the unit square with g = pi^2 u*
    Problem p{Domain::box({0.0, 0.0}, {1.0, 1.0}), {}, Nonlinearity::zero(1)};
    DiffuseMeasure mu(2);
    mu.add_density(+1, density_expr("pi^2 * sin(pi*x1) * sin(pi*x2)", 2));
    p.measures.push_back(std::move(mu));
    PathConfig paths;

    auto sup_error = [&](int res) {
        const auto u = fd_solve(p, paths, res);
        double worst = 0.0;
        for (long idx : u.interior_nodes()) {
            const Vec x = u.grid().node_position(idx);
            const double exact = std::sin(3.14159265358979323846 * x[0]) *
                                 std::sin(3.14159265358979323846 * x[1]);
            worst = std::max(worst, std::abs(u.node_values(idx)[0] - exact));
        }
        return worst;
    };
    const double e33 = sup_error(33);
    const double e65 = sup_error(65);
    CHECK(e33 < 2e-3);
    const double ratio = e33 / e65;
    CHECK(ratio > 3.5);
    CHECK(ratio < 4.5);
}

TEST_CASE("fd solve with zero data is zero") {
    Problem p{Domain::box({0.0, 0.0}, {1.0, 1.0}), {DiffuseMeasure(2)}, Nonlinearity::zero(1)};
    const auto u = fd_solve(p, PathConfig{}, 17);
    CHECK(u.sup_norm() == 0.0);
}

TEST_CASE("the two deterministic oracles agree on disk problems") {
    // linear disk
    {
        const auto p = poisson_ball(2);
        const auto prof = radial_solve(p, 8001);
        const auto u = fd_solve(p, PathConfig{}, 129);
        double worst = 0.0;
        for (long idx : u.interior_nodes()) {
            const Vec x = u.grid().node_position(idx);
            if (x.norm() > 0.9) continue;
            worst = std::max(worst, std::abs(u.node_values(idx)[0] - prof.value(x.norm(), 0)));
        }
        CHECK(worst < 5e-3);
    }
    // semilinear scalar decay
    {
        Problem p{Domain::ball(Vec::zero(2), 1.0), {}, Nonlinearity::linear_decay(1, 1.0)};
        p.f.declare(Condition::A4);
        p.f.declare(Condition::A4Prime);
        DiffuseMeasure mu(2);
        mu.add_density(+1, density_expr("1.0", 2));
        p.measures.push_back(std::move(mu));

        const auto prof = radial_solve(p, 8001);
        const auto u = fd_solve(p, PathConfig{}, 129);
        double worst = 0.0;
        for (long idx : u.interior_nodes()) {
            const Vec x = u.grid().node_position(idx);
            if (x.norm() > 0.9) continue;
            worst = std::max(worst, std::abs(u.node_values(idx)[0] - prof.value(x.norm(), 0)));
        }
        CHECK(worst < 5e-3);
    }
}
