#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "kbm/domain.hpp"
#include "kbm/rng.hpp"

using namespace kbm;

TEST_CASE("ball membership and signed distance") {
    const auto ball = Domain::ball(Vec::zero(2), 1.0);
    CHECK(ball.contains({0.0, 0.0}));
    CHECK(!ball.contains({1.0, 0.0}));  // boundary excluded, Omega open
    CHECK(ball.signed_distance({0.0, 0.0}) == 1.0);
    CHECK(ball.signed_distance({2.0, 0.0}) == doctest::Approx(-1.0));
    CHECK(ball.signed_distance({0.5, 0.0}) == doctest::Approx(0.5));
    CHECK_THROWS_AS(ball.signed_distance({0.0, 0.0, 0.0}), std::invalid_argument);
}

TEST_CASE("box signed distance") {
    const auto box = Domain::box({-1.0, -1.0}, {1.0, 1.0});
    CHECK(box.signed_distance({0.5, 0.0}) == doctest::Approx(0.5));
    CHECK(box.signed_distance({0.0, 0.0}) == doctest::Approx(1.0));
    CHECK(box.signed_distance({2.0, 0.0}) == doctest::Approx(-1.0));
    CHECK(box.signed_distance({2.0, 2.0}) == doctest::Approx(-std::sqrt(2.0)));
    CHECK(box.bounding_radius() == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("annulus excludes the hole") {
    const auto ann = Domain::annulus(Vec::zero(2), 0.5, 1.0);
    CHECK(!ann.contains({0.0, 0.0}));
    CHECK(ann.contains({0.75, 0.0}));
    CHECK(ann.signed_distance({0.75, 0.0}) == doctest::Approx(0.25));
    CHECK(ann.signed_distance({0.0, 0.0}) == doctest::Approx(-0.5));
}

TEST_CASE("csg shapes are conservative inside") {
    const auto lens = Domain::intersection(
        {Domain::ball({-0.25, 0.0}, 1.0), Domain::ball({0.25, 0.0}, 1.0)});
    CHECK(lens.contains({0.0, 0.0}));
    CHECK(!lens.contains({1.0, 0.0}));
    CHECK(lens.bounding_radius() == doctest::Approx(1.25));

    const auto holed = Domain::difference(Domain::box({-1.0, -1.0}, {1.0, 1.0}),
                                          Domain::ball(Vec::zero(2), 0.5));
    CHECK(!holed.contains({0.0, 0.0}));
    CHECK(holed.contains({0.8, 0.8}));

    // conservative: sd never exceeds the true distance inside
    RandomStream rng(7, 0);
    for (int i = 0; i < 2000; ++i) {
        Vec x{2.0 * rng.uniform() - 1.0, 2.0 * rng.uniform() - 1.0};
        const double s = holed.signed_distance(x);
        if (s <= 0.0) continue;
        const double true_dist =
            std::min({1.0 - std::abs(x[0]), 1.0 - std::abs(x[1]), x.norm() - 0.5});
        CHECK(s <= true_dist + 1e-12);
    }
}

TEST_CASE("exit time bound formula") {
    const auto disk = Domain::ball(Vec::zero(2), 1.0);
    CHECK(disk.exit_time_bound({0.0, 0.0}) == doctest::Approx(0.5));

    const auto ball4 = Domain::ball(Vec::zero(4), 2.0);
    CHECK(ball4.exit_time_bound({0.0, 0.0, 0.0, 0.0}) == doctest::Approx(1.0));

    // |x| = R on the bounding sphere gives 0
    CHECK(disk.exit_time_bound({1.0, 0.0}) == doctest::Approx(0.0));
    CHECK_THROWS_AS(disk.exit_time_bound({3.0, 0.0}), std::domain_error);
}

TEST_CASE("sampled interior points satisfy the invariants") {
    RandomStream rng(1234, 0);
    const auto shapes = {Domain::ball({0.5, -0.25, 0.0}, 0.75),
                         Domain::box({-1.0, 0.0, -2.0}, {1.0, 1.0, -0.5}),
                         Domain::annulus(Vec::zero(3), 0.25, 1.0)};
    for (const auto& dom : shapes) {
        for (int i = 0; i < 500; ++i) {
            const Vec x = dom.sample_interior(rng);
            const double s = dom.signed_distance(x);
            CHECK(s > 0.0);
            CHECK(s <= dom.bounding_radius());
            CHECK(x.norm() <= dom.bounding_radius() + 1e-12);
            CHECK(dom.contains(x) == (s > 0.0));
        }
    }
}

TEST_CASE("construction rejects bad parameters") {
    CHECK_THROWS_AS(Domain::ball(Vec::zero(2), -1.0), std::invalid_argument);
    CHECK_THROWS_AS(Domain::ball(Vec::zero(1), 1.0), std::invalid_argument);
    CHECK_THROWS_AS(Domain::box({0.0, 0.0}, {0.0, 1.0}), std::invalid_argument);
    CHECK_THROWS_AS(Domain::annulus(Vec::zero(2), 1.0, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(Domain::intersection({}), std::invalid_argument);
}
