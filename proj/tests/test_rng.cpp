#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "kbm/rng.hpp"

using namespace kbm;

// Known-answer vectors for Philox4x32-10 from the Random123 distribution.
TEST_CASE("philox4x32-10 known answers") {
    {
        const auto out = Philox4x32::block({0, 0, 0, 0}, {0, 0});
        CHECK(out[0] == 0x6627e8d5u);
        CHECK(out[1] == 0xe169c58du);
        CHECK(out[2] == 0xbc57ac4cu);
        CHECK(out[3] == 0x9b00dbd8u);
    }
    {
        const auto out = Philox4x32::block({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                                           {0xffffffffu, 0xffffffffu});
        CHECK(out[0] == 0x408f276du);
        CHECK(out[1] == 0x41c83b0eu);
        CHECK(out[2] == 0xa20bc7c6u);
        CHECK(out[3] == 0x6d5451fdu);
    }
    {
        const auto out = Philox4x32::block({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                                           {0xa4093822u, 0x299f31d0u});
        CHECK(out[0] == 0xd16cfe09u);
        CHECK(out[1] == 0x94fdccebu);
        CHECK(out[2] == 0x5001e420u);
        CHECK(out[3] == 0x24126ea1u);
    }
}

// Reference values computed with scipy.stats.norm.ppf.
TEST_CASE("inverse normal cdf matches reference quantiles") {
    CHECK(inverse_normal_cdf(0.5) == 0.0);
    CHECK(inverse_normal_cdf(0.025) == doctest::Approx(-1.9599639845400545).epsilon(1e-14));
    CHECK(inverse_normal_cdf(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-14));
    CHECK(inverse_normal_cdf(0.8413447460685429) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(inverse_normal_cdf(0.05) == doctest::Approx(-1.6448536269514729).epsilon(1e-14));
    CHECK(inverse_normal_cdf(1e-9) == doctest::Approx(-5.9978070150076865).epsilon(1e-14));
    CHECK(inverse_normal_cdf(0.99999) == doctest::Approx(4.264890793923841).epsilon(1e-14));
    CHECK(inverse_normal_cdf(0.3) == doctest::Approx(-0.5244005127080409).epsilon(1e-14));
    CHECK(inverse_normal_cdf(1e-300) == doctest::Approx(-37.0470962993612).epsilon(1e-13));
    CHECK(inverse_normal_cdf(0.123456789) == doctest::Approx(-1.1578786091502087).epsilon(1e-14));
    // antisymmetry about 1/2
    CHECK(inverse_normal_cdf(0.77) == doctest::Approx(-inverse_normal_cdf(0.23)).epsilon(1e-14));
}

TEST_CASE("streams are deterministic and independent of creation order") {
    RandomStream a(42, 7);
    std::vector<double> first;
    for (int i = 0; i < 100; ++i) first.push_back(a.uniform());

    RandomStream other(42, 8);
    for (int i = 0; i < 3; ++i) (void)other.uniform();

    RandomStream b(42, 7);
    for (int i = 0; i < 100; ++i) CHECK(b.uniform() == first[static_cast<size_t>(i)]);
}

TEST_CASE("uniform moments") {
    RandomStream rng(123, 0);
    const int n = 200000;
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        s += u;
        s2 += u * u;
    }
    const double mean = s / n;
    const double var = s2 / n - mean * mean;
    CHECK(mean == doctest::Approx(0.5).epsilon(0.01));
    CHECK(var == doctest::Approx(1.0 / 12.0).epsilon(0.02));
}

TEST_CASE("normal moments") {
    RandomStream rng(99, 5);
    const int n = 200000;
    double s = 0.0, s2 = 0.0, s4 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = rng.normal();
        s += x;
        s2 += x * x;
        s4 += x * x * x * x;
    }
    CHECK(std::abs(s / n) < 0.01);
    CHECK(s2 / n == doctest::Approx(1.0).epsilon(0.02));
    CHECK(s4 / n == doctest::Approx(3.0).epsilon(0.05));
}

TEST_CASE("different seeds decorrelate") {
    RandomStream a(1, 0), b(2, 0);
    double cov = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) cov += (a.uniform() - 0.5) * (b.uniform() - 0.5);
    CHECK(std::abs(cov / n) < 0.005);
}
