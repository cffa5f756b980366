#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "kbm/config.hpp"

using namespace kbm;

namespace {

RunConfig parse(const std::string& text) { return parse_run_config(parse_toml(text)); }

const char* kMinimal = R"(
[domain]
dim = 2
shape = "ball"
center = [0, 0]
radius = 1.0
)";

}  // namespace

TEST_CASE("minimal config fills defaults") {
    const auto cfg = parse(kMinimal);
    CHECK(cfg.problem.domain.dim() == 2);
    CHECK(cfg.problem.n_components() == 1);
    CHECK(cfg.problem.measures.size() == 1);
    CHECK(cfg.problem.measures[0].empty());
    CHECK(cfg.problem.f.is_zero());
    CHECK(cfg.solver.grid_resolution == 33);
    CHECK(cfg.solver.paths.step == 1e-3);
    CHECK(cfg.solver.paths.exit_tolerance_factor == doctest::Approx(0.5826));
    CHECK(!cfg.verify.any_enabled());
}

TEST_CASE("full configuration round trip") {
    const auto cfg = parse(R"(
[problem]
n = 2

[domain]
dim = 2
shape = "annulus"
center = [0.5, 0]
r_in = 0.25
r_out = 1.0

[[measure]]
component = 1
sign = 1
kind = "density"
expr = "1 + x1^2"

[[measure]]
component = 2
sign = -1
kind = "sphere_surface"
center = [0.5, 0]
radius = 0.6
mass = 1.5
mollification = 0.02

[nonlinearity]
kind = "expression"
exprs = ["-y2", "y1"]
declared = ["A4"]

[solver]
grid_resolution = 21
paths_per_node = 500
damping = 0.5
threads = 2

[paths]
step = 4e-3
seed = 99
exit_tolerance_factor = 0.6

[verify]
revuz = true
dynkin = true
dynkin_starts = 3
martingale_checkpoints = [0.1, 0.3]

[verify.dynkin_domain]
dim = 2
shape = "ball"
center = [0.6, 0]
radius = 0.15
)");
    CHECK(cfg.problem.n_components() == 2);
    CHECK(cfg.problem.measures[0].terms().size() == 1);
    CHECK(cfg.problem.measures[1].terms().size() == 1);
    CHECK(cfg.problem.measures[1].terms()[0].sign == -1);
    CHECK(cfg.problem.measures[1].terms()[0].mollification == 0.02);
    CHECK(cfg.problem.f.kind() == Nonlinearity::Kind::ExpressionVector);
    CHECK(cfg.problem.f.declares(Condition::A4));
    CHECK(!cfg.problem.f.declares(Condition::A5));
    CHECK(cfg.solver.damping == 0.5);
    CHECK(cfg.solver.threads == 2);
    CHECK(cfg.solver.paths.base_seed == 99);
    CHECK(cfg.verify.revuz);
    CHECK(cfg.verify.dynkin);
    CHECK(cfg.verify.dynkin_starts == 3);
    REQUIRE(cfg.verify.martingale_checkpoints.size() == 2);
    CHECK(cfg.verify.martingale_checkpoints[1] == 0.3);
    REQUIRE(cfg.verify.dynkin_domain.has_value());
    CHECK(cfg.verify.dynkin_domain->contains({0.6, 0.0}));

    // the parsed problem validates end to end
    CHECK_NOTHROW(cfg.problem.prepared(cfg.solver.paths));
}

TEST_CASE("csg domains parse recursively") {
    const auto cfg = parse(R"(
[domain]
dim = 2
shape = "difference"

[domain.a]
dim = 2
shape = "box"
lo = [-1, -1]
hi = [1, 1]

[domain.b]
dim = 2
shape = "ball"
center = [0, 0]
radius = 0.5
)");
    CHECK(!cfg.problem.domain.contains({0.0, 0.0}));
    CHECK(cfg.problem.domain.contains({0.8, 0.8}));
}

TEST_CASE("diagnostics name the offending field") {
    auto expect = [](const std::string& text, const std::string& needle) {
        try {
            parse(text);
            FAIL("expected ConfigError for: " << needle);
        } catch (const std::exception& e) {
            CHECK(std::string(e.what()).find(needle) != std::string::npos);
        }
    };
    // the catalog has no atoms: point masses are unrepresentable
    expect(std::string(kMinimal) + "[[measure]]\nkind = \"atom\"\n", "unknown measure kind");
    expect(std::string(kMinimal) + "[[measure]]\nkind = \"density\"\nexpr = \"x9\"\n",
           "unknown variable");
    expect(std::string(kMinimal) + "[[measure]]\ncomponent = 3\nkind = \"density\"\nexpr = \"1\"\n",
           "component out of range");
    expect("[domain]\ndim = 2\nshape = \"cube\"\n", "unknown shape");
    expect("[domain]\ndim = 1\nshape = \"ball\"\ncenter = [0]\nradius = 1\n", "dim");
    expect(std::string(kMinimal) + "[typo_section]\nx = 1\n", "unknown section");
    expect(std::string(kMinimal) + "[solver]\nwrong_key = 1\n", "unknown key");
    expect("stray = 1\n" + std::string(kMinimal), "section");
    expect(std::string(kMinimal) + "stray = 1\n", "unknown key");
    expect(std::string(kMinimal) + "[nonlinearity]\nkind = \"rotation\"\n", "n = 2");
    expect(std::string(kMinimal) + "[nonlinearity]\nkind = \"wiggle\"\n", "unknown kind");
    expect(std::string(kMinimal) +
               "[nonlinearity]\nkind = \"expression\"\nexprs = [\"y1\"]\ndeclared = [\"A9\"]\n",
           "unknown condition");
    expect(std::string(kMinimal) + "[solver]\ndamping = 0.0\n", "damping");
}
