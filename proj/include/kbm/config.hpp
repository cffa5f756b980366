#pragma once

#include <optional>
#include <string>
#include <vector>

#include "kbm/solver.hpp"
#include "kbm/toml.hpp"

namespace kbm {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct VerifyOptions {
    bool revuz = false;
    bool martingale = false;
    bool stampacchia = false;
    bool duality = false;
    bool dynkin = false;
    bool uniqueness_probe = false;

    double revuz_t = 0.2;
    int revuz_paths = 20000;
    int martingale_paths = 20000;
    std::vector<double> martingale_checkpoints = {0.05, 0.1, 0.2};
    int dynkin_paths = 20000;
    int dynkin_starts = 5;
    std::optional<Domain> dynkin_domain;  // default: centered ball inside Omega
    int duality_bumps = 5;

    int check_samples = 100000;
    double check_box_radius = 5.0;

    bool any_enabled() const {
        return revuz || martingale || stampacchia || duality || dynkin || uniqueness_probe;
    }
};

struct RunConfig {
    Problem problem{Domain::ball(Vec::zero(2), 1.0), {}, Nonlinearity::zero(1)};
    SolverConfig solver;
    VerifyOptions verify;
};

// Parses and validates a declarative run configuration. Throws ConfigError
// (or TomlError) with line/field diagnostics; unknown sections, keys, shape
// names, and measure/nonlinearity kinds are rejected.
RunConfig parse_run_config(const TomlTable& root);
RunConfig load_run_config(const std::string& path);

}  // namespace kbm
