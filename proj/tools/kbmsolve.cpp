#include <CLI11.hpp>

#include <optional>
#include <string>

#include "kbm/runner.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Monte Carlo solver and verification harness for semilinear elliptic "
                 "systems with diffuse measure data"};
    app.require_subcommand(1);

    std::string config_path, solution_path, out_dir = "out";
    bool strict = false, check_only = false;
    int threads = 0;
    uint64_t seed = 0;
    bool seed_set = false, threads_set = false;

    auto add_common = [&](CLI::App* cmd, bool with_out) {
        cmd->add_option("config", config_path, "TOML run configuration")->required();
        if (with_out) cmd->add_option("--out", out_dir, "output directory (default: out)");
        cmd->add_flag("--strict", strict, "exit 4 when an enabled verification fails");
        cmd->add_option("--threads", threads, "worker threads (0 = hardware)")
            ->each([&](const std::string&) { threads_set = true; });
        cmd->add_option("--seed", seed, "override the base seed")
            ->each([&](const std::string&) { seed_set = true; });
    };

    CLI::App* solve = app.add_subcommand("solve", "solve the configured problem and verify");
    add_common(solve, true);
    solve->add_flag("--check-only", check_only,
                    "validate and print condition-checker verdicts, no solve");

    CLI::App* verify = app.add_subcommand("verify", "run verifications against a solution.csv");
    add_common(verify, true);
    verify->add_option("solution", solution_path, "solution.csv produced by solve")->required();

    CLI::App* check = app.add_subcommand("check", "validate the config and check conditions");
    add_common(check, false);

    CLI::App* oracle = app.add_subcommand("oracle", "run the deterministic reference solver");
    add_common(oracle, true);

    CLI11_PARSE(app, argc, argv);

    kbm::RunOverrides ov;
    ov.strict = strict;
    ov.check_only = check_only;
    if (seed_set) ov.seed = seed;
    if (threads_set) ov.threads = threads;

    if (solve->parsed()) return kbm::run_solve(config_path, out_dir, ov);
    if (verify->parsed()) return kbm::run_verify(config_path, solution_path, out_dir, ov);
    if (check->parsed()) return kbm::run_check(config_path, ov);
    if (oracle->parsed()) return kbm::run_oracle(config_path, out_dir, ov);
    return 1;
}
