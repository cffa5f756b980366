#pragma once

#include <optional>
#include <string>

#include "kbm/config.hpp"

namespace kbm {

// Exit codes shared by the CLI: 0 success, 2 validation error,
// 3 non-convergence, 4 failed verification under --strict.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitNonConvergence = 3;
inline constexpr int kExitVerificationFailed = 4;

struct RunOverrides {
    std::optional<uint64_t> seed;
    std::optional<int> threads;
    bool strict = false;
    bool check_only = false;
};

// solve: run the Picard solver, the enabled verifications, and write
// solution.csv, report.txt and paths_meta.txt into out_dir.
int run_solve(const std::string& config_path, const std::string& out_dir,
              const RunOverrides& overrides);

// verify: load a previously written solution.csv and run the enabled
// verifications against it without re-solving.
int run_verify(const std::string& config_path, const std::string& solution_path,
               const std::string& out_dir, const RunOverrides& overrides);

// check: validate the configuration and print condition-checker verdicts.
int run_check(const std::string& config_path, const RunOverrides& overrides);

// oracle: run the deterministic reference solver (radial for balls/annuli,
// finite differences for d = 2) and write oracle.csv.
int run_oracle(const std::string& config_path, const std::string& out_dir,
               const RunOverrides& overrides);

// CSV round-trip helpers (columns x1..xd, u1..un, se1..sen, interior nodes).
void write_solution_csv(const std::string& path, const SolutionField& field);
SolutionField read_solution_csv(const std::string& path, const Domain& domain,
                                const GridSpec& grid, int n_components);

}  // namespace kbm
