#include "kbm/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "kbm/fd.hpp"
#include "kbm/radial.hpp"
#include "kbm/rng.hpp"
#include "kbm/verify.hpp"

namespace kbm {

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string fmt_short(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

// Ordered key: value report, written verbatim; keys are documented in the
// README and kept stable for downstream tooling.
class Report {
  public:
    void add(const std::string& key, const std::string& value) {
        lines_.emplace_back(key, value);
    }
    void add(const std::string& key, double value) { add(key, fmt_short(value)); }
    void add(const std::string& key, bool value) { add(key, value ? std::string("true") : "false"); }
    void add(const std::string& key, long value) { add(key, std::to_string(value)); }

    void write(const std::string& path) const {
        std::ofstream out(path);
        for (const auto& [k, v] : lines_) out << k << ": " << v << "\n";
    }
    void print(std::ostream& os) const {
        for (const auto& [k, v] : lines_) os << k << ": " << v << "\n";
    }

  private:
    std::vector<std::pair<std::string, std::string>> lines_;
};

RunConfig load_or_die(const std::string& path, const RunOverrides& ov) {
    RunConfig cfg = load_run_config(path);
    if (ov.seed) cfg.solver.paths.base_seed = *ov.seed;
    if (ov.threads) cfg.solver.threads = *ov.threads;
    return cfg;
}

// Smallest sensible default sub-domain for the Dynkin check: a ball around
// the bounding-box center at half its clearance.
Domain default_dynkin_domain(const Domain& domain) {
    Vec lo, hi;
    domain.bounding_box(lo, hi);
    Vec center = 0.5 * (lo + hi);
    double sd = domain.signed_distance(center);
    if (sd <= 0.0) {
        // centre outside (annulus-like): fall back to a sampled deep point
        RandomStream rng(0x0D7Eu, 0);
        for (int i = 0; i < 4096; ++i) {
            const Vec x = domain.sample_interior(rng);
            if (domain.signed_distance(x) > sd) {
                sd = domain.signed_distance(x);
                center = x;
            }
        }
    }
    return Domain::ball(center, 0.5 * sd);
}

struct VerificationOutcome {
    bool all_ok = true;
    int enabled = 0;
};

// Runs every enabled verification against the field and appends the verdicts
// to the report. `solved` carries solve-time extras (uniqueness probe).
VerificationOutcome run_verifications(const RunConfig& cfg, const SolutionField& field,
                                      Report& report, bool solve_mode,
                                      const SolveReport* solve_report) {
    const VerifyOptions& v = cfg.verify;
    const Problem& problem = cfg.problem;
    VerificationOutcome outcome;
    const int n = problem.n_components();
    const double scale = std::max(field.sup_norm(), 1e-12);
    // discretization allowance for path-identity checks: the martingale and
    // Dynkin statistics carry O(h) time-stepping and O(grid^2) interpolation
    // bias that MC noise does not see
    const double allowance = 0.01 * scale;

    // the field's own sampling noise enters the identity checks through
    // u(X_.) and u(x0); the median node SE is the honest per-evaluation term
    std::vector<double> field_se(static_cast<size_t>(n), 0.0);
    {
        for (int k = 0; k < n; ++k) {
            std::vector<double> ses;
            for (long idx : field.interior_nodes())
                ses.push_back(field.node_se(idx)[static_cast<size_t>(k)]);
            if (!ses.empty()) {
                std::nth_element(ses.begin(), ses.begin() + ses.size() / 2, ses.end());
                field_se[static_cast<size_t>(k)] = ses[ses.size() / 2];
            }
        }
    }
    auto identity_threshold = [&](double path_se, int k) {
        const double fs = field_se[static_cast<size_t>(k)];
        return 3.0 * std::sqrt(path_se * path_se + 2.0 * fs * fs) + allowance;
    };

    if (v.stampacchia) {
        ++outcome.enabled;
        bool any = false, ok = true;
        if (problem.f.declares(Condition::A5)) {
            const auto r = solve_mode && solve_report && solve_report->stampacchia_a5.applicable
                               ? solve_report->stampacchia_a5
                               : stampacchia_check(field, problem, Condition::A5,
                                                   cfg.solver.quad_cells);
            report.add("stampacchia_a5_lhs", r.lhs);
            report.add("stampacchia_a5_rhs", r.rhs);
            report.add("stampacchia_a5_ok", r.ok);
            any = true;
            ok = ok && r.ok;
        }
        if (problem.f.declares(Condition::A4DoublePrime)) {
            const auto r = solve_mode && solve_report && solve_report->stampacchia_a4pp.applicable
                               ? solve_report->stampacchia_a4pp
                               : stampacchia_check(field, problem, Condition::A4DoublePrime,
                                                   cfg.solver.quad_cells);
            report.add("stampacchia_a4pp_lhs", r.lhs);
            report.add("stampacchia_a4pp_rhs", r.rhs);
            report.add("stampacchia_a4pp_ok", r.ok);
            any = true;
            ok = ok && r.ok;
        }
        if (!any) report.add("stampacchia", std::string("skipped (no A5 or A4'' declaration)"));
        outcome.all_ok = outcome.all_ok && ok;
    }

    if (v.revuz) {
        ++outcome.enabled;
        auto one = [](const Vec&) { return 1.0; };
        bool ok = true;
        bool any = false;
        for (int k = 0; k < n; ++k) {
            const DiffuseMeasure mu =
                problem.measures[static_cast<size_t>(k)].resolved(cfg.solver.paths.step);
            if (mu.empty()) continue;
            any = true;
            const auto r = revuz_check(mu, problem.domain, cfg.solver.paths, one, one, v.revuz_t,
                                       v.revuz_paths, 0x1000u * (k + 1));
            const bool pass = std::abs(r.lhs - r.rhs) <= 3.0 * r.pooled_se();
            const std::string tag = "revuz_u" + std::to_string(k + 1);
            report.add(tag + "_lhs", r.lhs);
            report.add(tag + "_rhs", r.rhs);
            report.add(tag + "_se", r.pooled_se());
            report.add(tag + "_ok", pass);
            ok = ok && pass;
        }
        if (!any) report.add("revuz", std::string("skipped (all measures empty)"));
        outcome.all_ok = outcome.all_ok && ok;
    }

    if (v.martingale) {
        ++outcome.enabled;
        // starts: the largest-|u| node (sensitive to corruption) and the node
        // nearest the bounding-box center
        std::vector<Vec> starts;
        long arg_max = -1;
        double best = -1.0;
        for (long idx : field.interior_nodes()) {
            double m = 0.0;
            for (double val : field.node_values(idx)) m = std::max(m, std::abs(val));
            if (m > best) {
                best = m;
                arg_max = idx;
            }
        }
        if (arg_max >= 0) starts.push_back(field.grid().node_position(arg_max));
        Vec lo, hi;
        problem.domain.bounding_box(lo, hi);
        const Vec center = 0.5 * (lo + hi);
        long nearest = -1;
        double dist = 1e300;
        for (long idx : field.interior_nodes()) {
            const double dc = distance(field.grid().node_position(idx), center);
            if (dc < dist) {
                dist = dc;
                nearest = idx;
            }
        }
        if (nearest >= 0 && nearest != arg_max)
            starts.push_back(field.grid().node_position(nearest));

        double max_excess = -1e300, max_abs_mean = 0.0;
        bool ok = true;
        for (size_t s = 0; s < starts.size(); ++s) {
            const auto res =
                martingale_residual(field, problem, starts[s], v.martingale_checkpoints,
                                    v.martingale_paths, cfg.solver, 0x2000u * (s + 1));
            for (const auto& c : res) {
                for (int k = 0; k < n; ++k) {
                    max_abs_mean = std::max(max_abs_mean, std::abs(c.mean[k]));
                    const double excess = std::abs(c.mean[k]) - identity_threshold(c.se[k], k);
                    max_excess = std::max(max_excess, excess);
                    if (excess > 0.0) ok = false;
                }
            }
        }
        report.add("martingale_max_abs_mean", max_abs_mean);
        report.add("martingale_allowance", allowance);
        report.add("martingale_ok", ok);
        outcome.all_ok = outcome.all_ok && ok;
    }

    if (v.duality) {
        ++outcome.enabled;
        double min_width = 0.0;
        for (int i = 0; i < field.grid().dim; ++i)
            min_width = std::max(min_width, 4.0 * field.grid().spacing(i));
        bool ok = true;
        double max_resid = 0.0, max_budget = 0.0;
        try {
            const auto bumps =
                default_bumps(problem.domain, v.duality_bumps, 0xB0B5u, min_width);
            const auto res = duality_residual(field, problem, bumps);
            for (const auto& r : res) {
                max_resid = std::max(max_resid, std::abs(r.residual));
                max_budget = std::max(max_budget, r.budget);
                ok = ok && r.ok;
            }
            report.add("duality_max_residual", max_resid);
            report.add("duality_max_budget", max_budget);
            report.add("duality_ok", ok);
        } catch (const std::exception& e) {
            report.add("duality_error", std::string(e.what()));
            ok = false;
        }
        outcome.all_ok = outcome.all_ok && ok;
    }

    if (v.dynkin) {
        ++outcome.enabled;
        const Domain g = v.dynkin_domain ? *v.dynkin_domain
                                         : default_dynkin_domain(problem.domain);
        RandomStream rng(cfg.solver.paths.base_seed, stream_ids::kVerifySalt ^ 0xD1Du);
        std::vector<Vec> starts;
        for (int i = 0; i < v.dynkin_starts; ++i) starts.push_back(g.sample_interior(rng));
        const auto res =
            dynkin_consistency(field, problem, g, starts, v.dynkin_paths, cfg.solver, 0x3000u);
        bool ok = true;
        double max_disc = 0.0;
        for (const auto& r : res) {
            for (int k = 0; k < n; ++k) {
                max_disc = std::max(max_disc, std::abs(r.discrepancy[k]));
                if (std::abs(r.discrepancy[k]) > identity_threshold(r.se[k], k)) ok = false;
            }
        }
        report.add("dynkin_max_discrepancy", max_disc);
        report.add("dynkin_allowance", allowance);
        report.add("dynkin_ok", ok);
        outcome.all_ok = outcome.all_ok && ok;
    }

    if (v.uniqueness_probe) {
        ++outcome.enabled;
        if (!solve_mode) {
            report.add("uniqueness_probe",
                       std::string("skipped (re-solves from fresh guesses; run `solve`)"));
        } else if (!problem.f.is_zero() && !problem.f.declares(Condition::A4Prime)) {
            report.add("uniqueness_probe", std::string("skipped (requires the A4' declaration)"));
        } else {
            const auto barrier = estimate_barrier(problem, cfg.solver);
            auto neg = barrier;
            for (long idx : neg.interior_nodes()) {
                auto vals = neg.node_values(idx);
                for (int k = 0; k < n; ++k) vals[static_cast<size_t>(k)] *= -1.0;
            }
            const SolutionField zero(problem.domain, barrier.grid(), n);
            std::vector<SolutionField> guesses = {zero, barrier, neg};
            const auto probe = uniqueness_probe(problem, cfg.solver, guesses);
            const double threshold = 3.0 * probe.max_pooled_se + 1e-12;
            const bool ok = probe.all_converged && probe.max_pairwise_distance <= threshold;
            report.add("uniqueness_max_distance", probe.max_pairwise_distance);
            report.add("uniqueness_threshold", threshold);
            report.add("uniqueness_ok", ok);
            outcome.all_ok = outcome.all_ok && ok;
        }
    }

    return outcome;
}

int print_condition_checks(const RunConfig& cfg) {
    const Problem& p = cfg.problem;
    std::vector<Condition> to_check = {Condition::A4, Condition::A4Prime,
                                       Condition::A4DoublePrime};
    if (p.f.alpha() > 0.0) to_check.push_back(Condition::A5);
    for (Condition c : to_check) {
        const auto rep = check_condition(p.f, c, p.domain, cfg.verify.check_samples,
                                         cfg.verify.check_box_radius,
                                         cfg.solver.paths.base_seed);
        const bool declared = p.f.declares(c);
        std::cout << "condition " << condition_name(c) << ": "
                  << (rep.holds_on_sample ? "holds on sample" : "VIOLATED")
                  << " (worst " << fmt_short(rep.worst_value) << ", tol "
                  << fmt_short(rep.tol) << ")" << (declared ? " [declared]" : "") << "\n";
        if (!rep.holds_on_sample) {
            std::cout << "  counterexample y = (";
            for (int k = 0; k < p.f.n_components(); ++k)
                std::cout << (k ? ", " : "") << fmt_short(rep.worst_y[k]);
            std::cout << ")\n";
        }
    }
    return kExitOk;
}

}  // namespace

void write_solution_csv(const std::string& path, const SolutionField& field) {
    std::ofstream out(path);
    if (!out.is_open()) throw std::runtime_error("cannot write " + path);
    const int d = field.grid().dim;
    const int n = field.n_components();
    for (int i = 1; i <= d; ++i) out << (i > 1 ? "," : "") << "x" << i;
    for (int k = 1; k <= n; ++k) out << ",u" << k;
    for (int k = 1; k <= n; ++k) out << ",se" << k;
    out << "\n";
    for (long idx : field.interior_nodes()) {
        const Vec x = field.grid().node_position(idx);
        for (int i = 0; i < d; ++i) out << (i ? "," : "") << fmt(x[i]);
        for (double v : field.node_values(idx)) out << "," << fmt(v);
        for (double v : field.node_se(idx)) out << "," << fmt(v);
        out << "\n";
    }
}

SolutionField read_solution_csv(const std::string& path, const Domain& domain,
                                const GridSpec& grid, int n_components) {
    std::ifstream in(path);
    if (!in.is_open()) throw std::runtime_error("cannot open solution file: " + path);
    SolutionField field(domain, grid, n_components);
    const int d = grid.dim;
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("solution file is empty");
    const std::string expected_header_start = "x1";
    if (line.rfind(expected_header_start, 0) != 0)
        throw std::runtime_error("solution file: missing header row");

    const auto& nodes = field.interior_nodes();
    size_t row = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (row >= nodes.size())
            throw std::runtime_error("solution file: more rows than interior grid nodes");
        std::vector<double> cols;
        std::stringstream ss(line);
        std::string tok;
        while (std::getline(ss, tok, ',')) cols.push_back(std::strtod(tok.c_str(), nullptr));
        if (static_cast<int>(cols.size()) != d + 2 * n_components)
            throw std::runtime_error("solution file: wrong column count at data row " +
                                     std::to_string(row + 1));
        const long idx = nodes[row];
        const Vec x = grid.node_position(idx);
        for (int i = 0; i < d; ++i)
            if (std::abs(cols[static_cast<size_t>(i)] - x[i]) > 1e-9)
                throw std::runtime_error(
                    "solution file does not match the configured grid (row " +
                    std::to_string(row + 1) + ")");
        auto vals = field.node_values(idx);
        auto se = field.node_se(idx);
        for (int k = 0; k < n_components; ++k) {
            vals[static_cast<size_t>(k)] = cols[static_cast<size_t>(d + k)];
            se[static_cast<size_t>(k)] = cols[static_cast<size_t>(d + n_components + k)];
        }
        ++row;
    }
    if (row != nodes.size())
        throw std::runtime_error("solution file: fewer rows than interior grid nodes");
    return field;
}

int run_solve(const std::string& config_path, const std::string& out_dir,
              const RunOverrides& ov) {
    RunConfig cfg;
    try {
        cfg = load_or_die(config_path, ov);
        // fail fast on invalid measures before any simulation
        (void)cfg.problem.prepared(cfg.solver.paths);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    }
    if (ov.check_only) return print_condition_checks(cfg);

    std::filesystem::create_directories(out_dir);
    const auto t0 = std::chrono::steady_clock::now();

    SolveReport solve_report;
    std::optional<SolutionField> field;
    try {
        auto [f, r] = picard_solve(cfg.problem, cfg.solver);
        field.emplace(std::move(f));
        solve_report = std::move(r);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    }
    const double solve_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    write_solution_csv(out_dir + "/solution.csv", *field);
    {
        std::ofstream meta(out_dir + "/paths_meta.txt");
        meta << "seed: " << cfg.solver.paths.base_seed << "\n";
        meta << "step: " << fmt(cfg.solver.paths.step) << "\n";
        meta << "exit_tolerance_factor: " << fmt(cfg.solver.paths.exit_tolerance_factor) << "\n";
        meta << "truncated_fraction: " << fmt(solve_report.truncated_path_fraction) << "\n";
    }

    Report report;
    report.add("converged", solve_report.converged);
    if (!solve_report.failure.empty()) report.add("failure", solve_report.failure);
    report.add("sweeps", static_cast<long>(solve_report.sweeps));
    {
        std::string hist, levels;
        for (double c : solve_report.sup_change) hist += fmt_short(c) + " ";
        for (double l : solve_report.truncation_levels) levels += fmt_short(l) + " ";
        report.add("sup_change_history", hist);
        report.add("truncation_levels", levels);
    }
    report.add("paths_per_node", static_cast<long>(solve_report.paths_per_node));
    report.add("truncated_path_fraction", solve_report.truncated_path_fraction);
    report.add("field_scale", solve_report.field_scale);
    for (int k = 0; k < field->n_components(); ++k) {
        report.add("se_median_u" + std::to_string(k + 1), solve_report.se_median[static_cast<size_t>(k)]);
        report.add("se_max_u" + std::to_string(k + 1), solve_report.se_max[static_cast<size_t>(k)]);
    }
    report.add("barrier_nodes", solve_report.barrier_nodes);
    report.add("barrier_violations", solve_report.barrier_violations);
    report.add("barrier_violations_after_resample",
               solve_report.barrier_violations_after_resample);

    bool ok = true;
    if (solve_report.converged) {
        const auto outcome = run_verifications(cfg, *field, report, true, &solve_report);
        ok = outcome.all_ok;
        if (outcome.enabled == 0) report.add("verifications", std::string("no checks enabled"));
    }
    report.add("solve_seconds", solve_seconds);
    report.add("verdict", solve_report.converged && ok ? std::string("pass") : "fail");
    report.write(out_dir + "/report.txt");
    report.print(std::cout);

    if (!solve_report.converged) return kExitNonConvergence;
    if (!ok && ov.strict) return kExitVerificationFailed;
    return kExitOk;
}

int run_verify(const std::string& config_path, const std::string& solution_path,
               const std::string& out_dir, const RunOverrides& ov) {
    RunConfig cfg;
    std::optional<SolutionField> field;
    try {
        cfg = load_or_die(config_path, ov);
        (void)cfg.problem.prepared(cfg.solver.paths);
        field.emplace(read_solution_csv(solution_path, cfg.problem.domain,
                                        GridSpec::covering(cfg.problem.domain,
                                                           cfg.solver.grid_resolution),
                                        cfg.problem.n_components()));
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    }

    std::filesystem::create_directories(out_dir);
    Report report;
    const auto outcome = run_verifications(cfg, *field, report, false, nullptr);
    if (outcome.enabled == 0) report.add("verifications", std::string("no checks enabled"));
    report.add("verdict", outcome.all_ok ? std::string("pass") : "fail");
    report.write(out_dir + "/report.txt");
    report.print(std::cout);
    if (!outcome.all_ok && ov.strict) return kExitVerificationFailed;
    return kExitOk;
}

int run_check(const std::string& config_path, const RunOverrides& ov) {
    RunConfig cfg;
    try {
        cfg = load_or_die(config_path, ov);
        (void)cfg.problem.prepared(cfg.solver.paths);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    }
    return print_condition_checks(cfg);
}

int run_oracle(const std::string& config_path, const std::string& out_dir,
               const RunOverrides& ov) {
    RunConfig cfg;
    try {
        cfg = load_or_die(config_path, ov);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    }
    std::filesystem::create_directories(out_dir);

    const std::string& desc = cfg.problem.domain.describe();
    const bool radial_shape = desc.rfind("ball", 0) == 0 || desc.rfind("annulus", 0) == 0;
    try {
        const Problem prepared = cfg.problem.prepared(cfg.solver.paths);
        SolutionField field(prepared.domain,
                            GridSpec::covering(prepared.domain, cfg.solver.grid_resolution),
                            prepared.n_components());
        if (radial_shape) {
            const auto prof = radial_solve(prepared);
            Vec lo, hi;
            prepared.domain.bounding_box(lo, hi);
            const Vec center = 0.5 * (lo + hi);
            for (long idx : field.interior_nodes()) {
                const Vec x = field.grid().node_position(idx);
                const Vec val = prof.value_vec(distance(x, center));
                auto slot = field.node_values(idx);
                for (int k = 0; k < field.n_components(); ++k) slot[static_cast<size_t>(k)] = val[k];
            }
            std::cout << "oracle: radial profile on " << desc << "\n";
        } else if (prepared.domain.dim() == 2) {
            field = fd_solve(prepared, cfg.solver.paths, cfg.solver.grid_resolution);
            std::cout << "oracle: 5-point finite differences on " << desc << "\n";
        } else {
            std::cerr << "error: no deterministic oracle for this domain "
                         "(radial shapes or d = 2 only)\n";
            return kExitValidation;
        }
        write_solution_csv(out_dir + "/oracle.csv", field);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    }
    return kExitOk;
}

}  // namespace kbm
