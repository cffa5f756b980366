#include "kbm/solver.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

#include "kbm/parallel.hpp"
#include "kbm/rng.hpp"

namespace kbm {

namespace {

// Measure terms split into a per-component constant part (folded densities,
// priced by elapsed lifetime alone) and the terms that need a per-step
// density evaluation. This is what keeps the linear/constant-data benchmark
// walk loop free of expression evaluation.
struct VarTerm {
    int comp;
    double sign;
    const DiffuseMeasure* measure;
    int term_index;
};

struct PreparedMeasures {
    std::array<double, kMaxDim> constant{};
    std::vector<VarTerm> var_terms;

    static PreparedMeasures build(const std::vector<DiffuseMeasure>& measures, bool absolute) {
        PreparedMeasures p;
        for (size_t k = 0; k < measures.size(); ++k) {
            const auto& terms = measures[k].terms();
            for (size_t ti = 0; ti < terms.size(); ++ti) {
                const MeasureTerm& t = terms[ti];
                const double sign = absolute ? 1.0 : static_cast<double>(t.sign);
                if (t.kind == MeasureKind::Density && t.density.is_constant()) {
                    p.constant[k] += sign * t.density.constant_value();
                } else {
                    p.var_terms.push_back(
                        {static_cast<int>(k), sign, &measures[k], static_cast<int>(ti)});
                }
            }
        }
        return p;
    }
};

// Pathwise functional sum_k e_k [ int_0^zeta g_k(X_t) dt ] where
// g_k = T_level(f)(., u(.))_k + signed measure densities. Trapezoid weights
// follow OccupationAccumulator; constant densities are added at the end as
// constant * (trapezoid of 1) so they cost nothing per step.
class PathFunctional {
  public:
    PathFunctional(const PreparedMeasures& pm, const SolutionField* u_prev,
                   const Nonlinearity* f, double trunc_level, double step, int n)
        : pm_(pm),
          u_prev_(u_prev),
          f_(f && !f->is_zero() ? f : nullptr),
          level_(trunc_level),
          step_(step),
          n_(n),
          step_work_(f_ != nullptr || !pm.var_terms.empty()) {}

    void reset() {
        for (int k = 0; k < n_; ++k) total_[k] = last_[k] = 0.0;
        count_ = 0;
        lifetime_index_ = 0;
        truncated_ = false;
    }

    void start(const Vec& x) {
        ++count_;
        if (!step_work_) return;
        sample(x);
        for (int k = 0; k < n_; ++k) {
            total_[k] = 0.5 * step_ * g_[k];
            last_[k] = g_[k];
        }
    }

    void interior(const Vec& x, int) {
        ++count_;
        if (!step_work_) return;
        sample(x);
        for (int k = 0; k < n_; ++k) {
            total_[k] += step_ * g_[k];
            last_[k] = g_[k];
        }
    }

    void finish(const Vec&, int lifetime_index, bool truncated) {
        lifetime_index_ = lifetime_index;
        truncated_ = truncated;
    }

    bool truncated() const { return truncated_; }

    double value(int k) const {
        const double z = truncated_ ? (count_ - 1) * step_
                                    : static_cast<double>(lifetime_index_) * step_;
        const double closing = truncated_ ? -0.5 * step_ * last_[k] : 0.5 * step_ * last_[k];
        return total_[k] + closing + pm_.constant[static_cast<size_t>(k)] * z;
    }

  private:
    void sample(const Vec& x) {
        for (int k = 0; k < n_; ++k) g_[k] = 0.0;
        if (f_) {
            u_prev_->evaluate(x, std::span<double>(u_.data(), static_cast<size_t>(n_)));
            f_->evaluate(x, std::span<const double>(u_.data(), static_cast<size_t>(n_)),
                         std::span<double>(fv_.data(), static_cast<size_t>(n_)));
            double n2 = 0.0;
            for (int k = 0; k < n_; ++k) n2 += fv_[k] * fv_[k];
            if (n2 > level_ * level_) {
                const double s = level_ / std::sqrt(n2);
                for (int k = 0; k < n_; ++k) fv_[k] *= s;
            }
            for (int k = 0; k < n_; ++k) g_[k] += fv_[k];
        }
        for (const VarTerm& vt : pm_.var_terms)
            g_[vt.comp] += vt.sign * vt.measure->term_density(vt.term_index, x);
    }

    const PreparedMeasures& pm_;
    const SolutionField* u_prev_;
    const Nonlinearity* f_;
    double level_, step_;
    int n_;
    bool step_work_;

    std::array<double, kMaxDim> total_{}, last_{}, g_{}, u_{}, fv_{};
    int count_ = 0;
    int lifetime_index_ = 0;
    bool truncated_ = false;
};

struct SweepField {
    std::vector<double> values, se;
    std::atomic<long> truncated{0};
};

// One Monte Carlo sweep: estimates the representation at every interior node
// with paths_per_node paths. Stream ids are a pure function of (salt, node
// order, replicate), which is what makes sweeps reusable (common random
// numbers) and the result independent of the thread count.
void run_sweep(const Problem& prob, const SolutionField* u_prev, const PreparedMeasures& pm,
               const SolutionField& layout, const PathConfig& pc, int paths_per_node,
               double trunc_level, int threads, uint64_t salt, SweepField& out) {
    const int n = prob.n_components();
    const auto& nodes = layout.interior_nodes();
    out.values.assign(static_cast<size_t>(layout.node_count()) * n, 0.0);
    out.se.assign(static_cast<size_t>(layout.node_count()) * n, 0.0);
    out.truncated = 0;

    parallel_for(static_cast<long>(nodes.size()), threads, [&](long i) {
        const long idx = nodes[static_cast<size_t>(i)];
        const Vec x0 = layout.grid().node_position(idx);
        PathFunctional fun(pm, u_prev, &prob.f, trunc_level, pc.step, n);
        std::array<double, kMaxDim> s{}, s2{};
        long trunc = 0;
        const uint64_t base = salt + static_cast<uint64_t>(i) * static_cast<uint64_t>(paths_per_node);
        for (int j = 0; j < paths_per_node; ++j) {
            fun.reset();
            walk_killed(prob.domain, x0, pc, base + static_cast<uint64_t>(j), fun);
            trunc += fun.truncated();
            for (int k = 0; k < n; ++k) {
                const double v = fun.value(k);
                s[static_cast<size_t>(k)] += v;
                s2[static_cast<size_t>(k)] += v * v;
            }
        }
        out.truncated.fetch_add(trunc, std::memory_order_relaxed);
        const double np = static_cast<double>(paths_per_node);
        for (int k = 0; k < n; ++k) {
            const double mean = s[static_cast<size_t>(k)] / np;
            const double var = std::max(0.0, s2[static_cast<size_t>(k)] / np - mean * mean);
            out.values[static_cast<size_t>(idx * n + k)] = mean;
            out.se[static_cast<size_t>(idx * n + k)] = std::sqrt(var / np);
        }
    });
}

double median_of(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
    return v[v.size() / 2];
}

}  // namespace

Problem Problem::prepared(const PathConfig& paths) const {
    Problem out = *this;
    const int n = n_components();
    if (n < 1 || n > kMaxDim) throw std::invalid_argument("component count out of range");
    if (static_cast<int>(out.measures.size()) > n)
        throw std::invalid_argument("more measures than components");
    while (static_cast<int>(out.measures.size()) < n)
        out.measures.emplace_back(out.domain.dim());
    for (auto& mu : out.measures) {
        mu = mu.resolved(paths.step);
        mu.validate(out.domain);
    }
    return out;
}

SolutionField estimate_barrier(const Problem& problem, const SolverConfig& cfg) {
    const PathConfig pc = cfg.paths.resolved_for(problem.domain);
    const Problem prob = problem.prepared(pc);
    const int n = prob.n_components();
    SolutionField v(prob.domain, GridSpec::covering(prob.domain, cfg.grid_resolution), n);
    const PreparedMeasures pm = PreparedMeasures::build(prob.measures, /*absolute=*/true);

    const int paths = cfg.resolved_barrier_paths();
    SweepField sweep;
    Problem no_f = prob;
    no_f.f = Nonlinearity::zero(n);
    run_sweep(no_f, nullptr, pm, v, pc, paths, 1.0, cfg.threads, stream_ids::kBarrierSalt, sweep);

    const double total_paths = static_cast<double>(paths) *
                               static_cast<double>(v.interior_nodes().size());
    if (total_paths > 0 && sweep.truncated.load() > 0.01 * total_paths)
        throw std::runtime_error("estimate_barrier: more than 1% of paths were truncated; "
                                 "increase max_steps");
    v.raw_values() = std::move(sweep.values);
    for (long idx : v.interior_nodes()) {
        auto se = v.node_se(idx);
        for (int k = 0; k < n; ++k)
            se[static_cast<size_t>(k)] = sweep.se[static_cast<size_t>(idx * n + k)];
    }
    return v;
}

std::pair<SolutionField, SolveReport> picard_solve(const Problem& problem,
                                                   const SolverConfig& cfg,
                                                   const SolutionField* initial_guess) {
    const PathConfig pc = cfg.paths.resolved_for(problem.domain);
    const Problem prob = problem.prepared(pc);
    const int n = prob.n_components();

    if (!prob.f.is_zero() && !(prob.f.declares(Condition::A4) ||
                               prob.f.declares(Condition::A4Prime) ||
                               prob.f.declares(Condition::A4DoublePrime) ||
                               prob.f.declares(Condition::A5)))
        throw std::invalid_argument(
            "picard_solve: nonlinearity must be declared A4 (or a stronger condition)");

    SolveReport report;
    report.paths_per_node = cfg.paths_per_node;

    SolutionField u(prob.domain, GridSpec::covering(prob.domain, cfg.grid_resolution), n);
    if (initial_guess) {
        if (!initial_guess->grid().matches(u.grid()) || initial_guess->n_components() != n)
            throw std::invalid_argument("picard_solve: initial guess grid mismatch");
        u.raw_values() = initial_guess->raw_values();
    }

    const SolutionField barrier = estimate_barrier(prob, cfg);
    report.barrier_nodes = static_cast<long>(u.interior_nodes().size());

    const PreparedMeasures pm = PreparedMeasures::build(prob.measures, /*absolute=*/false);
    long truncated_paths = 0, total_paths = 0;
    SweepField sweep;
    double level = cfg.truncation_base;
    std::vector<double> final_se_median(static_cast<size_t>(n), 0.0);

    auto apply_sweep = [&](double damping) {
        double change = 0.0;
        for (long idx : u.interior_nodes()) {
            auto vals = u.node_values(idx);
            auto se = u.node_se(idx);
            for (int k = 0; k < n; ++k) {
                const double est = sweep.values[static_cast<size_t>(idx * n + k)];
                const double next = (1.0 - damping) * vals[static_cast<size_t>(k)] + damping * est;
                change = std::max(change, std::abs(next - vals[static_cast<size_t>(k)]));
                vals[static_cast<size_t>(k)] = next;
                se[static_cast<size_t>(k)] = sweep.se[static_cast<size_t>(idx * n + k)];
            }
        }
        return change;
    };

    // Domination |u(x)|_2 <= v(x): the vector barrier is bounded above by the
    // sum of the per-component potentials of |mu^k|, so that sum is the
    // implementable right-hand side. Reduces to |u| <= v for n = 1.
    auto node_violates = [&](long idx, std::span<const double> uv, std::span<const double> us) {
        const auto bv = barrier.node_values(idx);
        const auto bs = barrier.node_se(idx);
        double u2 = 0.0, vsum = 0.0, var = 0.0;
        for (int k = 0; k < n; ++k) {
            u2 += uv[static_cast<size_t>(k)] * uv[static_cast<size_t>(k)];
            vsum += bv[static_cast<size_t>(k)];
            var += us[static_cast<size_t>(k)] * us[static_cast<size_t>(k)] +
                   bs[static_cast<size_t>(k)] * bs[static_cast<size_t>(k)];
        }
        return std::sqrt(u2) > vsum + 3.0 * std::sqrt(var);
    };
    auto barrier_violation_count = [&](const SolutionField& field) {
        long count = 0;
        for (long idx : field.interior_nodes())
            if (node_violates(idx, field.node_values(idx), field.node_se(idx))) ++count;
        return count;
    };

    if (prob.f.is_zero()) {
        // The Picard map does not depend on u: one estimation sweep, done
        // directly with the reporting streams.
        run_sweep(prob, nullptr, pm, u, pc, cfg.paths_per_node, level, cfg.threads,
                  stream_ids::kFinalSweepSalt, sweep);
        report.sup_change.push_back(apply_sweep(1.0));
        report.truncation_levels.push_back(level);
        truncated_paths += sweep.truncated.load();
        total_paths += static_cast<long>(u.interior_nodes().size()) * cfg.paths_per_node;
        report.sweeps = 1;
        report.converged = true;
    } else {
        int quiet_streak = 0, barrier_streak = 0;
        for (int m = 1; m <= cfg.max_sweeps; ++m) {
            level = cfg.truncation_base * std::pow(2.0, m - 1);
            run_sweep(prob, &u, pm, u, pc, cfg.paths_per_node, level, cfg.threads,
                      stream_ids::kSolverSalt, sweep);
            truncated_paths += sweep.truncated.load();
            total_paths += static_cast<long>(u.interior_nodes().size()) * cfg.paths_per_node;

            const double change = apply_sweep(cfg.damping);
            report.sup_change.push_back(change);
            report.truncation_levels.push_back(level);
            report.sweeps = m;

            const double scale = u.sup_norm();
            std::vector<double> ses;
            for (long idx : u.interior_nodes())
                for (int k = 0; k < n; ++k) ses.push_back(u.node_se(idx)[static_cast<size_t>(k)]);
            const double tol_eff =
                cfg.tol > 0.0 ? cfg.tol : std::max(3.0 * median_of(ses), 1e-3 * scale);

            if (change < tol_eff) ++quiet_streak; else quiet_streak = 0;

            const long violations = barrier_violation_count(u);
            if (violations > std::max<long>(1, report.barrier_nodes / 50)) ++barrier_streak;
            else barrier_streak = 0;
            if (barrier_streak >= 3) {
                report.failure = "barrier-violation";
                break;
            }

            if (quiet_streak >= 2 && level > scale) {
                report.converged = true;
                break;
            }
        }
        if (!report.converged && report.failure.empty()) report.failure = "non-convergence";

        if (report.converged) {
            // fresh streams for the reported field
            run_sweep(prob, &u, pm, u, pc, cfg.paths_per_node, level, cfg.threads,
                      stream_ids::kFinalSweepSalt, sweep);
            truncated_paths += sweep.truncated.load();
            total_paths += static_cast<long>(u.interior_nodes().size()) * cfg.paths_per_node;
            apply_sweep(1.0);
        }
    }

    report.truncated_path_fraction =
        total_paths > 0 ? static_cast<double>(truncated_paths) / static_cast<double>(total_paths)
                        : 0.0;
    report.field_scale = u.sup_norm();
    for (int k = 0; k < n; ++k) {
        std::vector<double> ses;
        double mx = 0.0;
        for (long idx : u.interior_nodes()) {
            const double s = u.node_se(idx)[static_cast<size_t>(k)];
            ses.push_back(s);
            mx = std::max(mx, s);
        }
        report.se_median.push_back(median_of(ses));
        report.se_max.push_back(mx);
    }

    if (report.converged) {
        report.barrier_violations = barrier_violation_count(u);
        report.barrier_violations_after_resample = report.barrier_violations;
        if (report.barrier_violations > 0) {
            // re-estimate the offending nodes with independent streams to
            // separate statistical flukes from genuine violations
            long remaining = 0;
            const uint64_t resample_salt = stream_ids::kFinalSweepSalt ^ 0xBADC0FFEEull;
            const auto& nodes = u.interior_nodes();
            for (size_t i = 0; i < nodes.size(); ++i) {
                const long idx = nodes[i];
                if (!node_violates(idx, u.node_values(idx), u.node_se(idx))) continue;
                PathFunctional fun(pm, &u, &prob.f, level, pc.step, n);
                std::array<double, kMaxDim> s{}, s2{};
                const Vec x0 = u.grid().node_position(idx);
                const uint64_t base =
                    resample_salt + static_cast<uint64_t>(i) * static_cast<uint64_t>(cfg.paths_per_node);
                for (int j = 0; j < cfg.paths_per_node; ++j) {
                    fun.reset();
                    walk_killed(prob.domain, x0, pc, base + static_cast<uint64_t>(j), fun);
                    for (int k = 0; k < n; ++k) {
                        const double v = fun.value(k);
                        s[static_cast<size_t>(k)] += v;
                        s2[static_cast<size_t>(k)] += v * v;
                    }
                }
                std::array<double, kMaxDim> mean{}, se{};
                for (int k = 0; k < n; ++k) {
                    const double np = cfg.paths_per_node;
                    mean[static_cast<size_t>(k)] = s[static_cast<size_t>(k)] / np;
                    se[static_cast<size_t>(k)] = std::sqrt(
                        std::max(0.0, s2[static_cast<size_t>(k)] / np -
                                          mean[static_cast<size_t>(k)] * mean[static_cast<size_t>(k)]) /
                        np);
                }
                if (node_violates(idx, std::span<const double>(mean.data(), static_cast<size_t>(n)),
                                  std::span<const double>(se.data(), static_cast<size_t>(n))))
                    ++remaining;
            }
            report.barrier_violations_after_resample = remaining;
        }

        if (prob.f.declares(Condition::A5))
            report.stampacchia_a5 = stampacchia_check(u, prob, Condition::A5, cfg.quad_cells);
        if (prob.f.declares(Condition::A4DoublePrime))
            report.stampacchia_a4pp =
                stampacchia_check(u, prob, Condition::A4DoublePrime, cfg.quad_cells);
    }

    return {std::move(u), std::move(report)};
}

std::vector<MartingaleCheckpoint> martingale_residual(const SolutionField& u,
                                                      const Problem& problem, const Vec& start,
                                                      std::span<const double> checkpoints,
                                                      int n_paths, const SolverConfig& cfg,
                                                      uint64_t stream_salt) {
    PathConfig pc = cfg.paths.resolved_for(problem.domain);
    const Problem prob = problem.prepared(pc);
    const int n = prob.n_components();

    long max_horizon = 1;
    std::vector<long> horizons;
    for (double t : checkpoints) {
        horizons.push_back(std::lround(t / pc.step));
        max_horizon = std::max(max_horizon, horizons.back());
    }
    pc.max_steps = static_cast<int>(std::min<long>(pc.max_steps, max_horizon));

    const Vec u0 = u.evaluate(start);
    const size_t nc = checkpoints.size();
    std::vector<double> sums(nc * static_cast<size_t>(n), 0.0);
    std::vector<double> sums2(nc * static_cast<size_t>(n), 0.0);

    std::array<double, kMaxDim> fint{};
    Vec uval(n);
    for (int p = 0; p < n_paths; ++p) {
        const auto path = simulate_killed_path(
            prob.domain, start, pc, stream_ids::kVerifySalt + stream_salt + static_cast<uint64_t>(p));
        for (size_t c = 0; c < nc; ++c) {
            const long K = horizons[c];
            // u(X_{t^zeta}): 0 once the path is dead (cemetery convention)
            const bool alive = path.truncated || path.lifetime_index > K;
            if (alive) {
                const int j = static_cast<int>(std::min<long>(path.interior_count() - 1, K));
                uval = u.evaluate(path.position(j));
            } else {
                for (int k = 0; k < n; ++k) uval[k] = 0.0;
            }
            capped_occupation(path, K, n,
                              [&](const Vec& x, double* out) {
                                  const Vec ux = u.evaluate(x);
                                  const Vec fx = prob.f.evaluate(x, ux);
                                  for (int k = 0; k < n; ++k) out[k] = fx[k];
                              },
                              fint.data());
            for (int k = 0; k < n; ++k) {
                const double a =
                    prob.measures[static_cast<size_t>(k)].weighted_accumulation(
                        path, [](const Vec&) { return 1.0; }, checkpoints[c]);
                const double d = uval[k] - u0[k] + fint[static_cast<size_t>(k)] + a;
                sums[c * static_cast<size_t>(n) + static_cast<size_t>(k)] += d;
                sums2[c * static_cast<size_t>(n) + static_cast<size_t>(k)] += d * d;
            }
        }
    }

    std::vector<MartingaleCheckpoint> out;
    for (size_t c = 0; c < nc; ++c) {
        MartingaleCheckpoint mc;
        mc.t = checkpoints[c];
        mc.mean = Vec(n);
        mc.se = Vec(n);
        for (int k = 0; k < n; ++k) {
            const double m = sums[c * static_cast<size_t>(n) + static_cast<size_t>(k)] / n_paths;
            const double v = std::max(
                0.0, sums2[c * static_cast<size_t>(n) + static_cast<size_t>(k)] / n_paths - m * m);
            mc.mean[k] = m;
            mc.se[k] = std::sqrt(v / n_paths);
        }
        out.push_back(mc);
    }
    return out;
}

StampacchiaResult stampacchia_check(const SolutionField& u, const Problem& problem,
                                    Condition which, int quad_cells) {
    StampacchiaResult res;
    if (which != Condition::A5 && which != Condition::A4DoublePrime) return res;
    if (!problem.f.declares(which)) return res;
    res.applicable = true;

    const int n = problem.n_components();
    double lhs = 0.0;
    const double cell = u.grid().cell_volume();
    for (long idx : u.interior_nodes()) {
        const Vec x = u.grid().node_position(idx);
        const auto uv = u.node_values(idx);
        Vec y(n);
        for (int k = 0; k < n; ++k) y[k] = uv[static_cast<size_t>(k)];
        const Vec fv = problem.f.evaluate(x, y);
        for (int k = 0; k < n; ++k) lhs += std::abs(fv[k]);
    }
    lhs *= cell;

    double tv = 0.0;
    for (const auto& mu : problem.measures)
        tv += mu.total_variation(problem.domain, quad_cells).value;
    res.lhs = lhs;
    res.rhs = which == Condition::A5 ? tv / problem.f.alpha() : tv;
    res.ok = lhs <= res.rhs * 1.05;
    return res;
}

UniquenessProbe uniqueness_probe(const Problem& problem, const SolverConfig& cfg,
                                 std::span<const SolutionField> guesses) {
    if (!problem.f.is_zero() && !problem.f.declares(Condition::A4Prime))
        throw std::invalid_argument("uniqueness_probe requires the A4' declaration");
    UniquenessProbe probe;
    std::vector<SolutionField> results;
    for (const SolutionField& g : guesses) {
        auto [field, report] = picard_solve(problem, cfg, &g);
        if (!report.converged) probe.all_converged = false;
        results.push_back(std::move(field));
    }
    const int n = problem.n_components();
    for (size_t a = 0; a < results.size(); ++a) {
        for (size_t b = a + 1; b < results.size(); ++b) {
            for (long idx : results[a].interior_nodes()) {
                const auto va = results[a].node_values(idx);
                const auto vb = results[b].node_values(idx);
                const auto sa = results[a].node_se(idx);
                const auto sb = results[b].node_se(idx);
                for (int k = 0; k < n; ++k) {
                    probe.max_pairwise_distance =
                        std::max(probe.max_pairwise_distance,
                                 std::abs(va[static_cast<size_t>(k)] - vb[static_cast<size_t>(k)]));
                    probe.max_pooled_se = std::max(
                        probe.max_pooled_se,
                        std::hypot(sa[static_cast<size_t>(k)], sb[static_cast<size_t>(k)]));
                }
            }
        }
    }
    return probe;
}

}  // namespace kbm
