#include "kbm/path.hpp"

namespace kbm {

namespace {

struct Recorder {
    KilledPath& path;
    int dim;

    void push(const Vec& x) {
        for (int i = 0; i < dim; ++i) path.positions.push_back(x[i]);
    }
    void start(const Vec& x0) { push(x0); }
    void interior(const Vec& x, int) { push(x); }
    void finish(const Vec& exit_point, int lifetime_index, bool truncated) {
        path.exit_point = exit_point;
        path.lifetime_index = lifetime_index;
        path.truncated = truncated;
    }
};

}  // namespace

KilledPath simulate_killed_path(const Domain& domain, const Vec& start, const PathConfig& cfg,
                                uint64_t path_index) {
    const PathConfig rc = cfg.resolved_for(domain);
    KilledPath path;
    path.dim = domain.dim();
    path.step = rc.step;
    path.kill_tolerance = rc.kill_tolerance();
    path.positions.reserve(64u * static_cast<size_t>(path.dim));
    Recorder rec{path, path.dim};
    walk_killed(domain, start, rc, path_index, rec);
    return path;
}

double occupation_integral(const KilledPath& path, const std::function<double(const Vec&)>& g) {
    const int n = path.interior_count();
    if (n == 0) return 0.0;
    OccupationAccumulator acc(path.step);
    acc.start(g(path.position(0)));
    for (int j = 1; j < n; ++j) acc.interior(g(path.position(j)));
    return acc.finish(path.truncated);
}

int subdomain_exit(const KilledPath& path, const Domain& g_domain, double tolerance) {
    const double tol = tolerance < 0.0 ? path.kill_tolerance : tolerance;
    const int n = path.interior_count();
    for (int j = 0; j < n; ++j) {
        if (g_domain.signed_distance(path.position(j)) <= tol) return j;
    }
    return path.lifetime_index;
}

}  // namespace kbm
