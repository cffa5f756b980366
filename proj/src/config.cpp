#include "kbm/config.hpp"

#include <algorithm>
#include <set>

namespace kbm {

namespace {

std::vector<std::string> coordinate_names(int dim) {
    std::vector<std::string> names;
    for (int i = 1; i <= dim; ++i) names.push_back("x" + std::to_string(i));
    return names;
}

Vec vec_from(const TomlValue& v, int dim, const std::string& what) {
    const auto arr = v.as_double_array();
    if (static_cast<int>(arr.size()) != dim)
        throw ConfigError(what + ": expected " + std::to_string(dim) + " entries");
    Vec out(dim);
    for (int i = 0; i < dim; ++i) out[i] = arr[static_cast<size_t>(i)];
    return out;
}

void reject_unknown_keys(const TomlTable& t, const std::set<std::string>& known,
                         const std::string& section) {
    for (const auto& [key, _] : t.values)
        if (!known.count(key))
            throw ConfigError("unknown key '" + key + "' in [" + section + "]");
}

Domain parse_domain(const TomlTable& t, const std::string& section) {
    const int dim = static_cast<int>(t.int_or("dim", 0));
    if (dim < 2 || dim > kMaxDim)
        throw ConfigError("[" + section + "] dim must be between 2 and " +
                          std::to_string(kMaxDim));
    const std::string shape = t.string_or("shape", "");
    if (shape == "ball") {
        reject_unknown_keys(t, {"dim", "shape", "center", "radius"}, section);
        return Domain::ball(vec_from(t.at("center"), dim, section + ".center"),
                            t.at("radius").as_double());
    }
    if (shape == "box") {
        reject_unknown_keys(t, {"dim", "shape", "lo", "hi"}, section);
        return Domain::box(vec_from(t.at("lo"), dim, section + ".lo"),
                           vec_from(t.at("hi"), dim, section + ".hi"));
    }
    if (shape == "annulus") {
        reject_unknown_keys(t, {"dim", "shape", "center", "r_in", "r_out"}, section);
        return Domain::annulus(vec_from(t.at("center"), dim, section + ".center"),
                               t.at("r_in").as_double(), t.at("r_out").as_double());
    }
    if (shape == "intersection" || shape == "difference") {
        reject_unknown_keys(t, {"dim", "shape"}, section);
        const TomlTable* a = t.table("a");
        const TomlTable* b = t.table("b");
        if (!a || !b)
            throw ConfigError("[" + section + "] " + shape +
                              " needs [" + section + ".a] and [" + section + ".b]");
        Domain da = parse_domain(*a, section + ".a");
        Domain db = parse_domain(*b, section + ".b");
        if (shape == "intersection") return Domain::intersection({std::move(da), std::move(db)});
        return Domain::difference(std::move(da), std::move(db));
    }
    throw ConfigError("[" + section + "] unknown shape '" + shape +
                      "' (ball, box, annulus, intersection, difference)");
}

Condition parse_condition(const std::string& s) {
    if (s == "A4") return Condition::A4;
    if (s == "A4'" || s == "A4prime") return Condition::A4Prime;
    if (s == "A4''" || s == "A4doubleprime") return Condition::A4DoublePrime;
    if (s == "A5") return Condition::A5;
    throw ConfigError("unknown condition '" + s + "' (A4, A4', A4'', A5)");
}

Nonlinearity parse_nonlinearity(const TomlTable& t, int dim, int n) {
    const std::string kind = t.string_or("kind", "zero");
    reject_unknown_keys(t, {"kind", "alpha", "exprs", "declared"}, "nonlinearity");

    Nonlinearity f = Nonlinearity::zero(n);
    if (kind == "zero") {
        f = Nonlinearity::zero(n);
    } else if (kind == "linear_decay") {
        f = Nonlinearity::linear_decay(n, t.number_or("alpha", 1.0));
    } else if (kind == "rotation") {
        if (n != 2) throw ConfigError("[nonlinearity] rotation requires n = 2");
        f = Nonlinearity::rotation();
    } else if (kind == "cubic_decay") {
        f = Nonlinearity::cubic_decay(n);
    } else if (kind == "componentwise" || kind == "expression") {
        if (!t.has("exprs")) throw ConfigError("[nonlinearity] " + kind + " needs exprs = [...]");
        const auto& arr = t.at("exprs").as_array();
        if (static_cast<int>(arr.size()) != n)
            throw ConfigError("[nonlinearity] exprs must have one entry per component");
        std::vector<std::string> names = coordinate_names(dim);
        if (kind == "componentwise") {
            names.push_back("z");
        } else {
            for (int k = 1; k <= n; ++k) names.push_back("y" + std::to_string(k));
        }
        std::vector<Expression> exprs;
        for (const TomlValue& e : arr) {
            try {
                exprs.push_back(Expression::parse(e.as_string(), names));
            } catch (const ExpressionError& ex) {
                throw ConfigError(std::string("[nonlinearity] ") + ex.what());
            }
        }
        f = kind == "componentwise" ? Nonlinearity::componentwise(dim, std::move(exprs))
                                    : Nonlinearity::expression_vector(dim, std::move(exprs));
        if (t.has("alpha")) f.set_alpha(t.at("alpha").as_double());
    } else {
        throw ConfigError("[nonlinearity] unknown kind '" + kind +
                          "' (zero, linear_decay, rotation, cubic_decay, componentwise, "
                          "expression)");
    }
    if (t.has("alpha") && kind == "linear_decay") f.set_alpha(t.at("alpha").as_double());
    if (t.has("declared"))
        for (const TomlValue& c : t.at("declared").as_array())
            f.declare(parse_condition(c.as_string()));
    return f;
}

void parse_measure_term(const TomlTable& t, int index, int dim,
                        std::vector<DiffuseMeasure>& measures) {
    const std::string section = "measure #" + std::to_string(index + 1);
    const int component = static_cast<int>(t.int_or("component", 1));
    if (component < 1 || component > static_cast<int>(measures.size()))
        throw ConfigError(section + ": component out of range");
    DiffuseMeasure& mu = measures[static_cast<size_t>(component - 1)];
    const int sign = static_cast<int>(t.int_or("sign", 1));
    if (sign != 1 && sign != -1) throw ConfigError(section + ": sign must be 1 or -1");

    const std::string kind = t.string_or("kind", "");
    if (kind == "density") {
        reject_unknown_keys(t, {"component", "sign", "kind", "expr"}, section);
        try {
            mu.add_density(sign, Expression::parse(t.at("expr").as_string(),
                                                   coordinate_names(dim)));
        } catch (const ExpressionError& ex) {
            throw ConfigError(section + ": " + ex.what());
        }
        return;
    }
    if (kind == "sphere_surface") {
        reject_unknown_keys(t, {"component", "sign", "kind", "center", "radius", "mass",
                                "mollification"},
                            section);
        mu.add_sphere_surface(sign, vec_from(t.at("center"), dim, section + ".center"),
                              t.at("radius").as_double(), t.at("mass").as_double(),
                              t.number_or("mollification", 0.0));
        return;
    }
    if (kind == "box_face_surface") {
        reject_unknown_keys(t, {"component", "sign", "kind", "axis", "coord", "lo", "hi", "mass",
                                "mollification"},
                            section);
        mu.add_box_face_surface(sign, static_cast<int>(t.at("axis").as_int()) - 1,
                                t.at("coord").as_double(),
                                vec_from(t.at("lo"), dim, section + ".lo"),
                                vec_from(t.at("hi"), dim, section + ".hi"),
                                t.at("mass").as_double(), t.number_or("mollification", 0.0));
        return;
    }
    throw ConfigError(section + ": unknown measure kind '" + kind +
                      "' (density, sphere_surface, box_face_surface)");
}

}  // namespace

RunConfig parse_run_config(const TomlTable& root) {
    for (const auto& [name, _] : root.tables)
        if (name != "problem" && name != "domain" && name != "nonlinearity" &&
            name != "solver" && name != "paths" && name != "verify")
            throw ConfigError("unknown section [" + name + "]");
    for (const auto& [name, _] : root.table_arrays)
        if (name != "measure") throw ConfigError("unknown section [[" + name + "]]");
    if (!root.values.empty())
        throw ConfigError("top-level keys are not allowed; put '" +
                          root.values.begin()->first + "' in a section");

    const TomlTable* domain_t = root.table("domain");
    if (!domain_t) throw ConfigError("missing [domain] section");
    Domain domain = parse_domain(*domain_t, "domain");
    const int dim = domain.dim();

    int n = 1;
    if (const TomlTable* problem_t = root.table("problem")) {
        reject_unknown_keys(*problem_t, {"n"}, "problem");
        n = static_cast<int>(problem_t->int_or("n", 1));
        if (n < 1 || n > kMaxDim) throw ConfigError("[problem] n out of range");
    }

    std::vector<DiffuseMeasure> measures;
    for (int k = 0; k < n; ++k) measures.emplace_back(dim);
    if (const auto* terms = root.array("measure")) {
        for (size_t i = 0; i < terms->size(); ++i)
            parse_measure_term((*terms)[i], static_cast<int>(i), dim, measures);
    }

    Nonlinearity f = Nonlinearity::zero(n);
    if (const TomlTable* ft = root.table("nonlinearity")) f = parse_nonlinearity(*ft, dim, n);

    RunConfig cfg;
    cfg.problem = Problem{std::move(domain), std::move(measures), std::move(f)};

    if (const TomlTable* st = root.table("solver")) {
        reject_unknown_keys(*st,
                            {"grid_resolution", "paths_per_node", "barrier_paths_per_node",
                             "max_sweeps", "tol", "damping", "truncation_base", "quad_cells",
                             "threads"},
                            "solver");
        cfg.solver.grid_resolution = static_cast<int>(st->int_or("grid_resolution", 33));
        cfg.solver.paths_per_node = static_cast<int>(st->int_or("paths_per_node", 1000));
        cfg.solver.barrier_paths_per_node =
            static_cast<int>(st->int_or("barrier_paths_per_node", 0));
        cfg.solver.max_sweeps = static_cast<int>(st->int_or("max_sweeps", 30));
        cfg.solver.tol = st->number_or("tol", 0.0);
        cfg.solver.damping = st->number_or("damping", 1.0);
        cfg.solver.truncation_base = st->number_or("truncation_base", 8.0);
        cfg.solver.quad_cells = static_cast<int>(st->int_or("quad_cells", 32));
        cfg.solver.threads = static_cast<int>(st->int_or("threads", 1));
        if (cfg.solver.grid_resolution < 3) throw ConfigError("[solver] grid_resolution < 3");
        if (cfg.solver.paths_per_node < 1) throw ConfigError("[solver] paths_per_node < 1");
        if (!(cfg.solver.damping > 0.0 && cfg.solver.damping <= 1.0))
            throw ConfigError("[solver] damping must be in (0, 1]");
    }
    if (const TomlTable* pt = root.table("paths")) {
        reject_unknown_keys(*pt, {"step", "max_steps", "exit_tolerance_factor", "seed"}, "paths");
        cfg.solver.paths.step = pt->number_or("step", 1e-3);
        cfg.solver.paths.max_steps = static_cast<int>(pt->int_or("max_steps", 0));
        cfg.solver.paths.exit_tolerance_factor = pt->number_or("exit_tolerance_factor", 0.5826);
        cfg.solver.paths.base_seed = static_cast<uint64_t>(pt->int_or("seed", 1));
        if (!(cfg.solver.paths.step > 0.0)) throw ConfigError("[paths] step must be positive");
    }
    if (const TomlTable* vt = root.table("verify")) {
        reject_unknown_keys(*vt,
                            {"revuz", "martingale", "stampacchia", "duality", "dynkin",
                             "uniqueness_probe", "revuz_t", "revuz_paths", "martingale_paths",
                             "martingale_checkpoints", "dynkin_paths", "dynkin_starts",
                             "duality_bumps", "check_samples", "check_box_radius"},
                            "verify");
        VerifyOptions& v = cfg.verify;
        v.revuz = vt->bool_or("revuz", false);
        v.martingale = vt->bool_or("martingale", false);
        v.stampacchia = vt->bool_or("stampacchia", false);
        v.duality = vt->bool_or("duality", false);
        v.dynkin = vt->bool_or("dynkin", false);
        v.uniqueness_probe = vt->bool_or("uniqueness_probe", false);
        v.revuz_t = vt->number_or("revuz_t", 0.2);
        v.revuz_paths = static_cast<int>(vt->int_or("revuz_paths", 20000));
        v.martingale_paths = static_cast<int>(vt->int_or("martingale_paths", 20000));
        if (vt->has("martingale_checkpoints"))
            v.martingale_checkpoints = vt->at("martingale_checkpoints").as_double_array();
        v.dynkin_paths = static_cast<int>(vt->int_or("dynkin_paths", 20000));
        v.dynkin_starts = static_cast<int>(vt->int_or("dynkin_starts", 5));
        v.duality_bumps = static_cast<int>(vt->int_or("duality_bumps", 5));
        v.check_samples = static_cast<int>(vt->int_or("check_samples", 100000));
        v.check_box_radius = vt->number_or("check_box_radius", 5.0);
        if (const TomlTable* gd = vt->table("dynkin_domain"))
            v.dynkin_domain = parse_domain(*gd, "verify.dynkin_domain");
    }
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    return parse_run_config(parse_toml_file(path));
}

}  // namespace kbm
