#include "penflow/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace penflow {

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
    throw ConfigError("config error at " + path + ": " + what);
}

void check_keys(const Json& j, const std::string& path,
                std::initializer_list<const char*> allowed) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool known = false;
        for (const char* k : allowed)
            if (it.key() == k) {
                known = true;
                break;
            }
        if (!known) fail(path + "." + it.key(), "unknown field");
    }
}

const Json& member(const Json& j, const std::string& path, const char* key) {
    if (!j.is_object()) fail(path, "expected an object");
    auto it = j.find(key);
    if (it == j.end()) fail(path + "." + key, "missing required field");
    return *it;
}

const Json* opt_member(const Json& j, const char* key) {
    if (!j.is_object()) return nullptr;
    auto it = j.find(key);
    return it == j.end() ? nullptr : &*it;
}

double num_at(const Json& j, const std::string& path) {
    if (!j.is_number()) fail(path, "expected a number");
    return j.get<double>();
}

long int_at(const Json& j, const std::string& path) {
    if (!j.is_number_integer()) fail(path, "expected an integer");
    return j.get<long>();
}

bool bool_at(const Json& j, const std::string& path) {
    if (!j.is_boolean()) fail(path, "expected a boolean");
    return j.get<bool>();
}

std::string str_at(const Json& j, const std::string& path) {
    if (!j.is_string()) fail(path, "expected a string");
    return j.get<std::string>();
}

Vec vec_at(const Json& j, const std::string& path) {
    if (!j.is_array() || j.empty()) fail(path, "expected a non-empty array of numbers");
    Vec v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i)
        v[static_cast<Eigen::Index>(i)] = num_at(j[i], path + "[" + std::to_string(i) + "]");
    return v;
}

Mat mat_at(const Json& j, const std::string& path) {
    if (!j.is_array() || j.empty()) fail(path, "expected a non-empty array of rows");
    const std::size_t rows = j.size();
    std::size_t cols = 0;
    Mat M;
    for (std::size_t i = 0; i < rows; ++i) {
        const std::string row_path = path + "[" + std::to_string(i) + "]";
        if (!j[i].is_array() || j[i].empty()) fail(row_path, "expected a non-empty array");
        if (i == 0) {
            cols = j[i].size();
            M.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
        } else if (j[i].size() != cols) {
            fail(row_path, "rows must have equal length");
        }
        for (std::size_t k = 0; k < cols; ++k)
            M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
                num_at(j[i][k], row_path + "[" + std::to_string(k) + "]");
    }
    return M;
}

Json vec_to_json(const Vec& v) {
    Json a = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

Json mat_to_json(const Mat& M) {
    Json rows = Json::array();
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
        Json row = Json::array();
        for (Eigen::Index k = 0; k < M.cols(); ++k) row.push_back(M(i, k));
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace

// ---- set / instance descriptors ------------------------------------------------

ConvexSet set_from_json(const Json& j, const std::string& path) {
    std::string kind = str_at(member(j, path, "kind"), path + ".kind");
    try {
        if (kind == "box") {
            check_keys(j, path, {"kind", "lo", "hi"});
            return ConvexSet(Box{vec_at(member(j, path, "lo"), path + ".lo"),
                                 vec_at(member(j, path, "hi"), path + ".hi")});
        }
        if (kind == "ball") {
            check_keys(j, path, {"kind", "center", "radius"});
            return ConvexSet(Ball{vec_at(member(j, path, "center"), path + ".center"),
                                  num_at(member(j, path, "radius"), path + ".radius")});
        }
        if (kind == "affine") {
            check_keys(j, path, {"kind", "anchor", "basis"});
            return ConvexSet(AffineSubspace{vec_at(member(j, path, "anchor"), path + ".anchor"),
                                            mat_at(member(j, path, "basis"), path + ".basis")});
        }
        if (kind == "halfspace") {
            check_keys(j, path, {"kind", "normal", "offset"});
            return ConvexSet(Halfspace{vec_at(member(j, path, "normal"), path + ".normal"),
                                       num_at(member(j, path, "offset"), path + ".offset")});
        }
        if (kind == "singleton") {
            check_keys(j, path, {"kind", "point"});
            return ConvexSet(Singleton{vec_at(member(j, path, "point"), path + ".point")});
        }
    } catch (const std::invalid_argument& e) {
        fail(path, e.what());
    }
    fail(path + ".kind", "unknown set kind '" + kind +
                             "' (expected box, ball, affine, halfspace or singleton)");
}

Json set_to_json(const ConvexSet& C) {
    Json j;
    std::visit(
        [&](const auto& d) {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, Box>) {
                j["kind"] = "box";
                j["lo"] = vec_to_json(d.lo);
                j["hi"] = vec_to_json(d.hi);
            } else if constexpr (std::is_same_v<T, Ball>) {
                j["kind"] = "ball";
                j["center"] = vec_to_json(d.center);
                j["radius"] = d.radius;
            } else if constexpr (std::is_same_v<T, AffineSubspace>) {
                j["kind"] = "affine";
                j["anchor"] = vec_to_json(d.anchor);
                j["basis"] = mat_to_json(d.basis);
            } else if constexpr (std::is_same_v<T, Halfspace>) {
                j["kind"] = "halfspace";
                j["normal"] = vec_to_json(d.normal);
                j["offset"] = d.offset;
            } else {
                j["kind"] = "singleton";
                j["point"] = vec_to_json(d.point);
            }
        },
        C.desc());
    return j;
}

namespace {

MaxMonotone a_from_json(const Json& j, const std::string& path) {
    std::string kind = str_at(member(j, path, "kind"), path + ".kind");
    const Json* g = opt_member(j, "gamma");
    double gamma = g ? num_at(*g, path + ".gamma") : 0.0;
    try {
        if (kind == "zero") {
            check_keys(j, path, {"kind", "dim", "gamma"});
            return MaxMonotone(ZeroOp{int_at(member(j, path, "dim"), path + ".dim")}, gamma);
        }
        if (kind == "linear") {
            check_keys(j, path, {"kind", "M", "gamma"});
            return MaxMonotone(LinearOp{mat_at(member(j, path, "M"), path + ".M")}, gamma);
        }
        if (kind == "affine") {
            check_keys(j, path, {"kind", "M", "q", "gamma"});
            return MaxMonotone(AffineOp{mat_at(member(j, path, "M"), path + ".M"),
                                        vec_at(member(j, path, "q"), path + ".q")},
                               gamma);
        }
        if (kind == "normal_cone") {
            check_keys(j, path, {"kind", "set", "gamma"});
            return MaxMonotone(NormalConeOp{set_from_json(member(j, path, "set"), path + ".set")},
                               gamma);
        }
        if (kind == "l1") {
            check_keys(j, path, {"kind", "dim", "weight", "gamma"});
            return MaxMonotone(
                L1Subdifferential{int_at(member(j, path, "dim"), path + ".dim"),
                                  num_at(member(j, path, "weight"), path + ".weight")},
                gamma);
        }
        if (kind == "linear_plus_normal_cone") {
            check_keys(j, path, {"kind", "M", "set", "gamma"});
            return MaxMonotone(
                LinearPlusNormalCone{mat_at(member(j, path, "M"), path + ".M"),
                                     set_from_json(member(j, path, "set"), path + ".set")},
                gamma);
        }
    } catch (const std::invalid_argument& e) {
        fail(path, e.what());
    }
    fail(path + ".kind", "unknown operator kind '" + kind + "'");
}

Cocoercive d_from_json(const Json& j, const std::string& path) {
    std::string kind = str_at(member(j, path, "kind"), path + ".kind");
    const Json* e = opt_member(j, "eta");
    try {
        if (kind == "zero") {
            check_keys(j, path, {"kind", "dim", "eta"});
            double eta = e ? num_at(*e, path + ".eta") : 1.0;
            return Cocoercive(ZeroForward{int_at(member(j, path, "dim"), path + ".dim")}, eta);
        }
        if (kind == "grad_quadratic") {
            check_keys(j, path, {"kind", "Q", "c", "eta"});
            Mat Q = mat_at(member(j, path, "Q"), path + ".Q");
            Vec c = vec_at(member(j, path, "c"), path + ".c");
            double eta;
            if (e) {
                eta = num_at(*e, path + ".eta");
            } else {
                Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (Q + Q.transpose()));
                double hi = es.eigenvalues().maxCoeff();
                eta = hi > 0.0 ? 1.0 / hi : 1.0;
            }
            return Cocoercive(GradQuadratic{std::move(Q), std::move(c)}, eta);
        }
    } catch (const std::invalid_argument& e2) {
        fail(path, e2.what());
    }
    fail(path + ".kind", "unknown forward-operator kind '" + kind + "'");
}

Penalty b_from_json(const Json& j, const std::string& path) {
    std::string kind = str_at(member(j, path, "kind"), path + ".kind");
    try {
        if (kind == "dist_sq") {
            check_keys(j, path, {"kind", "set", "mu"});
            const Json* m = opt_member(j, "mu");
            double mu = m ? num_at(*m, path + ".mu") : 1.0;
            return Penalty(DistSqGradient{set_from_json(member(j, path, "set"), path + ".set")},
                           mu);
        }
        if (kind == "linear_psd") {
            check_keys(j, path, {"kind", "M"});
            return make_linear_psd_penalty(mat_at(member(j, path, "M"), path + ".M"));
        }
    } catch (const std::invalid_argument& e) {
        fail(path, e.what());
    }
    fail(path + ".kind", "unknown penalty kind '" + kind + "'");
}

}  // namespace

ProblemInstance instance_from_json(const Json& j, const std::string& path) {
    if (!j.is_object()) fail(path, "expected an object");
    check_keys(j, path, {"A", "D", "B"});
    MaxMonotone A = a_from_json(member(j, path, "A"), path + ".A");
    Cocoercive D = d_from_json(member(j, path, "D"), path + ".D");
    Penalty B = b_from_json(member(j, path, "B"), path + ".B");
    try {
        return ProblemInstance(std::move(A), std::move(D), std::move(B));
    } catch (const std::invalid_argument& e) {
        fail(path, e.what());
    }
}

Json instance_to_json(const ProblemInstance& pr) {
    Json a;
    std::visit(
        [&](const auto& d) {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, ZeroOp>) {
                a["kind"] = "zero";
                a["dim"] = d.dim;
            } else if constexpr (std::is_same_v<T, LinearOp>) {
                a["kind"] = "linear";
                a["M"] = mat_to_json(d.M);
            } else if constexpr (std::is_same_v<T, AffineOp>) {
                a["kind"] = "affine";
                a["M"] = mat_to_json(d.M);
                a["q"] = vec_to_json(d.q);
            } else if constexpr (std::is_same_v<T, NormalConeOp>) {
                a["kind"] = "normal_cone";
                a["set"] = set_to_json(d.set);
            } else if constexpr (std::is_same_v<T, L1Subdifferential>) {
                a["kind"] = "l1";
                a["dim"] = d.dim;
                a["weight"] = d.weight;
            } else {
                a["kind"] = "linear_plus_normal_cone";
                a["M"] = mat_to_json(d.M);
                a["set"] = set_to_json(d.set);
            }
        },
        pr.A.desc());
    a["gamma"] = pr.A.gamma();

    Json d;
    std::visit(
        [&](const auto& op) {
            using T = std::decay_t<decltype(op)>;
            if constexpr (std::is_same_v<T, ZeroForward>) {
                d["kind"] = "zero";
                d["dim"] = op.dim;
            } else {
                d["kind"] = "grad_quadratic";
                d["Q"] = mat_to_json(op.Q);
                d["c"] = vec_to_json(op.c);
            }
        },
        pr.D.desc());
    d["eta"] = pr.D.eta();

    Json b;
    std::visit(
        [&](const auto& op) {
            using T = std::decay_t<decltype(op)>;
            if constexpr (std::is_same_v<T, DistSqGradient>) {
                b["kind"] = "dist_sq";
                b["set"] = set_to_json(op.set);
                b["mu"] = pr.B.mu();
            } else {
                b["kind"] = "linear_psd";
                b["M"] = mat_to_json(op.M);
            }
        },
        pr.B.desc());

    Json out;
    out["A"] = std::move(a);
    out["D"] = std::move(d);
    out["B"] = std::move(b);
    return out;
}

// ---- problem materialization -----------------------------------------------------

MaterializedProblem materialize_problem(const Json& problem) {
    if (!problem.is_object() || problem.size() != 1)
        fail("problem", "expected exactly one of 'builtin', 'random', 'inline'");
    if (const Json* b = opt_member(problem, "builtin")) {
        std::string id = str_at(*b, "problem.builtin");
        try {
            NamedInstance inst = builtin(id);
            return MaterializedProblem{inst.id, std::move(inst.instance),
                                       std::move(inst.solution), std::move(inst.certificate)};
        } catch (const std::invalid_argument& e) {
            fail("problem.builtin", e.what());
        }
    }
    if (const Json* r = opt_member(problem, "random")) {
        check_keys(*r, "problem.random", {"seed", "dim", "gamma"});
        long seed = int_at(member(*r, "problem.random", "seed"), "problem.random.seed");
        long dim = int_at(member(*r, "problem.random", "dim"), "problem.random.dim");
        const Json* g = opt_member(*r, "gamma");
        double gamma = g ? num_at(*g, "problem.random.gamma") : 1.0;
        if (seed < 0) fail("problem.random.seed", "must be >= 0");
        if (dim < 1 || dim > 64) fail("problem.random.dim", "must lie in [1, 64]");
        NamedInstance inst =
            random_instance(static_cast<std::uint64_t>(seed), static_cast<int>(dim), gamma);
        return MaterializedProblem{inst.id, std::move(inst.instance), std::move(inst.solution),
                                   std::move(inst.certificate)};
    }
    if (const Json* i = opt_member(problem, "inline")) {
        ProblemInstance pr = instance_from_json(*i, "problem.inline");
        return MaterializedProblem{"inline", std::move(pr), std::nullopt, std::nullopt};
    }
    fail("problem", "expected one of 'builtin', 'random', 'inline'");
}

// ---- run config --------------------------------------------------------------------

RunConfig parse_config(const std::string& text) {
    Json root;
    try {
        root = Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    if (!root.is_object()) throw ConfigError("config error at <root>: expected an object");
    check_keys(root, "<root>",
               {"problem", "schedule", "integrator", "x0", "outputs", "discrete"});

    RunConfig cfg;
    cfg.problem = member(root, "<root>", "problem");
    if (!cfg.problem.is_object() || cfg.problem.size() != 1)
        fail("problem", "expected exactly one of 'builtin', 'random', 'inline'");
    if (const Json* i = opt_member(cfg.problem, "inline"))
        instance_from_json(*i, "problem.inline");  // validate field shapes up front
    else if (!opt_member(cfg.problem, "builtin") && !opt_member(cfg.problem, "random"))
        fail("problem", "expected one of 'builtin', 'random', 'inline'");

    const Json& sched = member(root, "<root>", "schedule");
    check_keys(sched, "schedule", {"lambda", "beta"});
    const Json& lam = member(sched, "schedule", "lambda");
    check_keys(lam, "schedule.lambda", {"c", "p"});
    const Json& bet = member(sched, "schedule", "beta");
    check_keys(bet, "schedule.beta", {"c", "q"});
    cfg.schedule.c_lambda = num_at(member(lam, "schedule.lambda", "c"), "schedule.lambda.c");
    cfg.schedule.p = num_at(member(lam, "schedule.lambda", "p"), "schedule.lambda.p");
    cfg.schedule.c_beta = num_at(member(bet, "schedule.beta", "c"), "schedule.beta.c");
    cfg.schedule.q = num_at(member(bet, "schedule.beta", "q"), "schedule.beta.q");
    try {
        validate(cfg.schedule);
    } catch (const std::invalid_argument& e) {
        fail("schedule", e.what());
    }

    if (const Json* integ = opt_member(root, "integrator")) {
        check_keys(*integ, "integrator", {"method", "t_end", "h_max", "safety", "record_every"});
        if (const Json* m = opt_member(*integ, "method")) {
            std::string method = str_at(*m, "integrator.method");
            if (method == "euler") cfg.integrator.method = IntegrateOptions::Method::euler;
            else if (method == "rk4") cfg.integrator.method = IntegrateOptions::Method::rk4;
            else fail("integrator.method", "expected 'euler' or 'rk4'");
        }
        if (const Json* v = opt_member(*integ, "t_end"))
            cfg.integrator.t_end = num_at(*v, "integrator.t_end");
        if (const Json* v = opt_member(*integ, "h_max"))
            cfg.integrator.h_max = num_at(*v, "integrator.h_max");
        if (const Json* v = opt_member(*integ, "safety"))
            cfg.integrator.safety = num_at(*v, "integrator.safety");
        if (const Json* v = opt_member(*integ, "record_every"))
            cfg.integrator.record_every = int_at(*v, "integrator.record_every");
        if (!(cfg.integrator.t_end > 0.0) || !std::isfinite(cfg.integrator.t_end))
            fail("integrator.t_end", "must be finite and > 0");
        if (!(cfg.integrator.h_max > 0.0)) fail("integrator.h_max", "must be > 0");
        if (!(cfg.integrator.safety > 0.0 && cfg.integrator.safety <= 1.0))
            fail("integrator.safety", "must lie in (0, 1]");
        if (cfg.integrator.record_every < 1) fail("integrator.record_every", "must be >= 1");
    }

    if (const Json* x0 = opt_member(root, "x0")) {
        if (x0->is_string()) {
            if (x0->get<std::string>() != "zeros")
                fail("x0", "expected an array of numbers or the string 'zeros'");
        } else {
            cfg.x0 = vec_at(*x0, "x0");
        }
    }

    if (const Json* outs = opt_member(root, "outputs")) {
        check_keys(*outs, "outputs", {"trajectory_csv", "report_json"});
        if (const Json* v = opt_member(*outs, "trajectory_csv"))
            cfg.trajectory_csv = str_at(*v, "outputs.trajectory_csv");
        if (const Json* v = opt_member(*outs, "report_json"))
            cfg.report_json = str_at(*v, "outputs.report_json");
    }

    if (const Json* disc = opt_member(root, "discrete")) {
        check_keys(*disc, "discrete", {"N", "use_h1"});
        cfg.discrete_N = int_at(member(*disc, "discrete", "N"), "discrete.N");
        if (*cfg.discrete_N < 1) fail("discrete.N", "must be >= 1");
        if (const Json* v = opt_member(*disc, "use_h1"))
            cfg.discrete_use_h1 = bool_at(*v, "discrete.use_h1");
    }
    return cfg;
}

RunConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

Json to_json(const RunConfig& cfg) {
    Json root;
    root["problem"] = cfg.problem;
    root["schedule"] = {{"lambda", Json{{"c", cfg.schedule.c_lambda}, {"p", cfg.schedule.p}}},
                        {"beta", Json{{"c", cfg.schedule.c_beta}, {"q", cfg.schedule.q}}}};
    root["integrator"] = {
        {"method", cfg.integrator.method == IntegrateOptions::Method::euler ? "euler" : "rk4"},
        {"t_end", cfg.integrator.t_end},
        {"h_max", cfg.integrator.h_max},
        {"safety", cfg.integrator.safety},
        {"record_every", cfg.integrator.record_every}};
    if (cfg.x0) root["x0"] = vec_to_json(*cfg.x0);
    else root["x0"] = "zeros";
    root["outputs"] = {{"trajectory_csv", cfg.trajectory_csv}, {"report_json", cfg.report_json}};
    if (cfg.discrete_N)
        root["discrete"] = {{"N", *cfg.discrete_N}, {"use_h1", cfg.discrete_use_h1}};
    return root;
}

std::string serialize_config(const RunConfig& cfg) { return to_json(cfg).dump(2) + "\n"; }

// ---- report fragments ----------------------------------------------------------------

Json json_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "+inf" : "-inf";
    return v;
}

Json hypothesis_json(const HypothesisReport& rep) {
    Json checks = Json::array();
    for (const QuadCheck& q : rep.numeric_cross_checks) {
        checks.push_back(Json{{"name", q.name},
                              {"value_1e3", json_number(q.value_1e3)},
                              {"value_1e5", json_number(q.value_1e5)},
                              {"value_1e6", json_number(q.value_1e6)},
                              {"analytic_convergent", q.analytic_convergent},
                              {"numeric_verdict", q.numeric_verdict},
                              {"consistent", q.consistent}});
    }
    return Json{{"h3_l2", rep.h3_l2},
                {"h3_not_l1", rep.h3_not_l1},
                {"h3", rep.h3},
                {"product_limsup", json_number(rep.product_limsup)},
                {"product_ok", rep.product_ok},
                {"hfitz_distsq", to_string(rep.hfitz_distsq)},
                {"numeric_consistent", rep.numeric_consistent},
                {"numeric_cross_checks", std::move(checks)}};
}

Json lyapunov_json(const LyapunovReport& rep) {
    return Json{{"lemma_id", rep.lemma_id},
                {"nodes", rep.grid_times.size()},
                {"violation_fraction", json_number(rep.violation_fraction)},
                {"max_violation", json_number(rep.max_violation)},
                {"t1", json_number(rep.t1_used)},
                {"a", json_number(rep.a_used)},
                {"b", json_number(rep.b_used)},
                {"eps0", json_number(rep.eps0_used)}};
}

Json convergence_json(const ConvergenceReport& rep) {
    Json tails;
    for (const auto& [name, value] : rep.integral_tails) tails[name] = json_number(value);
    Json j{{"dist_tail_oscillation", json_number(rep.dist_tail_oscillation)},
           {"integral_tails", std::move(tails)},
           {"ergodic_dist_to_solution", json_number(rep.ergodic_dist_to_solution)}};
    j["strong_dist_final"] =
        rep.strong_dist_final ? json_number(*rep.strong_dist_final) : Json(nullptr);
    return j;
}

}  // namespace penflow
