#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "penflow/config.hpp"

using namespace penflow;

namespace {

std::string must_getenv_cli() { return PENFLOW_CLI_PATH; }

struct CliResult {
    int exit_code = -1;
    std::string output;  // stdout + stderr interleaved
};

CliResult run_cli(const std::string& args, const std::string& env_prefix = "") {
    std::string cmd = env_prefix + " " + must_getenv_cli() + " " + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    CliResult res;
    char buf[4096];
    while (size_t n = fread(buf, 1, sizeof buf, pipe)) res.output.append(buf, n);
    int status = pclose(pipe);
    res.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return res;
}

std::string make_temp_dir() {
    char tmpl[] = "/tmp/penflow_cli_XXXXXX";
    char* dir = mkdtemp(tmpl);
    REQUIRE(dir != nullptr);
    return dir;
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    REQUIRE(out.good());
    out << text;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

bool file_exists(const std::string& path) { return std::ifstream(path).good(); }

std::string basic_config(const std::string& dir, double t_end = 50.0, long N = 200) {
    Json j;
    j["problem"] = {{"builtin", "P1"}};
    j["schedule"] = {{"lambda", {{"c", 1.0}, {"p", 1.0}}}, {"beta", {{"c", 1.0}, {"q", 1.0}}}};
    j["integrator"] = {{"method", "rk4"}, {"t_end", t_end}, {"h_max", 0.05}};
    j["outputs"] = {{"trajectory_csv", dir + "/trajectory.csv"},
                    {"report_json", dir + "/report.json"}};
    j["discrete"] = {{"N", N}};
    return j.dump(2) + "\n";
}

}  // namespace

TEST_CASE("parse -> serialize -> parse is the identity") {
    std::string text = R"({
      "problem": {"random": {"seed": 9, "dim": 3, "gamma": 0.5}},
      "schedule": {"lambda": {"c": 2.0, "p": 0.75}, "beta": {"c": 1.5, "q": 0.5}},
      "integrator": {"method": "euler", "t_end": 12.0, "h_max": 0.01,
                     "safety": 0.5, "record_every": 3},
      "x0": [1.0, -2.0, 0.25],
      "outputs": {"trajectory_csv": "a.csv", "report_json": "b.json"},
      "discrete": {"N": 40, "use_h1": false}
    })";
    RunConfig a = parse_config(text);
    std::string round = serialize_config(a);
    RunConfig b = parse_config(round);
    CHECK(to_json(a) == to_json(b));
    CHECK(serialize_config(b) == round);
    CHECK(round.back() == '\n');

    CHECK(a.schedule.c_lambda == 2.0);
    CHECK(a.integrator.method == IntegrateOptions::Method::euler);
    CHECK(a.integrator.record_every == 3);
    REQUIRE(a.x0.has_value());
    CHECK((*a.x0)[1] == -2.0);
    CHECK(a.discrete_N == 40);
    CHECK(a.discrete_use_h1 == false);
}

TEST_CASE("minimal config fills documented defaults") {
    RunConfig cfg = parse_config(R"({
        "problem": {"builtin": "P2"},
        "schedule": {"lambda": {"c": 1.0, "p": 1.0}, "beta": {"c": 1.0, "q": 1.0}}
    })");
    CHECK(cfg.schedule.c_lambda == 1.0);
    CHECK(cfg.schedule.q == 1.0);
    CHECK(cfg.integrator.method == IntegrateOptions::Method::rk4);
    CHECK(cfg.integrator.t_end == 100.0);
    CHECK(cfg.integrator.h_max == 0.05);
    CHECK(cfg.integrator.safety == 0.25);
    CHECK(cfg.integrator.record_every == 1);
    CHECK(!cfg.x0.has_value());
    CHECK(cfg.trajectory_csv == "trajectory.csv");
    CHECK(cfg.report_json == "report.json");
    CHECK(!cfg.discrete_N.has_value());
    Json j = to_json(cfg);
    CHECK(j["x0"] == "zeros");
}

TEST_CASE("config errors carry the offending field path") {
    auto message_of = [](const std::string& text) -> std::string {
        try {
            parse_config(text);
        } catch (const ConfigError& e) {
            return e.what();
        }
        return "";
    };
    const std::string sched =
        R"("schedule": {"lambda": {"c": 1.0, "p": 1.0}, "beta": {"c": 1.0, "q": 1.0}})";
    auto with = [&](const std::string& extra) {
        return R"({"problem": {"builtin": "P1"}, )" + sched + extra + "}";
    };
    CHECK(message_of("{nope").find("config parse error") != std::string::npos);
    CHECK(message_of(R"({"problem": {"builtin": "P1"}})").find("schedule") !=
          std::string::npos);  // schedule is required
    CHECK(message_of(R"({"problem": {"builtin": "P1"},
                        "schedule": {"lambda": {"c": "one", "p": 1.0},
                                     "beta": {"c": 1.0, "q": 1.0}}})")
              .find("schedule.lambda.c") != std::string::npos);
    CHECK(message_of(R"({"problem": {"builtin": "P1"},
                        "schedule": {"lambda": {"c": -1.0, "p": 1.0},
                                     "beta": {"c": 1.0, "q": 1.0}}})")
              .find("config error at schedule") != std::string::npos);
    CHECK(message_of(with(R"(, "bogus": 1)")).find("bogus") != std::string::npos);
    CHECK(message_of(with(R"(, "integrator": {"method": "verlet"})"))
              .find("integrator.method") != std::string::npos);
    CHECK(message_of(with(R"(, "x0": 5)")).find("x0") != std::string::npos);
    CHECK(message_of(R"({"problem": {"builtin": "P1", "random": {"seed": 1, "dim": 2}}, )" +
                     sched + "}")
              .find("exactly one") != std::string::npos);
    CHECK(message_of(with(R"(, "discrete": {"N": 0})")).find("discrete.N") !=
          std::string::npos);
}

TEST_CASE("set descriptors survive a JSON round trip") {
    std::vector<ConvexSet> sets;
    sets.emplace_back(Box{(Vec(2) << -1.0, 0.0).finished(), (Vec(2) << 2.0, 3.0).finished()});
    sets.emplace_back(Ball{(Vec(2) << 1.0, 1.0).finished(), 2.5});
    sets.emplace_back(AffineSubspace{(Vec(2) << 1.0, 0.0).finished(),
                                     (Mat(2, 1) << 0.0, 1.0).finished()});
    sets.emplace_back(Halfspace{(Vec(2) << 3.0, 4.0).finished(), 10.0});
    sets.emplace_back(Singleton{(Vec(2) << 0.5, -0.5).finished()});

    std::mt19937_64 rng(77);
    std::normal_distribution<double> gauss(0.0, 3.0);
    for (const ConvexSet& C : sets) {
        CAPTURE(C.kind());
        ConvexSet back = set_from_json(set_to_json(C), "set");
        CHECK(std::string(back.kind()) == C.kind());
        for (int i = 0; i < 20; ++i) {
            Vec x = (Vec(2) << gauss(rng), gauss(rng)).finished();
            CHECK((project(back, x) - project(C, x)).norm() == 0.0);
        }
    }
    CHECK_THROWS_AS(set_from_json(Json{{"cube", Json::object()}}, "set"), ConfigError);
}

TEST_CASE("instance descriptors survive a JSON round trip") {
    for (const char* id : {"P1", "P3"}) {
        CAPTURE(id);
        ProblemInstance pr = builtin(id).instance;
        ProblemInstance back = instance_from_json(instance_to_json(pr), "problem.inline");
        CHECK(std::string(back.A.kind()) == pr.A.kind());
        CHECK(back.A.gamma() == pr.A.gamma());
        CHECK(back.D.eta() == pr.D.eta());
        CHECK(back.B.mu() == pr.B.mu());
        std::mt19937_64 rng(3);
        std::normal_distribution<double> gauss(0.0, 2.0);
        for (int i = 0; i < 10; ++i) {
            Vec x(pr.dim());
            for (Eigen::Index k = 0; k < x.size(); ++k) x[k] = gauss(rng);
            CHECK((forward_backward_map(back, 0.7, 2.0, x) -
                   forward_backward_map(pr, 0.7, 2.0, x))
                      .norm() == 0.0);
        }
    }
}

TEST_CASE("materialize_problem dispatches on the source key") {
    MaterializedProblem b = materialize_problem(Json{{"builtin", "P2"}});
    CHECK(b.id == "P2_monotone_line");
    REQUIRE(b.solution.has_value());
    CHECK(std::holds_alternative<ConvexSet>(*b.solution));
    CHECK(b.certificate.has_value());

    MaterializedProblem r =
        materialize_problem(Json{{"random", Json{{"seed", 3}, {"dim", 4}}}});
    CHECK(r.id == "random_s3_d4");
    REQUIRE(r.certificate.has_value());
    CHECK(r.certificate->z.size() == 4);

    MaterializedProblem i =
        materialize_problem(Json{{"inline", instance_to_json(builtin("P3").instance)}});
    CHECK(i.id == "inline");
    CHECK(!i.solution.has_value());
    CHECK(!i.certificate.has_value());

    CHECK_THROWS_AS(materialize_problem(Json::object()), ConfigError);
}

TEST_CASE("json_number maps non-finite values to strings") {
    CHECK(json_number(1.5) == Json(1.5));
    CHECK(json_number(std::numeric_limits<double>::infinity()) == Json("+inf"));
    CHECK(json_number(-std::numeric_limits<double>::infinity()) == Json("-inf"));
    CHECK(json_number(std::numeric_limits<double>::quiet_NaN()) == Json("nan"));
}

TEST_CASE("report fragments expose the documented keys") {
    HypothesisReport hr = classify(canonical_schedule(), 1.0);
    Json hj = hypothesis_json(hr);
    CHECK(hj["h3"] == true);
    CHECK(hj["product_limsup"] == Json(1.0));
    CHECK(hj["hfitz_distsq"] == "yes");
    CHECK(hj["numeric_cross_checks"].is_array());

    HypothesisReport unb = classify(Schedule{1.0, 1.0, 1.0, 2.0}, 1.0);
    CHECK(hypothesis_json(unb)["product_limsup"] == Json("+inf"));
}

// ---- CLI subprocess tests ---------------------------------------------------

TEST_CASE("cli run and check succeed on a well-posed config") {
    std::string dir = make_temp_dir();
    std::string cfg = dir + "/config.json";
    write_file(cfg, basic_config(dir));

    CHECK(run_cli("check -c " + cfg).exit_code == 0);

    CliResult run = run_cli("run -c " + cfg);
    CHECK(run.exit_code == 0);
    REQUIRE(file_exists(dir + "/report.json"));
    REQUIRE(file_exists(dir + "/trajectory.csv"));

    Json report = Json::parse(read_file(dir + "/report.json"));
    CHECK(report["run"]["status"] == "ok");
    CHECK(report["hypotheses"]["h3"] == true);
    CHECK(report["lemma_checks"]["fej1"]["violation_fraction"] == Json(0.0));
    CHECK(report["convergence"].contains("ergodic_dist_to_solution"));
    CHECK(report["hypothesis_failures"].empty());

    std::string head = read_file(dir + "/trajectory.csv").substr(0, 2);
    CHECK(head == "t,");
}

TEST_CASE("cli reruns are byte-identical") {
    std::string d1 = make_temp_dir();
    std::string d2 = make_temp_dir();
    write_file(d1 + "/config.json", basic_config(d1, 20.0));
    write_file(d2 + "/config.json", basic_config(d2, 20.0));
    REQUIRE(run_cli("run -c " + d1 + "/config.json").exit_code == 0);
    REQUIRE(run_cli("run -c " + d2 + "/config.json").exit_code == 0);
    CHECK(read_file(d1 + "/trajectory.csv") == read_file(d2 + "/trajectory.csv"));
    // reports embed no paths, only problem/schedule/results
    CHECK(read_file(d1 + "/report.json") == read_file(d2 + "/report.json"));
}

TEST_CASE("cli check exit codes distinguish violation from unverified") {
    std::string dir = make_temp_dir();

    // p = 0.4: lambda is not square integrable
    Json bad = Json::parse(basic_config(dir));
    bad["schedule"]["lambda"]["p"] = 0.4;
    write_file(dir + "/bad.json", bad.dump());
    CliResult r2 = run_cli("check -c " + dir + "/bad.json");
    CHECK(r2.exit_code == 2);
    CHECK(r2.output.find("H3 violated") != std::string::npos);

    // linear_psd penalty: no closed-form Fitzpatrick bound
    Json psd = Json::parse(basic_config(dir));
    Mat M(2, 2);
    M << 1.0, 0.0, 0.0, 0.0;
    Json inst = instance_to_json(ProblemInstance(MaxMonotone(ZeroOp{2}),
                                                 Cocoercive(ZeroForward{2}, 1.0),
                                                 make_linear_psd_penalty(M)));
    psd["problem"] = Json{{"inline", inst}};
    write_file(dir + "/psd.json", psd.dump());
    CliResult r3 = run_cli("check -c " + dir + "/psd.json");
    CHECK(r3.exit_code == 3);
    CHECK(r3.output.find("H_fitz unverified") != std::string::npos);
}

TEST_CASE("cli compare-discrete agrees with unit-step Euler and flags perturbations") {
    std::string dir = make_temp_dir();
    std::string cfg = dir + "/config.json";
    write_file(cfg, basic_config(dir));

    CliResult ok = run_cli("compare-discrete -c " + cfg);
    CHECK(ok.exit_code == 0);
    CHECK(ok.output.find("max per-coordinate discrepancy: 0") != std::string::npos);
    CHECK(ok.output.find("PASS") != std::string::npos);

    CliResult bad = run_cli("compare-discrete --perturb-lambda -c " + cfg);
    CHECK(bad.exit_code == 2);
    CHECK(bad.output.find("FAIL") != std::string::npos);

    Json no_discrete = Json::parse(basic_config(dir));
    no_discrete.erase("discrete");
    write_file(dir + "/nd.json", no_discrete.dump());
    CHECK(run_cli("compare-discrete -c " + dir + "/nd.json").exit_code == 1);
}

TEST_CASE("cli diagnose recomputes a report from a stored trajectory") {
    std::string dir = make_temp_dir();
    std::string cfg = dir + "/config.json";
    write_file(cfg, basic_config(dir));
    REQUIRE(run_cli("run -c " + cfg).exit_code == 0);

    CliResult diag = run_cli("diagnose -c " + cfg + " -t " + dir + "/trajectory.csv");
    CHECK(diag.exit_code == 0);
    Json report = Json::parse(read_file(dir + "/report.json"));
    CHECK(report["trajectory"]["source"] == dir + "/trajectory.csv");
    CHECK(report["lemma_checks"]["fej1"]["violation_fraction"] == Json(0.0));
}

TEST_CASE("PENFLOW_OUT_DIR redirects relative outputs") {
    std::string dir = make_temp_dir();
    std::string out = make_temp_dir();
    Json j = Json::parse(basic_config(dir, 20.0));
    j["outputs"] = {{"trajectory_csv", "t.csv"}, {"report_json", "r.json"}};
    write_file(dir + "/config.json", j.dump());
    CliResult r = run_cli("run -c " + dir + "/config.json", "PENFLOW_OUT_DIR=" + out);
    CHECK(r.exit_code == 0);
    CHECK(file_exists(out + "/t.csv"));
    CHECK(file_exists(out + "/r.json"));
}

TEST_CASE("cli reports config errors with the field path and exits 1") {
    std::string dir = make_temp_dir();
    write_file(dir + "/broken.json",
               R"({"problem": {"builtin": "P1"},
                   "schedule": {"lambda": {"c": 1.0, "p": 1.0}, "beta": {"c": 1.0, "q": 1.0}},
                   "integrator": {"t_end": -5.0}})");
    CliResult r = run_cli("run -c " + dir + "/broken.json");
    CHECK(r.exit_code == 1);
    CHECK(r.output.find("integrator.t_end") != std::string::npos);

    CliResult missing = run_cli("run -c " + dir + "/does_not_exist.json");
    CHECK(missing.exit_code == 1);
}
