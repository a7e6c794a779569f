// Configuration-driven front end: integrate the penalty dynamics, check the
// schedule hypotheses, compare the unit-step discrete scheme against Euler,
// or re-analyze a stored trajectory.
//
// Exit codes: 0 ok, 1 hard error, 2 hypothesis/check failure, 3 hypothesis
// unverifiable for the given penalty class (check only).

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "penflow/config.hpp"
#include "penflow/diagnostics.hpp"
#include "penflow/discrete.hpp"
#include "penflow/problems.hpp"

namespace pf = penflow;

namespace {

// Relative output paths land in $PENFLOW_OUT_DIR when set.
std::string out_path(const std::string& p) {
    if (p.empty() || p.front() == '/') return p;
    const char* dir = std::getenv("PENFLOW_OUT_DIR");
    if (!dir || !*dir) return p;
    std::string d(dir);
    if (d.back() != '/') d += '/';
    return d + p;
}

struct Loaded {
    pf::RunConfig cfg;
    pf::MaterializedProblem prob;
    bool distsq_penalty;
};

Loaded load(const std::string& config_path) {
    pf::RunConfig cfg = pf::parse_config_file(config_path);
    pf::MaterializedProblem prob = pf::materialize_problem(cfg.problem);
    bool distsq = std::holds_alternative<pf::DistSqGradient>(prob.instance.B.desc());
    return Loaded{std::move(cfg), std::move(prob), distsq};
}

std::vector<std::string> hypothesis_failures(const pf::HypothesisReport& h) {
    std::vector<std::string> m;
    if (!h.h3_l2) m.push_back("H3 violated: lambda not in L^2");
    if (!h.h3_not_l1) m.push_back("H3 violated: lambda is summable, int lambda < infinity");
    if (!h.product_ok) m.push_back("product condition violated: limsup lambda*beta >= 2*mu");
    if (h.hfitz_distsq == pf::TriState::no)
        m.push_back("H_fitz violated: int lambda/beta diverges for the dist_sq penalty");
    if (!h.numeric_consistent)
        m.push_back("numeric quadrature contradicts an analytic verdict");
    return m;
}

pf::Json schedule_json(const pf::Schedule& s) {
    return pf::Json{{"lambda", pf::Json{{"c", s.c_lambda}, {"p", s.p}}},
                    {"beta", pf::Json{{"c", s.c_beta}, {"q", s.q}}}};
}

pf::Vec start_point(const Loaded& L) {
    pf::Vec x0 = L.cfg.x0 ? *L.cfg.x0 : pf::Vec(pf::Vec::Zero(L.prob.instance.dim()));
    if (x0.size() != L.prob.instance.dim())
        throw pf::ConfigError("config error at x0: dimension " + std::to_string(x0.size()) +
                              " does not match problem dimension " +
                              std::to_string(L.prob.instance.dim()));
    return x0;
}

// Inline problems carry no certificate; try to manufacture one with the
// iterative oracle. Returns an explanation when that is not possible.
std::string ensure_certificate(Loaded& L) {
    if (L.prob.certificate) return {};
    try {
        pf::Vec z = pf::oracle_solve(L.prob.instance, 1e-10);
        L.prob.certificate = pf::build_certificate(L.prob.instance, z);
        pf::validate_graph_point(*L.prob.certificate, L.prob.instance.A, L.prob.instance.D,
                                 L.prob.instance.constraint());
        if (!L.prob.solution) L.prob.solution = z;
    } catch (const std::exception& e) {
        L.prob.certificate.reset();
        return e.what();
    }
    return {};
}

pf::Json lemma_section(const Loaded& L, const pf::Trajectory& tr, const std::string& cert_note) {
    pf::Json lem;
    if (!L.prob.certificate) {
        lem["skipped"] = "no solution certificate available: " + cert_note;
        return lem;
    }
    const pf::GraphPoint& gp = *L.prob.certificate;
    const pf::ProblemInstance& pr = L.prob.instance;
    if (!L.distsq_penalty) {
        lem["skipped"] = "gap bound only available for the dist_sq penalty";
        return lem;
    }
    lem["fej1"] = pf::lyapunov_json(pf::check_lemma_fej1(tr, gp, pr));
    try {
        pf::LemmaConstants cons = pf::choose_lemma_constants(L.cfg.schedule, pr.B.mu());
        double t1 = pf::t1_threshold(L.cfg.schedule, pr.D.eta(), cons.b, cons.t0);
        if (t1 <= tr.times.back())
            lem["fej4"] = pf::lyapunov_json(pf::check_lemma_fej4(tr, gp, pr, cons, t1));
        else
            lem["fej4"] = pf::Json{{"skipped", "t1 threshold exceeds the trajectory horizon"}};
    } catch (const std::invalid_argument& e) {
        lem["fej4"] = pf::Json{{"skipped", e.what()}};
    }
    return lem;
}

pf::Json convergence_section(const Loaded& L, const pf::Trajectory& tr) {
    if (!L.prob.solution) return pf::Json{{"skipped", "no reference solution available"}};
    try {
        return pf::convergence_json(pf::convergence_report(tr, *L.prob.solution, L.cfg.schedule));
    } catch (const std::invalid_argument& e) {
        return pf::Json{{"skipped", e.what()}};
    }
}

void write_report(const pf::Json& report, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out << report.dump(2) << "\n";
    if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

int finish(const pf::Json& report, const std::string& report_path,
           const std::vector<std::string>& fails) {
    write_report(report, report_path);
    std::cout << "wrote " << report_path << "\n";
    for (const std::string& m : fails) std::cout << m << "\n";
    return fails.empty() ? 0 : 2;
}

int cmd_run(const std::string& config_path) {
    Loaded L = load(config_path);
    const pf::ProblemInstance& pr = L.prob.instance;
    pf::HypothesisReport hyp = pf::classify(L.cfg.schedule, pr.B.mu(), L.distsq_penalty);
    pf::Vec x0 = start_point(L);
    std::string cert_note = ensure_certificate(L);

    pf::IntegrateOptions opts = L.cfg.integrator;
    if (L.prob.certificate) opts.reference = &*L.prob.certificate;
    pf::Trajectory tr = pf::integrate(pr, L.cfg.schedule, std::move(x0), opts);

    const std::string csv_path = out_path(L.cfg.trajectory_csv);
    {
        std::ofstream out(csv_path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot open '" + csv_path + "' for writing");
        pf::write_trajectory_csv(tr, out);
    }
    std::cout << "wrote " << csv_path << " (" << tr.nodes() << " nodes)\n";

    const bool finite = tr.status == pf::Trajectory::Status::ok;
    pf::Json report;
    report["problem"] = L.prob.id;
    report["schedule"] = schedule_json(L.cfg.schedule);
    report["hypotheses"] = pf::hypothesis_json(hyp);
    report["run"] = pf::Json{{"status", finite ? "ok" : "nonfinite"},
                             {"t_end", opts.t_end},
                             {"last_valid_time", pf::json_number(tr.last_valid_time)},
                             {"nodes", tr.nodes()},
                             {"total_steps", tr.total_steps},
                             {"method", opts.method == pf::IntegrateOptions::Method::euler
                                            ? "euler"
                                            : "rk4"}};
    report["lemma_checks"] =
        finite ? lemma_section(L, tr, cert_note)
               : pf::Json{{"skipped", "trajectory left the finite range"}};
    report["convergence"] = finite ? convergence_section(L, tr)
                                   : pf::Json{{"skipped", "trajectory left the finite range"}};
    std::vector<std::string> fails = hypothesis_failures(hyp);
    report["hypothesis_failures"] = fails;

    int code = finish(report, out_path(L.cfg.report_json), fails);
    if (!finite) {
        std::cerr << "error: state became non-finite near t = " << tr.last_valid_time << "\n";
        return 1;
    }
    return code;
}

int cmd_check(const std::string& config_path) {
    Loaded L = load(config_path);
    pf::HypothesisReport hyp =
        pf::classify(L.cfg.schedule, L.prob.instance.B.mu(), L.distsq_penalty);
    std::cout << pf::hypothesis_json(hyp).dump(2) << "\n";
    std::vector<std::string> fails = hypothesis_failures(hyp);
    for (const std::string& m : fails) std::cout << m << "\n";
    if (!fails.empty()) return 2;
    if (hyp.hfitz_distsq == pf::TriState::unverified) {
        std::cout << "H_fitz unverified: no closed-form gap bound for this penalty class\n";
        return 3;
    }
    return 0;
}

int cmd_compare_discrete(const std::string& config_path, bool perturb) {
    Loaded L = load(config_path);
    if (!L.cfg.discrete_N) {
        std::cerr << "usage error: compare-discrete needs a 'discrete' section with N >= 1\n";
        return 1;
    }
    if (!L.cfg.discrete_use_h1) {
        std::cerr << "usage error: compare-discrete is defined for unit steps"
                     " (discrete.use_h1 = true)\n";
        return 1;
    }
    pf::Vec x0 = start_point(L);
    pf::CompareReport rep =
        pf::compare_euler_discrete(L.prob.instance, L.cfg.schedule, x0, *L.cfg.discrete_N, perturb);
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", rep.max_coord_discrepancy);
    std::cout << "N: " << rep.N << "\n"
              << "max per-coordinate discrepancy: " << buf << "\n"
              << "threshold: " << 1e-15 * static_cast<double>(rep.N) << "\n"
              << (rep.pass ? "PASS" : "FAIL") << "\n";
    return rep.pass ? 0 : 2;
}

int cmd_diagnose(const std::string& config_path, std::string trajectory) {
    Loaded L = load(config_path);
    const pf::ProblemInstance& pr = L.prob.instance;
    if (trajectory.empty()) trajectory = L.cfg.trajectory_csv;
    trajectory = out_path(trajectory);
    std::ifstream in(trajectory, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open trajectory '" + trajectory + "'");
    pf::Trajectory tr = pf::read_trajectory_csv(in, pr, L.cfg.schedule);

    pf::HypothesisReport hyp = pf::classify(L.cfg.schedule, pr.B.mu(), L.distsq_penalty);
    std::string cert_note = ensure_certificate(L);
    pf::recompute_node_integrals(tr, pr, L.cfg.schedule,
                                 L.prob.certificate ? &*L.prob.certificate : nullptr);

    pf::Json report;
    report["problem"] = L.prob.id;
    report["schedule"] = schedule_json(L.cfg.schedule);
    report["hypotheses"] = pf::hypothesis_json(hyp);
    report["trajectory"] = pf::Json{{"source", trajectory},
                                    {"nodes", tr.nodes()},
                                    {"t_end", pf::json_number(tr.times.back())}};
    report["lemma_checks"] = lemma_section(L, tr, cert_note);
    report["convergence"] = convergence_section(L, tr);
    std::vector<std::string> fails = hypothesis_failures(hyp);
    report["hypothesis_failures"] = fails;
    return finish(report, out_path(L.cfg.report_json), fails);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"penalty-term dynamics: integration, hypothesis checks, diagnostics"};
    app.require_subcommand(1);
    std::string config_path, trajectory;
    bool perturb = false;

    CLI::App* run = app.add_subcommand("run", "integrate the dynamics, write CSV + JSON report");
    run->add_option("-c,--config", config_path, "config file (JSON)")->required();

    CLI::App* check = app.add_subcommand("check", "evaluate schedule hypotheses, print JSON");
    check->add_option("-c,--config", config_path, "config file (JSON)")->required();

    CLI::App* cmp = app.add_subcommand(
        "compare-discrete", "run the discrete scheme against unit-step Euler, print discrepancy");
    cmp->add_option("-c,--config", config_path, "config file (JSON)")->required();
    cmp->add_flag("--perturb-lambda", perturb,
                  "sample lambda at n+1 instead of n (deliberate mismatch, test mode)");

    CLI::App* diag =
        app.add_subcommand("diagnose", "re-analyze an existing trajectory CSV, write JSON report");
    diag->add_option("-c,--config", config_path, "config file (JSON)")->required();
    diag->add_option("-t,--trajectory", trajectory,
                     "trajectory CSV (default: the config's outputs.trajectory_csv)");

    CLI11_PARSE(app, argc, argv);
    try {
        if (run->parsed()) return cmd_run(config_path);
        if (check->parsed()) return cmd_check(config_path);
        if (cmp->parsed()) return cmd_compare_discrete(config_path, perturb);
        return cmd_diagnose(config_path, trajectory);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
