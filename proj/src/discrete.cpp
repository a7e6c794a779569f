#include "penflow/discrete.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

namespace penflow {

double sample_lambda(const Schedule& s, long n) {
    if (n < 0) throw std::invalid_argument("sample_lambda: n must be >= 0");
    return eval_lambda(s, static_cast<double>(n));
}

double sample_beta(const Schedule& s, long n) {
    if (n < 0) throw std::invalid_argument("sample_beta: n must be >= 0");
    return eval_beta(s, static_cast<double>(n));
}

DiscreteRun run_discrete(const ProblemInstance& pr, const Schedule& s, Vec x0,
                         const DiscreteOptions& opts) {
    validate(s);
    require_dim(x0, pr.dim(), "run_discrete: x0");
    require_finite(x0, "run_discrete: x0");
    if (opts.N < 1) throw std::invalid_argument("run_discrete: N must be >= 1");
    const std::size_t N = static_cast<std::size_t>(opts.N);
    if (!opts.use_h1) {
        if (opts.h_seq.size() != N)
            throw std::invalid_argument("run_discrete: h_seq must hold N entries");
        for (double h : opts.h_seq)
            if (!(h > 0.0 && h <= 1.0))
                throw std::invalid_argument("run_discrete: h_seq entries must lie in (0, 1]");
    }

    DiscreteRun run;
    run.iterates.reserve(N + 1);
    run.lambda_seq.reserve(N + 1);
    run.beta_seq.reserve(N + 1);
    run.h_seq.reserve(N);
    run.residuals.reserve(N);

    Vec x = std::move(x0);
    run.iterates.push_back(x);
    for (std::size_t n = 0; n < N; ++n) {
        const double tn = static_cast<double>(n);
        RhsEval e;
        if (opts.perturb_lambda_off_by_one) {
            e.lambda = eval_lambda(s, tn + 1.0);
            e.beta = eval_beta(s, tn);
            e.bx = eval(pr.B, x);
            Vec dx = eval(pr.D, x);
            Vec arg = x - e.lambda * dx - (e.lambda * e.beta) * e.bx;
            e.f = resolvent(pr.A, e.lambda, arg) - x;
        } else {
            e = rhs_eval(pr, s, tn, x);
        }
        if (!e.f.allFinite()) throw std::runtime_error("run_discrete: nonfinite step");
        const double h = opts.use_h1 ? 1.0 : opts.h_seq[n];
        Vec x_next = x + h * e.f;

        run.lambda_seq.push_back(e.lambda);
        run.beta_seq.push_back(e.beta);
        run.h_seq.push_back(h);
        run.residuals.push_back((x_next - x).norm() / h);
        x = std::move(x_next);
        run.iterates.push_back(x);
    }
    run.lambda_seq.push_back(sample_lambda(s, opts.N));
    run.beta_seq.push_back(sample_beta(s, opts.N));
    return run;
}

CompareReport compare_euler_discrete(const ProblemInstance& pr, const Schedule& s, const Vec& x0,
                                     long N, bool perturb_lambda_off_by_one) {
    if (N < 1) throw std::invalid_argument("compare_euler_discrete: N must be >= 1");

    IntegrateOptions iopts;
    iopts.method = IntegrateOptions::Method::euler;
    iopts.t_end = static_cast<double>(N);
    iopts.record_every = 1;
    iopts.force_unit_step = true;
    Trajectory tr = integrate(pr, s, x0, iopts);
    if (tr.status != Trajectory::Status::ok)
        throw std::runtime_error("compare_euler_discrete: integration left the finite range");

    DiscreteOptions dopts;
    dopts.N = N;
    dopts.perturb_lambda_off_by_one = perturb_lambda_off_by_one;
    DiscreteRun run = run_discrete(pr, s, x0, dopts);

    CompareReport rep;
    rep.N = N;
    if (tr.states.size() != run.iterates.size())
        throw std::runtime_error("compare_euler_discrete: node counts disagree");
    for (std::size_t k = 0; k < tr.states.size(); ++k) {
        double d = (tr.states[k] - run.iterates[k]).cwiseAbs().maxCoeff();
        rep.max_coord_discrepancy = std::max(rep.max_coord_discrepancy, d);
    }
    rep.pass = rep.max_coord_discrepancy <= 1e-15 * static_cast<double>(N);
    return rep;
}

namespace {

void put17(std::ostream& out, double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << buf;
}

}  // namespace

void write_discrete_csv(const DiscreteRun& run, std::ostream& out) {
    if (run.iterates.empty()) throw std::invalid_argument("write_discrete_csv: empty run");
    const Eigen::Index dim = run.iterates.front().size();
    out << "n";
    for (Eigen::Index i = 0; i < dim; ++i) out << ",x_" << i;
    out << ",residual,lambda_n,beta_n\n";
    const std::size_t N = run.residuals.size();
    for (std::size_t n = 0; n < run.iterates.size(); ++n) {
        out << n;
        for (Eigen::Index i = 0; i < dim; ++i) {
            out << ',';
            put17(out, run.iterates[n][i]);
        }
        out << ',';
        put17(out, run.residuals[std::min(n, N - 1)]);
        out << ',';
        put17(out, run.lambda_seq[n]);
        out << ',';
        put17(out, run.beta_seq[n]);
        out << '\n';
    }
}

}  // namespace penflow
