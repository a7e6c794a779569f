#include "penflow/dynamics.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace penflow {

ProblemInstance::ProblemInstance(MaxMonotone a, Cocoercive d, Penalty b)
    : A(std::move(a)), D(std::move(d)), B(std::move(b)) {
    if (A.dim() != D.dim() || A.dim() != B.dim())
        throw std::invalid_argument("ProblemInstance: operator dimensions disagree");
}

Vec forward_backward_map(const ProblemInstance& pr, double lambda, double beta, const Vec& x) {
    Vec dx = eval(pr.D, x);
    Vec bx = eval(pr.B, x);
    Vec arg = x - lambda * dx - (lambda * beta) * bx;
    return resolvent(pr.A, lambda, arg);
}

RhsEval rhs_eval(const ProblemInstance& pr, const Schedule& s, double t, const Vec& x) {
    RhsEval e;
    e.lambda = eval_lambda(s, t);
    e.beta = eval_beta(s, t);
    e.bx = eval(pr.B, x);
    Vec dx = eval(pr.D, x);
    Vec arg = x - e.lambda * dx - (e.lambda * e.beta) * e.bx;
    // lambda*beta*Bx can overflow for violent schedules even when x is finite;
    // poison f with NaN so integrate() can report a nonfinite status.
    if (!arg.allFinite()) {
        e.f = Vec::Constant(x.size(), std::numeric_limits<double>::quiet_NaN());
        return e;
    }
    e.f = resolvent(pr.A, e.lambda, arg) - x;
    return e;
}

Vec rhs(const ProblemInstance& pr, const Schedule& s, double t, const Vec& x) {
    return rhs_eval(pr, s, t, x).f;
}

double lipschitz_bound(const ProblemInstance& pr, const Schedule& s, double t) {
    double lam = eval_lambda(s, t);
    double bet = eval_beta(s, t);
    return 2.0 + lam / pr.D.eta() + lam * bet / pr.B.mu();
}

namespace {

struct StepSample {
    double lambda_v, rhs_sq, lb_bx_sq, lb_inner;
    Vec lambda_x;
};

StepSample sample_of(const RhsEval& e, const Vec& x, const GraphPoint* ref) {
    StepSample g;
    g.lambda_v = e.lambda;
    g.lambda_x = e.lambda * x;
    g.rhs_sq = e.f.squaredNorm();
    double lb = e.lambda * e.beta;
    g.lb_bx_sq = lb * e.bx.squaredNorm();
    g.lb_inner = ref ? lb * e.bx.dot(x - ref->z) : 0.0;
    return g;
}

constexpr std::size_t kNodeCap = std::size_t(1) << 20;

}  // namespace

Trajectory integrate(const ProblemInstance& pr, const Schedule& s, Vec x0,
                     const IntegrateOptions& opts) {
    validate(s);
    require_dim(x0, pr.dim(), "integrate: x0");
    require_finite(x0, "integrate: x0");
    if (!(opts.t_end > 0.0) || !std::isfinite(opts.t_end))
        throw std::invalid_argument("integrate: t_end must be finite and > 0");
    if (!(opts.h_max > 0.0)) throw std::invalid_argument("integrate: h_max must be > 0");
    if (!(opts.safety > 0.0 && opts.safety <= 1.0))
        throw std::invalid_argument("integrate: safety must be in (0, 1]");
    const long stride0 = opts.record_every > 0 ? opts.record_every : 1;

    Trajectory tr;
    tr.has_reference = opts.reference != nullptr;
    if (tr.has_reference) tr.reference_z = opts.reference->z;

    // running accumulators, updated every accepted step
    double acc_lambda = 0.0, acc_rhs_sq = 0.0, acc_bx_sq = 0.0, acc_inner = 0.0;
    Vec acc_lambda_x = Vec::Zero(x0.size());

    long stride = stride0;
    auto record = [&](double t, const Vec& x, const RhsEval& e) {
        tr.times.push_back(t);
        tr.states.push_back(x);
        tr.derivs.push_back(e.f);
        tr.lambda_samples.push_back(e.lambda);
        tr.beta_samples.push_back(e.beta);
        tr.bx_norms.push_back(e.bx.norm());
        tr.int_lambda.push_back(acc_lambda);
        tr.int_lambda_x.push_back(acc_lambda_x);
        tr.int_rhs_sq.push_back(acc_rhs_sq);
        tr.int_lb_bx_sq.push_back(acc_bx_sq);
        if (tr.has_reference) tr.int_lb_inner.push_back(acc_inner);
        if (tr.times.size() >= kNodeCap) {  // thin: keep even positions, double the stride
            auto thin = [](auto& v) {
                for (std::size_t i = 2, j = 1; i < v.size(); i += 2, ++j) v[j] = std::move(v[i]);
                v.resize((v.size() + 1) / 2);
            };
            thin(tr.times);
            thin(tr.states);
            thin(tr.derivs);
            thin(tr.lambda_samples);
            thin(tr.beta_samples);
            thin(tr.bx_norms);
            thin(tr.int_lambda);
            thin(tr.int_lambda_x);
            thin(tr.int_rhs_sq);
            thin(tr.int_lb_bx_sq);
            if (tr.has_reference) thin(tr.int_lb_inner);
            stride *= 2;
        }
    };

    double t = 0.0;
    Vec x = std::move(x0);
    RhsEval cur = rhs_eval(pr, s, t, x);
    record(t, x, cur);
    StepSample g0 = sample_of(cur, x, opts.reference);
    tr.last_valid_time = t;

    long step_index = 0;
    const double t_eps = 1e-12 * (1.0 + opts.t_end);
    while (t < opts.t_end - t_eps) {
        double h;
        if (opts.force_unit_step) {
            h = 1.0;
        } else {
            h = std::min(opts.h_max, opts.safety / lipschitz_bound(pr, s, t));
            if (t + h > opts.t_end) h = opts.t_end - t;
        }

        Vec x_next;
        if (opts.method == IntegrateOptions::Method::euler) {
            x_next = x + h * cur.f;
        } else {
            // stage points can saturate to inf on blow-up; poison instead of
            // feeding a nonfinite state into the operators
            auto stage_rhs = [&](double ts, const Vec& xs) {
                return xs.allFinite()
                           ? rhs(pr, s, ts, xs)
                           : Vec(Vec::Constant(x.size(),
                                               std::numeric_limits<double>::quiet_NaN()));
            };
            Vec k2 = stage_rhs(t + 0.5 * h, x + (0.5 * h) * cur.f);
            Vec k3 = stage_rhs(t + 0.5 * h, x + (0.5 * h) * k2);
            Vec k4 = stage_rhs(t + h, x + h * k3);
            x_next = x + (h / 6.0) * (cur.f + 2.0 * k2 + 2.0 * k3 + k4);
        }
        double t_next = t + h;
        if (!x_next.allFinite()) {
            tr.status = Trajectory::Status::nonfinite;
            break;
        }
        RhsEval next = rhs_eval(pr, s, t_next, x_next);
        if (!next.f.allFinite()) {
            tr.status = Trajectory::Status::nonfinite;
            break;
        }
        StepSample g1 = sample_of(next, x_next, opts.reference);
        acc_lambda += 0.5 * h * (g0.lambda_v + g1.lambda_v);
        acc_lambda_x += 0.5 * h * (g0.lambda_x + g1.lambda_x);
        acc_rhs_sq += 0.5 * h * (g0.rhs_sq + g1.rhs_sq);
        acc_bx_sq += 0.5 * h * (g0.lb_bx_sq + g1.lb_bx_sq);
        acc_inner += 0.5 * h * (g0.lb_inner + g1.lb_inner);

        t = t_next;
        x = std::move(x_next);
        cur = std::move(next);
        g0 = std::move(g1);
        ++step_index;
        tr.last_valid_time = t;
        if (step_index % stride == 0) record(t, x, cur);
    }
    tr.total_steps = step_index;
    if (tr.status == Trajectory::Status::ok && tr.times.back() != t) record(t, x, cur);
    return tr;
}

std::vector<Vec> ergodic_average(const Trajectory& tr) {
    if (tr.states.empty()) throw std::invalid_argument("ergodic_average: empty trajectory");
    std::vector<Vec> avg;
    avg.reserve(tr.states.size());
    avg.push_back(tr.states.front());
    double den = 0.0;
    Vec num = Vec::Zero(tr.dim());
    for (std::size_t k = 1; k < tr.states.size(); ++k) {
        double h = tr.times[k] - tr.times[k - 1];
        double l0 = tr.lambda_samples[k - 1], l1 = tr.lambda_samples[k];
        num += 0.5 * h * (l0 * tr.states[k - 1] + l1 * tr.states[k]);
        den += 0.5 * h * (l0 + l1);
        if (den <= 0.0)
            throw std::invalid_argument("ergodic_average: integral of lambda is not positive");
        avg.push_back(num / den);
    }
    return avg;
}

void recompute_node_integrals(Trajectory& tr, const ProblemInstance& pr, const Schedule& s,
                              const GraphPoint* reference) {
    const std::size_t n = tr.nodes();
    tr.has_reference = reference != nullptr;
    if (tr.has_reference) tr.reference_z = reference->z;
    tr.int_lambda.assign(n, 0.0);
    tr.int_lambda_x.assign(n, Vec::Zero(tr.dim()));
    tr.int_rhs_sq.assign(n, 0.0);
    tr.int_lb_bx_sq.assign(n, 0.0);
    tr.int_lb_inner.assign(tr.has_reference ? n : 0, 0.0);
    if (n == 0) return;
    if (tr.derivs.size() != n) {
        tr.derivs.resize(n);
        for (std::size_t k = 0; k < n; ++k)
            tr.derivs[k] = rhs(pr, s, tr.times[k], tr.states[k]);
    }
    auto sample = [&](std::size_t k) {
        RhsEval e;
        e.lambda = tr.lambda_samples[k];
        e.beta = tr.beta_samples[k];
        e.bx = eval(pr.B, tr.states[k]);
        e.f = tr.derivs[k];
        return sample_of(e, tr.states[k], reference);
    };
    StepSample g0 = sample(0);
    for (std::size_t k = 1; k < n; ++k) {
        StepSample g1 = sample(k);
        double h = tr.times[k] - tr.times[k - 1];
        tr.int_lambda[k] = tr.int_lambda[k - 1] + 0.5 * h * (g0.lambda_v + g1.lambda_v);
        tr.int_lambda_x[k] = tr.int_lambda_x[k - 1] + 0.5 * h * (g0.lambda_x + g1.lambda_x);
        tr.int_rhs_sq[k] = tr.int_rhs_sq[k - 1] + 0.5 * h * (g0.rhs_sq + g1.rhs_sq);
        tr.int_lb_bx_sq[k] = tr.int_lb_bx_sq[k - 1] + 0.5 * h * (g0.lb_bx_sq + g1.lb_bx_sq);
        if (tr.has_reference)
            tr.int_lb_inner[k] = tr.int_lb_inner[k - 1] + 0.5 * h * (g0.lb_inner + g1.lb_inner);
        g0 = std::move(g1);
    }
}

namespace {

void put17(std::ostream& out, double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << buf;
}

}  // namespace

void write_trajectory_csv(const Trajectory& tr, std::ostream& out) {
    const Eigen::Index n = tr.dim();
    out << "t";
    for (Eigen::Index i = 0; i < n; ++i) out << ",x_" << i;
    out << ",rhs_norm,lambda,beta,B_norm";
    if (tr.has_reference) out << ",dist_to_z";
    out << "\n";
    for (std::size_t k = 0; k < tr.nodes(); ++k) {
        put17(out, tr.times[k]);
        for (Eigen::Index i = 0; i < n; ++i) {
            out << ",";
            put17(out, tr.states[k][i]);
        }
        out << ",";
        put17(out, tr.derivs[k].norm());
        out << ",";
        put17(out, tr.lambda_samples[k]);
        out << ",";
        put17(out, tr.beta_samples[k]);
        out << ",";
        put17(out, tr.bx_norms[k]);
        if (tr.has_reference) {
            out << ",";
            put17(out, (tr.states[k] - tr.reference_z).norm());
        }
        out << "\n";
    }
}

Trajectory read_trajectory_csv(std::istream& in, const ProblemInstance& pr, const Schedule& s) {
    std::string line;
    if (!std::getline(in, line))
        throw std::invalid_argument("trajectory csv: empty input");
    std::vector<std::string> cols;
    {
        std::stringstream hs(line);
        std::string c;
        while (std::getline(hs, c, ',')) cols.push_back(c);
    }
    const Eigen::Index dim = pr.dim();
    std::vector<std::string> expect = {"t"};
    for (Eigen::Index i = 0; i < dim; ++i) expect.push_back("x_" + std::to_string(i));
    for (const char* c : {"rhs_norm", "lambda", "beta", "B_norm"}) expect.push_back(c);
    bool has_dist = cols.size() == expect.size() + 1 && cols.back() == "dist_to_z";
    if (!(cols.size() == expect.size() || has_dist))
        throw std::invalid_argument("trajectory csv: header does not match problem dimension");
    for (std::size_t i = 0; i < expect.size(); ++i)
        if (cols[i] != expect[i])
            throw std::invalid_argument("trajectory csv: unexpected column '" + cols[i] +
                                        "' (wanted '" + expect[i] + "')");

    Trajectory tr;
    long lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::stringstream ls(line);
        std::string cell;
        std::vector<double> row;
        while (std::getline(ls, cell, ',')) {
            try {
                row.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw std::invalid_argument("trajectory csv: bad number at line " +
                                            std::to_string(lineno));
            }
        }
        if (row.size() != cols.size())
            throw std::invalid_argument("trajectory csv: wrong field count at line " +
                                        std::to_string(lineno));
        tr.times.push_back(row[0]);
        Vec x(dim);
        for (Eigen::Index i = 0; i < dim; ++i) x[i] = row[1 + i];
        tr.states.push_back(std::move(x));
        tr.lambda_samples.push_back(row[1 + dim + 1]);
        tr.beta_samples.push_back(row[1 + dim + 2]);
        tr.bx_norms.push_back(row[1 + dim + 3]);
    }
    if (tr.times.size() < 2)
        throw std::invalid_argument("trajectory csv: needs at least two rows");
    for (std::size_t k = 1; k < tr.times.size(); ++k)
        if (!(tr.times[k] > tr.times[k - 1]))
            throw std::invalid_argument("trajectory csv: times not strictly increasing");
    for (std::size_t k : {std::size_t(0), tr.times.size() - 1}) {
        double lam = eval_lambda(s, tr.times[k]), bet = eval_beta(s, tr.times[k]);
        if (std::abs(lam - tr.lambda_samples[k]) > 1e-9 * (1.0 + lam) ||
            std::abs(bet - tr.beta_samples[k]) > 1e-9 * (1.0 + bet))
            throw std::invalid_argument(
                "trajectory csv: recorded lambda/beta do not match the given schedule");
    }
    recompute_node_integrals(tr, pr, s, nullptr);
    return tr;
}

}  // namespace penflow
