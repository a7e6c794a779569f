#include "penflow/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace penflow {

// ---- Lyapunov constants --------------------------------------------------------

namespace {

// (1+e)*alpha - 2mu/(1+e) + e/(1+e); strictly increasing in e, negative at 0
// whenever alpha < 2mu.
double lemma_gap(double alpha, double mu, double e) {
    return (1.0 + e) * alpha - 2.0 * mu / (1.0 + e) + e / (1.0 + e);
}

// Midpoint of the feasible interval (0, r) within the window (0, hi], where r
// is the sign change of lemma_gap. Returns 0 when even tiny e fail.
double bisect_eps0(double alpha, double mu, double hi) {
    if (lemma_gap(alpha, mu, hi) < 0.0) return hi / 2.0;
    double lo = 0.0;
    for (int i = 0; i < 40; ++i) {
        double mid = 0.5 * (lo + hi);
        (lemma_gap(alpha, mu, mid) < 0.0 ? lo : hi) = mid;
    }
    return lo > 0.0 ? 0.5 * lo : 0.0;
}

}  // namespace

LemmaConstants choose_lemma_constants(const Schedule& s, double mu, const Tolerances& tols) {
    HypothesisReport hyp = classify(s, mu, true, tols);
    if (!hyp.product_ok)
        throw std::invalid_argument(
            "choose_lemma_constants: limsup lambda*beta must be < 2*mu");
    LemmaConstants k;
    k.alpha = 0.5 * (hyp.product_limsup + 2.0 * mu);
    k.eps0 = bisect_eps0(k.alpha, mu, 1.0);
    if (k.eps0 <= 0.0) k.eps0 = bisect_eps0(k.alpha, mu, 1e-3);
    if (k.eps0 <= 0.0 || lemma_gap(k.alpha, mu, k.eps0) >= 0.0)
        throw std::invalid_argument("choose_lemma_constants: no feasible eps0 in (0, 1]");
    k.a = k.eps0 / (2.0 * (1.0 + k.eps0));
    k.b = 4.0 * (1.0 + k.eps0) / k.eps0;
    k.t0 = lambda_beta_limsup_bound_time(s, mu);
    return k;
}

double t1_threshold(const Schedule& s, double eta, double b, double t0) {
    validate(s);
    if (!(eta > 0.0) || !std::isfinite(eta))
        throw std::invalid_argument("t1_threshold: eta must be finite and > 0");
    if (!(b > 0.0) || !std::isfinite(b))
        throw std::invalid_argument("t1_threshold: b must be finite and > 0");
    if (!(t0 >= 0.0)) throw std::invalid_argument("t1_threshold: t0 must be >= 0");
    const double threshold = 2.0 * eta / b;
    // c_lambda (1+t)^(-p) <= threshold  <=>  t >= (c_lambda/threshold)^(1/p) - 1
    double ratio = s.c_lambda / threshold;
    double t_req = ratio <= 1.0 ? 0.0 : std::pow(ratio, 1.0 / s.p) - 1.0;
    return std::max(t0, t_req);
}

// ---- lemma checks ----------------------------------------------------------------

namespace {

template <typename Fn>
void for_nodes(std::size_t n, Exec exec, const Fn& fn) {
    if (exec == Exec::openmp) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
        for (long k = 0; k < static_cast<long>(n); ++k) fn(static_cast<std::size_t>(k));
        return;
#endif
    }
    for (std::size_t k = 0; k < n; ++k) fn(k);
}

void require_lemma_inputs(const Trajectory& tr, const GraphPoint& gp, const ProblemInstance& pr,
                          const char* what) {
    if (tr.nodes() == 0) throw std::invalid_argument(std::string(what) + ": empty trajectory");
    if (tr.dim() != pr.dim())
        throw std::invalid_argument(std::string(what) + ": trajectory/problem dimension mismatch");
    if (gp.z.size() != pr.dim() || gp.v.size() != pr.dim() || gp.p.size() != pr.dim() ||
        gp.w.size() != pr.dim())
        throw std::invalid_argument(std::string(what) + ": graph point dimension mismatch");
    if (tr.derivs.size() != tr.nodes())
        throw std::invalid_argument(std::string(what) + ": trajectory lacks derivative samples");
}

void finish_report(LyapunovReport& rep, const Tolerances& tols) {
    std::size_t violations = 0;
    double max_gap = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < rep.lhs_values.size(); ++k) {
        double gap = rep.lhs_values[k] - rep.rhs_values[k];
        max_gap = std::max(max_gap, gap);
        if (gap > tols.lemma_rel * (1.0 + std::abs(rep.rhs_values[k]))) ++violations;
    }
    rep.violation_fraction =
        static_cast<double>(violations) / static_cast<double>(rep.lhs_values.size());
    rep.max_violation = max_gap;
}

}  // namespace

LyapunovReport check_lemma_fej1(const Trajectory& tr, const GraphPoint& gp,
                                const ProblemInstance& pr, LemmaMutation mutation, Exec exec,
                                const Tolerances& tols) {
    require_lemma_inputs(tr, gp, pr, "check_lemma_fej1");
    fitzpatrick_gap_bound(pr.B, gp.p, 1.0);  // surface unsupported kinds before the loop

    const Vec dz = eval(pr.D, gp.z);
    const double dzv_sq = (dz + gp.v).squaredNorm();
    const double eta = pr.D.eta();
    const double s_gap = mutation == LemmaMutation::flip_gap ? -1.0 : 1.0;
    const double s_bx = mutation == LemmaMutation::flip_bx_sq ? -1.0 : 1.0;
    const double s_dzv = mutation == LemmaMutation::flip_dzv ? -1.0 : 1.0;

    const std::size_t n = tr.nodes();
    LyapunovReport rep;
    rep.lemma_id = "fej1";
    rep.grid_times = tr.times;
    rep.lhs_values.resize(n);
    rep.rhs_values.resize(n);

    for_nodes(n, exec, [&](std::size_t k) {
        const Vec& x = tr.states[k];
        const Vec& f = tr.derivs[k];
        const double lam = tr.lambda_samples[k];
        const double bet = tr.beta_samples[k];
        Vec bx = eval(pr.B, x);
        Vec dx = eval(pr.D, x);
        rep.lhs_values[k] =
            2.0 * (x - gp.z).dot(f) + lam * (2.0 * eta - 3.0 * lam) * (dx - dz).squaredNorm();
        double gap = fitzpatrick_gap_bound(pr.B, gp.p, bet);
        rep.rhs_values[k] = s_gap * 2.0 * lam * bet * gap +
                            s_bx * 3.0 * lam * lam * bet * bet * bx.squaredNorm() +
                            s_dzv * 3.0 * lam * lam * dzv_sq + 2.0 * lam * (gp.z - x).dot(gp.w);
    });

    finish_report(rep, tols);
    return rep;
}

LyapunovReport check_lemma_fej4(const Trajectory& tr, const GraphPoint& gp,
                                const ProblemInstance& pr, const LemmaConstants& constants,
                                double t1, LemmaMutation mutation, Exec exec,
                                const Tolerances& tols) {
    require_lemma_inputs(tr, gp, pr, "check_lemma_fej4");
    if (!(constants.a > 0.0) || !(constants.b > 0.0) || !std::isfinite(constants.a) ||
        !std::isfinite(constants.b))
        throw std::invalid_argument("check_lemma_fej4: constants a, b must be finite and > 0");
    if (!(t1 >= 0.0) || !std::isfinite(t1))
        throw std::invalid_argument("check_lemma_fej4: t1 must be finite and >= 0");
    fitzpatrick_gap_bound(pr.B, gp.p, 1.0);

    std::vector<std::size_t> sel;
    const double t1_eps = 1e-12 * (1.0 + t1);
    for (std::size_t k = 0; k < tr.nodes(); ++k)
        if (tr.times[k] >= t1 - t1_eps) sel.push_back(k);
    if (sel.empty())
        throw std::invalid_argument(
            "check_lemma_fej4: no trajectory nodes at or beyond t1; integrate further");

    const Vec dz = eval(pr.D, gp.z);
    const double dzv_sq = (dz + gp.v).squaredNorm();
    const double a = constants.a, b = constants.b;
    const Vec p4 = (4.0 / a) * gp.p;
    const double s_gap = mutation == LemmaMutation::flip_gap ? -1.0 : 1.0;
    const double s_bx = mutation == LemmaMutation::flip_bx_sq ? -1.0 : 1.0;
    const double s_dzv = mutation == LemmaMutation::flip_dzv ? -1.0 : 1.0;

    LyapunovReport rep;
    rep.lemma_id = "fej4";
    rep.t1_used = t1;
    rep.a_used = a;
    rep.b_used = b;
    rep.eps0_used = constants.eps0;
    rep.grid_times.resize(sel.size());
    rep.lhs_values.resize(sel.size());
    rep.rhs_values.resize(sel.size());

    for_nodes(sel.size(), exec, [&](std::size_t i) {
        const std::size_t k = sel[i];
        const Vec& x = tr.states[k];
        const Vec& f = tr.derivs[k];
        const double lam = tr.lambda_samples[k];
        const double bet = tr.beta_samples[k];
        const double lb = lam * bet;
        Vec bx = eval(pr.B, x);
        rep.grid_times[i] = tr.times[k];
        rep.lhs_values[i] = 2.0 * (x - gp.z).dot(f) +
                            a * (f.squaredNorm() + 0.5 * lb * (x - gp.z).dot(bx) +
                                 s_bx * lb * bx.squaredNorm());
        double gap = fitzpatrick_gap_bound(pr.B, p4, bet);
        rep.rhs_values[i] = s_gap * 0.5 * a * lb * gap + 2.0 * lam * (gp.z - x).dot(gp.w) +
                            s_dzv * b * lam * lam * dzv_sq;
    });

    finish_report(rep, tols);
    return rep;
}

// ---- convergence report ------------------------------------------------------------

namespace {

double interp_at(const std::vector<double>& times, const std::vector<double>& values, double t) {
    auto it = std::upper_bound(times.begin(), times.end(), t);
    if (it == times.begin()) return values.front();
    if (it == times.end()) return values.back();
    std::size_t hi = static_cast<std::size_t>(it - times.begin());
    std::size_t lo = hi - 1;
    double span = times[hi] - times[lo];
    double u = span > 0.0 ? (t - times[lo]) / span : 0.0;
    return (1.0 - u) * values[lo] + u * values[hi];
}

double tail_ratio(const std::vector<double>& times, const std::vector<double>& series,
                  double t_split) {
    double total = series.back();
    // Below this the whole integral is quadrature noise (e.g. a trajectory
    // that never leaves the constraint set); any ratio would be meaningless.
    if (std::abs(total) < 1e-12) return 0.0;
    double ratio = (total - interp_at(times, series, t_split)) / total;
    if (ratio < 0.0 && ratio > -1e-9) ratio = 0.0;  // quadrature roundoff
    return ratio;
}

}  // namespace

ConvergenceReport convergence_report(const Trajectory& tr,
                                     const std::variant<Vec, ConvexSet>& solution,
                                     const Schedule& s) {
    validate(s);
    if (tr.nodes() < 3) throw std::invalid_argument("convergence_report: trajectory too short");
    const double t_end = tr.times.back();
    if (!(t_end > 0.0) || tr.times[1] > t_end / 100.0)
        throw std::invalid_argument(
            "convergence_report: trajectory must span at least two decades of time");
    if (tr.int_rhs_sq.size() != tr.nodes() || tr.int_lb_bx_sq.size() != tr.nodes())
        throw std::invalid_argument("convergence_report: running integrals missing");

    auto dist_to_solution = [&](const Vec& x) {
        if (std::holds_alternative<Vec>(solution)) return (x - std::get<Vec>(solution)).norm();
        return dist(std::get<ConvexSet>(solution), x);
    };

    ConvergenceReport rep;
    const double t_split = t_end / 10.0;
    double d_min = std::numeric_limits<double>::infinity(), d_max = 0.0;
    for (std::size_t k = 0; k < tr.nodes(); ++k) {
        if (tr.times[k] < t_split) continue;
        double d = dist_to_solution(tr.states[k]);
        d_min = std::min(d_min, d);
        d_max = std::max(d_max, d);
    }
    rep.dist_tail_oscillation = d_max - d_min;

    rep.integral_tails["rhs_sq"] = tail_ratio(tr.times, tr.int_rhs_sq, t_split);
    rep.integral_tails["lb_bx_sq"] = tail_ratio(tr.times, tr.int_lb_bx_sq, t_split);
    if (tr.has_reference && tr.int_lb_inner.size() == tr.nodes())
        rep.integral_tails["lb_inner"] = tail_ratio(tr.times, tr.int_lb_inner, t_split);

    rep.ergodic_dist_to_solution = dist_to_solution(ergodic_average(tr).back());
    if (std::holds_alternative<Vec>(solution))
        rep.strong_dist_final = dist_to_solution(tr.states.back());
    return rep;
}

// ---- exact-derivative cross-check ----------------------------------------------------

namespace {

Vec rk4_step(const ProblemInstance& pr, const Schedule& s, double t, const Vec& x, double h) {
    Vec k1 = rhs(pr, s, t, x);
    Vec k2 = rhs(pr, s, t + 0.5 * h, x + (0.5 * h) * k1);
    Vec k3 = rhs(pr, s, t + 0.5 * h, x + (0.5 * h) * k2);
    Vec k4 = rhs(pr, s, t + h, x + h * k3);
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace

DerivativeCheck check_exact_derivative(const Trajectory& tr, const Vec& z,
                                       const ProblemInstance& pr, const Schedule& s, int count,
                                       std::uint64_t seed) {
    if (tr.nodes() == 0)
        throw std::invalid_argument("check_exact_derivative: empty trajectory");
    require_dim(z, pr.dim(), "check_exact_derivative: z");
    if (tr.derivs.size() != tr.nodes())
        throw std::invalid_argument("check_exact_derivative: trajectory lacks derivatives");

    const double h = 1e-3;
    std::mt19937_64 eng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, tr.nodes() - 1);

    DerivativeCheck out;
    out.pass = true;
    double worst_ratio = -1.0;
    for (int i = 0; i < count; ++i) {
        std::size_t k = pick(eng);
        double t = tr.times[k];
        if (t < h) continue;  // the central stencil needs t - h >= 0
        const Vec& x = tr.states[k];
        double phi0 = (x - z).squaredNorm();
        double phip = (rk4_step(pr, s, t, x, h) - z).squaredNorm();
        double phim = (rk4_step(pr, s, t, x, -h) - z).squaredNorm();
        double fd = (phip - phim) / (2.0 * h);
        double exact = 2.0 * (x - z).dot(tr.derivs[k]);
        double second = (phip - 2.0 * phi0 + phim) / (h * h);
        double tol_k = 10.0 * h * h * (1.0 + std::abs(second));
        double err = std::abs(fd - exact);
        ++out.nodes_checked;
        if (err > tol_k) out.pass = false;
        double ratio = err / tol_k;
        if (ratio > worst_ratio) {
            worst_ratio = ratio;
            out.worst_error = err;
            out.worst_tolerance = tol_k;
        }
    }
    if (out.nodes_checked == 0)
        throw std::invalid_argument("check_exact_derivative: no usable nodes (t >= 1e-3)");
    return out;
}

}  // namespace penflow
