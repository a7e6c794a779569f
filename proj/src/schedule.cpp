#include "penflow/schedule.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace penflow {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double simpson(double a, double fa, double fm, double b, double fb) {
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

double adaptive_step(const std::function<double(double)>& f, double a, double fa, double b,
                     double fb, double m, double fm, double whole, double abs_tol, int depth) {
    double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    double flm = f(lm), frm = f(rm);
    double left = simpson(a, fa, flm, m, fm);
    double right = simpson(m, fm, frm, b, fb);
    double delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15.0 * abs_tol) return left + right + delta / 15.0;
    return adaptive_step(f, a, fa, m, fm, lm, flm, left, 0.5 * abs_tol, depth - 1) +
           adaptive_step(f, m, fm, b, fb, rm, frm, right, 0.5 * abs_tol, depth - 1);
}

}  // namespace

double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                        double rel_tol) {
    if (!(b > a)) return 0.0;
    double fa = f(a), fb = f(b), m = 0.5 * (a + b), fm = f(m);
    double whole = simpson(a, fa, fm, b, fb);
    double abs_tol = rel_tol * std::max(std::abs(whole), 1e-300);
    return adaptive_step(f, a, fa, b, fb, m, fm, whole, abs_tol, 48);
}

void validate(const Schedule& s) {
    if (!(s.c_lambda > 0.0) || !std::isfinite(s.c_lambda))
        throw std::invalid_argument("Schedule: c_lambda must be finite and > 0");
    if (!(s.p > 0.0) || !std::isfinite(s.p))
        throw std::invalid_argument("Schedule: p must be finite and > 0");
    if (!(s.c_beta > 0.0) || !std::isfinite(s.c_beta))
        throw std::invalid_argument("Schedule: c_beta must be finite and > 0");
    if (!(s.q >= 0.0) || !std::isfinite(s.q))
        throw std::invalid_argument("Schedule: q must be finite and >= 0");
}

double eval_lambda(const Schedule& s, double t) {
    if (!(t >= 0.0)) throw std::invalid_argument("eval_lambda: t must be >= 0");
    return s.c_lambda * std::pow(1.0 + t, -s.p);
}

double eval_beta(const Schedule& s, double t) {
    if (!(t >= 0.0)) throw std::invalid_argument("eval_beta: t must be >= 0");
    return s.c_beta * std::pow(1.0 + t, s.q);
}

Schedule canonical_schedule() { return Schedule{1.0, 1.0, 1.0, 1.0}; }

const char* to_string(TriState v) {
    switch (v) {
        case TriState::yes: return "yes";
        case TriState::no: return "no";
        default: return "unverified";
    }
}

namespace {

// Integrates f on [0, 1e6] decade by decade so the adaptive scheme spends its
// effort near 0 where power-law integrands vary fastest. Returns the partial
// values at 1e3, 1e5 and 1e6.
struct PartialIntegrals {
    double at_1e3, at_1e5, at_1e6;
};

PartialIntegrals integrate_decades(const std::function<double(double)>& f, double rel_tol) {
    const double edges[] = {0.0, 1.0, 10.0, 100.0, 1e3, 1e4, 1e5, 1e6};
    PartialIntegrals out{0.0, 0.0, 0.0};
    double acc = 0.0;
    for (int i = 0; i + 1 < 8; ++i) {
        acc += adaptive_simpson(f, edges[i], edges[i + 1], rel_tol);
        if (edges[i + 1] == 1e3) out.at_1e3 = acc;
        if (edges[i + 1] == 1e5) out.at_1e5 = acc;
    }
    out.at_1e6 = acc;
    return out;
}

QuadCheck make_check(const std::string& name, const std::function<double(double)>& f,
                     bool analytic_convergent, double rel_tol) {
    QuadCheck c;
    c.name = name;
    c.analytic_convergent = analytic_convergent;
    PartialIntegrals v = integrate_decades(f, rel_tol);
    c.value_1e3 = v.at_1e3;
    c.value_1e5 = v.at_1e5;
    c.value_1e6 = v.at_1e6;
    bool looks_divergent = v.at_1e6 > 10.0 * v.at_1e3;
    bool looks_convergent =
        !looks_divergent && (v.at_1e6 - v.at_1e5) <= 0.01 * v.at_1e6;
    c.numeric_verdict =
        looks_divergent ? "divergent" : (looks_convergent ? "convergent" : "inconclusive");
    c.consistent = !(analytic_convergent && looks_divergent) &&
                   !(!analytic_convergent && looks_convergent);
    return c;
}

}  // namespace

HypothesisReport classify(const Schedule& s, double mu, bool distsq_bound_applies,
                          const Tolerances& tols) {
    validate(s);
    if (!(mu > 0.0) || !std::isfinite(mu))
        throw std::invalid_argument("classify: mu must be finite and > 0");

    HypothesisReport r;
    r.h3_l2 = s.p > 0.5;
    r.h3_not_l1 = s.p <= 1.0;
    r.h3 = r.h3_l2 && r.h3_not_l1;

    if (s.q < s.p) r.product_limsup = 0.0;
    else if (s.q == s.p) r.product_limsup = s.c_lambda * s.c_beta;
    else r.product_limsup = kInf;
    r.product_ok = r.product_limsup < 2.0 * mu;

    if (distsq_bound_applies)
        r.hfitz_distsq = (s.p + s.q > 1.0) ? TriState::yes : TriState::no;
    else
        r.hfitz_distsq = TriState::unverified;

    auto lam = [&](double t) { return eval_lambda(s, t); };
    r.numeric_cross_checks.push_back(make_check(
        "int_lambda_sq", [&](double t) { double l = lam(t); return l * l; },
        2.0 * s.p > 1.0, tols.quad_rel));
    r.numeric_cross_checks.push_back(
        make_check("int_lambda", lam, s.p > 1.0, tols.quad_rel));
    r.numeric_cross_checks.push_back(make_check(
        "int_lambda_over_beta", [&](double t) { return lam(t) / eval_beta(s, t); },
        s.p + s.q > 1.0, tols.quad_rel));
    r.numeric_consistent = true;
    for (const auto& c : r.numeric_cross_checks) r.numeric_consistent &= c.consistent;
    return r;
}

double lambda_beta_limsup_bound_time(const Schedule& s, double mu) {
    validate(s);
    if (!(mu > 0.0) || !std::isfinite(mu))
        throw std::invalid_argument("lambda_beta_limsup_bound_time: mu must be > 0");
    double limsup;
    if (s.q < s.p) limsup = 0.0;
    else if (s.q == s.p) limsup = s.c_lambda * s.c_beta;
    else
        throw std::invalid_argument(
            "lambda_beta_limsup_bound_time: lambda*beta diverges (q > p)");
    if (!(limsup < 2.0 * mu))
        throw std::invalid_argument(
            "lambda_beta_limsup_bound_time: limsup of lambda*beta is not below 2*mu");
    const double threshold = 0.5 * (limsup + 2.0 * mu);
    const double product0 = s.c_lambda * s.c_beta;  // value at t = 0, decreasing for q < p
    if (s.q == s.p) return 0.0;                     // constant product, already below
    if (product0 <= threshold) return 0.0;
    return std::pow(product0 / threshold, 1.0 / (s.p - s.q)) - 1.0;
}

}  // namespace penflow
