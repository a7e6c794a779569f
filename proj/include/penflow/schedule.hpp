#pragma once

#include <functional>
#include <string>
#include <vector>

#include "penflow/tolerances.hpp"

namespace penflow {

// lambda(t) = c_lambda * (1+t)^(-p), beta(t) = c_beta * (1+t)^(+q).
// p > 0 guarantees lambda(t) -> 0; q >= 0 keeps beta nondecreasing.
struct Schedule {
    double c_lambda = 1.0;
    double p = 1.0;
    double c_beta = 1.0;
    double q = 1.0;
};

void validate(const Schedule& s);
double eval_lambda(const Schedule& s, double t);
double eval_beta(const Schedule& s, double t);

// The canonical pair lambda(t) = 1/(1+t), beta(t) = 1+t.
Schedule canonical_schedule();

enum class TriState { yes, no, unverified };
const char* to_string(TriState v);

// Numeric cross-check of one improper integral, quadrature on [0, 1e6].
// Verdict rules: "divergent" if value grows more than 10x from [0,1e3] to
// [0,1e6]; "convergent" if the last decade contributes <= 1% of the total;
// "inconclusive" otherwise (slow growth/decay that neither rule resolves).
struct QuadCheck {
    std::string name;  // int_lambda_sq | int_lambda | int_lambda_over_beta
    double value_1e3 = 0.0;
    double value_1e5 = 0.0;
    double value_1e6 = 0.0;
    bool analytic_convergent = false;
    std::string numeric_verdict;  // divergent | convergent | inconclusive
    bool consistent = false;      // definite numeric verdict does not contradict analytic
};

struct HypothesisReport {
    bool h3_l2 = false;      // lambda in L^2  <=>  p > 1/2
    bool h3_not_l1 = false;  // lambda not in L^1  <=>  p <= 1
    bool h3 = false;
    double product_limsup = 0.0;  // limsup lambda*beta; +infinity when q > p
    bool product_ok = false;      // product_limsup < 2*mu
    TriState hfitz_distsq = TriState::unverified;  // reduced (H): p + q > 1
    std::vector<QuadCheck> numeric_cross_checks;
    bool numeric_consistent = false;
};

// mu: cocoercivity modulus of the penalty operator. distsq_bound_applies:
// false when the penalty kind has no closed-form Fitzpatrick bound, in which
// case hfitz_distsq reports "unverified".
HypothesisReport classify(const Schedule& s, double mu, bool distsq_bound_applies = true,
                          const Tolerances& tols = tol());

// Smallest time after which lambda(t)*beta(t) stays below
// (product_limsup + 2*mu)/2, in closed form. Requires product_limsup < 2*mu.
double lambda_beta_limsup_bound_time(const Schedule& s, double mu);

// Adaptive Simpson quadrature with relative tolerance, exposed for oracles.
double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                        double rel_tol);

}  // namespace penflow
