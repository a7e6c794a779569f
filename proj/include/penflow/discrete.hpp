#pragma once

#include <iosfwd>

#include "penflow/dynamics.hpp"

namespace penflow {

// Forward-backward penalty iteration
//   x_{n+1} = x_n + h_n * (J_{lambda_n A}(x_n - lambda_n*D x_n -
//                          lambda_n*beta_n*B x_n) - x_n),
// with lambda_n = lambda(n), beta_n = beta(n) sampled at integer times.
// h_n = 1 recovers the plain scheme x_{n+1} = J(...).

struct DiscreteOptions {
    long N = 100;
    bool use_h1 = true;            // h_n = 1; otherwise h_seq must hold N entries in (0, 1]
    std::vector<double> h_seq;
    // Test hook: samples lambda/beta at n+1 instead of n, to prove the
    // Euler-equivalence comparison can detect sampling mistakes.
    bool perturb_lambda_off_by_one = false;
};

struct DiscreteRun {
    std::vector<Vec> iterates;             // x_0 .. x_N
    std::vector<double> lambda_seq, beta_seq;  // sampled at n = 0..N (N+1 entries)
    std::vector<double> h_seq;             // length N
    std::vector<double> residuals;         // ||x_{n+1}-x_n|| / h_n, length N
};

double sample_lambda(const Schedule& s, long n);
double sample_beta(const Schedule& s, long n);

DiscreteRun run_discrete(const ProblemInstance& pr, const Schedule& s, Vec x0,
                         const DiscreteOptions& opts);

struct CompareReport {
    long N = 0;
    double max_coord_discrepancy = 0.0;  // max over steps and coordinates
    bool pass = false;                   // max <= 1e-15 * N
};

// Runs unit-step Euler and the discrete scheme side by side from the same x0.
CompareReport compare_euler_discrete(const ProblemInstance& pr, const Schedule& s, const Vec& x0,
                                     long N, bool perturb_lambda_off_by_one = false);

// Columns: n, x_0..x_{dim-1}, residual, lambda_n, beta_n; the residual column
// holds ||x_{n+1}-x_n||/h_n for n < N and repeats the last value on the final
// row. 17 significant digits.
void write_discrete_csv(const DiscreteRun& run, std::ostream& out);

}  // namespace penflow
