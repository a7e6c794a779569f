#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>

#include "penflow/dynamics.hpp"

namespace penflow {

// Constants of the Lyapunov estimate: alpha splits limsup lambda*beta and
// 2*mu, eps0 satisfies (1+e)alpha - 2mu/(1+e) + e/(1+e) < 0, and
// a = eps0/(2(1+eps0)), b = 4(1+eps0)/eps0. t0 is the time from which
// lambda(t)*beta(t) stays below alpha.
struct LemmaConstants {
    double alpha = 0.0;
    double eps0 = 0.0;
    double a = 0.0;
    double b = 0.0;
    double t0 = 0.0;
};

// Bisection on (0, 1] for the strict inequality above (40 rounds, midpoint of
// the feasible interval); retries on (0, 1e-3] before giving up. Requires
// limsup lambda*beta < 2*mu.
LemmaConstants choose_lemma_constants(const Schedule& s, double mu,
                                      const Tolerances& tols = tol());

// Smallest t >= t0 with lambda(t) <= 2*eta/b, in closed form for the
// power-law family.
double t1_threshold(const Schedule& s, double eta, double b, double t0);

// Sign flips for single RHS terms, proving the checks can fail.
enum class LemmaMutation { none, flip_gap, flip_bx_sq, flip_dzv };

enum class Exec { serial, openmp };

struct LyapunovReport {
    std::string lemma_id;  // "fej1" | "fej4"
    std::vector<double> grid_times;  // nodes entering the statistic
    std::vector<double> lhs_values, rhs_values;
    double violation_fraction = 0.0;  // nodes with lhs > rhs + 1e-8*(1+|rhs|)
    double max_violation = 0.0;       // max of lhs - rhs over the grid
    double t1_used = 0.0;
    double a_used = 0.0, b_used = 0.0, eps0_used = 0.0;
};

// d/dt||x-z||^2 + lambda(2eta-3lambda)||Dx-Dz||^2 <=
//   2*lambda*beta*gap + 3 lambda^2 beta^2 ||Bx||^2 + 3 lambda^2 ||Dz+v||^2
//   + 2 lambda <z-x, w>,
// with the Fitzpatrick gap replaced by its upper bound and the derivative
// evaluated exactly as 2<x-z, rhs>. Holds at every node for a valid graph
// point; violations indicate bugs.
LyapunovReport check_lemma_fej1(const Trajectory& tr, const GraphPoint& gp,
                                const ProblemInstance& pr,
                                LemmaMutation mutation = LemmaMutation::none,
                                Exec exec = Exec::openmp, const Tolerances& tols = tol());

// d/dt||x-z||^2 + a(||rhs||^2 + (lambda*beta/2)<x-z,Bx> + lambda*beta*||Bx||^2)
//   <= (a*lambda*beta/2)*gap(4p/a) + 2 lambda <z-x,w> + b lambda^2 ||Dz+v||^2,
// counted on nodes with t >= t1 only.
LyapunovReport check_lemma_fej4(const Trajectory& tr, const GraphPoint& gp,
                                const ProblemInstance& pr, const LemmaConstants& constants,
                                double t1, LemmaMutation mutation = LemmaMutation::none,
                                Exec exec = Exec::openmp, const Tolerances& tols = tol());

struct ConvergenceReport {
    double dist_tail_oscillation = 0.0;          // max-min over the last decade
    std::map<std::string, double> integral_tails;  // last decade / total
    double ergodic_dist_to_solution = 0.0;
    std::optional<double> strong_dist_final;  // set when the solution is unique
};

// Requires at least two decades of time (times[1] <= t_end/100).
ConvergenceReport convergence_report(const Trajectory& tr,
                                     const std::variant<Vec, ConvexSet>& solution,
                                     const Schedule& s);

struct DerivativeCheck {
    int nodes_checked = 0;
    double worst_error = 0.0;      // |central FD - exact| at the worst node
    double worst_tolerance = 0.0;  // 10*h^2*(1+|phi''|) there
    bool pass = false;
};

// Confirms 2<x-z, rhs(t,x)> against a central finite difference of
// ||x(t)-z||^2 along the flow (one RK4 step each way) at `count` sampled
// nodes.
DerivativeCheck check_exact_derivative(const Trajectory& tr, const Vec& z,
                                       const ProblemInstance& pr, const Schedule& s,
                                       int count = 100, std::uint64_t seed = 7151);

}  // namespace penflow
