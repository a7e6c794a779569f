#pragma once

#include <iosfwd>
#include <vector>

#include "penflow/operators.hpp"
#include "penflow/schedule.hpp"

namespace penflow {

// 0 in Ax + Dx + N_C(x), where C is the zero set of the penalty operator B.
struct ProblemInstance {
    MaxMonotone A;
    Cocoercive D;
    Penalty B;

    ProblemInstance(MaxMonotone a, Cocoercive d, Penalty b);
    Eigen::Index dim() const { return A.dim(); }
    const ConvexSet& constraint() const { return B.zero_set(); }
};

// T(x) = J_{lambda A}(x - lambda*Dx - lambda*beta*Bx). The trajectory solves
// x' = T(x) - x; the discrete scheme iterates x + h*(T(x) - x). Both paths
// call this one function so a unit-step Euler run reproduces the discrete
// iterates bit for bit.
Vec forward_backward_map(const ProblemInstance& pr, double lambda, double beta, const Vec& x);

struct RhsEval {
    Vec f;   // T(x) - x
    Vec bx;  // B(x)
    double lambda = 0.0;
    double beta = 0.0;
};

RhsEval rhs_eval(const ProblemInstance& pr, const Schedule& s, double t, const Vec& x);
Vec rhs(const ProblemInstance& pr, const Schedule& s, double t, const Vec& x);

// L_f(t) = 2 + lambda(t)/eta + lambda(t)*beta(t)/mu, a Lipschitz constant of
// x -> rhs(t, x).
double lipschitz_bound(const ProblemInstance& pr, const Schedule& s, double t);

struct IntegrateOptions {
    enum class Method { euler, rk4 };
    Method method = Method::rk4;
    double t_end = 100.0;
    double h_max = 0.05;
    double safety = 0.25;     // in (0, 1]; enforces h * L_f(t) <= safety
    long record_every = 1;    // keep every k-th step (running integrals see every step)
    bool force_unit_step = false;  // h = 1 exactly; discrete-equivalence mode
    const GraphPoint* reference = nullptr;  // enables dist and <Bx, x-z> tracking
};

struct Trajectory {
    std::vector<double> times;
    std::vector<Vec> states;
    std::vector<Vec> derivs;  // exact rhs at the recorded node
    std::vector<double> lambda_samples, beta_samples, bx_norms;

    // Running integrals at each node, accumulated by the trapezoid rule at
    // every accepted step before any decimation.
    std::vector<double> int_lambda;    // integral of lambda
    std::vector<Vec> int_lambda_x;     // integral of lambda * x, componentwise
    std::vector<double> int_rhs_sq;    // integral of ||x'||^2
    std::vector<double> int_lb_bx_sq;  // integral of lambda*beta*||Bx||^2
    std::vector<double> int_lb_inner;  // integral of lambda*beta*<Bx, x-z> (with reference)

    bool has_reference = false;
    Vec reference_z;

    enum class Status { ok, nonfinite };
    Status status = Status::ok;
    double last_valid_time = 0.0;
    long total_steps = 0;

    Eigen::Index dim() const { return states.empty() ? 0 : states.front().size(); }
    std::size_t nodes() const { return times.size(); }
};

// Explicit Euler / classical RK4 with step h = min(h_max, safety / L_f(t)).
// Recorded nodes are thinned on the fly (stride doubling) to stay below 2^20;
// the final state is always recorded.
Trajectory integrate(const ProblemInstance& pr, const Schedule& s, Vec x0,
                     const IntegrateOptions& opts);

// Running lambda-weighted average of the recorded states by the trapezoid
// rule; entry 0 is defined as x(0).
std::vector<Vec> ergodic_average(const Trajectory& tr);

// Recomputes the running-integral series (and derivatives where missing) from
// the recorded nodes only. Used when a trajectory is re-loaded from CSV.
void recompute_node_integrals(Trajectory& tr, const ProblemInstance& pr, const Schedule& s,
                              const GraphPoint* reference);

// Columns: t, x_0..x_{n-1}, rhs_norm, lambda, beta, B_norm[, dist_to_z],
// 17 significant digits.
void write_trajectory_csv(const Trajectory& tr, std::ostream& out);
Trajectory read_trajectory_csv(std::istream& in, const ProblemInstance& pr, const Schedule& s);

}  // namespace penflow
