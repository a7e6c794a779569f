#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "penflow/dynamics.hpp"

namespace penflow {

// Test instance with an independently known solution. `solution` is either the
// unique solution point or a set descriptor (P2's solution set is a whole
// line). The certificate is a graph point of A + D + N_C at a solution; for
// the builtins it is exact and has w = 0.
struct NamedInstance {
    std::string id;
    ProblemInstance instance;
    std::variant<Vec, ConvexSet> solution;
    GraphPoint certificate;
};

// ids: P0_zero, P1_strongly_monotone, P2_monotone_line, P3_l1_box
// (bare P0..P3 accepted as shorthand).
NamedInstance builtin(const std::string& id);
const std::vector<std::string>& builtin_ids();

struct OracleFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Resolvent of s(A + N_C) at y, computed exactly per operator/set pairing:
// zero -> projection, l1 + box -> clamped soft threshold, matrix kinds ->
// damped projected fixed-point iteration (contractive for s ||M|| < 1).
Vec constrained_resolvent(const MaxMonotone& A, const ConvexSet& C, double s, const Vec& y,
                          const Tolerances& tols = tol());

// Solves 0 in Az + Dz + N_C(z) by z <- J_{s(A+N_C)}(z - s Dz) with
// s = min(eta, 0.1, 1/(1+||A||_2))/2, stopping at ||z_{k+1}-z_k|| <= tol*s (cap 1e7
// iterations, OracleFailure beyond). Ignores the penalty term B entirely so
// results stay independent of the dynamics code. For dim <= 2 the result is
// cross-checked against a refined grid search over C down to spacing 1e-6.
Vec oracle_solve(const ProblemInstance& pr, double tol = 1e-10);
Vec oracle_solve(const ProblemInstance& pr, double tol, Vec z0);

// Fixed-point residual ||z - J_{s(A+N_C)}(z - s Dz)|| / s; zero exactly at
// solutions of the constrained inclusion.
double inclusion_residual(const ProblemInstance& pr, const Vec& z, double s,
                          const Tolerances& tols = tol());

// Graph point at (a projection of) z_approx: v from the structure of A, p as
// the normal-cone component of -(v + Dz), w = v + p + Dz computed exactly.
// Coordinates within 1e-9 of a box face are snapped onto it so that p is an
// exact normal direction.
GraphPoint build_certificate(const ProblemInstance& pr, const Vec& z_approx);

// A = gamma*I + PSD + skew, D = grad of a strongly convex quadratic when
// gamma = 0 (keeps A + D strongly monotone so the oracle converges linearly),
// C = random box or affine subspace, B = dist_sq_gradient(C). Deterministic
// per seed; redraws with a derived seed when the oracle or the certificate
// validation fails (a few attempts, then OracleFailure).
NamedInstance random_instance(std::uint64_t seed, int dim, double gamma);

}  // namespace penflow
