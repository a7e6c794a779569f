#pragma once

#include <functional>
#include <optional>
#include <utility>
#include <variant>

#include "penflow/sets.hpp"

namespace penflow {

// Thrown when an iterative resolvent hits its sweep cap.
struct InnerIterationFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---- maximally monotone operator A ----------------------------------------

struct ZeroOp {
    Eigen::Index dim;
};
struct LinearOp {
    Mat M;  // symmetric part PSD
};
struct AffineOp {
    Mat M;
    Vec q;  // x -> Mx + q
};
struct NormalConeOp {
    ConvexSet set;
};
struct L1Subdifferential {
    Eigen::Index dim;
    double weight;  // >= 0
};
// A = M + N_set with set restricted to box or affine subspace; the resolvent
// is computed by a damped projected fixed-point iteration.
struct LinearPlusNormalCone {
    Mat M;
    ConvexSet set;
};

class MaxMonotone {
  public:
    using Desc = std::variant<ZeroOp, LinearOp, AffineOp, NormalConeOp, L1Subdifferential,
                              LinearPlusNormalCone>;

    // gamma: certified strong monotonicity modulus, validated against the
    // smallest eigenvalue of the symmetric part where one exists.
    explicit MaxMonotone(Desc d, double gamma = 0.0, const Tolerances& tols = tol());

    const Desc& desc() const { return desc_; }
    double gamma() const { return gamma_; }
    Eigen::Index dim() const { return dim_; }
    double matrix_norm() const { return op_norm_; }  // ||M||_2 for matrix kinds, else 0
    const char* kind() const;

  private:
    Desc desc_;
    double gamma_;
    Eigen::Index dim_;
    double op_norm_;
};

// J_{lambda A}(x), lambda > 0. Exact for all kinds except LinearPlusNormalCone,
// which iterates to tols.inner_residual (throws InnerIterationFailure at the cap).
Vec resolvent(const MaxMonotone& A, double lambda, const Vec& x, const Tolerances& tols = tol());

// A_alpha(x) = (x - J_{alpha A}(x)) / alpha
Vec yosida(const MaxMonotone& A, double alpha, const Vec& x, const Tolerances& tols = tol());

// ---- single-valued cocoercive operator D ----------------------------------

struct ZeroForward {
    Eigen::Index dim;
};
struct GradQuadratic {
    Mat Q;  // symmetric PSD
    Vec c;  // x -> Qx + c
};

class Cocoercive {
  public:
    using Desc = std::variant<ZeroForward, GradQuadratic>;

    // eta: cocoercivity modulus, must satisfy eta <= 1/lambda_max(Q) for the
    // quadratic kind; any positive value is admissible for the zero kind.
    Cocoercive(Desc d, double eta, const Tolerances& tols = tol());

    const Desc& desc() const { return desc_; }
    double eta() const { return eta_; }
    Eigen::Index dim() const { return dim_; }
    const char* kind() const;

  private:
    Desc desc_;
    double eta_;
    Eigen::Index dim_;
};

Vec eval(const Cocoercive& D, const Vec& x);

// ---- penalty operator B ----------------------------------------------------

// B = grad(1/2 dist^2(., set)) = Id - P_set; zero set is the set itself.
struct DistSqGradient {
    ConvexSet set;
};
// B = Mx with M symmetric PSD; zero set is ker M.
struct LinearPsd {
    Mat M;
};

class Penalty {
  public:
    using Desc = std::variant<DistSqGradient, LinearPsd>;

    // mu: cocoercivity modulus (mu <= 1 for DistSqGradient, mu <= 1/lambda_max(M)
    // for LinearPsd). zero_set: required for LinearPsd (see make_linear_psd_penalty),
    // implied for DistSqGradient.
    Penalty(Desc d, double mu, std::optional<ConvexSet> zero_set = std::nullopt,
            const Tolerances& tols = tol());

    const Desc& desc() const { return desc_; }
    double mu() const { return mu_; }
    Eigen::Index dim() const { return dim_; }
    const ConvexSet& zero_set() const { return zero_set_; }
    const char* kind() const;

  private:
    Desc desc_;
    double mu_;
    ConvexSet zero_set_;
    Eigen::Index dim_;
};

Vec eval(const Penalty& B, const Vec& x);

// Convenience: LinearPsd penalty with mu = 1/lambda_max(M) and the kernel of M
// extracted as an affine subspace through the origin.
Penalty make_linear_psd_penalty(const Mat& M, const Tolerances& tols = tol());

// Upper bound for sup_{u in C} phi_B(u, p/beta) - sigma_C(p/beta) when
// B = grad(1/2 dist^2(., C)): the bound equals 1/2 ||p||^2 / beta^2.
// Throws std::invalid_argument for other penalty kinds.
double fitzpatrick_gap_bound(const Penalty& B, const Vec& p, double beta);

// ---- graph points of A + D + N_C -------------------------------------------

// w = v + p + Dz with v in Az and p in N_C(z); w = 0 certifies a solution.
struct GraphPoint {
    Vec z, v, p, w;
};

// Verifies v in Az (resolvent identity), z in C, p in N_C(z) (inequality
// against sampled points of C), and w = v + p + Dz, all to tols.residual.
// Throws std::invalid_argument with a description on failure.
void validate_graph_point(const GraphPoint& gp, const MaxMonotone& A, const Cocoercive& D,
                          const ConvexSet& C, const Tolerances& tols = tol(),
                          int samples = 64, uint64_t seed = 20240817);

// ---- sampled cocoercivity check --------------------------------------------

struct CocoercivityReport {
    int trials = 0;
    double worst_margin = 0.0;  // min over pairs of <x-y,Tx-Ty> - modulus*||Tx-Ty||^2
    bool pass = false;
};

CocoercivityReport check_cocoercive(const std::function<Vec(const Vec&)>& op, double modulus,
                                    const std::function<std::pair<Vec, Vec>()>& sampler,
                                    int trials, const Tolerances& tols = tol());

}  // namespace penflow
