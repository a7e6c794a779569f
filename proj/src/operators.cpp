#include "penflow/operators.hpp"

#include <cmath>

namespace penflow {

namespace {

double spectral_norm(const Mat& M) {
    if (M.size() == 0) return 0.0;
    Eigen::SelfAdjointEigenSolver<Mat> es(M.transpose() * M);
    return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
}

double min_sym_eigenvalue(const Mat& M) {
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (M + M.transpose()));
    return es.eigenvalues().minCoeff();
}

double max_sym_eigenvalue(const Mat& M) {
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (M + M.transpose()));
    return es.eigenvalues().maxCoeff();
}

void require_square(const Mat& M, const char* what) {
    if (M.rows() != M.cols())
        throw std::invalid_argument(std::string(what) + ": matrix must be square");
    if (M.size() > 0 && !M.allFinite())
        throw std::invalid_argument(std::string(what) + ": non-finite entries");
}

Vec soft_threshold(const Vec& x, double t) {
    Vec y(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        if (x[i] > t) y[i] = x[i] - t;
        else if (x[i] < -t) y[i] = x[i] + t;
        else y[i] = 0.0;
    }
    return y;
}

// Solves y = J_{lambda(M + N_set)}(x): the strongly monotone variational
// inequality <(I + lambda M) y - x, u - y> >= 0 for all u in set, by damped
// projected iteration with step 1/(1 + ||M||_2 * lambda).
Vec projected_resolvent(const Mat& M, double op_norm, const ConvexSet& set, double lambda,
                        const Vec& x, const Tolerances& tols) {
    const double step = 1.0 / (1.0 + op_norm * lambda);
    Vec y = project(set, x);
    for (long k = 0; k < tols.inner_cap; ++k) {
        Vec grad = y + lambda * (M * y) - x;
        Vec y_next = project(set, y - step * grad);
        double delta = (y_next - y).norm();
        y = std::move(y_next);
        if (delta <= tols.inner_residual) return y;
    }
    throw InnerIterationFailure("projected resolvent: no convergence within sweep cap");
}

}  // namespace

// ---- MaxMonotone ------------------------------------------------------------

MaxMonotone::MaxMonotone(Desc d, double gamma, const Tolerances& tols)
    : desc_(std::move(d)), gamma_(gamma), dim_(0), op_norm_(0.0) {
    if (!(gamma >= 0.0) || !std::isfinite(gamma))
        throw std::invalid_argument("MaxMonotone: gamma must be finite and >= 0");
    std::visit(
        [&](const auto& op) {
            using T = std::decay_t<decltype(op)>;
            if constexpr (std::is_same_v<T, ZeroOp>) {
                dim_ = op.dim;
                if (gamma != 0.0)
                    throw std::invalid_argument("MaxMonotone(zero): gamma must be 0");
            } else if constexpr (std::is_same_v<T, LinearOp>) {
                require_square(op.M, "MaxMonotone(linear)");
                dim_ = op.M.rows();
                double lo = min_sym_eigenvalue(op.M);
                if (lo < -tols.psd_slack)
                    throw std::invalid_argument(
                        "MaxMonotone(linear): symmetric part not PSD");
                if (gamma > lo + tols.psd_slack)
                    throw std::invalid_argument(
                        "MaxMonotone(linear): gamma exceeds smallest symmetric eigenvalue");
                op_norm_ = spectral_norm(op.M);
            } else if constexpr (std::is_same_v<T, AffineOp>) {
                require_square(op.M, "MaxMonotone(affine)");
                require_dim(op.q, op.M.rows(), "MaxMonotone(affine).q");
                require_finite(op.q, "MaxMonotone(affine).q");
                dim_ = op.M.rows();
                double lo = min_sym_eigenvalue(op.M);
                if (lo < -tols.psd_slack)
                    throw std::invalid_argument(
                        "MaxMonotone(affine): symmetric part not PSD");
                if (gamma > lo + tols.psd_slack)
                    throw std::invalid_argument(
                        "MaxMonotone(affine): gamma exceeds smallest symmetric eigenvalue");
                op_norm_ = spectral_norm(op.M);
            } else if constexpr (std::is_same_v<T, NormalConeOp>) {
                dim_ = op.set.dim();
                if (gamma != 0.0)
                    throw std::invalid_argument("MaxMonotone(normal_cone): gamma must be 0");
            } else if constexpr (std::is_same_v<T, L1Subdifferential>) {
                dim_ = op.dim;
                if (!(op.weight >= 0.0) || !std::isfinite(op.weight))
                    throw std::invalid_argument(
                        "MaxMonotone(subdifferential_l1): weight must be >= 0");
                if (gamma != 0.0)
                    throw std::invalid_argument(
                        "MaxMonotone(subdifferential_l1): gamma must be 0");
            } else {  // LinearPlusNormalCone
                require_square(op.M, "MaxMonotone(sum_linear_plus_normal_cone)");
                if (op.set.dim() != op.M.rows())
                    throw std::invalid_argument(
                        "MaxMonotone(sum_linear_plus_normal_cone): set/matrix dimension mismatch");
                const char* k = op.set.kind();
                if (std::string(k) != "box" && std::string(k) != "affine_subspace")
                    throw std::invalid_argument(
                        "MaxMonotone(sum_linear_plus_normal_cone): set must be box or "
                        "affine_subspace");
                dim_ = op.M.rows();
                double lo = min_sym_eigenvalue(op.M);
                if (lo < -tols.psd_slack)
                    throw std::invalid_argument(
                        "MaxMonotone(sum_linear_plus_normal_cone): symmetric part not PSD");
                if (gamma > std::max(lo, 0.0) + tols.psd_slack)
                    throw std::invalid_argument(
                        "MaxMonotone(sum_linear_plus_normal_cone): gamma exceeds certified "
                        "modulus");
                op_norm_ = spectral_norm(op.M);
            }
        },
        desc_);
    if (dim_ <= 0) throw std::invalid_argument("MaxMonotone: dimension must be positive");
}

const char* MaxMonotone::kind() const {
    return std::visit(
        [](const auto& op) -> const char* {
            using T = std::decay_t<decltype(op)>;
            if constexpr (std::is_same_v<T, ZeroOp>) return "zero";
            else if constexpr (std::is_same_v<T, LinearOp>) return "linear";
            else if constexpr (std::is_same_v<T, AffineOp>) return "affine";
            else if constexpr (std::is_same_v<T, NormalConeOp>) return "normal_cone";
            else if constexpr (std::is_same_v<T, L1Subdifferential>) return "subdifferential_l1";
            else return "sum_linear_plus_normal_cone";
        },
        desc());
}

Vec resolvent(const MaxMonotone& A, double lambda, const Vec& x, const Tolerances& tols) {
    if (!(lambda > 0.0) || !std::isfinite(lambda))
        throw std::invalid_argument("resolvent: lambda must be finite and > 0");
    require_dim(x, A.dim(), "resolvent: x");
    require_finite(x, "resolvent: x");
    return std::visit(
        [&](const auto& op) -> Vec {
            using T = std::decay_t<decltype(op)>;
            if constexpr (std::is_same_v<T, ZeroOp>) {
                return x;
            } else if constexpr (std::is_same_v<T, LinearOp>) {
                Mat T_ = Mat::Identity(op.M.rows(), op.M.cols()) + lambda * op.M;
                return Eigen::PartialPivLU<Mat>(T_).solve(x);
            } else if constexpr (std::is_same_v<T, AffineOp>) {
                Mat T_ = Mat::Identity(op.M.rows(), op.M.cols()) + lambda * op.M;
                return Eigen::PartialPivLU<Mat>(T_).solve(x - lambda * op.q);
            } else if constexpr (std::is_same_v<T, NormalConeOp>) {
                return project(op.set, x);
            } else if constexpr (std::is_same_v<T, L1Subdifferential>) {
                return soft_threshold(x, lambda * op.weight);
            } else {
                return projected_resolvent(op.M, A.matrix_norm(), op.set, lambda, x, tols);
            }
        },
        A.desc());
}

Vec yosida(const MaxMonotone& A, double alpha, const Vec& x, const Tolerances& tols) {
    if (!(alpha > 0.0) || !std::isfinite(alpha))
        throw std::invalid_argument("yosida: alpha must be finite and > 0");
    return (x - resolvent(A, alpha, x, tols)) / alpha;
}

// ---- Cocoercive -------------------------------------------------------------

Cocoercive::Cocoercive(Desc d, double eta, const Tolerances& tols)
    : desc_(std::move(d)), eta_(eta), dim_(0) {
    if (!(eta > 0.0) || !std::isfinite(eta))
        throw std::invalid_argument("Cocoercive: eta must be finite and > 0");
    std::visit(
        [&](const auto& op) {
            using T = std::decay_t<decltype(op)>;
            if constexpr (std::is_same_v<T, ZeroForward>) {
                dim_ = op.dim;  // zero map is eta-cocoercive for every eta > 0
            } else {
                require_square(op.Q, "Cocoercive(gradient_quadratic)");
                require_dim(op.c, op.Q.rows(), "Cocoercive(gradient_quadratic).c");
                require_finite(op.c, "Cocoercive(gradient_quadratic).c");
                dim_ = op.Q.rows();
                if ((op.Q - op.Q.transpose()).cwiseAbs().maxCoeff() > tols.psd_slack)
                    throw std::invalid_argument("Cocoercive(gradient_quadratic): Q not symmetric");
                Eigen::SelfAdjointEigenSolver<Mat> es(op.Q);
                double lo = es.eigenvalues().minCoeff();
                double hi = es.eigenvalues().maxCoeff();
                if (lo < -tols.psd_slack)
                    throw std::invalid_argument("Cocoercive(gradient_quadratic): Q not PSD");
                if (hi > 0.0 && eta > 1.0 / hi + tols.psd_slack)
                    throw std::invalid_argument(
                        "Cocoercive(gradient_quadratic): eta exceeds 1/lambda_max(Q)");
            }
        },
        desc_);
    if (dim_ <= 0) throw std::invalid_argument("Cocoercive: dimension must be positive");
}

const char* Cocoercive::kind() const {
    return std::holds_alternative<ZeroForward>(desc()) ? "zero" : "gradient_quadratic";
}

Vec eval(const Cocoercive& D, const Vec& x) {
    require_dim(x, D.dim(), "eval(D): x");
    require_finite(x, "eval(D): x");
    return std::visit(
        [&](const auto& op) -> Vec {
            using T = std::decay_t<decltype(op)>;
            if constexpr (std::is_same_v<T, ZeroForward>) return Vec::Zero(op.dim);
            else return op.Q * x + op.c;
        },
        D.desc());
}

// ---- Penalty ----------------------------------------------------------------

Penalty::Penalty(Desc d, double mu, std::optional<ConvexSet> zero_set, const Tolerances& tols)
    : desc_(std::move(d)),
      mu_(mu),
      zero_set_(std::holds_alternative<DistSqGradient>(desc_)
                    ? std::get<DistSqGradient>(desc_).set
                    : (zero_set ? std::move(*zero_set)
                                : throw std::invalid_argument(
                                      "Penalty(linear_psd): zero_set required"))),
      dim_(0) {
    if (!(mu > 0.0) || !std::isfinite(mu))
        throw std::invalid_argument("Penalty: mu must be finite and > 0");
    if (auto* g = std::get_if<DistSqGradient>(&desc_)) {
        dim_ = g->set.dim();
        if (mu > 1.0 + tols.psd_slack)
            throw std::invalid_argument("Penalty(dist_sq_gradient): mu must be <= 1");
    } else {
        const Mat& M = std::get<LinearPsd>(desc_).M;
        require_square(M, "Penalty(linear_psd)");
        dim_ = M.rows();
        if ((M - M.transpose()).cwiseAbs().maxCoeff() > tols.psd_slack)
            throw std::invalid_argument("Penalty(linear_psd): M not symmetric");
        double lo = min_sym_eigenvalue(M), hi = max_sym_eigenvalue(M);
        if (lo < -tols.psd_slack)
            throw std::invalid_argument("Penalty(linear_psd): M not PSD");
        if (hi > 0.0 && mu > 1.0 / hi + tols.psd_slack)
            throw std::invalid_argument("Penalty(linear_psd): mu exceeds 1/lambda_max(M)");
        if (zero_set_.dim() != dim_)
            throw std::invalid_argument("Penalty(linear_psd): zero_set dimension mismatch");
        // spot-check that the declared zero set is actually annihilated
        std::mt19937_64 rng(7);
        for (int k = 0; k < 16; ++k) {
            Vec y = sample_point(zero_set_, rng);
            if ((M * y).norm() > tols.residual * (1.0 + y.norm()))
                throw std::invalid_argument("Penalty(linear_psd): zero_set not in ker M");
        }
    }
    if (dim_ <= 0) throw std::invalid_argument("Penalty: dimension must be positive");
}

const char* Penalty::kind() const {
    return std::holds_alternative<DistSqGradient>(desc()) ? "dist_sq_gradient" : "linear_psd";
}

Vec eval(const Penalty& B, const Vec& x) {
    require_dim(x, B.dim(), "eval(B): x");
    require_finite(x, "eval(B): x");
    if (auto* g = std::get_if<DistSqGradient>(&B.desc())) return x - project(g->set, x);
    return std::get<LinearPsd>(B.desc()).M * x;
}

Penalty make_linear_psd_penalty(const Mat& M, const Tolerances& tols) {
    require_square(M, "make_linear_psd_penalty");
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (M + M.transpose()));
    double hi = es.eigenvalues().maxCoeff();
    double mu = hi > 0.0 ? 1.0 / hi : 1.0;
    // kernel basis: eigenvectors with (near-)zero eigenvalue
    std::vector<Eigen::Index> null_idx;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
        if (std::abs(es.eigenvalues()[i]) <= tols.psd_slack * std::max(1.0, hi))
            null_idx.push_back(i);
    Mat basis(M.rows(), Eigen::Index(null_idx.size()));
    for (size_t j = 0; j < null_idx.size(); ++j)
        basis.col(Eigen::Index(j)) = es.eigenvectors().col(null_idx[j]);
    ConvexSet kernel(AffineSubspace{Vec::Zero(M.rows()), basis}, tols);
    return Penalty(LinearPsd{M}, mu, kernel, tols);
}

double fitzpatrick_gap_bound(const Penalty& B, const Vec& p, double beta) {
    if (!std::holds_alternative<DistSqGradient>(B.desc()))
        throw std::invalid_argument(
            "fitzpatrick_gap_bound: closed form only available for dist_sq_gradient penalties");
    if (!(beta > 0.0) || !std::isfinite(beta))
        throw std::invalid_argument("fitzpatrick_gap_bound: beta must be finite and > 0");
    require_dim(p, B.dim(), "fitzpatrick_gap_bound: p");
    require_finite(p, "fitzpatrick_gap_bound: p");
    return 0.5 * p.squaredNorm() / (beta * beta);
}

// ---- graph points -----------------------------------------------------------

void validate_graph_point(const GraphPoint& gp, const MaxMonotone& A, const Cocoercive& D,
                          const ConvexSet& C, const Tolerances& tols, int samples,
                          uint64_t seed) {
    require_dim(gp.z, A.dim(), "GraphPoint.z");
    require_dim(gp.v, A.dim(), "GraphPoint.v");
    require_dim(gp.p, A.dim(), "GraphPoint.p");
    require_dim(gp.w, A.dim(), "GraphPoint.w");
    const double scale = 1.0 + gp.z.norm() + gp.v.norm() + gp.p.norm();

    // v in Az  <=>  J_A(z + v) = z
    Vec back = resolvent(A, 1.0, gp.z + gp.v, tols);
    if ((back - gp.z).norm() > tols.residual * scale)
        throw std::invalid_argument("GraphPoint: v not in Az (resolvent identity fails)");

    if (dist(C, gp.z) > tols.residual * scale)
        throw std::invalid_argument("GraphPoint: z not in C");

    // p in N_C(z): <y - z, p> <= 0 for sampled y in C
    std::mt19937_64 rng(seed);
    for (int k = 0; k < samples; ++k) {
        Vec y = sample_point(C, rng);
        if ((y - gp.z).dot(gp.p) > tols.residual * scale * (1.0 + y.norm()))
            throw std::invalid_argument("GraphPoint: p fails the normal-cone inequality");
    }

    Vec resid = gp.v + gp.p + eval(D, gp.z) - gp.w;
    if (resid.norm() > tols.residual * scale)
        throw std::invalid_argument("GraphPoint: w != v + p + Dz");
}

CocoercivityReport check_cocoercive(const std::function<Vec(const Vec&)>& op, double modulus,
                                    const std::function<std::pair<Vec, Vec>()>& sampler,
                                    int trials, const Tolerances& tols) {
    CocoercivityReport rep;
    rep.trials = trials;
    rep.worst_margin = std::numeric_limits<double>::infinity();
    for (int k = 0; k < trials; ++k) {
        auto [x, y] = sampler();
        Vec dT = op(x) - op(y);
        double margin = (x - y).dot(dT) - modulus * dT.squaredNorm();
        rep.worst_margin = std::min(rep.worst_margin, margin);
    }
    if (trials == 0) rep.worst_margin = 0.0;
    rep.pass = rep.worst_margin >= -tols.cocoercivity_margin;
    return rep;
}

}  // namespace penflow
