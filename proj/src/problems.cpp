#include "penflow/problems.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>

namespace penflow {

namespace {

double spectral_norm(const Mat& M) {
    if (M.size() == 0) return 0.0;
    return Eigen::JacobiSVD<Mat>(M).singularValues()(0);
}

Vec e_i(Eigen::Index n, Eigen::Index i) {
    Vec v = Vec::Zero(n);
    v[i] = 1.0;
    return v;
}

NamedInstance make_p0() {
    const Eigen::Index n = 2;
    ConvexSet all(AffineSubspace{Vec::Zero(n), Mat::Identity(n, n)});
    ProblemInstance pr(MaxMonotone(ZeroOp{n}), Cocoercive(ZeroForward{n}, 1.0),
                       Penalty(DistSqGradient{all}, 1.0));
    GraphPoint gp{Vec::Zero(n), Vec::Zero(n), Vec::Zero(n), Vec::Zero(n)};
    return NamedInstance{"P0_zero", std::move(pr), all, std::move(gp)};
}

NamedInstance make_p1() {
    const Eigen::Index n = 4;
    Mat S = Mat::Zero(n, n);
    S(0, 2) = 1.0;
    S(1, 3) = 1.0;
    S(2, 0) = -1.0;
    S(3, 1) = -1.0;
    Mat M = 2.0 * Mat::Identity(n, n) + S;

    Vec c(n);
    c << -1.0, 0.0, 0.0, 0.0;

    Mat basis(n, 2);
    basis.col(0) = e_i(n, 0);
    basis.col(1) = e_i(n, 1);
    ConvexSet plane(AffineSubspace{Vec::Zero(n), basis});

    ProblemInstance pr(MaxMonotone(LinearOp{M}, 2.0),
                       Cocoercive(GradQuadratic{Mat::Identity(n, n), c}, 1.0),
                       Penalty(DistSqGradient{plane}, 1.0));

    // 0 = Az + Dz + p with z = (1/3,0,0,0): Az = (2/3,0,-1/3,0),
    // Dz = z - e_0 = (-2/3,0,0,0), p = (0,0,1/3,0) normal to the plane.
    Vec z(n), v(n), p(n);
    z << 1.0 / 3.0, 0.0, 0.0, 0.0;
    v << 2.0 / 3.0, 0.0, -1.0 / 3.0, 0.0;
    p << 0.0, 0.0, 1.0 / 3.0, 0.0;
    GraphPoint gp{z, v, p, Vec::Zero(n)};
    return NamedInstance{"P1_strongly_monotone", std::move(pr), z, std::move(gp)};
}

NamedInstance make_p2() {
    const Eigen::Index n = 2;
    Mat M(n, n);
    M << 0.0, 1.0, -1.0, 0.0;

    ConvexSet line(AffineSubspace{Vec::Zero(n), e_i(n, 0)});
    ProblemInstance pr(MaxMonotone(LinearOp{M}, 0.0), Cocoercive(ZeroForward{n}, 1.0),
                       Penalty(DistSqGradient{line}, 1.0));

    // Every (a, 0) solves the inclusion: A(a,0) = (0,-a) is normal to the
    // line. Certificate taken at a = 1 so that p is nonzero.
    Vec z(n), v(n), p(n);
    z << 1.0, 0.0;
    v << 0.0, -1.0;
    p << 0.0, 1.0;
    GraphPoint gp{z, v, p, Vec::Zero(n)};
    return NamedInstance{"P2_monotone_line", std::move(pr), line, std::move(gp)};
}

NamedInstance make_p3() {
    const Eigen::Index n = 2;
    Vec c(n);
    c << -3.0, -0.3;
    Vec lo = Vec::Constant(n, -1.0), hi = Vec::Constant(n, 1.0);
    ConvexSet box(Box{lo, hi});

    ProblemInstance pr(MaxMonotone(L1Subdifferential{n, 1.0}),
                       Cocoercive(GradQuadratic{Mat::Identity(n, n), c}, 1.0),
                       Penalty(DistSqGradient{box}, 1.0));

    // z = (1,0): Dz = (-2,-0.3); v = (1, 0.3) with v_0 = sign(z_0),
    // v_1 in [-1,1]; p = (1,0) in N_box at the x_0 = 1 face.
    Vec z(n), v(n), p(n);
    z << 1.0, 0.0;
    v << 1.0, 0.3;
    p << 1.0, 0.0;
    GraphPoint gp{z, v, p, Vec::Zero(n)};
    return NamedInstance{"P3_l1_box", std::move(pr), z, std::move(gp)};
}

}  // namespace

const std::vector<std::string>& builtin_ids() {
    static const std::vector<std::string> ids = {"P0_zero", "P1_strongly_monotone",
                                                 "P2_monotone_line", "P3_l1_box"};
    return ids;
}

NamedInstance builtin(const std::string& id) {
    NamedInstance inst = [&] {
        if (id == "P0" || id == "P0_zero") return make_p0();
        if (id == "P1" || id == "P1_strongly_monotone") return make_p1();
        if (id == "P2" || id == "P2_monotone_line") return make_p2();
        if (id == "P3" || id == "P3_l1_box") return make_p3();
        throw std::invalid_argument("builtin: unknown id '" + id +
                                    "' (expected P0_zero, P1_strongly_monotone, "
                                    "P2_monotone_line or P3_l1_box)");
    }();
    validate_graph_point(inst.certificate, inst.instance.A, inst.instance.D,
                         inst.instance.constraint());
    return inst;
}

// ---- constrained resolvent ---------------------------------------------------

namespace {

Vec soft_clamp(const Vec& y, double t, const Box& box) {
    Vec z(y.size());
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        double s = y[i] > t ? y[i] - t : (y[i] < -t ? y[i] + t : 0.0);
        z[i] = std::min(std::max(s, box.lo[i]), box.hi[i]);
    }
    return z;
}

Vec damped_projected(const Mat& M, const Vec& q, const ConvexSet& C, double s, const Vec& y,
                     double op_norm, const Tolerances& tols) {
    const double step = 1.0 / (1.0 + op_norm * s);
    Vec u = project(C, y);
    for (long k = 0; k < tols.inner_cap; ++k) {
        Vec grad = u + s * (M * u) + s * q - y;
        Vec u_next = project(C, u - step * grad);
        double delta = (u_next - u).norm();
        u = std::move(u_next);
        if (delta <= tols.inner_residual) return u;
    }
    throw InnerIterationFailure("constrained resolvent: no convergence within sweep cap");
}

}  // namespace

Vec constrained_resolvent(const MaxMonotone& A, const ConvexSet& C, double s, const Vec& y,
                          const Tolerances& tols) {
    if (!(s > 0.0) || !std::isfinite(s))
        throw std::invalid_argument("constrained_resolvent: s must be finite and > 0");
    require_dim(y, A.dim(), "constrained_resolvent: y");
    if (C.dim() != A.dim())
        throw std::invalid_argument("constrained_resolvent: set/operator dimension mismatch");
    const std::string a_kind = A.kind();
    const std::string c_kind = C.kind();
    if (c_kind == "singleton") return std::get<Singleton>(C.desc()).point;
    if (a_kind == "zero") return project(C, y);
    if (a_kind == "linear") {
        const auto& op = std::get<LinearOp>(A.desc());
        return damped_projected(op.M, Vec::Zero(y.size()), C, s, y, A.matrix_norm(), tols);
    }
    if (a_kind == "affine") {
        const auto& op = std::get<AffineOp>(A.desc());
        return damped_projected(op.M, op.q, C, s, y, A.matrix_norm(), tols);
    }
    if (a_kind == "subdifferential_l1") {
        const auto& op = std::get<L1Subdifferential>(A.desc());
        if (c_kind == "box") return soft_clamp(y, s * op.weight, std::get<Box>(C.desc()));
        if (c_kind == "affine_subspace" &&
            std::get<AffineSubspace>(C.desc()).basis.cols() == A.dim()) {
            Vec z(y.size());  // full-dimensional subspace: the constraint is vacuous
            for (Eigen::Index i = 0; i < y.size(); ++i) {
                double t = s * op.weight;
                z[i] = y[i] > t ? y[i] - t : (y[i] < -t ? y[i] + t : 0.0);
            }
            return z;
        }
        throw std::invalid_argument(
            "constrained_resolvent: l1 operator is only supported with a box constraint");
    }
    throw std::invalid_argument(std::string("constrained_resolvent: unsupported operator kind '") +
                                A.kind() + "'");
}

double inclusion_residual(const ProblemInstance& pr, const Vec& z, double s,
                          const Tolerances& tols) {
    Vec y = z - s * eval(pr.D, z);
    return (z - constrained_resolvent(pr.A, pr.constraint(), s, y, tols)).norm() / s;
}

// ---- oracle ------------------------------------------------------------------

namespace {

// Refined grid search over C (dim <= 2): the returned iterate must have a
// fixed-point residual no worse than twice the best grid point's.
void grid_cross_check(const ProblemInstance& pr, double s, const Vec& zbar,
                      const Tolerances& tols) {
    const ConvexSet& C = pr.constraint();
    const std::string kind = C.kind();

    Vec center, half;
    Mat dirs;
    const Box* clip = nullptr;
    if (kind == "box") {
        const auto& b = std::get<Box>(C.desc());
        center = 0.5 * (b.lo + b.hi);
        half = 0.5 * (b.hi - b.lo);
        dirs = Mat::Identity(C.dim(), C.dim());
        clip = &b;
    } else if (kind == "affine_subspace") {
        const auto& a = std::get<AffineSubspace>(C.desc());
        if (a.basis.cols() == 0) return;
        center = a.basis.transpose() * (zbar - a.anchor);
        half = Vec::Constant(a.basis.cols(), 3.0);
        dirs = a.basis;
    } else {
        return;  // singleton is trivial; other kinds are not used by the oracle
    }

    const auto& anchor_term = [&](const Vec& u) -> Vec {
        Vec z = dirs * u;
        if (kind == "affine_subspace") z += std::get<AffineSubspace>(C.desc()).anchor;
        if (clip) z = z.cwiseMax(clip->lo).cwiseMin(clip->hi);
        return z;
    };

    const int steps = 16;
    double best_r = std::numeric_limits<double>::infinity();
    Vec u = center;
    for (int level = 0; level < 12 && half.maxCoeff() > 4e-7; ++level) {
        Vec u_best = u;
        Vec probe = Vec::Zero(u.size());
        std::vector<long> idx(static_cast<std::size_t>(u.size()), 0);
        bool done = false;
        while (!done) {
            for (Eigen::Index j = 0; j < u.size(); ++j)
                probe[j] = u[j] + half[j] * (2.0 * idx[static_cast<std::size_t>(j)] / steps - 1.0);
            double r = inclusion_residual(pr, anchor_term(probe), s, tols);
            if (r < best_r) {
                best_r = r;
                u_best = probe;
            }
            done = true;
            for (std::size_t j = 0; j < idx.size(); ++j) {
                if (++idx[j] <= steps) {
                    done = false;
                    break;
                }
                idx[j] = 0;
            }
        }
        u = u_best;
        half *= 0.25;
    }

    double r_bar = inclusion_residual(pr, zbar, s, tols);
    if (r_bar > std::max(2.0 * best_r, 1e-9))
        throw OracleFailure("oracle_solve: grid cross-validation found a better point (residual " +
                            std::to_string(best_r) + " vs " + std::to_string(r_bar) + ")");
}

}  // namespace

Vec oracle_solve(const ProblemInstance& pr, double tol_target, Vec z0) {
    if (!(tol_target > 0.0) || !std::isfinite(tol_target))
        throw std::invalid_argument("oracle_solve: tol must be finite and > 0");
    require_dim(z0, pr.dim(), "oracle_solve: z0");
    // The cap by 1/(1 + ||M||) keeps the inner projected iteration a
    // contraction whatever the scale of A.
    const double s =
        std::min({pr.D.eta(), 0.1, 1.0 / (1.0 + pr.A.matrix_norm())}) / 2.0;
    const Tolerances& tols = tol();
    Vec z = std::move(z0);
    bool converged = false;
    const long cap = 10000000L;
    try {
        for (long k = 0; k < cap; ++k) {
            Vec y = z - s * eval(pr.D, z);
            Vec z_next = constrained_resolvent(pr.A, pr.constraint(), s, y, tols);
            double delta = (z_next - z).norm();
            z = std::move(z_next);
            if (delta <= tol_target * s) {
                converged = true;
                break;
            }
        }
    } catch (const InnerIterationFailure& e) {
        throw OracleFailure(std::string("oracle_solve: ") + e.what());
    }
    if (!converged) throw OracleFailure("oracle_solve: iteration cap reached");
    if (pr.dim() <= 2) grid_cross_check(pr, s, z, tols);
    return z;
}

Vec oracle_solve(const ProblemInstance& pr, double tol_target) {
    return oracle_solve(pr, tol_target, project(pr.constraint(), Vec::Zero(pr.dim())));
}

// ---- certificates ------------------------------------------------------------

namespace {

// Snaps near-active coordinates onto the box faces / sphere / hyperplane so
// normal directions at z are exact. eps is absolute up to the local scale.
Vec snap_to_faces(const ConvexSet& C, Vec z) {
    const double eps = 1e-9;
    if (C.kind() == std::string("box")) {
        const auto& b = std::get<Box>(C.desc());
        for (Eigen::Index i = 0; i < z.size(); ++i) {
            double scale = 1.0 + std::max(std::abs(b.lo[i]), std::abs(b.hi[i]));
            if (z[i] >= b.hi[i] - eps * scale) z[i] = b.hi[i];
            else if (z[i] <= b.lo[i] + eps * scale) z[i] = b.lo[i];
        }
    } else if (C.kind() == std::string("ball")) {
        const auto& b = std::get<Ball>(C.desc());
        Vec d = z - b.center;
        double r = d.norm();
        if (r > 0.0 && std::abs(r - b.radius) <= eps * (1.0 + b.radius))
            z = b.center + (b.radius / r) * d;
    } else if (C.kind() == std::string("halfspace")) {
        const auto& h = std::get<Halfspace>(C.desc());
        double slack = h.normal.dot(z) - h.offset;
        if (std::abs(slack) <= eps * (1.0 + std::abs(h.offset)))
            z -= (slack / h.normal.squaredNorm()) * h.normal;
    }
    return z;
}

// Component of r representable in N_C(z); z must already be snapped.
Vec normal_projection(const ConvexSet& C, const Vec& z, const Vec& r) {
    const std::string kind = C.kind();
    if (kind == "box") {
        const auto& b = std::get<Box>(C.desc());
        Vec p = Vec::Zero(r.size());
        for (Eigen::Index i = 0; i < r.size(); ++i) {
            bool at_hi = z[i] == b.hi[i], at_lo = z[i] == b.lo[i];
            if (at_hi && at_lo) p[i] = r[i];
            else if (at_hi) p[i] = std::max(r[i], 0.0);
            else if (at_lo) p[i] = std::min(r[i], 0.0);
        }
        return p;
    }
    if (kind == "affine_subspace") {
        const auto& a = std::get<AffineSubspace>(C.desc());
        return r - a.basis * (a.basis.transpose() * r);
    }
    if (kind == "singleton") return r;
    if (kind == "ball") {
        const auto& b = std::get<Ball>(C.desc());
        Vec d = z - b.center;
        double n = d.norm();
        if (n == 0.0 || std::abs(n - b.radius) > 1e-12 * (1.0 + b.radius))
            return Vec::Zero(r.size());
        return std::max(d.dot(r) / (n * n), 0.0) * d;
    }
    const auto& h = std::get<Halfspace>(C.desc());
    if (std::abs(h.normal.dot(z) - h.offset) > 1e-12 * (1.0 + std::abs(h.offset)))
        return Vec::Zero(r.size());
    return std::max(h.normal.dot(r) / h.normal.squaredNorm(), 0.0) * h.normal;
}

}  // namespace

GraphPoint build_certificate(const ProblemInstance& pr, const Vec& z_approx) {
    require_dim(z_approx, pr.dim(), "build_certificate: z");
    const ConvexSet& C = pr.constraint();
    Vec z = snap_to_faces(C, project(C, z_approx));

    const std::string a_kind = pr.A.kind();
    if (a_kind == "subdifferential_l1" && C.kind() == std::string("box")) {
        const auto& b = std::get<Box>(C.desc());
        const double eps0 = 1e-9 * (1.0 + z.cwiseAbs().maxCoeff());
        for (Eigen::Index i = 0; i < z.size(); ++i)
            if (std::abs(z[i]) <= eps0 && b.lo[i] <= 0.0 && b.hi[i] >= 0.0) z[i] = 0.0;
        const double wt = std::get<L1Subdifferential>(pr.A.desc()).weight;
        Vec dz = eval(pr.D, z);
        Vec v(z.size()), p(z.size());
        for (Eigen::Index i = 0; i < z.size(); ++i) {
            double r = -dz[i];
            double vlo = z[i] > 0.0 ? wt : -wt;
            double vhi = z[i] < 0.0 ? -wt : wt;
            v[i] = std::min(std::max(r, vlo), vhi);
            double left = r - v[i];
            bool at_hi = z[i] == b.hi[i], at_lo = z[i] == b.lo[i];
            if (at_hi && at_lo) p[i] = left;
            else if (at_hi) p[i] = std::max(left, 0.0);
            else if (at_lo) p[i] = std::min(left, 0.0);
            else p[i] = 0.0;
        }
        return GraphPoint{z, v, p, v + p + dz};
    }

    Vec v;
    if (a_kind == "zero") v = Vec::Zero(z.size());
    else if (a_kind == "linear") v = std::get<LinearOp>(pr.A.desc()).M * z;
    else if (a_kind == "affine") {
        const auto& op = std::get<AffineOp>(pr.A.desc());
        v = op.M * z + op.q;
    } else if (a_kind == "subdifferential_l1") {
        const double wt = std::get<L1Subdifferential>(pr.A.desc()).weight;
        Vec dz = eval(pr.D, z);
        v.resize(z.size());
        for (Eigen::Index i = 0; i < z.size(); ++i)
            v[i] = z[i] != 0.0 ? (z[i] > 0.0 ? wt : -wt) : std::min(std::max(-dz[i], -wt), wt);
    } else {
        throw std::invalid_argument(std::string("build_certificate: unsupported operator kind '") +
                                    pr.A.kind() + "'");
    }

    Vec dz = eval(pr.D, z);
    Vec p = normal_projection(C, z, Vec(-(v + dz)));
    return GraphPoint{z, v, p, v + p + dz};
}

// ---- random instances ----------------------------------------------------------

namespace {

Mat randn_mat(std::mt19937_64& eng, Eigen::Index rows, Eigen::Index cols) {
    std::normal_distribution<double> g(0.0, 1.0);
    Mat M(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i) M(i, j) = g(eng);
    return M;
}

NamedInstance draw_instance(std::mt19937_64& eng, std::uint64_t seed, int dim, double gamma) {
    const Eigen::Index n = dim;
    const double root_n = std::sqrt(static_cast<double>(n));

    Mat F = randn_mat(eng, n, n) / root_n;
    Mat psd = F.transpose() * F;
    psd /= std::max(1.0, spectral_norm(psd));
    Mat G = randn_mat(eng, n, n) / root_n;
    Mat skew = 0.5 * (G - G.transpose());
    skew /= std::max(1.0, spectral_norm(skew));
    Mat M = gamma * Mat::Identity(n, n) + psd + skew;
    MaxMonotone A(LinearOp{M}, gamma);

    Mat H = randn_mat(eng, n, n) / root_n;
    Mat Q = H.transpose() * H;
    // Keep A + D strongly monotone so the oracle iteration contracts linearly.
    if (gamma == 0.0) Q += 0.5 * Mat::Identity(n, n);
    double q_norm = spectral_norm(Q);
    Vec c = 0.5 * randn_mat(eng, n, 1).col(0);
    Cocoercive D(GradQuadratic{Q, c}, 1.0 / q_norm);

    std::uniform_real_distribution<double> u01(0.0, 1.0);
    ConvexSet C = [&]() -> ConvexSet {
        if (eng() % 2 == 0) {
            Vec lo(n), hi(n);
            for (Eigen::Index i = 0; i < n; ++i) {
                lo[i] = -1.0 - u01(eng);
                hi[i] = 1.0 + u01(eng);
            }
            return ConvexSet(Box{lo, hi});
        }
        Eigen::Index m = 1 + static_cast<Eigen::Index>(eng() % static_cast<std::uint64_t>(n));
        Mat raw = randn_mat(eng, n, m);
        Mat basis = Eigen::HouseholderQR<Mat>(raw).householderQ() * Mat::Identity(n, m);
        Vec anchor = 0.3 * randn_mat(eng, n, 1).col(0);
        return ConvexSet(AffineSubspace{anchor, basis});
    }();
    Penalty B(DistSqGradient{C}, 1.0);

    ProblemInstance pr(std::move(A), std::move(D), std::move(B));
    Vec z = oracle_solve(pr, 1e-10);
    GraphPoint cert = build_certificate(pr, z);

    Tolerances relaxed = tol();
    relaxed.residual = 1e-8;
    validate_graph_point(cert, pr.A, pr.D, pr.constraint(), relaxed);
    double scale = 1.0 + cert.z.norm() + cert.v.norm() + cert.p.norm();
    if (cert.w.norm() > 1e-8 * scale)
        throw OracleFailure("random_instance: certificate residual too large");

    std::string id = "random_s" + std::to_string(seed) + "_d" + std::to_string(dim);
    return NamedInstance{std::move(id), std::move(pr), cert.z, std::move(cert)};
}

}  // namespace

NamedInstance random_instance(std::uint64_t seed, int dim, double gamma) {
    if (dim < 1 || dim > 64)
        throw std::invalid_argument("random_instance: dim must lie in [1, 64]");
    if (!(gamma >= 0.0) || !std::isfinite(gamma))
        throw std::invalid_argument("random_instance: gamma must be finite and >= 0");
    const int attempts = 8;
    std::string last_error = "no attempt made";
    for (int k = 0; k < attempts; ++k) {
        std::mt19937_64 eng(seed + 0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(k));
        try {
            return draw_instance(eng, seed, dim, gamma);
        } catch (const OracleFailure& e) {
            last_error = e.what();
        } catch (const InnerIterationFailure& e) {
            last_error = e.what();
        } catch (const std::invalid_argument& e) {
            last_error = e.what();
        }
    }
    throw OracleFailure("random_instance: all redraws failed; last error: " + last_error);
}

}  // namespace penflow
