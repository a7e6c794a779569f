#include "penflow/sets.hpp"

#include <cmath>
#include <limits>

namespace penflow {

const Tolerances& tol() {
    static const Tolerances t{};
    return t;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

ConvexSet::Desc validate(ConvexSet::Desc d, const Tolerances& tols) {
    if (auto* b = std::get_if<Box>(&d)) {
        require_finite(b->lo, "Box.lo");
        require_finite(b->hi, "Box.hi");
        require_dim(b->hi, b->lo.size(), "Box.hi");
        if (((b->hi - b->lo).array() < 0.0).any())
            throw std::invalid_argument("Box: lo > hi in some coordinate");
    } else if (auto* s = std::get_if<Ball>(&d)) {
        require_finite(s->center, "Ball.center");
        if (!std::isfinite(s->radius) || s->radius < 0.0)
            throw std::invalid_argument("Ball: radius must be finite and >= 0");
        if (s->radius == 0.0)  // degenerate ball is a singleton
            return Singleton{s->center};
    } else if (auto* a = std::get_if<AffineSubspace>(&d)) {
        require_finite(a->anchor, "AffineSubspace.anchor");
        if (a->basis.size() > 0 && !a->basis.allFinite())
            throw std::invalid_argument("AffineSubspace.basis: non-finite entries");
        if (a->basis.cols() > 0 && a->basis.rows() != a->anchor.size())
            throw std::invalid_argument("AffineSubspace: basis rows != anchor dimension");
        if (a->basis.cols() > a->basis.rows())
            throw std::invalid_argument("AffineSubspace: more directions than ambient dimension");
        if (a->basis.cols() > 0) {
            Mat gram = a->basis.transpose() * a->basis;
            double drift = (gram - Mat::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff();
            if (drift > tols.orthonormal_drift) {
                Eigen::HouseholderQR<Mat> qr(a->basis);
                Mat q = qr.householderQ() * Mat::Identity(a->basis.rows(), a->basis.cols());
                Mat r = qr.matrixQR().topRows(a->basis.cols()).triangularView<Eigen::Upper>();
                for (Eigen::Index j = 0; j < r.cols(); ++j)
                    if (std::abs(r(j, j)) < 1e-12)
                        throw std::invalid_argument("AffineSubspace: basis is rank deficient");
                a->basis = q;
            }
        }
    } else if (auto* h = std::get_if<Halfspace>(&d)) {
        require_finite(h->normal, "Halfspace.normal");
        if (!std::isfinite(h->offset))
            throw std::invalid_argument("Halfspace: non-finite offset");
        if (h->normal.norm() == 0.0)
            throw std::invalid_argument("Halfspace: zero normal");
    } else {
        require_finite(std::get<Singleton>(d).point, "Singleton.point");
    }
    return d;
}

Eigen::Index dim_of(const ConvexSet::Desc& d) {
    return std::visit(
        [](const auto& s) -> Eigen::Index {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, Box>) return s.lo.size();
            else if constexpr (std::is_same_v<T, Ball>) return s.center.size();
            else if constexpr (std::is_same_v<T, AffineSubspace>) return s.anchor.size();
            else if constexpr (std::is_same_v<T, Halfspace>) return s.normal.size();
            else return s.point.size();
        },
        d);
}

}  // namespace

ConvexSet::ConvexSet(Desc d, const Tolerances& tols)
    : desc_(validate(std::move(d), tols)), dim_(dim_of(desc_)) {}

const char* ConvexSet::kind() const {
    return std::visit(
        [](const auto& s) -> const char* {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, Box>) return "box";
            else if constexpr (std::is_same_v<T, Ball>) return "ball";
            else if constexpr (std::is_same_v<T, AffineSubspace>) return "affine_subspace";
            else if constexpr (std::is_same_v<T, Halfspace>) return "halfspace";
            else return "singleton";
        },
        desc());
}

Vec project(const ConvexSet& C, const Vec& x) {
    require_dim(x, C.dim(), "project: x");
    require_finite(x, "project: x");
    return std::visit(
        [&](const auto& s) -> Vec {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, Box>) {
                return x.cwiseMax(s.lo).cwiseMin(s.hi);
            } else if constexpr (std::is_same_v<T, Ball>) {
                Vec d = x - s.center;
                double n = d.norm();
                if (n <= s.radius) return x;
                return s.center + (s.radius / n) * d;
            } else if constexpr (std::is_same_v<T, AffineSubspace>) {
                if (s.basis.cols() == 0) return s.anchor;
                return s.anchor + s.basis * (s.basis.transpose() * (x - s.anchor));
            } else if constexpr (std::is_same_v<T, Halfspace>) {
                double excess = s.normal.dot(x) - s.offset;
                if (excess <= 0.0) return x;
                return x - (excess / s.normal.squaredNorm()) * s.normal;
            } else {
                return s.point;
            }
        },
        C.desc());
}

double dist(const ConvexSet& C, const Vec& x) { return (x - project(C, x)).norm(); }

bool contains(const ConvexSet& C, const Vec& x, double tolerance) {
    return dist(C, x) <= tolerance;
}

double support(const ConvexSet& C, const Vec& u, const Tolerances& tols) {
    require_dim(u, C.dim(), "support: u");
    require_finite(u, "support: u");
    return std::visit(
        [&](const auto& s) -> double {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, Box>) {
                double acc = 0.0;
                for (Eigen::Index i = 0; i < u.size(); ++i)
                    acc += std::max(s.lo[i] * u[i], s.hi[i] * u[i]);
                return acc;
            } else if constexpr (std::is_same_v<T, Ball>) {
                return s.center.dot(u) + s.radius * u.norm();
            } else if constexpr (std::is_same_v<T, AffineSubspace>) {
                // finite only when u is orthogonal to every direction
                if (s.basis.cols() > 0) {
                    double tangential = (s.basis.transpose() * u).norm();
                    if (tangential > tols.orthonormal_drift * (1.0 + u.norm())) return kInf;
                }
                return s.anchor.dot(u);
            } else if constexpr (std::is_same_v<T, Halfspace>) {
                // finite only for u = t * normal with t >= 0
                double t = s.normal.dot(u) / s.normal.squaredNorm();
                double residual = (u - t * s.normal).norm();
                if (t < -tols.orthonormal_drift * (1.0 + u.norm()) ||
                    residual > tols.orthonormal_drift * (1.0 + u.norm()))
                    return kInf;
                return std::max(t, 0.0) * s.offset;
            } else {
                return s.point.dot(u);
            }
        },
        C.desc());
}

Vec sample_point(const ConvexSet& C, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    return std::visit(
        [&](const auto& s) -> Vec {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, Box>) {
                Vec y(s.lo.size());
                for (Eigen::Index i = 0; i < y.size(); ++i)
                    y[i] = s.lo[i] + unit(rng) * (s.hi[i] - s.lo[i]);
                return y;
            } else if constexpr (std::is_same_v<T, Ball>) {
                Vec d(s.center.size());
                for (Eigen::Index i = 0; i < d.size(); ++i) d[i] = gauss(rng);
                double n = d.norm();
                if (n == 0.0) return s.center;
                double r = s.radius * std::pow(unit(rng), 1.0 / double(d.size()));
                return s.center + (r / n) * d;
            } else if constexpr (std::is_same_v<T, AffineSubspace>) {
                Vec y = s.anchor;
                for (Eigen::Index j = 0; j < s.basis.cols(); ++j)
                    y += (3.0 * (2.0 * unit(rng) - 1.0)) * s.basis.col(j);
                return y;
            } else if constexpr (std::is_same_v<T, Halfspace>) {
                Vec y(s.normal.size());
                for (Eigen::Index i = 0; i < y.size(); ++i) y[i] = 3.0 * gauss(rng);
                double excess = s.normal.dot(y) - s.offset;
                if (excess > 0.0) y -= (excess / s.normal.squaredNorm()) * s.normal;
                return y;
            } else {
                return s.point;
            }
        },
        C.desc());
}

}  // namespace penflow
