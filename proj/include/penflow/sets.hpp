#pragma once

#include <random>
#include <variant>

#include "penflow/point.hpp"
#include "penflow/tolerances.hpp"

namespace penflow {

// Closed convex sets with exact projections.

struct Box {
    Vec lo, hi;  // lo <= hi componentwise; equal entries pin a coordinate
};

struct Ball {
    Vec center;
    double radius;  // > 0; a zero radius is normalized to Singleton on construction
};

// { anchor + basis * u : u in R^k }. Basis columns are orthonormal; the
// constructor re-orthonormalizes if they have drifted beyond the tolerance.
struct AffineSubspace {
    Vec anchor;
    Mat basis;  // n x k, k >= 0 (k = 0 means the single point {anchor})
};

struct Halfspace {
    Vec normal;  // nonzero
    double offset;  // { x : <normal, x> <= offset }
};

struct Singleton {
    Vec point;
};

class ConvexSet {
  public:
    using Desc = std::variant<Box, Ball, AffineSubspace, Halfspace, Singleton>;

    explicit ConvexSet(Desc d, const Tolerances& tols = tol());

    const Desc& desc() const { return desc_; }
    Eigen::Index dim() const { return dim_; }
    const char* kind() const;

  private:
    Desc desc_;
    Eigen::Index dim_;
};

Vec project(const ConvexSet& C, const Vec& x);
double dist(const ConvexSet& C, const Vec& x);
bool contains(const ConvexSet& C, const Vec& x, double tolerance);

// sigma_C(u) = sup_{y in C} <y,u>. Returns +infinity where the set is
// unbounded in direction u; callers must branch on std::isinf explicitly.
double support(const ConvexSet& C, const Vec& u, const Tolerances& tols = tol());

// A point of C, used by sampled certificates (normal-cone witnesses,
// cocoercivity draws). Unbounded sets are sampled within a moderate window.
Vec sample_point(const ConvexSet& C, std::mt19937_64& rng);

}  // namespace penflow
