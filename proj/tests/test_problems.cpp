#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>

#include "penflow/problems.hpp"

using namespace penflow;

namespace {

Vec v2(double a, double b) {
    Vec v(2);
    v << a, b;
    return v;
}

}  // namespace

TEST_CASE("builtin certificates are exact graph points with w = 0") {
    for (const std::string& id : builtin_ids()) {
        CAPTURE(id);
        NamedInstance ni = builtin(id);  // builtin() validates the certificate internally
        CHECK(ni.certificate.w.norm() == 0.0);
        CHECK(contains(ni.instance.constraint(), ni.certificate.z, 1e-12));
    }
    CHECK(builtin("P1").id == "P1_strongly_monotone");
    CHECK(builtin("P1_strongly_monotone").id == "P1_strongly_monotone");
    CHECK_THROWS_AS(builtin("P9"), std::invalid_argument);
}

TEST_CASE("oracle reproduces the analytic solutions of the builtins") {
    NamedInstance p1 = builtin("P1");
    Vec z1 = oracle_solve(p1.instance);
    CHECK((z1 - std::get<Vec>(p1.solution)).norm() <= 1e-8);

    NamedInstance p3 = builtin("P3");
    Vec z3 = oracle_solve(p3.instance);
    CHECK((z3 - std::get<Vec>(p3.solution)).norm() <= 1e-8);

    // P0 has no forces at all: the starting point is already stationary
    NamedInstance p0 = builtin("P0");
    Vec start = v2(0.4, -0.7);
    CHECK((oracle_solve(p0.instance, 1e-10, start) - start).norm() == 0.0);
}

TEST_CASE("P2's solution set is a line of stationary points") {
    NamedInstance p2 = builtin("P2");
    const ConvexSet& sol = std::get<ConvexSet>(p2.solution);
    CHECK(std::string(sol.kind()) == "affine_subspace");
    std::mt19937_64 rng(5150);
    for (int i = 0; i < 10; ++i) {
        Vec z = sample_point(sol, rng);
        CHECK(inclusion_residual(p2.instance, z, 0.05) <= 1e-10 * (1.0 + z.norm()));
    }
    // points off the line are not stationary
    CHECK(inclusion_residual(p2.instance, v2(0.0, 1.0), 0.05) > 1e-3);
}

TEST_CASE("scalar l1 + box instance solves 0 in d|z| + z - 3 + N_[-1,1](z)") {
    ProblemInstance pr(
        MaxMonotone(L1Subdifferential{1, 1.0}),
        Cocoercive(GradQuadratic{Mat::Identity(1, 1), Vec::Constant(1, -3.0)}, 1.0),
        Penalty(DistSqGradient{ConvexSet(Box{Vec::Constant(1, -1.0), Vec::Constant(1, 1.0)})},
                1.0));
    Vec z = oracle_solve(pr);
    CHECK(std::abs(z[0] - 1.0) <= 1e-6);
    GraphPoint gp = build_certificate(pr, z);
    CHECK_NOTHROW(validate_graph_point(gp, pr.A, pr.D, pr.constraint()));
}

TEST_CASE("oracle endpoint is independent of the starting point on P1") {
    NamedInstance p1 = builtin("P1");
    Vec a = oracle_solve(p1.instance, 1e-10, Vec::Zero(4));
    Vec b = oracle_solve(p1.instance, 1e-10, Vec::Constant(4, 5.0));
    CHECK((a - b).norm() <= 1e-8);
}

TEST_CASE("inclusion residual vanishes only at solutions") {
    NamedInstance p1 = builtin("P1");
    const Vec& z = std::get<Vec>(p1.solution);
    CHECK(inclusion_residual(p1.instance, z, 0.05) <= 1e-12);
    CHECK(inclusion_residual(p1.instance, z + Vec::Constant(4, 0.1), 0.05) > 1e-3);
}

TEST_CASE("build_certificate snaps near-face coordinates and closes the sum exactly") {
    NamedInstance p3 = builtin("P3");
    Vec z = std::get<Vec>(p3.solution);
    Vec approx = z + Vec::Constant(2, 1e-11);  // just off the face
    GraphPoint gp = build_certificate(p3.instance, approx);
    CHECK(gp.z[0] == 1.0);  // snapped onto the box face
    CHECK((gp.w - (gp.v + gp.p + eval(p3.instance.D, gp.z))).norm() == 0.0);
    CHECK_NOTHROW(validate_graph_point(gp, p3.instance.A, p3.instance.D,
                                       p3.instance.constraint()));
}

TEST_CASE("random instances are deterministic per seed") {
    NamedInstance a = random_instance(42, 6, 1.0);
    NamedInstance b = random_instance(42, 6, 1.0);
    CHECK(a.id == b.id);
    CHECK((a.certificate.z - b.certificate.z).norm() == 0.0);
    CHECK((eval(a.instance.D, Vec::Ones(6)) - eval(b.instance.D, Vec::Ones(6))).norm() == 0.0);
    NamedInstance c = random_instance(43, 6, 1.0);
    CHECK((a.certificate.z - c.certificate.z).norm() > 0.0);
}

TEST_CASE("random instances carry small-residual solutions across dims and moduli") {
    for (std::uint64_t seed : {1ull, 2ull, 3ull})
        for (int dim : {1, 2, 5, 8})
            for (double gamma : {0.0, 1.0}) {
                CAPTURE(seed);
                CAPTURE(dim);
                CAPTURE(gamma);
                NamedInstance ni = random_instance(seed, dim, gamma);
                CHECK(ni.instance.A.gamma() == gamma);
                double r = inclusion_residual(ni.instance, ni.certificate.z, 0.01);
                CHECK(r <= 1e-7 * (1.0 + ni.certificate.z.norm()));
                CHECK(ni.certificate.w.norm() <=
                      1e-8 * (1.0 + ni.certificate.z.norm() + ni.certificate.v.norm() +
                              ni.certificate.p.norm()));
            }
}

TEST_CASE("dim-1 random instances match the clamped closed form") {
    for (std::uint64_t seed : {11ull, 12ull, 13ull, 14ull}) {
        NamedInstance ni = random_instance(seed, 1, 1.0);
        double m = std::get<LinearOp>(ni.instance.A.desc()).M(0, 0);
        const auto& gq = std::get<GradQuadratic>(ni.instance.D.desc());
        double zfree = -gq.c[0] / (m + gq.Q(0, 0));
        const ConvexSet& C = ni.instance.constraint();
        double expect = zfree;
        if (const Box* box = std::get_if<Box>(&C.desc()))
            expect = std::min(box->hi[0], std::max(box->lo[0], zfree));
        CHECK(ni.certificate.z[0] == doctest::Approx(expect).epsilon(1e-7));
    }
}

TEST_CASE("random instance argument validation") {
    CHECK_THROWS_AS(random_instance(1, 0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(random_instance(1, 65, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(random_instance(1, 4, -0.5), std::invalid_argument);
}

TEST_CASE("constrained resolvent rejects unsupported operator-set pairings") {
    MaxMonotone A(L1Subdifferential{2, 1.0});
    ConvexSet ball(Ball{Vec::Zero(2), 1.0});
    CHECK_THROWS_AS(constrained_resolvent(A, ball, 0.1, v2(3.0, 0.0)), std::invalid_argument);
}

TEST_CASE("constrained resolvent solves the joint inclusion for linear + box") {
    Mat M(2, 2);
    M << 1.0, 0.5, -0.5, 1.0;
    MaxMonotone A(LinearOp{M}, 1.0);
    ConvexSet C(Box{Vec::Constant(2, -1.0), Vec::Constant(2, 1.0)});
    std::mt19937_64 sampler(31);
    std::normal_distribution<double> gauss(0.0, 2.0);
    for (int i = 0; i < 25; ++i) {
        Vec y = v2(gauss(sampler), gauss(sampler));
        double sstep = 0.05 + 0.01 * i;
        Vec z = constrained_resolvent(A, C, sstep, y);
        CHECK(contains(C, z, 1e-9));
        Vec r = y - z - sstep * (M * z);  // must lie in N_C(z), s * N_C = N_C
        for (int k = 0; k < 30; ++k) {
            Vec c = sample_point(C, sampler);
            CHECK(r.dot(c - z) <= 1e-8 * (1.0 + r.norm()));
        }
    }
}
