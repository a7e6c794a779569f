#include <doctest.h>

#include <cmath>
#include <random>

#include "penflow/operators.hpp"

using namespace penflow;

namespace {

Vec v2(double a, double b) {
    Vec v(2);
    v << a, b;
    return v;
}

std::mt19937_64& rng() {
    static std::mt19937_64 r(4242);
    return r;
}

Vec draw(int n, double scale = 2.0) {
    std::normal_distribution<double> gauss(0.0, scale);
    Vec x(n);
    for (int i = 0; i < n; ++i) x[i] = gauss(rng());
    return x;
}

ConvexSet unit_box(int n) {
    return ConvexSet(Box{Vec::Constant(n, -1.0), Vec::Constant(n, 1.0)});
}

}  // namespace

TEST_CASE("resolvent of a normal cone is the projection, step-independent") {
    MaxMonotone A(NormalConeOp{unit_box(2)});
    CHECK(resolvent(A, 2.0, v2(3.0, 0.0)) == v2(1.0, 0.0));
    CHECK(resolvent(A, 0.01, v2(3.0, 0.0)) == v2(1.0, 0.0));
    CHECK(resolvent(A, 1.0, v2(0.3, -0.2)) == v2(0.3, -0.2));
}

TEST_CASE("linear and affine resolvents solve (I + lambda M) z = x - lambda q") {
    Mat M(2, 2);
    M << 2.0, 1.0, -1.0, 2.0;  // sym part 2I, PSD
    MaxMonotone A(LinearOp{M}, 2.0);
    for (int i = 0; i < 50; ++i) {
        Vec x = draw(2);
        double lam = 0.1 + 0.5 * i / 50.0;
        Vec z = resolvent(A, lam, x);
        CHECK((z + lam * (M * z) - x).norm() < 1e-12 * (1.0 + x.norm()));
    }
    Vec q = v2(1.0, -2.0);
    MaxMonotone Aq(AffineOp{M, q});
    Vec x = v2(0.5, 0.5);
    Vec z = resolvent(Aq, 0.7, x);
    CHECK((z + 0.7 * (M * z + q) - x).norm() < 1e-12);
}

TEST_CASE("l1 resolvent equals soft thresholding and minimizes the prox objective") {
    MaxMonotone A(L1Subdifferential{1, 1.0});
    Vec x(1);
    x << 2.0;
    CHECK(resolvent(A, 0.5, x)[0] == 1.5);
    x << 0.3;
    CHECK(resolvent(A, 0.5, x)[0] == 0.0);
    x << -1.2;
    CHECK(resolvent(A, 0.5, x)[0] == -0.7);

    // grid oracle for the prox objective 0.5 (u-x)^2 + lam*w*|u|
    MaxMonotone Aw(L1Subdifferential{1, 0.8});
    for (double xv : {-2.4, -0.3, 0.0, 0.55, 1.7}) {
        x << xv;
        double lam = 0.6;
        double z = resolvent(Aw, lam, x)[0];
        double obj_z = 0.5 * (z - xv) * (z - xv) + lam * 0.8 * std::abs(z);
        double grid_best = 1e300;
        for (int k = 0; k <= 100000; ++k) {
            double u = -3.0 + 6.0 * k / 100000.0;
            grid_best = std::min(grid_best, 0.5 * (u - xv) * (u - xv) + lam * 0.8 * std::abs(u));
        }
        CHECK(obj_z <= grid_best + 1e-9);
    }
}

TEST_CASE("linear-plus-normal-cone resolvent satisfies the inclusion") {
    Mat M(2, 2);
    M << 1.0, 0.5, -0.5, 1.0;
    ConvexSet C = unit_box(2);
    MaxMonotone A(LinearPlusNormalCone{M, C});
    std::mt19937_64 sampler(99);
    for (int i = 0; i < 30; ++i) {
        Vec x = draw(2, 3.0);
        double lam = 0.05 + 0.02 * i;
        Vec z = resolvent(A, lam, x);
        CHECK(contains(C, z, 1e-9));
        // x - z - lam M z must lie in N_C(z)
        Vec r = x - z - lam * (M * z);
        for (int s = 0; s < 40; ++s) {
            Vec c = sample_point(C, sampler);
            CHECK(r.dot(c - z) <= 1e-8 * (1.0 + r.norm() + c.norm()));
        }
    }
}

TEST_CASE("resolvents are nonexpansive") {
    Mat M(3, 3);
    M.setZero();
    M(0, 0) = 1.0;
    M(1, 2) = 2.0;
    M(2, 1) = -2.0;
    std::vector<MaxMonotone> ops;
    ops.emplace_back(ZeroOp{3});
    ops.emplace_back(LinearOp{M});
    ops.emplace_back(NormalConeOp{ConvexSet(Ball{Vec::Zero(3), 1.0})});
    ops.emplace_back(L1Subdifferential{3, 0.5});
    ops.emplace_back(LinearPlusNormalCone{M, unit_box(3)});
    for (const MaxMonotone& A : ops)
        for (int i = 0; i < 100; ++i) {
            Vec x = draw(3), y = draw(3);
            double lam = 0.01 + 0.99 * (i + 1) / 100.0;
            double lhs = (resolvent(A, lam, x) - resolvent(A, lam, y)).norm();
            CHECK(lhs <= (x - y).norm() + 1e-10);
        }
}

TEST_CASE("resolvent step-size Lipschitz bound ||J_l x - J_m x|| <= |l-m| ||A_d x||") {
    // holds for lambda, mu in [delta, +inf); delta must lower-bound both steps
    std::uniform_real_distribution<double> ustep(0.05, 1.0), ugrow(1.0, 4.0);
    std::vector<MaxMonotone> ops;
    ops.emplace_back(L1Subdifferential{2, 1.0});
    ops.emplace_back(NormalConeOp{unit_box(2)});
    Mat M(2, 2);
    M << 1.0, 2.0, -2.0, 1.0;
    ops.emplace_back(LinearOp{M});
    for (const MaxMonotone& A : ops)
        for (int i = 0; i < 100; ++i) {
            Vec x = draw(2, 3.0);
            double d = ustep(rng());
            double l = d * ugrow(rng()), m = d * ugrow(rng());
            double lhs = (resolvent(A, l, x) - resolvent(A, m, x)).norm();
            CHECK(lhs <= std::abs(l - m) * yosida(A, d, x).norm() + 1e-10);
        }
}

TEST_CASE("yosida regularization of a linear operator") {
    Mat M(2, 2);
    M << 3.0, 0.0, 0.0, 1.0;
    MaxMonotone A(LinearOp{M}, 1.0);
    double al = 0.5;
    Mat expect = M * (Mat::Identity(2, 2) + al * M).inverse();
    for (int i = 0; i < 20; ++i) {
        Vec x = draw(2);
        CHECK((yosida(A, al, x) - expect * x).norm() < 1e-12 * (1.0 + x.norm()));
    }
}

TEST_CASE("strong monotonicity modulus is validated against the symmetric part") {
    Mat M(2, 2);
    M << 2.0, 1.0, -1.0, 2.0;
    CHECK_NOTHROW(MaxMonotone(LinearOp{M}, 2.0));
    CHECK_THROWS_AS(MaxMonotone(LinearOp{M}, 2.1), std::invalid_argument);
    Mat bad(2, 2);
    bad << -0.1, 0.0, 0.0, 1.0;  // not monotone at all
    CHECK_THROWS_AS(MaxMonotone(LinearOp{bad}), std::invalid_argument);
}

TEST_CASE("dist-sq penalty gradient and zero set") {
    Penalty B(DistSqGradient{unit_box(2)}, 1.0);
    CHECK(eval(B, v2(2.0, 0.0)) == v2(1.0, 0.0));
    CHECK(eval(B, v2(0.5, -0.5)) == v2(0.0, 0.0));
    CHECK(std::string(B.zero_set().kind()) == "box");
    CHECK_THROWS_AS(Penalty(DistSqGradient{unit_box(2)}, 1.2), std::invalid_argument);
}

TEST_CASE("linear psd penalty: kernel extraction and cocoercivity modulus") {
    Mat M(3, 3);
    M.setZero();
    M(0, 0) = 4.0;
    M(1, 1) = 1.0;  // kernel = span(e2)
    Penalty B = make_linear_psd_penalty(M);
    CHECK(B.mu() == doctest::Approx(0.25));
    const ConvexSet& K = B.zero_set();
    CHECK(std::string(K.kind()) == "affine_subspace");
    Vec x(3);
    x << 0.0, 0.0, 5.0;
    CHECK(dist(K, x) == doctest::Approx(0.0));
    x << 1.0, 0.0, 0.0;
    CHECK(dist(K, x) == doctest::Approx(1.0));
    CHECK(eval(B, x) == 4.0 * x);
}

TEST_CASE("sampled cocoercivity check has power") {
    Mat Q(2, 2);
    Q << 2.0, 0.0, 0.0, 0.5;
    Cocoercive D(GradQuadratic{Q, v2(1.0, -1.0)}, 0.5);
    auto op = [&](const Vec& x) { return eval(D, x); };
    auto sampler = [&]() { return std::make_pair(draw(2, 4.0), draw(2, 4.0)); };
    CHECK(check_cocoercive(op, 0.5, sampler, 1000).pass);
    CocoercivityReport bad = check_cocoercive(op, 2.5, sampler, 1000);
    CHECK(!bad.pass);
    CHECK(bad.worst_margin < 0.0);

    Penalty B(DistSqGradient{unit_box(2)}, 1.0);
    auto bop = [&](const Vec& x) { return eval(B, x); };
    CHECK(check_cocoercive(bop, 1.0, sampler, 1000).pass);
    CHECK(!check_cocoercive(bop, 3.0, sampler, 1000).pass);
}

TEST_CASE("fitzpatrick gap bound closed form") {
    Penalty B(DistSqGradient{unit_box(2)}, 1.0);
    Vec p = v2(1.0, 0.0);
    CHECK(fitzpatrick_gap_bound(B, p, 10.0) == doctest::Approx(0.005).epsilon(1e-12));
    CHECK(fitzpatrick_gap_bound(B, v2(0.0, 0.0), 1.0) == 0.0);
    Mat M = Mat::Identity(2, 2);
    CHECK_THROWS_AS(fitzpatrick_gap_bound(make_linear_psd_penalty(M), p, 1.0),
                    std::invalid_argument);
}

TEST_CASE("fitzpatrick gap bound dominates a grid estimate of the true gap") {
    // 1-D box [-1,1], B = Id - P_C. phi_B(u, y) = sup_x u*Bx + x*y - x*Bx;
    // the true sup-gap over u in C works out to y^2/4, the bound is y^2/2.
    ConvexSet C(Box{Vec::Constant(1, -1.0), Vec::Constant(1, 1.0)});
    Penalty B(DistSqGradient{C}, 1.0);
    auto bx = [](double x) { return x > 1.0 ? x - 1.0 : (x < -1.0 ? x + 1.0 : 0.0); };
    for (double beta : {0.5, 1.0, 4.0}) {
        Vec p(1);
        p << 1.3;
        double y = p[0] / beta;
        double sup_gap = -1e300;
        for (int ui = 0; ui <= 100; ++ui) {
            double u = -1.0 + 2.0 * ui / 100.0;
            double phi = -1e300;
            for (int xi = 0; xi <= 4000; ++xi) {
                double x = -10.0 + 20.0 * xi / 4000.0;
                phi = std::max(phi, u * bx(x) + x * y - x * bx(x));
            }
            sup_gap = std::max(sup_gap, phi - std::abs(y));  // sigma_C(y) = |y|
        }
        double bound = fitzpatrick_gap_bound(B, p, beta);
        CHECK(sup_gap <= bound + 1e-9);
        CHECK(sup_gap == doctest::Approx(y * y / 4.0).epsilon(1e-2));
        CHECK(bound == doctest::Approx(y * y / 2.0).epsilon(1e-12));
    }
}

TEST_CASE("graph point validation accepts solutions and rejects forgeries") {
    ConvexSet C = unit_box(2);
    Mat M(2, 2);
    M << 1.0, 0.0, 0.0, 1.0;
    MaxMonotone A(LinearOp{M}, 1.0);
    Cocoercive D(ZeroForward{2}, 1.0);

    GraphPoint good;
    good.z = v2(1.0, 0.0);
    good.v = v2(1.0, 0.0);     // v = Mz
    good.p = v2(0.5, 0.0);     // outward normal at the right face
    good.w = v2(1.5, 0.0);     // v + p + Dz
    CHECK_NOTHROW(validate_graph_point(good, A, D, C));

    GraphPoint off = good;
    off.v = v2(2.0, 0.0);  // not Mz
    CHECK_THROWS_AS(validate_graph_point(off, A, D, C), std::invalid_argument);

    GraphPoint inner = good;
    inner.z = v2(0.0, 0.0);  // interior point, nonzero p is not a normal
    inner.v = v2(0.0, 0.0);
    inner.p = v2(0.5, 0.0);
    inner.w = v2(0.5, 0.0);
    CHECK_THROWS_AS(validate_graph_point(inner, A, D, C), std::invalid_argument);

    GraphPoint wsum = good;
    wsum.w = v2(0.0, 0.0);  // w != v + p + Dz
    CHECK_THROWS_AS(validate_graph_point(wsum, A, D, C), std::invalid_argument);

    GraphPoint outside = good;
    outside.z = v2(2.0, 0.0);  // z not in C
    CHECK_THROWS_AS(validate_graph_point(outside, A, D, C), std::invalid_argument);
}

TEST_CASE("inner iteration failure surfaces as the dedicated exception") {
    Mat M(2, 2);
    M << 0.0, 40.0, -40.0, 0.0;  // harmless monotone, but huge norm
    MaxMonotone A(LinearPlusNormalCone{M, unit_box(2)});
    Tolerances tight = tol();
    tight.inner_cap = 3;  // force the cap
    CHECK_THROWS_AS(resolvent(A, 1.0, v2(5.0, 5.0), tight), InnerIterationFailure);
}
