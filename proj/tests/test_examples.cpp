#include "malab/examples.hpp"
#include "malab/scenarios.hpp"

#include <gtest/gtest.h>

namespace malab {
namespace {

TEST(Pogorelov, ValueOnTangentialSlice) {
    const int n = 3;
    Rng rng(1);
    for (int k = 0; k < 50; ++k) {
        Vec x = Vec::Zero(n);
        x[0] = rng.uniform(-0.4, 0.4);
        x[1] = rng.uniform(-0.4, 0.4);
        auto e = eval_pogorelov(x, n);
        double rho = std::hypot(x[0], x[1]);
        EXPECT_NEAR(e.value, std::pow(rho, 4.0 / 3.0), 1e-14);
    }
}

TEST(Pogorelov, AxisIsSingular) {
    const int n = 3;
    Vec x = Vec::Zero(n);
    x[n - 1] = 0.1;
    auto e = eval_pogorelov(x, n);
    EXPECT_TRUE(e.singular);
    EXPECT_EQ(e.value, 0.0);
    EXPECT_EQ(e.gradient.norm(), 0.0);
}

TEST(Pogorelov, HessianMatchesFiniteDifferences) {
    const int n = 3;
    Vec x = Vec::Zero(n);
    x[0] = 1.0;
    x[n - 1] = 0.1;
    auto e = eval_pogorelov(x, n);
    auto f = [n](const Vec& y) { return eval_pogorelov(y, n).value; };
    Mat Hfd = fd_hessian(f, x, 1e-5);
    const double det_an = e.hessian.determinant();
    const double det_fd = Hfd.determinant();
    EXPECT_GT(det_an, 0.0);
    EXPECT_NEAR(det_an / det_fd, 1.0, 1e-4);
}

TEST(Pogorelov, DetPositiveOffAxisSamples) {
    const int n = 3;
    Rng rng(2);
    auto f = [n](const Vec& y) { return eval_pogorelov(y, n).value; };
    for (int k = 0; k < 200; ++k) {
        Vec x(n);
        x[0] = rng.uniform(-0.5, 0.5);
        x[1] = rng.uniform(-0.5, 0.5);
        x[2] = rng.uniform(-0.3, 0.3);
        if (std::hypot(x[0], x[1]) < 0.05) continue;
        auto e = eval_pogorelov(x, n);
        Mat Hfd = fd_hessian(f, x, 1e-5);
        EXPECT_GT(e.hessian.determinant(), 0.0);
        EXPECT_NEAR(e.hessian.determinant() / Hfd.determinant(), 1.0, 1e-4);
    }
}

TEST(Pogorelov, MidpointConvexOffAxis) {
    const int n = 3;
    Rng rng(3);
    int checked = 0;
    while (checked < 10000) {
        Vec p = rng.point_in_ball(n, 0.4), q = rng.point_in_ball(n, 0.4);
        double vp = eval_pogorelov(p, n).value;
        double vq = eval_pogorelov(q, n).value;
        double vm = eval_pogorelov(Vec(0.5 * (p + q)), n).value;
        ASSERT_LE(vm, 0.5 * (vp + vq) + 1e-12);
        ++checked;
    }
}

TEST(Pogorelov, BetaFieldFormula) {
    const int n = 3;
    Vec x(n);
    x << 0.2, -0.1, 0.3;
    Vec b = pogorelov_beta(x, n);
    EXPECT_NEAR(b[0], -0.2 * 0.3, 1e-15);
    EXPECT_NEAR(b[1], 0.1 * 0.3, 1e-15);
    EXPECT_NEAR(b[2], (1.0 - 1.0 / 3.0) * (1.0 + 0.09), 1e-15);
}

TEST(SingularW, DerivedParams) {
    auto p = SingularParams::make(0.1, 3);
    EXPECT_NEAR(p.a, 5.0 / 3.0, 1e-15);
    EXPECT_NEAR(p.b, 10.0 / 9.0, 1e-15);
    EXPECT_GT(p.a, 1.0);
    EXPECT_GT(p.b, 1.0);
}

TEST(SingularW, FirstBranchOnAxis) {
    auto p = SingularParams::make(0.1, 3);
    Vec x(3);
    x << 0.0, 0.37, 0.0;
    auto w = eval_singular_W(x, p);
    EXPECT_EQ(w.region, WRegion::E1);
    EXPECT_NEAR(w.value, std::pow(0.37, p.a), 1e-15);
}

TEST(SingularW, Homogeneity) {
    auto p = SingularParams::make(0.1, 3);
    Rng rng(4);
    for (int k = 0; k < 10000; ++k) {
        double x1 = rng.uniform(-1.0, 1.0);
        double xpp = rng.uniform(0.0, 1.0);
        double t = rng.uniform(1e-6, 1.0);
        double lhs = eval_W_ab(std::pow(t, 1.0 / p.b) * x1, std::pow(t, 1.0 / p.a) * xpp, p)
                         .value;
        double rhs = t * eval_W_ab(x1, xpp, p).value;
        ASSERT_NEAR(lhs, rhs, 1e-12 * std::max(1.0, std::abs(rhs)));
    }
}

TEST(SingularW, InterfaceContinuity) {
    auto p = SingularParams::make(0.1, 3);
    Rng rng(5);
    for (int k = 0; k < 10000; ++k) {
        // interface points: |x''|^a = |x1|^b = t
        double t = rng.uniform(1e-8, 1.0);
        double x1 = std::pow(t, 1.0 / p.b);
        double xpp = std::pow(t, 1.0 / p.a);
        const double a = p.a, b = p.b;
        double e1 = std::pow(xpp, a) + std::pow(xpp, a - 2 * a / b) * x1 * x1;
        double e2 = ((2 * b + a - a * b) / b) * std::pow(x1, b) +
                    ((a * b - a) / b) * std::pow(x1, b - 2 * b / a) * xpp * xpp;
        ASSERT_NEAR(e1, e2, 1e-12 * std::max(1.0, e1));
        ASSERT_NEAR(eval_W_ab(x1, xpp, p).value, e1, 1e-12 * std::max(1.0, e1));
    }
}

TEST(SingularW, DetBandPositiveOffSingular) {
    auto p = SingularParams::make(0.1, 3);
    auto f = [&](const Vec& y) { return eval_singular_W(y, p).value; };
    Rng rng(6);
    int accepted = 0;
    double cmin = 1e300, cmax = 0;
    while (accepted < 1000) {
        Vec x(3);
        x[0] = rng.uniform(-0.7, 0.7);
        x[1] = rng.uniform(-0.7, 0.7);
        x[2] = rng.uniform(-0.9 * p.rho, 0.9 * p.rho);
        double x1 = std::abs(x[0]), xpp = std::abs(x[1]);
        if (x1 < 0.05 || xpp < 0.05) continue;
        double sA = std::pow(xpp, p.a), sB = std::pow(x1, p.b);
        if (std::abs(sA - sB) < 0.02 * (sA + sB)) continue;
        double det = fd_hessian(f, x, 1e-5).determinant();
        ASSERT_GT(det, 0.0);
        cmin = std::min(cmin, det);
        cmax = std::max(cmax, det);
        ++accepted;
    }
    EXPECT_GT(cmin, 0.0);
    EXPECT_TRUE(std::isfinite(cmax));
}

TEST(SingularW, MidpointConvexInSlab) {
    auto p = SingularParams::make(0.1, 3);
    Rng rng(7);
    for (int k = 0; k < 10000; ++k) {
        Vec a(3), b(3);
        for (int j = 0; j < 2; ++j) {
            a[j] = rng.uniform(-0.7, 0.7);
            b[j] = rng.uniform(-0.7, 0.7);
        }
        a[2] = rng.uniform(-p.rho, p.rho);
        b[2] = rng.uniform(-p.rho, p.rho);
        double vm = eval_singular_W(Vec(0.5 * (a + b)), p).value;
        double va = eval_singular_W(a, p).value;
        double vb = eval_singular_W(b, p).value;
        ASSERT_LE(vm, 0.5 * (va + vb) + 1e-12);
    }
}

TEST(QuadraticModel, IsotropicAtZero) {
    auto Q = QuadraticModel::normal_form(2, 0.0);
    Vec x(2);
    x << 0.3, -0.7;
    EXPECT_NEAR(Q.value(x), 0.5 * x.squaredNorm(), 1e-15);
    EXPECT_NEAR(Q.hessian().determinant(), 1.0, 1e-15);
}

TEST(QuadraticModel, NormalFormDetOne) {
    for (double a : {0.0, 0.5, 1.0, 2.0, -1.3}) {
        auto Q2 = QuadraticModel::normal_form(2, a);
        EXPECT_NEAR(Q2.hessian().determinant(), 1.0, 1e-12) << a;
        auto Q3 = QuadraticModel::normal_form(3, a);
        EXPECT_NEAR(Q3.hessian().determinant(), 1.0, 1e-12) << a;
    }
}

TEST(QuadraticModel, FlatBoundaryNeumannData) {
    auto Q = QuadraticModel::normal_form(2, 0.8);
    Rng rng(8);
    for (int k = 0; k < 100; ++k) {
        Vec x(2);
        x << rng.uniform(-1.0, 1.0), 0.0;
        EXPECT_NEAR(Q.gradient(x)[1], 0.8 * x[0], 1e-15);
    }
}

TEST(QuadraticModel, SchurConstructionKeepsInvariants) {
    Rng rng(9);
    for (int k = 0; k < 50; ++k) {
        int n = (k % 2) ? 3 : 2;
        Mat A = Mat::Zero(n - 1, n - 1);
        for (int i = 0; i < n - 1; ++i)
            for (int j = i; j < n - 1; ++j) A(i, j) = A(j, i) = rng.normal(0.0, 0.5);
        Eigen::SelfAdjointEigenSolver<Mat> es(A);
        Vec ev = es.eigenvalues();
        Mat S = es.eigenvectors() *
                ev.unaryExpr([](double t) { return std::exp(t); }).asDiagonal() *
                es.eigenvectors().transpose();
        double a = rng.uniform(-2.0, 2.0);
        auto Q = QuadraticModel::from_leading_block(S, a, Vec::Zero(n));
        EXPECT_NEAR(Q.hessian().determinant(), 1.0, 1e-10);
        Eigen::SelfAdjointEigenSolver<Mat> es2(Q.hessian());
        EXPECT_GT(es2.eigenvalues().minCoeff(), 0.0);
    }
}

TEST(Scenarios, RegistryAndParams) {
    EXPECT_NO_THROW(scenario_library("disk_neumann"));
    EXPECT_NO_THROW(scenario_library("halfball_liouville", {{"a", 1.0}}));
    EXPECT_NO_THROW(scenario_library("robin_disk", {{"gamma", 1.0}}));
    EXPECT_NO_THROW(scenario_library("degenerate_7_2"));
    EXPECT_THROW(scenario_library("nope"), UnknownScenario);

    auto sc = scenario_library("example_10_3", {{"delta", 0.1}, {"n", 3}});
    EXPECT_NEAR(sc.singular.a, 5.0 / 3.0, 1e-14);
    EXPECT_NEAR(sc.singular.b, 10.0 / 9.0, 1e-14);
    EXPECT_NEAR(sc.expected_boundary_exponent, 2.0 / 3.0, 1e-14);
    EXPECT_GT(sc.fd_det_floor, 0.0);
}

TEST(Scenarios, DiskReference) {
    auto sc = scenario_library("disk_neumann");
    EXPECT_NEAR(sc.reference(Vec::Zero(2)), 0.0, 1e-15);
    Vec x(2);
    x << 0.6, 0.0;
    EXPECT_NEAR(sc.reference(x), 0.18, 1e-15);
}

}  // namespace
}  // namespace malab
