#include <random>

#include <gtest/gtest.h>

#include "rdhomog/distortion.hpp"

using namespace rdhomog;

TEST(Lift, DirectFormula) {
    EXPECT_TRUE(lift(Point2(0, 0), Lambda(-0.1)).isApprox(HomPoint(0, 0, 1)));
    EXPECT_TRUE(lift(Point2(1, 0), Lambda(-0.1)).isApprox(HomPoint(1, 0, 0.9)));
    EXPECT_TRUE(lift(Point2(3, 4), Lambda(0.0)).isApprox(HomPoint(3, 4, 1)));
}

TEST(Undistort, DirectFormula) {
    const Point2 p(0.3, -0.2);
    EXPECT_EQ(undistort(p, Lambda(0.0)), p);
    EXPECT_NEAR(undistort(Point2(1, 0), Lambda(-0.19)).x(), 1.0 / 0.81, 1e-15);
    EXPECT_EQ(undistort(Point2(1, 0), Lambda(-0.19)).y(), 0.0);
}

TEST(Undistort, SingularRadius) {
    try {
        undistort(Point2(1, 0), Lambda(-1.0));
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.kind(), ErrorKind::SingularRadius);
    }
}

TEST(Distort, RoundTrip) {
    EXPECT_EQ(distort(Point2(0.4, 0.1), Lambda(0.0)), Point2(0.4, 0.1));
    const Point2 q = distort(Point2(1.0 / 0.9, 0.0), Lambda(-0.1));
    EXPECT_NEAR(q.x(), 1.0, 1e-15);
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-1.0, 1.0), l(-0.2, -0.01);
    for (int t = 0; t < 10000; ++t) {
        const Point2 p(u(rng), u(rng));
        const Lambda lam(l(rng));
        EXPECT_LT((undistort(distort(p, lam), lam) - p).norm(), 1e-12);
        // Substitution into lambda r_u r_d^2 - r_d + r_u = 0.
        const double ru = p.norm(), rd = distort(p, lam).norm();
        EXPECT_NEAR(lam.value * ru * rd * rd - rd + ru, 0.0, 1e-14);
    }
}

TEST(Distort, ChoosesBranchContinuousAtZero) {
    const Point2 p(0.5, 0.0);
    double prev = distort(p, Lambda(-1e-9)).x();
    EXPECT_NEAR(prev, 0.5, 1e-9);
    for (double lam = 0.01; lam <= 0.99; lam += 0.01) {
        const double r = distort(p, Lambda(lam)).x();
        EXPECT_GT(r, prev - 1e-12);
        prev = r;
    }
}

TEST(Distort, NotInvertible) {
    try {
        distort(Point2(1, 0), Lambda(0.3));
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.kind(), ErrorKind::NotInvertible);
    }
}

TEST(Distortion, LiftDehomogenizesToUndistort) {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-1.0, 1.0), l(-0.3, 0.3);
    for (int t = 0; t < 1000; ++t) {
        const Point2 p(u(rng), u(rng));
        const Lambda lam(l(rng));
        const HomPoint x = lift(p, lam);
        EXPECT_LT((x.head<2>() / x.z() - undistort(p, lam)).norm(), 1e-12);
    }
}

TEST(Distortion, CommutesWithRotation) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1.0, 1.0), a(0.0, 6.283), l(-0.2, -0.01);
    for (int t = 0; t < 1000; ++t) {
        const Point2 p(u(rng), u(rng));
        const Lambda lam(l(rng));
        const Eigen::Matrix2d r = Eigen::Rotation2Dd(a(rng)).toRotationMatrix();
        EXPECT_LT((undistort(r * p, lam) - r * undistort(p, lam)).cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_LT((distort(r * p, lam) - r * distort(p, lam)).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(Distortion, MonotoneOnPrincipalBranch) {
    for (double lam : {-0.01, -0.1, -0.2, -0.5}) {
        double prev = 0.0;
        const double rmax = 1.0 / std::sqrt(-lam);
        for (int k = 1; k < 1000; ++k) {
            const double rd = rmax * k / 1000.0;
            const double ru = undistort(Point2(rd, 0.0), Lambda(lam)).x();
            EXPECT_GT(ru, prev);
            prev = ru;
        }
    }
}
