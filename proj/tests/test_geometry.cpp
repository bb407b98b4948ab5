#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"

using namespace rdhomog;

namespace {

Eigen::Matrix3d random_matrix(std::mt19937_64 &rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Eigen::Matrix3d m;
    for (int i = 0; i < 9; ++i) m(i / 3, i % 3) = u(rng);
    return m;
}

PointQuad random_quad(std::mt19937_64 &rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (;;) {
        PointQuad q;
        for (auto &p : q) p = HomPoint(u(rng), u(rng), 1.0);
        bool ok = true;
        for (int a = 0; a < 4 && ok; ++a) {
            for (int b = a + 1; b < 4 && ok; ++b) {
                for (int c = b + 1; c < 4 && ok; ++c) ok = std::abs(normalized_triple_det(q[a], q[b], q[c])) > 0.05;
            }
        }
        if (ok) return q;
    }
}

PointQuad push(const Eigen::Matrix3d &h, const PointQuad &q) {
    PointQuad out;
    for (int i = 0; i < 4; ++i) out[i] = h * q[i];
    return out;
}

} // namespace

TEST(Adjugate, IdentityAndDiagonal) {
    EXPECT_TRUE(adjugate3(Eigen::Matrix3d::Identity()).isApprox(Eigen::Matrix3d::Identity()));
    const Eigen::Matrix3d d = Eigen::Vector3d(2, 3, 4).asDiagonal();
    const Eigen::Matrix3d expect = Eigen::Vector3d(12, 8, 6).asDiagonal();
    EXPECT_LT((adjugate3(d) - expect).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Adjugate, ProductIsDeterminantTimesIdentity) {
    std::mt19937_64 rng(1);
    for (int t = 0; t < 1000; ++t) {
        const Eigen::Matrix3d m = random_matrix(rng);
        const double det = oracle::det3(m);
        const double tol = 1e-12 * m.squaredNorm();
        EXPECT_LT((m * adjugate3(m) - det * Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff(), tol);
        EXPECT_LT((adjugate3(m) * m - det * Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff(), tol);
        EXPECT_LT((adjugate3(m) - oracle::adj3(m)).cwiseAbs().maxCoeff(), 1e-14);
    }
}

TEST(Adjugate, DefinedForSingularInput) {
    Eigen::Matrix3d m;
    m << 1, 2, 3, 2, 4, 6, 0, 1, 1;
    EXPECT_LT((m * adjugate3(m)).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Gamma, CanonicalBasis) {
    const PointQuad q{HomPoint(1, 0, 0), HomPoint(0, 1, 0), HomPoint(0, 0, 1), HomPoint(1, 1, 1)};
    EXPECT_TRUE(gamma_of(q).isApprox(GammaTriple(1, 1, 1)));
    const PointQuad q2{HomPoint(1, 0, 0), HomPoint(0, 1, 0), HomPoint(0, 0, 1), HomPoint(1, 2, 3)};
    EXPECT_TRUE(gamma_of(q2).isApprox(GammaTriple(1, 2, 3)));
}

TEST(Gamma, CollinearTripleIsDegenerate) {
    const PointQuad q{HomPoint(0, 0, 1), HomPoint(1, 1, 1), HomPoint(2, 2, 1), HomPoint(0, 1, 1)};
    try {
        gamma_of(q);
        FAIL() << "expected Degenerate";
    } catch (const Error &e) {
        EXPECT_EQ(e.kind(), ErrorKind::Degenerate);
    }
    // x4 on the line through x1 and x2 zeroes the third coefficient.
    const PointQuad q3{HomPoint(0, 0, 1), HomPoint(1, 0, 1), HomPoint(0, 1, 1), HomPoint(2, 0, 1)};
    EXPECT_THROW(gamma_of(q3), Error);
}

TEST(ClosedForm, UnitSquareGivesIdentity) {
    const PointQuad sq{HomPoint(0, 0, 1), HomPoint(1, 0, 1), HomPoint(0, 1, 1), HomPoint(1, 1, 1)};
    const Homography h = closed_form_homography(sq, sq);
    EXPECT_LT(homography_error(h, Homography(Eigen::Matrix3d::Identity())), 1e-14);
}

TEST(ClosedForm, CanonicalSourceGivesScaledColumns) {
    const PointQuad basis{HomPoint(1, 0, 0), HomPoint(0, 1, 0), HomPoint(0, 0, 1), HomPoint(1, 1, 1)};
    const PointQuad dst{HomPoint(0.2, 0.1, 1), HomPoint(1.3, -0.2, 1), HomPoint(0.1, 0.9, 1), HomPoint(1.1, 1.4, 1)};
    const GammaTriple g = gamma_of(dst);
    Eigen::Matrix3d expect;
    for (int i = 0; i < 3; ++i) expect.col(i) = g(i) * dst[i];
    EXPECT_LT(homography_error(closed_form_homography(basis, dst), Homography(expect)), 1e-13);
}

TEST(ClosedForm, MapsAllFourPoints) {
    std::mt19937_64 rng(2);
    for (int t = 0; t < 200; ++t) {
        const PointQuad src = random_quad(rng), dst = random_quad(rng);
        const Homography h = closed_form_homography(src, dst);
        for (int i = 0; i < 4; ++i) EXPECT_LT(projective_distance(h(src[i]), dst[i]), 1e-10);
    }
}

TEST(ClosedForm, RecoversKnownHomography) {
    std::mt19937_64 rng(3);
    for (int t = 0; t < 200; ++t) {
        const Eigen::Matrix3d m = Eigen::Matrix3d::Identity() + 0.3 * random_matrix(rng);
        const PointQuad src = random_quad(rng);
        EXPECT_LT(homography_error(closed_form_homography(src, push(m, src)), Homography(m)), 1e-12);
    }
}

TEST(ClosedForm, AgreesWithDltOracle) {
    std::mt19937_64 rng(4);
    for (int t = 0; t < 1000; ++t) {
        const PointQuad src = random_quad(rng), dst = random_quad(rng);
        const Homography dlt(oracle::dlt_homography(src, dst));
        EXPECT_LT(homography_error(closed_form_homography(src, dst), dlt), 1e-9);
    }
}

TEST(ClosedForm, ScaleEquivariance) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> s(0.2, 5.0);
    for (int t = 0; t < 200; ++t) {
        const PointQuad src = random_quad(rng), dst = random_quad(rng);
        PointQuad src2 = src, dst2 = dst;
        for (int i = 0; i < 4; ++i) {
            src2[i] *= (t % 2 ? -1.0 : 1.0) * s(rng);
            dst2[i] *= s(rng);
        }
        EXPECT_LT(homography_error(closed_form_homography(src, dst), closed_form_homography(src2, dst2)), 1e-12);
    }
}

TEST(ClosedForm, RejectsCollinearDestination) {
    const PointQuad sq{HomPoint(0, 0, 1), HomPoint(1, 0, 1), HomPoint(0, 1, 1), HomPoint(1, 1, 1)};
    const PointQuad line{HomPoint(0, 0, 1), HomPoint(1, 1, 1), HomPoint(2, 2, 1), HomPoint(0, 1, 1)};
    EXPECT_THROW(closed_form_homography(sq, line), Error);
    EXPECT_FALSE(in_general_position(line));
    EXPECT_TRUE(in_general_position(sq));
}

TEST(Apply, BasicsAndInverse) {
    const HomPoint p(0.3, -0.7, 1.2);
    EXPECT_TRUE(apply(Homography(Eigen::Matrix3d::Identity()), p).isApprox(p));
    const Homography d(Eigen::Vector3d(2, 2, 1).asDiagonal());
    EXPECT_TRUE(apply(d, HomPoint(1, 1, 1)).isApprox(HomPoint(2, 2, 1)));
    std::mt19937_64 rng(6);
    for (int t = 0; t < 100; ++t) {
        const Homography h(Eigen::Matrix3d::Identity() + 0.4 * random_matrix(rng));
        const HomPoint back = apply(h.inverse(), apply(h, p));
        EXPECT_LT(back.normalized().cross(p.normalized()).norm(), 1e-12);
    }
}

TEST(HomographyError, Pseudometric) {
    std::mt19937_64 rng(7);
    for (int t = 0; t < 100; ++t) {
        const Eigen::Matrix3d a = Eigen::Matrix3d::Identity() + 0.4 * random_matrix(rng);
        const Eigen::Matrix3d b = Eigen::Matrix3d::Identity() + 0.4 * random_matrix(rng);
        EXPECT_EQ(homography_error(Homography(a), Homography(a)), 0.0);
        EXPECT_LT(homography_error(Homography(a), Homography(-3.0 * a)), 1e-15);
        EXPECT_DOUBLE_EQ(homography_error(Homography(a), Homography(b)), homography_error(Homography(b), Homography(a)));
        EXPECT_GE(homography_error(Homography(a), Homography(b)), 0.0);
    }
}

TEST(HomographyError, MatchesDirectArithmetic) {
    Eigen::Matrix3d e;
    e << 0.01, -0.02, 0.0, 0.03, 0.0, 0.01, -0.01, 0.0, 0.02;
    const Eigen::Matrix3d a = Eigen::Matrix3d::Identity();
    const Eigen::Matrix3d b = a + e;
    const Eigen::Matrix3d an = a / a.norm();
    Eigen::Matrix3d bn = b / b.norm();
    if (bn.determinant() < 0) bn = -bn;
    EXPECT_NEAR(homography_error(Homography(a), Homography(b)), (an - bn).norm(), 1e-15);
}

TEST(Homography, RejectsSingular) {
    Eigen::Matrix3d m;
    m << 1, 2, 3, 2, 4, 6, 0, 1, 1;
    EXPECT_THROW(Homography{m}, Error);
    EXPECT_THROW(Homography{Eigen::Matrix3d::Zero()}, Error);
    const Homography n = Homography(-2.0 * Eigen::Matrix3d::Identity()).normalized();
    EXPECT_NEAR(n.matrix().norm(), 1.0, 1e-15);
    EXPECT_GT(n.matrix().determinant(), 0.0);
}
