#pragma once

#include <array>
#include <cmath>

#include <Eigen/Core>
#include <Eigen/Dense>

#include "rdhomog/error.hpp"

namespace rdhomog {

// Homogeneous image point (u, v, w). Equality is only meaningful up to scale.
using HomPoint = Eigen::Vector3d;

// Four points on one side of a correspondence; the first three form the basis
// matrix and the fourth fixes the scale of each basis column.
using PointQuad = std::array<HomPoint, 4>;

// Expansion coefficients of the fourth point in the basis of the first three
// (scaled by the basis determinant, since they come from the adjugate).
using GammaTriple = Eigen::Vector3d;

// A triple is considered collinear when the determinant of its
// unit-normalized points falls below this value.
inline constexpr double kDegeneracyTol = 1e-10;

// Nonsingular 3x3 projective map, defined up to a nonzero scale.
class Homography {
  public:
    Homography() : m_(Eigen::Matrix3d::Identity()) {}

    explicit Homography(const Eigen::Matrix3d &m) : m_(m) {
        const double fro = m.norm();
        if (!std::isfinite(fro) || fro == 0.0 || std::abs((m / fro).determinant()) <= 1e-12) {
            throw Error(ErrorKind::Degenerate, "homography matrix is singular");
        }
    }

    const Eigen::Matrix3d &matrix() const noexcept { return m_; }

    // Unit Frobenius norm, positive determinant.
    Homography normalized() const {
        Eigen::Matrix3d n = m_ / m_.norm();
        if (n.determinant() < 0.0) {
            n = -n;
        }
        return Homography(n);
    }

    // Inverse up to scale, via the adjugate.
    Homography inverse() const;

    HomPoint operator()(const HomPoint &p) const { return m_ * p; }

  private:
    Eigen::Matrix3d m_;
};

// adj(M) with M adj(M) = det(M) I. Row i is the cross product of the two
// columns of M other than column i.
inline Eigen::Matrix3d adjugate3(const Eigen::Matrix3d &m) {
    Eigen::Matrix3d adj;
    adj.row(0) = m.col(1).cross(m.col(2)).transpose();
    adj.row(1) = m.col(2).cross(m.col(0)).transpose();
    adj.row(2) = m.col(0).cross(m.col(1)).transpose();
    return adj;
}

inline Homography Homography::inverse() const { return Homography(adjugate3(m_)); }

// Determinant of three points after scaling each to unit length; in [-1, 1].
inline double normalized_triple_det(const HomPoint &a, const HomPoint &b, const HomPoint &c) {
    const double na = a.norm(), nb = b.norm(), nc = c.norm();
    if (na == 0.0 || nb == 0.0 || nc == 0.0) {
        return 0.0;
    }
    return a.dot(b.cross(c)) / (na * nb * nc);
}

// No three of the four points collinear.
inline bool in_general_position(const PointQuad &q, double tol = kDegeneracyTol) {
    return std::abs(normalized_triple_det(q[0], q[1], q[2])) >= tol &&
           std::abs(normalized_triple_det(q[3], q[1], q[2])) >= tol &&
           std::abs(normalized_triple_det(q[0], q[3], q[2])) >= tol &&
           std::abs(normalized_triple_det(q[0], q[1], q[3])) >= tol;
}

inline Eigen::Matrix3d basis_matrix(const PointQuad &q) {
    Eigen::Matrix3d xi;
    xi << q[0], q[1], q[2];
    return xi;
}

inline GammaTriple gamma_of(const PointQuad &q, double tol = kDegeneracyTol) {
    if (!in_general_position(q, tol)) {
        throw Error(ErrorKind::Degenerate, "point quad has a collinear triple");
    }
    return adjugate3(basis_matrix(q)) * q[3];
}

// Maps src[i] to dst[i] (up to scale) for i = 0..3:
//   H = Xi' diag(Gamma') diag(Gamma)^-1 adj(Xi)
inline Homography closed_form_homography(const PointQuad &src, const PointQuad &dst,
                                         double tol = kDegeneracyTol) {
    const GammaTriple g = gamma_of(src, tol);
    const GammaTriple gp = gamma_of(dst, tol);
    const Eigen::Vector3d scale = gp.cwiseQuotient(g);
    const Eigen::Matrix3d h = basis_matrix(dst) * scale.asDiagonal() * adjugate3(basis_matrix(src));
    return Homography(h);
}

inline HomPoint apply(const Homography &h, const HomPoint &p) { return h(p); }

// Frobenius distance between the canonical (unit norm, det > 0) representatives.
inline double homography_error(const Homography &a, const Homography &b) {
    return (a.normalized().matrix() - b.normalized().matrix()).norm();
}

// Sine of the angle between two homogeneous vectors; zero iff equal up to scale.
inline double projective_distance(const Eigen::Vector3d &a, const Eigen::Vector3d &b) {
    const double den = a.norm() * b.norm();
    if (den == 0.0) {
        return 1.0;
    }
    return a.cross(b).norm() / den;
}

} // namespace rdhomog
