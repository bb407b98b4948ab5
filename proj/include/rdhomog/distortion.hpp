#pragma once

#include <cmath>

#include <Eigen/Core>

#include "rdhomog/error.hpp"
#include "rdhomog/geometry.hpp"

namespace rdhomog {

// One-parameter division model, centered at the coordinate origin. Points are
// focal-normalized; undistorted = distorted / (1 + lambda * r_d^2).
struct Lambda {
    double value = 0.0;

    constexpr Lambda() = default;
    constexpr explicit Lambda(double v) : value(v) {}

    friend constexpr bool operator==(Lambda, Lambda) = default;
};

using Point2 = Eigen::Vector2d;

inline constexpr double kSingularRadiusTol = 1e-12;

inline HomPoint lift(const Point2 &p, Lambda lam) {
    return {p.x(), p.y(), 1.0 + lam.value * p.squaredNorm()};
}

inline Point2 undistort(const Point2 &p, Lambda lam) {
    const double w = 1.0 + lam.value * p.squaredNorm();
    if (std::abs(w) < kSingularRadiusTol) {
        throw Error(ErrorKind::SingularRadius, "point lies on the singular circle of the division model");
    }
    return p / w;
}

// Inverse of undistort on the branch that tends to the identity as lambda -> 0.
// With r_u the undistorted radius, r_d solves lambda r_u r_d^2 - r_d + r_u = 0;
// the stable form of the chosen root is r_d = 2 r_u / (1 + sqrt(1 - 4 lambda r_u^2)).
inline Point2 distort(const Point2 &p, Lambda lam) {
    const double disc = 1.0 - 4.0 * lam.value * p.squaredNorm();
    if (disc < 0.0) {
        throw Error(ErrorKind::NotInvertible, "division model has no real preimage for this radius");
    }
    return p * (2.0 / (1.0 + std::sqrt(disc)));
}

} // namespace rdhomog
