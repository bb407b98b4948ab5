#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Dense>

#include "rdhomog/distortion.hpp"
#include "rdhomog/error.hpp"
#include "rdhomog/geometry.hpp"
#include "rdhomog/solvers.hpp"

namespace rdhomog {

using Rng = std::mt19937_64;

// Independent stream for trial `index` of a run seeded with `seed`.
inline Rng make_rng(std::uint64_t seed, std::uint64_t index = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32), 0x5eedu};
    return Rng(seq);
}

struct SceneConfig {
    int num_points = 5;
    double depth_min = 0.1;
    double depth_max = 10.0;
    double focal = 1000.0;
    double fov_deg = 70.0;
    double lambda_min = -0.2;
    double lambda_max = -0.01;
    SolverCase solver_case = SolverCase::OneSided;
    double noise_sigma_px = 0.0;
    double outlier_fraction = 0.0;
    std::uint64_t rng_seed = 0;

    double half_fov_tan() const { return std::tan(0.5 * fov_deg * std::numbers::pi / 180.0); }

    void validate() const {
        const auto bad = [](const char *what) { throw Error(ErrorKind::ConfigInvalid, what); };
        if (num_points < 1) bad("num_points must be positive");
        if (!(depth_min > 0.0 && depth_min <= depth_max)) bad("depth range must be positive and increasing");
        if (!(focal > 0.0)) bad("focal must be positive");
        if (!(fov_deg > 0.0 && fov_deg < 180.0)) bad("fov must lie in (0, 180) degrees");
        if (!(lambda_min <= lambda_max)) bad("lambda range must be increasing");
        if (!(noise_sigma_px >= 0.0)) bad("noise sigma must be nonnegative");
        if (!(outlier_fraction >= 0.0 && outlier_fraction < 1.0)) bad("outlier fraction must lie in [0, 1)");
        // Forward distortion must exist out to the image corner.
        const double r2 = 2.0 * half_fov_tan() * half_fov_tan();
        if (1.0 - 4.0 * lambda_max * r2 < 0.0) bad("lambda range leaves the invertible branch");
    }
};

struct SyntheticInstance {
    // Distorted pixel coordinates relative to the principal point.
    std::vector<Correspondence> pixels;
    // Maps undistorted normalized source points to undistorted normalized
    // destination points.
    Homography gt_h;
    Lambda gt_lambda;
    Lambda gt_lambda_p;
    std::vector<bool> inlier_flags;
    double focal = 1000.0;

    std::vector<Correspondence> normalized() const {
        std::vector<Correspondence> out(pixels.size());
        for (std::size_t i = 0; i < pixels.size(); ++i) {
            out[i] = {pixels[i].src / focal, pixels[i].dst / focal};
        }
        return out;
    }
};

namespace detail {

struct PinholeCamera {
    Eigen::Matrix3d r; // world -> camera
    Eigen::Vector3d center;
};

// Camera at perpendicular distance `depth` from the plane z = 0, tilted by
// up to 45 degrees, looking at `target` on the plane with random roll.
inline PinholeCamera sample_camera(Rng &rng, double depth, const Eigen::Vector3d &target) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double tilt = unit(rng) * 45.0 * std::numbers::pi / 180.0;
    const double azim = unit(rng) * 2.0 * std::numbers::pi;
    const double roll = unit(rng) * 2.0 * std::numbers::pi;
    const Eigen::Vector3d v(std::sin(tilt) * std::cos(azim), std::sin(tilt) * std::sin(azim), std::cos(tilt));
    PinholeCamera cam;
    cam.center = target + (depth / std::cos(tilt)) * v;
    const Eigen::Vector3d z = -v;
    Eigen::Vector3d helper = std::abs(z.x()) < 0.9 ? Eigen::Vector3d::UnitX() : Eigen::Vector3d::UnitY();
    Eigen::Vector3d x = helper.cross(z).normalized();
    Eigen::Vector3d y = z.cross(x);
    const Eigen::Vector3d xr = std::cos(roll) * x + std::sin(roll) * y;
    const Eigen::Vector3d yr = z.cross(xr);
    cam.r.row(0) = xr.transpose();
    cam.r.row(1) = yr.transpose();
    cam.r.row(2) = z.transpose();
    return cam;
}

} // namespace detail

// Random planar scene seen by two cameras; see SceneConfig for the knobs.
inline SyntheticInstance generate_instance(const SceneConfig &cfg, Rng &rng) {
    cfg.validate();
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const auto uniform = [&](double a, double b) { return a + (b - a) * unit(rng); };

    SyntheticInstance inst;
    inst.focal = cfg.focal;
    const double lam = uniform(cfg.lambda_min, cfg.lambda_max);
    switch (cfg.solver_case) {
    case SolverCase::OneSided: inst.gt_lambda = Lambda(lam); inst.gt_lambda_p = Lambda(0.0); break;
    case SolverCase::TwoSidedEqual: inst.gt_lambda = Lambda(lam); inst.gt_lambda_p = Lambda(lam); break;
    case SolverCase::TwoSidedIndependent:
        inst.gt_lambda = Lambda(lam);
        inst.gt_lambda_p = Lambda(uniform(cfg.lambda_min, cfg.lambda_max));
        break;
    }

    const double half = cfg.half_fov_tan();
    const int n = cfg.num_points;
    std::vector<Point2> m1, m2;
    detail::PinholeCamera c1, c2;
    for (int attempt = 0;; ++attempt) {
        if (attempt > 1000) {
            throw Error(ErrorKind::ConfigInvalid, "could not place cameras with overlapping fields of view");
        }
        // Depths are drawn from the configured range with the second camera
        // within a factor 1.5 of the first, so both views image the plane at
        // comparable scale.
        const double d1 = uniform(cfg.depth_min, cfg.depth_max);
        const double d2 = std::clamp(d1 * std::exp(uniform(-std::log(1.5), std::log(1.5))), cfg.depth_min,
                                     cfg.depth_max);
        const Eigen::Vector3d t1(0.0, 0.0, 0.0);
        const Eigen::Vector3d t2 = 0.3 * std::min(d1, d2) * Eigen::Vector3d(uniform(-1, 1), uniform(-1, 1), 0.0);
        c1 = detail::sample_camera(rng, d1, t1);
        c2 = detail::sample_camera(rng, d2, t2);
        m1.clear();
        m2.clear();
        for (int tries = 0; tries < 200 * n && static_cast<int>(m1.size()) < n; ++tries) {
            const Point2 p(uniform(-half, half), uniform(-half, half));
            const Eigen::Vector3d ray = c1.r.transpose() * Eigen::Vector3d(p.x(), p.y(), 1.0);
            if (ray.z() >= 0.0) {
                continue;
            }
            const Eigen::Vector3d X = c1.center - (c1.center.z() / ray.z()) * ray;
            const Eigen::Vector3d x2 = c2.r * (X - c2.center);
            const Eigen::Vector3d x1 = c1.r * (X - c1.center);
            if (x1.z() <= 0.0 || x2.z() <= 0.0) {
                continue;
            }
            const Point2 q = x2.head<2>() / x2.z();
            if (std::abs(q.x()) > half || std::abs(q.y()) > half) {
                continue;
            }
            m1.push_back(p);
            m2.push_back(q);
        }
        if (static_cast<int>(m1.size()) == n) {
            break;
        }
    }

    // Plane z = 0 in camera-1 coordinates: n1' X = -C1_z.
    const Eigen::Matrix3d rel = c2.r * c1.r.transpose();
    const Eigen::Vector3d t = c2.r * (c1.center - c2.center);
    const Eigen::Vector3d n1 = c1.r.col(2);
    inst.gt_h = Homography(rel - t * n1.transpose() / c1.center.z()).normalized();

    std::normal_distribution<double> noise(0.0, 1.0);
    inst.pixels.resize(n);
    inst.inlier_flags.assign(n, true);
    for (int i = 0; i < n; ++i) {
        Point2 s = cfg.focal * distort(m1[i], inst.gt_lambda);
        Point2 d = cfg.focal * distort(m2[i], inst.gt_lambda_p);
        if (cfg.noise_sigma_px > 0.0) {
            s += cfg.noise_sigma_px * Point2(noise(rng), noise(rng));
            d += cfg.noise_sigma_px * Point2(noise(rng), noise(rng));
        }
        inst.pixels[i] = {s, d};
    }
    const int n_out = static_cast<int>(std::lround(cfg.outlier_fraction * n));
    if (n_out > 0) {
        std::vector<int> idx(n);
        for (int i = 0; i < n; ++i) idx[i] = i;
        std::shuffle(idx.begin(), idx.end(), rng);
        const double ext = cfg.focal * half;
        for (int k = 0; k < n_out; ++k) {
            const int i = idx[k];
            inst.pixels[i] = {Point2(uniform(-ext, ext), uniform(-ext, ext)), Point2(uniform(-ext, ext), uniform(-ext, ext))};
            inst.inlier_flags[i] = false;
        }
    }
    return inst;
}

inline SyntheticInstance generate_instance(const SceneConfig &cfg) {
    Rng rng = make_rng(cfg.rng_seed);
    return generate_instance(cfg, rng);
}

// First five correspondences as a minimal sample.
inline CorrSet5 minimal_sample(const std::vector<Correspondence> &c) {
    if (c.size() < 5) {
        throw Error(ErrorKind::InsufficientData, "need five correspondences");
    }
    CorrSet5 s;
    for (int i = 0; i < 5; ++i) {
        s.src[i] = c[i].src;
        s.dst[i] = c[i].dst;
    }
    return s;
}

} // namespace rdhomog
