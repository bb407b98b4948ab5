#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Dense>

#include "rdhomog/distortion.hpp"
#include "rdhomog/error.hpp"
#include "rdhomog/geometry.hpp"
#include "rdhomog/scene.hpp"
#include "rdhomog/solvers.hpp"

namespace rdhomog {

struct RobustConfig {
    SolverCase solver_case = SolverCase::OneSided;
    double inlier_threshold_px = 5.0;
    // Pixels per normalized unit.
    double focal_scale = 1000.0;
    int max_iterations = 10000;
    int min_iterations = 500;
    double confidence = 0.99;
    bool lo_enabled = true;
    bool refine_enabled = true;
    std::uint64_t rng_seed = 0;
    // Wall-clock budget; checked only once min_iterations samples are done.
    double time_budget_s = std::numeric_limits<double>::infinity();
    int lo_inner_iterations = 10;

    void validate() const {
        if (!(inlier_threshold_px > 0.0)) throw Error(ErrorKind::ConfigInvalid, "inlier threshold must be positive");
        if (!(confidence > 0.0 && confidence < 1.0)) throw Error(ErrorKind::ConfigInvalid, "confidence must lie in (0, 1)");
        if (min_iterations < 0 || min_iterations > max_iterations) {
            throw Error(ErrorKind::ConfigInvalid, "need 0 <= min_iterations <= max_iterations");
        }
        if (!(focal_scale > 0.0)) throw Error(ErrorKind::ConfigInvalid, "focal scale must be positive");
    }
};

struct TracePoint {
    double elapsed_s = 0.0;
    int inliers = 0;
};

struct RobustResult {
    SolverCandidate model;
    std::vector<bool> inlier_mask;
    int num_inliers = 0;
    // Truncated quadratic (MSAC) cost in px^2.
    double score = 0.0;
    // Samples that passed the degeneracy check.
    int iterations = 0;
    int samples_drawn = 0;
    int models_evaluated = 0;
    std::chrono::duration<double> elapsed{0.0};
    // Best inlier count each time it improved.
    std::vector<TracePoint> trace;
};

// Model with its inverse cached for scoring.
struct TransferModel {
    Eigen::Matrix3d h;
    Eigen::Matrix3d h_inv;
    double lam = 0.0;
    double lam_p = 0.0;

    explicit TransferModel(const SolverCandidate &m)
        : h(m.h.matrix()), h_inv(m.h.matrix().inverse()), lam(m.lam.value), lam_p(m.lam_p.value) {}
};

namespace detail {

// Undistort with lam_from, map with h, distort with lam_to. Returns nullopt
// when a step leaves the model's domain.
inline std::optional<Point2> transfer(const Eigen::Matrix3d &h, double lam_from, double lam_to, const Point2 &p) {
    const double w = 1.0 + lam_from * p.squaredNorm();
    if (std::abs(w) < kSingularRadiusTol) {
        return std::nullopt;
    }
    const Eigen::Vector3d y = h * Eigen::Vector3d(p.x(), p.y(), w);
    if (std::abs(y.z()) < 1e-15 * y.norm() || !y.allFinite()) {
        return std::nullopt;
    }
    const Point2 q = y.head<2>() / y.z();
    const double disc = 1.0 - 4.0 * lam_to * q.squaredNorm();
    if (disc < 0.0) {
        return std::nullopt;
    }
    return q * (2.0 / (1.0 + std::sqrt(disc)));
}

} // namespace detail

// Symmetric transfer error in pixels: max of the forward (src -> dst) and
// backward (dst -> src) distort-map-redistort errors. Infinite when the model
// cannot transfer the point.
inline double transfer_error(const TransferModel &m, const Correspondence &c, double focal_scale) {
    const auto fwd = detail::transfer(m.h, m.lam, m.lam_p, c.src);
    const auto bwd = detail::transfer(m.h_inv, m.lam_p, m.lam, c.dst);
    if (!fwd || !bwd) {
        return std::numeric_limits<double>::infinity();
    }
    return focal_scale * std::max((*fwd - c.dst).norm(), (*bwd - c.src).norm());
}

inline double transfer_error(const SolverCandidate &m, const Correspondence &c, double focal_scale) {
    return transfer_error(TransferModel(m), c, focal_scale);
}

// ---------------------------------------------------------------------------
// Least-squares refinement

// Four residuals per correspondence (forward dx, dy; backward dx, dy) in
// normalized units, with derivatives with respect to the nine entries of H
// (row-major), lam and lam'.
struct PointJacobian {
    Eigen::Vector4d r;
    Eigen::Matrix<double, 4, 11> j;
};

namespace detail {

struct DistortDerivs {
    Point2 m;
    Eigen::Matrix2d dm_dq;
    Point2 dm_dlam;
};

// m = q * 2 / (1 + sqrt(1 - 4 lam |q|^2)) with derivatives.
inline std::optional<DistortDerivs> distort_with_derivs(const Point2 &q, double lam) {
    const double rho = q.squaredNorm();
    const double disc = 1.0 - 4.0 * lam * rho;
    if (disc <= 0.0) {
        return std::nullopt;
    }
    const double s = std::sqrt(disc);
    const double g = 2.0 / (1.0 + s);
    const double k = 4.0 / (s * (1.0 + s) * (1.0 + s));
    DistortDerivs d;
    d.m = g * q;
    d.dm_dq = g * Eigen::Matrix2d::Identity() + (2.0 * lam * k) * q * q.transpose();
    d.dm_dlam = (rho * k) * q;
    return d;
}

} // namespace detail

inline std::optional<PointJacobian> transfer_residual_jacobian(const Eigen::Matrix3d &h, double lam, double lam_p,
                                                               const Correspondence &c) {
    const Eigen::Matrix3d h_inv = h.inverse();
    PointJacobian out;
    out.j.setZero();

    // Forward: src --lam--> H --lam'--> compare with dst.
    {
        const double s2 = c.src.squaredNorm();
        const Eigen::Vector3d x(c.src.x(), c.src.y(), 1.0 + lam * s2);
        const Eigen::Vector3d y = h * x;
        if (std::abs(y.z()) < 1e-15 * y.norm()) {
            return std::nullopt;
        }
        const Point2 q = y.head<2>() / y.z();
        const auto d = detail::distort_with_derivs(q, lam_p);
        if (!d) {
            return std::nullopt;
        }
        Eigen::Matrix<double, 2, 3> dq_dy;
        dq_dy << 1.0 / y.z(), 0.0, -q.x() / y.z(), 0.0, 1.0 / y.z(), -q.y() / y.z();
        const Eigen::Matrix<double, 2, 3> dm_dy = d->dm_dq * dq_dy;
        out.r.head<2>() = d->m - c.dst;
        for (int i = 0; i < 3; ++i) {
            for (int k = 0; k < 3; ++k) {
                out.j.block<2, 1>(0, 3 * i + k) = dm_dy.col(i) * x(k);
            }
        }
        out.j.block<2, 1>(0, 9) = dm_dy * h.col(2) * s2;
        out.j.block<2, 1>(0, 10) = d->dm_dlam;
    }
    // Backward: dst --lam'--> H^-1 --lam--> compare with src.
    {
        const double d2 = c.dst.squaredNorm();
        const Eigen::Vector3d x(c.dst.x(), c.dst.y(), 1.0 + lam_p * d2);
        const Eigen::Vector3d z = h_inv * x;
        if (std::abs(z.z()) < 1e-15 * z.norm()) {
            return std::nullopt;
        }
        const Point2 q = z.head<2>() / z.z();
        const auto d = detail::distort_with_derivs(q, lam);
        if (!d) {
            return std::nullopt;
        }
        Eigen::Matrix<double, 2, 3> dq_dz;
        dq_dz << 1.0 / z.z(), 0.0, -q.x() / z.z(), 0.0, 1.0 / z.z(), -q.y() / z.z();
        const Eigen::Matrix<double, 2, 3> dm_dz = d->dm_dq * dq_dz;
        out.r.tail<2>() = d->m - c.src;
        // d(H^-1 x)/dH_ik = -H^-1 e_i e_k' H^-1 x = -H^-1.col(i) z_k
        for (int i = 0; i < 3; ++i) {
            for (int k = 0; k < 3; ++k) {
                out.j.block<2, 1>(2, 3 * i + k) = -dm_dz * h_inv.col(i) * z(k);
            }
        }
        out.j.block<2, 1>(2, 9) = d->dm_dlam;
        out.j.block<2, 1>(2, 10) = dm_dz * h_inv.col(2) * d2;
    }
    return out;
}

// Parameterization used by refine(): eight free entries of H (the entry of
// largest magnitude in the starting model is held fixed) plus the
// distortion parameters allowed by the solver case.
class RefineParams {
  public:
    RefineParams(const SolverCandidate &m, SolverCase sc) : case_(sc) {
        const Eigen::Matrix3d h = m.h.normalized().matrix();
        Eigen::Index r, c;
        h.cwiseAbs().maxCoeff(&r, &c);
        fixed_ = static_cast<int>(3 * r + c);
        fixed_value_ = h(r, c);
        theta_.resize(size());
        int k = 0;
        for (int e = 0; e < 9; ++e) {
            if (e != fixed_) {
                theta_(k++) = h(e / 3, e % 3);
            }
        }
        theta_(8) = m.lam.value;
        if (sc == SolverCase::TwoSidedIndependent) {
            theta_(9) = m.lam_p.value;
        }
    }

    int size() const { return case_ == SolverCase::TwoSidedIndependent ? 10 : 9; }
    const Eigen::VectorXd &theta() const { return theta_; }
    void set_theta(const Eigen::VectorXd &t) { theta_ = t; }

    Eigen::Matrix3d h() const { return h_of(theta_); }
    double lam() const { return theta_(8); }
    double lam_p() const {
        switch (case_) {
        case SolverCase::OneSided: return 0.0;
        case SolverCase::TwoSidedEqual: return theta_(8);
        case SolverCase::TwoSidedIndependent: return theta_(9);
        }
        return 0.0;
    }

    Eigen::Matrix3d h_of(const Eigen::VectorXd &t) const {
        Eigen::Matrix3d h;
        int k = 0;
        for (int e = 0; e < 9; ++e) {
            h(e / 3, e % 3) = (e == fixed_) ? fixed_value_ : t(k++);
        }
        return h;
    }

    // Maps the 11 raw derivative columns onto the parameter vector.
    Eigen::Matrix<double, 4, Eigen::Dynamic> reduce(const Eigen::Matrix<double, 4, 11> &raw) const {
        Eigen::Matrix<double, 4, Eigen::Dynamic> j(4, size());
        int k = 0;
        for (int e = 0; e < 9; ++e) {
            if (e != fixed_) {
                j.col(k++) = raw.col(e);
            }
        }
        switch (case_) {
        case SolverCase::OneSided: j.col(8) = raw.col(9); break;
        case SolverCase::TwoSidedEqual: j.col(8) = raw.col(9) + raw.col(10); break;
        case SolverCase::TwoSidedIndependent:
            j.col(8) = raw.col(9);
            j.col(9) = raw.col(10);
            break;
        }
        return j;
    }

  private:
    SolverCase case_;
    int fixed_ = 8;
    double fixed_value_ = 1.0;
    Eigen::VectorXd theta_;
};

// Stacked residuals and Jacobian of the transfer cost over the selected
// correspondences; false when any point leaves the model's domain.
inline bool assemble_normal_system(const RefineParams &p, const Eigen::VectorXd &theta,
                                   std::span<const Correspondence> corrs, Eigen::VectorXd &r,
                                   Eigen::MatrixXd &jac) {
    RefineParams q = p;
    q.set_theta(theta);
    const Eigen::Matrix3d h = q.h();
    r.resize(4 * static_cast<Eigen::Index>(corrs.size()));
    jac.resize(r.size(), p.size());
    for (std::size_t i = 0; i < corrs.size(); ++i) {
        const auto pj = transfer_residual_jacobian(h, q.lam(), q.lam_p(), corrs[i]);
        if (!pj || !pj->r.allFinite()) {
            return false;
        }
        r.segment<4>(4 * i) = pj->r;
        jac.block(4 * i, 0, 4, p.size()) = p.reduce(pj->j);
    }
    return jac.allFinite();
}

inline double transfer_cost(const Eigen::Matrix3d &h, double lam, double lam_p, std::span<const Correspondence> corrs) {
    double cost = 0.0;
    for (const Correspondence &c : corrs) {
        const auto fwd = detail::transfer(h, lam, lam_p, c.src);
        const auto bwd = detail::transfer(h.inverse(), lam_p, lam, c.dst);
        if (!fwd || !bwd) {
            return std::numeric_limits<double>::infinity();
        }
        cost += (*fwd - c.dst).squaredNorm() + (*bwd - c.src).squaredNorm();
    }
    return cost;
}

inline double transfer_cost(const SolverCandidate &m, std::span<const Correspondence> corrs) {
    return transfer_cost(m.h.matrix(), m.lam.value, m.lam_p.value, corrs);
}

struct RefineOptions {
    int max_iterations = 100;
    double relative_tolerance = 1e-10;
};

// Levenberg-Marquardt on the summed squared symmetric transfer error over the
// masked correspondences. The solver case fixes how lam' is tied to lam.
inline SolverCandidate refine(std::span<const Correspondence> corrs, const SolverCandidate &model,
                              const std::vector<bool> &inlier_mask, SolverCase sc, const RefineOptions &opt = {}) {
    std::vector<Correspondence> sel;
    for (std::size_t i = 0; i < corrs.size() && i < inlier_mask.size(); ++i) {
        if (inlier_mask[i]) {
            sel.push_back(corrs[i]);
        }
    }
    if (sel.size() < 5) {
        return model;
    }
    RefineParams params(model, sc);
    Eigen::VectorXd theta = params.theta();
    Eigen::VectorXd r;
    Eigen::MatrixXd jac;
    if (!assemble_normal_system(params, theta, sel, r, jac)) {
        return model;
    }
    double cost = r.squaredNorm();
    const double start_cost = cost;
    double mu = 1e-3;
    for (int it = 0; it < opt.max_iterations; ++it) {
        const Eigen::MatrixXd a = jac.transpose() * jac;
        const Eigen::VectorXd g = jac.transpose() * r;
        bool improved = false;
        while (mu < 1e12) {
            Eigen::MatrixXd damped = a;
            const double floor = 1e-12 * std::max(a.diagonal().maxCoeff(), 1e-300);
            for (Eigen::Index k = 0; k < a.rows(); ++k) {
                damped(k, k) += mu * std::max(a(k, k), floor);
            }
            const Eigen::VectorXd step = damped.ldlt().solve(-g);
            const Eigen::VectorXd cand = theta + step;
            Eigen::VectorXd rn;
            Eigen::MatrixXd jn;
            if (step.allFinite() && assemble_normal_system(params, cand, sel, rn, jn)) {
                const double cn = rn.squaredNorm();
                if (cn < cost) {
                    const double rel = (cost - cn) / std::max(cost, std::numeric_limits<double>::min());
                    theta = cand;
                    r = rn;
                    jac = jn;
                    cost = cn;
                    mu = std::max(mu / 3.0, 1e-12);
                    improved = true;
                    if (rel < opt.relative_tolerance) {
                        it = opt.max_iterations;
                    }
                    break;
                }
            }
            mu *= 4.0;
        }
        if (!improved) {
            break;
        }
    }
    if (!(cost < start_cost)) {
        return model;
    }
    params.set_theta(theta);
    try {
        SolverCandidate out = model;
        out.h = Homography(params.h()).normalized();
        out.lam = Lambda(params.lam());
        out.lam_p = Lambda(params.lam_p());
        return out;
    } catch (const Error &) {
        return model;
    }
}

// ---------------------------------------------------------------------------
// LO-RANSAC

namespace detail {

struct Score {
    int inliers = 0;
    double cost = std::numeric_limits<double>::infinity();
};

inline bool better(const Score &a, const Score &b) {
    return a.inliers > b.inliers || (a.inliers == b.inliers && a.cost < b.cost);
}

inline Score score_model(const SolverCandidate &m, std::span<const Correspondence> corrs, double thr, double focal,
                         std::vector<bool> *mask = nullptr) {
    const TransferModel tm(m);
    Score s{0, 0.0};
    const double thr2 = thr * thr;
    if (mask) {
        mask->assign(corrs.size(), false);
    }
    for (std::size_t i = 0; i < corrs.size(); ++i) {
        const double e = transfer_error(tm, corrs[i], focal);
        if (e <= thr) {
            ++s.inliers;
            s.cost += e * e;
            if (mask) {
                (*mask)[i] = true;
            }
        } else {
            s.cost += thr2;
        }
    }
    return s;
}

inline std::vector<std::size_t> draw_indices(Rng &rng, std::size_t n, std::size_t k) {
    std::vector<std::size_t> out;
    out.reserve(k);
    while (out.size() < k) {
        const std::size_t i = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
        if (std::find(out.begin(), out.end(), i) == out.end()) {
            out.push_back(i);
        }
    }
    return out;
}

inline int adaptive_iterations(double inlier_ratio, double confidence, int cap) {
    const double p_good = std::pow(inlier_ratio, 5);
    if (p_good >= 1.0) {
        return 0;
    }
    if (p_good <= 0.0) {
        return cap;
    }
    const double n = std::log(1.0 - confidence) / std::log(1.0 - p_good);
    return n >= cap ? cap : static_cast<int>(std::ceil(n));
}

inline RobustResult make_result(const SolverCandidate &m, std::span<const Correspondence> corrs, double thr,
                                double focal) {
    RobustResult res;
    res.model = m;
    const Score s = score_model(m, corrs, thr, focal, &res.inlier_mask);
    res.num_inliers = s.inliers;
    res.score = s.cost;
    return res;
}

} // namespace detail

// Re-estimates from random subsets of the current inliers, then iterates
// least squares over a threshold that shrinks from 3x to 1x the inlier
// threshold. Never returns fewer inliers than it was given.
// `progress` is told every improved inlier count as soon as it is found.
inline RobustResult local_optimize(std::span<const Correspondence> corrs, const RobustResult &current,
                                   const RobustConfig &cfg, Rng &rng,
                                   const std::function<void(int)> &progress = {}) {
    if (current.num_inliers < 5) {
        return current;
    }
    constexpr std::size_t kInnerSample = 14;
    constexpr double kSchedule[] = {3.0, 2.0, 1.5, 1.0};
    const RefineOptions inner{10, 1e-10};
    const double thr = cfg.inlier_threshold_px;

    std::vector<std::size_t> inliers;
    for (std::size_t i = 0; i < current.inlier_mask.size(); ++i) {
        if (current.inlier_mask[i]) {
            inliers.push_back(i);
        }
    }
    RobustResult best = current;
    detail::Score best_score{current.num_inliers, current.score};
    for (int it = 0; it < cfg.lo_inner_iterations; ++it) {
        std::vector<bool> mask(corrs.size(), false);
        std::vector<std::size_t> pool = inliers;
        std::shuffle(pool.begin(), pool.end(), rng);
        pool.resize(std::min(pool.size(), kInnerSample));
        for (std::size_t i : pool) {
            mask[i] = true;
        }
        SolverCandidate model = refine(corrs, current.model, mask, cfg.solver_case, inner);
        for (double k : kSchedule) {
            std::vector<bool> wide;
            const detail::Score s = detail::score_model(model, corrs, k * thr, cfg.focal_scale, &wide);
            if (s.inliers < 5) {
                break;
            }
            model = refine(corrs, model, wide, cfg.solver_case, inner);
        }
        std::vector<bool> final_mask;
        const detail::Score s = detail::score_model(model, corrs, thr, cfg.focal_scale, &final_mask);
        if (detail::better(s, best_score)) {
            best_score = s;
            best.model = model;
            best.inlier_mask = std::move(final_mask);
            best.num_inliers = s.inliers;
            best.score = s.cost;
            if (progress) {
                progress(s.inliers);
            }
        }
    }
    return best;
}

inline RobustResult local_optimize(std::span<const Correspondence> corrs, const RobustResult &current,
                                   const RobustConfig &cfg) {
    Rng rng = make_rng(cfg.rng_seed, 0x10ca1);
    return local_optimize(corrs, current, cfg, rng);
}

// LO-RANSAC around the minimal solver selected by cfg.solver_case.
// Correspondences are focal-normalized; thresholds are in pixels via
// cfg.focal_scale.
inline RobustResult ransac(std::span<const Correspondence> corrs, const RobustConfig &cfg) {
    cfg.validate();
    if (corrs.size() < 5) {
        throw Error(ErrorKind::InsufficientData, "RANSAC needs at least five correspondences");
    }
    using Clock = std::chrono::steady_clock;
    const auto t0 = Clock::now();
    const auto elapsed = [&] { return std::chrono::duration<double>(Clock::now() - t0).count(); };

    Rng rng = make_rng(cfg.rng_seed);
    SolverOptions sopt;
    sopt.max_residual = std::numeric_limits<double>::infinity();
    const double thr = cfg.inlier_threshold_px;
    const std::size_t n = corrs.size();

    std::optional<RobustResult> best;
    detail::Score best_score;
    int iterations = 0, drawn = 0, evaluated = 0;
    int needed = cfg.max_iterations;
    std::vector<TracePoint> trace;

    while (drawn < cfg.max_iterations) {
        if (iterations >= cfg.min_iterations &&
            (iterations >= needed || elapsed() >= cfg.time_budget_s)) {
            break;
        }
        ++drawn;
        const auto idx = detail::draw_indices(rng, n, 5);
        CorrSet5 sample;
        PointQuad qs, qd;
        for (int i = 0; i < 5; ++i) {
            sample.src[i] = corrs[idx[i]].src;
            sample.dst[i] = corrs[idx[i]].dst;
            if (i < 4) {
                qs[i] = lift(sample.src[i], Lambda(0.0));
                qd[i] = lift(sample.dst[i], Lambda(0.0));
            }
        }
        if (!in_general_position(qs) || !in_general_position(qd)) {
            continue;
        }
        std::vector<SolverCandidate> cands;
        try {
            cands = solve(cfg.solver_case, sample, sopt);
        } catch (const Error &) {
            continue;
        }
        ++iterations;
        for (const SolverCandidate &m : cands) {
            ++evaluated;
            std::vector<bool> mask;
            const detail::Score s = detail::score_model(m, corrs, thr, cfg.focal_scale, &mask);
            if (best && !detail::better(s, best_score)) {
                continue;
            }
            RobustResult cur;
            cur.model = m;
            cur.inlier_mask = std::move(mask);
            cur.num_inliers = s.inliers;
            cur.score = s.cost;
            // The hypothesis counts as soon as it is scored; LO can take far
            // longer than a sample.
            trace.push_back({elapsed(), s.inliers});
            if (cfg.lo_enabled) {
                cur = local_optimize(corrs, cur, cfg, rng, [&](int k) {
                    if (k > trace.back().inliers) {
                        trace.push_back({elapsed(), k});
                    }
                });
            }
            best = std::move(cur);
            best_score = {best->num_inliers, best->score};
            needed = detail::adaptive_iterations(static_cast<double>(best->num_inliers) / static_cast<double>(n),
                                                 cfg.confidence, cfg.max_iterations);
        }
    }
    if (!best) {
        throw Error(ErrorKind::NoModelFound, "no sample produced a model");
    }
    RobustResult out = std::move(*best);
    if (cfg.refine_enabled && out.num_inliers >= 5) {
        const SolverCandidate refined = refine(corrs, out.model, out.inlier_mask, cfg.solver_case);
        RobustResult r = detail::make_result(refined, corrs, thr, cfg.focal_scale);
        if (detail::better({r.num_inliers, r.score}, {out.num_inliers, out.score}) ||
            r.num_inliers == out.num_inliers) {
            out.model = r.model;
            out.inlier_mask = std::move(r.inlier_mask);
            out.num_inliers = r.num_inliers;
            out.score = r.score;
        }
        if (trace.empty() || trace.back().inliers < out.num_inliers) {
            trace.push_back({elapsed(), out.num_inliers});
        }
    }
    out.iterations = iterations;
    out.samples_drawn = drawn;
    out.models_evaluated = evaluated;
    out.trace = std::move(trace);
    out.elapsed = std::chrono::duration<double>(elapsed());
    return out;
}

} // namespace rdhomog
