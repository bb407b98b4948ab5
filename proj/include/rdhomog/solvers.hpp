#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Dense>

#include "rdhomog/distortion.hpp"
#include "rdhomog/error.hpp"
#include "rdhomog/geometry.hpp"
#include "rdhomog/poly.hpp"

namespace rdhomog {

enum class SolverCase { OneSided, TwoSidedEqual, TwoSidedIndependent };

inline const char *to_string(SolverCase c) {
    switch (c) {
    case SolverCase::OneSided: return "one-sided";
    case SolverCase::TwoSidedEqual: return "equal";
    case SolverCase::TwoSidedIndependent: return "independent";
    }
    return "unknown";
}

inline SolverCase parse_solver_case(std::string_view s) {
    if (s == "one-sided") return SolverCase::OneSided;
    if (s == "equal") return SolverCase::TwoSidedEqual;
    if (s == "independent") return SolverCase::TwoSidedIndependent;
    throw Error(ErrorKind::ConfigInvalid, "unknown solver case '" + std::string(s) + "'");
}

// Most candidates each solver can return.
inline constexpr int max_candidates(SolverCase c) {
    switch (c) {
    case SolverCase::OneSided: return 3;
    case SolverCase::TwoSidedEqual: return 6;
    case SolverCase::TwoSidedIndependent: return 5;
    }
    return 0;
}
inline constexpr int kIndependentMaxRaw = 9;

// A distorted, focal-normalized point pair.
struct Correspondence {
    Point2 src = Point2::Zero();
    Point2 dst = Point2::Zero();
};

// Minimal sample: indices 0..3 form the basis quads, index 4 is the
// constraint point.
struct CorrSet5 {
    std::array<Point2, 5> src;
    std::array<Point2, 5> dst;
};

struct SolverCandidate {
    Homography h;
    Lambda lam;
    Lambda lam_p;
    // Max |component| of N(lam) x N'(lam_p) with both vectors unit-normalized.
    double residual = 0.0;
    // Sine of the angle between H x5 and x5'.
    double transfer_residual = 0.0;
};

// Cleared fifth-point vectors N(lam), N'(lam') with the affine determinants
// that enter them. Index 0 holds the source side, 1 the destination side.
struct NPair {
    VecPoly n;
    VecPoly n_p;
    Poly det_src;
    Poly det_dst;
    // Gamma(lam) and Gamma'(lam'), each component affine.
    VecPoly gamma;
    VecPoly gamma_p;
};

struct SolverOptions {
    // Search window for distortion coefficients.
    double root_lo = -1.5;
    double root_hi = 1.5;
    // Cross-product consistency required of every candidate. The one-sided
    // and equal solvers use a single component of the fifth-point
    // constraint, so on noisy samples the remaining components are only
    // approximately satisfied; callers working with noisy data set this to
    // infinity and let scoring decide.
    double max_residual = 1e-6;
    // Relative tolerance on |det| for the spurious-root filter.
    double spurious_tol = 1e-8;
    double degeneracy_tol = kDegeneracyTol;
};

// Counts reported by the independent solver.
struct IndependentDiagnostics {
    int eliminant_degree = 0; // degree of the deflated resultant (9 generically)
    int raw_roots = 0;        // real pairs solving all three equations
    int filtered_roots = 0;   // after the determinant filter
    bool deflated = false;
};

namespace detail {

// det[x_i x_j x_k] for lifted points x(lam) = (u, v, 1 + lam r^2); affine in lam.
inline Poly lifted_triple_det(const Point2 &a, const Point2 &b, const Point2 &c) {
    Eigen::Matrix3d m0, m1;
    m0 << a.x(), b.x(), c.x(), a.y(), b.y(), c.y(), 1.0, 1.0, 1.0;
    m1 = m0;
    m1.row(2) << a.squaredNorm(), b.squaredNorm(), c.squaredNorm();
    return Poly{m0.determinant(), m1.determinant()};
}

inline bool affine_vanishes(const Poly &p, const Point2 &a, const Point2 &b, const Point2 &c, double tol) {
    const auto len = [](const Point2 &q) { return std::sqrt(1.0 + q.squaredNorm() + q.squaredNorm() * q.squaredNorm()); };
    const double scale = len(a) * len(b) * len(c);
    return std::abs(p[0]) < tol * scale && std::abs(p[1]) < tol * scale;
}

struct SideExpansion {
    VecPoly n;
    VecPoly gamma;
    Poly det;
};

inline SideExpansion expand_side(const std::array<Point2, 5> &x, double tol) {
    const Poly g1 = lifted_triple_det(x[3], x[1], x[2]);
    const Poly g2 = lifted_triple_det(x[0], x[3], x[2]);
    const Poly g3 = lifted_triple_det(x[0], x[1], x[3]);
    const Poly a1 = lifted_triple_det(x[4], x[1], x[2]);
    const Poly a2 = lifted_triple_det(x[0], x[4], x[2]);
    const Poly a3 = lifted_triple_det(x[0], x[1], x[4]);
    const Poly det = lifted_triple_det(x[0], x[1], x[2]);
    if (affine_vanishes(det, x[0], x[1], x[2], tol) || affine_vanishes(g1, x[3], x[1], x[2], tol) ||
        affine_vanishes(g2, x[0], x[3], x[2], tol) || affine_vanishes(g3, x[0], x[1], x[3], tol)) {
        throw Error(ErrorKind::Degenerate, "basis points are collinear for every distortion value");
    }
    SideExpansion s;
    s.n = VecPoly::from_components(a1 * g2 * g3, a2 * g1 * g3, a3 * g1 * g2);
    s.gamma = VecPoly::from_components(g1, g2, g3);
    s.det = det;
    return s;
}

// Share of the coefficient mass carried by the nominal leading term.
inline double leading_ratio(const Poly &p, std::size_t nominal_degree) {
    const double m = p.max_abs_coeff();
    return m == 0.0 ? 0.0 : std::abs(p[nominal_degree]) / m;
}

inline std::size_t best_component(const std::array<Poly, 3> &eqs, std::size_t nominal_degree) {
    std::size_t best = 0;
    double score = -1.0;
    for (std::size_t i = 0; i < 3; ++i) {
        const double s = leading_ratio(eqs[i], nominal_degree);
        if (s > score) {
            score = s;
            best = i;
        }
    }
    return best;
}

inline double cross_residual(const Eigen::Vector3d &a, const Eigen::Vector3d &b) {
    const double na = a.norm(), nb = b.norm();
    if (na == 0.0 || nb == 0.0 || !std::isfinite(na) || !std::isfinite(nb)) {
        return std::numeric_limits<double>::infinity();
    }
    return (a / na).cross(b / nb).cwiseAbs().maxCoeff();
}

inline void sort_and_cap(std::vector<SolverCandidate> &cands, std::size_t cap) {
    std::stable_sort(cands.begin(), cands.end(), [](const SolverCandidate &a, const SolverCandidate &b) {
        return a.transfer_residual < b.transfer_residual;
    });
    if (cands.size() > cap) {
        cands.resize(cap);
    }
}

} // namespace detail

inline NPair build_npair(const CorrSet5 &c, double tol = kDegeneracyTol) {
    for (int i = 0; i < 5; ++i) {
        if (!c.src[i].allFinite() || !c.dst[i].allFinite()) {
            throw Error(ErrorKind::Degenerate, "non-finite correspondence");
        }
    }
    const detail::SideExpansion s = detail::expand_side(c.src, tol);
    const detail::SideExpansion d = detail::expand_side(c.dst, tol);
    return NPair{s.n, d.n, s.det, d.det, s.gamma, d.gamma};
}

// Homography between the lam-undistorted source quad and the
// lam_p-undistorted destination quad (points 0..3).
inline Homography recover_h(const CorrSet5 &c, Lambda lam, Lambda lam_p, double tol = kDegeneracyTol) {
    PointQuad src, dst;
    for (int i = 0; i < 4; ++i) {
        src[i] = lift(c.src[i], lam);
        dst[i] = lift(c.dst[i], lam_p);
        if (std::abs(src[i].z()) < kSingularRadiusTol || std::abs(dst[i].z()) < kSingularRadiusTol) {
            throw Error(ErrorKind::SingularRadius, "basis point on the singular circle");
        }
    }
    return closed_form_homography(src, dst, tol);
}

// Sine of the angle between H x5(lam) and x5'(lam_p).
inline double fifth_point_residual(const CorrSet5 &c, const Homography &h, Lambda lam, Lambda lam_p) {
    return projective_distance(h(lift(c.src[4], lam)), lift(c.dst[4], lam_p));
}

namespace detail {

inline std::optional<SolverCandidate> make_candidate(const CorrSet5 &c, double lam, double lam_p, double residual,
                                                     const SolverOptions &opt) {
    try {
        SolverCandidate cand{recover_h(c, Lambda(lam), Lambda(lam_p), opt.degeneracy_tol), Lambda(lam),
                             Lambda(lam_p), residual, 0.0};
        if (std::abs(lift(c.src[4], cand.lam).z()) < kSingularRadiusTol ||
            std::abs(lift(c.dst[4], cand.lam_p).z()) < kSingularRadiusTol) {
            return std::nullopt;
        }
        cand.transfer_residual = fifth_point_residual(c, cand.h, cand.lam, cand.lam_p);
        return cand;
    } catch (const Error &) {
        // Roots where a basis triple becomes collinear (a Gamma_i factor of
        // the chosen component) do not define a homography.
        return std::nullopt;
    }
}

} // namespace detail

// lam' = 0: N(lam) x N'(0) = 0, three cubics in lam; one is solved with the
// trigonometric method and the roots are validated on the other two.
inline std::vector<SolverCandidate> solve_one_sided(const CorrSet5 &c, const SolverOptions &opt = {}) {
    const NPair np = build_npair(c, opt.degeneracy_tol);
    const Eigen::Vector3d b = np.n_p.coeffs.front();
    const auto cross = vec_cross(np.n, VecPoly{{b}});
    const std::array<Poly, 3> cubics{cross[0].in_x_at(0.0), cross[1].in_x_at(0.0), cross[2].in_x_at(0.0)};
    const std::size_t k = detail::best_component(cubics, 3);
    if (cubics[k].max_abs_coeff() == 0.0) {
        throw Error(ErrorKind::Degenerate, "fifth point constraint vanishes identically");
    }
    std::vector<SolverCandidate> out;
    for (double lam : cubic_roots_trig(cubics[k])) {
        if (!(lam > opt.root_lo && lam < opt.root_hi)) {
            continue;
        }
        const double res = detail::cross_residual(np.n(lam), b);
        if (!(res <= opt.max_residual)) {
            continue;
        }
        if (auto cand = detail::make_candidate(c, lam, 0.0, res, opt)) {
            out.push_back(*cand);
        }
    }
    detail::sort_and_cap(out, max_candidates(SolverCase::OneSided));
    return out;
}

// lam' = lam: N(lam) x N'(lam) = 0, three sextics; one is solved with Sturm
// sequences and the roots are validated on the other two.
inline std::vector<SolverCandidate> solve_two_sided_equal(const CorrSet5 &c, const SolverOptions &opt = {}) {
    const NPair np = build_npair(c, opt.degeneracy_tol);
    const auto cross = vec_cross(np.n, np.n_p);
    const std::array<Poly, 3> sextics{cross[0].diagonal(), cross[1].diagonal(), cross[2].diagonal()};
    const std::size_t k = detail::best_component(sextics, 6);
    if (sextics[k].max_abs_coeff() == 0.0) {
        throw Error(ErrorKind::Degenerate, "fifth point constraint vanishes identically");
    }
    std::vector<SolverCandidate> out;
    for (double lam : sturm_real_roots(sextics[k], opt.root_lo, opt.root_hi)) {
        const double res = detail::cross_residual(np.n(lam), np.n_p(lam));
        if (!(res <= opt.max_residual)) {
            continue;
        }
        if (auto cand = detail::make_candidate(c, lam, lam, res, opt)) {
            out.push_back(*cand);
        }
    }
    detail::sort_and_cap(out, max_candidates(SolverCase::TwoSidedEqual));
    return out;
}

namespace detail {

// Plain Newton on the cross-product equations. Near clustered roots the first
// step can raise |f| before converging, so every iterate is scored and the
// best one by `score` is kept.
template <class Score>
inline void polish_pair(const std::array<BiPoly, 3> &eqs, double &x, double &y, Score score) {
    double cx = x, cy = y;
    double best = score(x, y);
    for (int it = 0; it < 10; ++it) {
        Eigen::Vector3d f;
        Eigen::Matrix<double, 3, 2> jac;
        for (int i = 0; i < 3; ++i) {
            const auto [fy, dfy] = eqs[i].in_y_at(cx).eval_with_derivative(cy);
            const auto [fx, dfx] = eqs[i].in_x_at(cy).eval_with_derivative(cx);
            (void)fx;
            f(i) = fy;
            jac(i, 0) = dfx;
            jac(i, 1) = dfy;
        }
        const Eigen::Vector2d step = jac.colPivHouseholderQr().solve(-f);
        if (!step.allFinite() || step.norm() > 0.1) {
            return;
        }
        cx += step(0);
        cy += step(1);
        const double r = score(cx, cy);
        if (r < best) {
            best = r;
            x = cx;
            y = cy;
        }
        if (step.norm() <= 1e-15 * (1.0 + std::abs(cx) + std::abs(cy))) {
            return;
        }
    }
}

inline bool near_zero_affine(const Poly &p, double x, double tol) {
    const double scale = p.max_abs_coeff() * std::max(1.0, std::abs(x));
    return scale == 0.0 || std::abs(p(x)) < tol * scale;
}

// True when (lam, lam') makes a basis triple collinear on either side: these
// are the extra roots introduced by the adjugate formulation.
inline bool is_spurious(const NPair &np, double x, double y, double tol) {
    if (near_zero_affine(np.det_src, x, tol) || near_zero_affine(np.det_dst, y, tol)) {
        return true;
    }
    for (int i = 0; i < 3; ++i) {
        if (near_zero_affine(np.gamma.component(i), x, tol) || near_zero_affine(np.gamma_p.component(i), y, tol)) {
            return true;
        }
    }
    return false;
}

} // namespace detail

// Independent lam, lam': eliminate lam' from two cross-product components
// with a Sylvester resultant, strip the known cubed factor to get the degree-9
// eliminant, isolate its real roots with Sturm sequences, back-substitute
// lam', then drop residual failures and spurious adjugate roots.
inline std::vector<SolverCandidate> solve_two_sided_independent(const CorrSet5 &c, const SolverOptions &opt = {},
                                                                IndependentDiagnostics *diag = nullptr) {
    const NPair np = build_npair(c, opt.degeneracy_tol);
    const auto cross = vec_cross(np.n, np.n_p);

    // Component k is left out; the pair (i, j) shares the factor N_k(lam).
    std::array<std::pair<double, int>, 3> order;
    for (int k = 0; k < 3; ++k) {
        const double m = cross[k].max_abs_coeff();
        order[k] = {m == 0.0 ? 0.0 : std::abs(cross[k].coeffs()(3, 3)) / m, k};
    }
    std::sort(order.begin(), order.end());

    const ResultantOptions ropt{0.5 * (opt.root_lo + opt.root_hi), 0.5 * (opt.root_hi - opt.root_lo)};
    std::optional<Poly> eliminant;
    bool deflated = false;
    for (const auto &[score, k] : order) {
        (void)score;
        const int i = (k + 1) % 3, j = (k + 2) % 3;
        try {
            const Poly res = sylvester_resultant(cross[i], cross[j], ropt);
            const Poly nk = np.n.component(k);
            const auto [quot, rel] = divide_exact_factor(res, pow(nk, 3));
            if (rel < 1e-6 && quot.max_abs_coeff() > 0.0) {
                eliminant = quot;
                deflated = true;
            } else {
                eliminant = res;
            }
            break;
        } catch (const Error &e) {
            if (e.kind() != ErrorKind::DegreeDeficient) {
                throw;
            }
        }
    }
    if (!eliminant) {
        throw Error(ErrorKind::DegreeDeficient, "no component pair has full degree in lam'");
    }

    struct Pair {
        double x, y, res;
    };
    std::vector<Pair> raw;
    const Poly elim = eliminant->trimmed(1e-14);
    const std::vector<double> xs =
        elim.size() > 1 ? sturm_real_roots(elim, opt.root_lo, opt.root_hi) : std::vector<double>{};
    for (double x : xs) {
        double best_y = 0.0, best_res = std::numeric_limits<double>::infinity();
        const Eigen::Vector3d nx = np.n(x);
        for (int m = 0; m < 3; ++m) {
            const Poly in_y = cross[m].in_y_at(x);
            if (in_y.max_abs_coeff() <= 1e-12 * cross[m].max_abs_coeff()) {
                continue;
            }
            for (double y : cubic_roots_trig(in_y)) {
                const double r = detail::cross_residual(nx, np.n_p(y));
                if (r < best_res) {
                    best_res = r;
                    best_y = y;
                }
            }
        }
        if (!std::isfinite(best_res)) {
            continue;
        }
        double px = x, py = best_y;
        detail::polish_pair(cross, px, py, [&](double u, double v) { return detail::cross_residual(np.n(u), np.n_p(v)); });
        const double pres = detail::cross_residual(np.n(px), np.n_p(py));
        if (pres <= best_res) {
            x = px;
            best_y = py;
            best_res = pres;
        }
        if (!(best_y > opt.root_lo && best_y < opt.root_hi) || !(best_res <= opt.max_residual)) {
            continue;
        }
        const bool dup = std::any_of(raw.begin(), raw.end(), [&](const Pair &p) {
            return std::abs(p.x - x) <= kRootMergeTol && std::abs(p.y - best_y) <= kRootMergeTol;
        });
        if (!dup) {
            raw.push_back({x, best_y, best_res});
        }
    }
    if (raw.size() > static_cast<std::size_t>(kIndependentMaxRaw)) {
        std::sort(raw.begin(), raw.end(), [](const Pair &a, const Pair &b) { return a.res < b.res; });
        raw.resize(kIndependentMaxRaw);
    }

    std::vector<SolverCandidate> out;
    int filtered = 0;
    for (const Pair &p : raw) {
        if (detail::is_spurious(np, p.x, p.y, opt.spurious_tol)) {
            continue;
        }
        ++filtered;
        if (auto cand = detail::make_candidate(c, p.x, p.y, p.res, opt)) {
            out.push_back(*cand);
        }
    }
    detail::sort_and_cap(out, max_candidates(SolverCase::TwoSidedIndependent));
    if (diag) {
        diag->eliminant_degree = std::max(elim.degree(), 0);
        diag->raw_roots = static_cast<int>(raw.size());
        diag->filtered_roots = filtered;
        diag->deflated = deflated;
    }
    return out;
}

inline std::vector<SolverCandidate> solve(SolverCase sc, const CorrSet5 &c, const SolverOptions &opt = {}) {
    switch (sc) {
    case SolverCase::OneSided: return solve_one_sided(c, opt);
    case SolverCase::TwoSidedEqual: return solve_two_sided_equal(c, opt);
    case SolverCase::TwoSidedIndependent: return solve_two_sided_independent(c, opt);
    }
    return {};
}

} // namespace rdhomog
