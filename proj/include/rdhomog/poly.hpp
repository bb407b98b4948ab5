#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <initializer_list>
#include <limits>
#include <numbers>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Dense>

#include "rdhomog/error.hpp"

namespace rdhomog {

// Univariate polynomial; coeffs()[k] multiplies x^k.
class Poly {
  public:
    Poly() = default;
    explicit Poly(std::vector<double> coeffs) : c_(std::move(coeffs)) {}
    Poly(std::initializer_list<double> coeffs) : c_(coeffs) {}

    const std::vector<double> &coeffs() const noexcept { return c_; }
    std::vector<double> &coeffs() noexcept { return c_; }
    std::size_t size() const noexcept { return c_.size(); }
    double operator[](std::size_t k) const { return k < c_.size() ? c_[k] : 0.0; }

    // Index of the highest exactly-nonzero coefficient; -1 for the zero polynomial.
    int degree() const {
        for (int k = static_cast<int>(c_.size()) - 1; k >= 0; --k) {
            if (c_[k] != 0.0) {
                return k;
            }
        }
        return -1;
    }

    double max_abs_coeff() const {
        double m = 0.0;
        for (double v : c_) {
            m = std::max(m, std::abs(v));
        }
        return m;
    }

    bool is_zero() const { return max_abs_coeff() == 0.0; }

    double operator()(double x) const {
        double acc = 0.0;
        for (auto it = c_.rbegin(); it != c_.rend(); ++it) {
            acc = acc * x + *it;
        }
        return acc;
    }

    // Value and first derivative in one Horner pass.
    std::pair<double, double> eval_with_derivative(double x) const {
        double f = 0.0, df = 0.0;
        for (auto it = c_.rbegin(); it != c_.rend(); ++it) {
            df = df * x + f;
            f = f * x + *it;
        }
        return {f, df};
    }

    Poly derivative() const {
        if (c_.size() <= 1) {
            return Poly{0.0};
        }
        std::vector<double> d(c_.size() - 1);
        for (std::size_t k = 1; k < c_.size(); ++k) {
            d[k - 1] = static_cast<double>(k) * c_[k];
        }
        return Poly(std::move(d));
    }

    // Drops leading coefficients with |c| <= rel_tol * max|c|.
    Poly trimmed(double rel_tol = 0.0) const {
        const double cut = rel_tol * max_abs_coeff();
        std::vector<double> c = c_;
        while (!c.empty() && std::abs(c.back()) <= cut) {
            c.pop_back();
        }
        return Poly(std::move(c));
    }

    Poly scaled(double s) const {
        std::vector<double> c = c_;
        for (double &v : c) {
            v *= s;
        }
        return Poly(std::move(c));
    }

    friend Poly operator+(const Poly &a, const Poly &b) {
        std::vector<double> c(std::max(a.size(), b.size()), 0.0);
        for (std::size_t k = 0; k < c.size(); ++k) {
            c[k] = a[k] + b[k];
        }
        return Poly(std::move(c));
    }

    friend Poly operator-(const Poly &a, const Poly &b) { return a + b.scaled(-1.0); }

    friend Poly operator*(const Poly &a, const Poly &b) {
        if (a.size() == 0 || b.size() == 0) {
            return Poly{};
        }
        std::vector<double> c(a.size() + b.size() - 1, 0.0);
        for (std::size_t i = 0; i < a.size(); ++i) {
            for (std::size_t j = 0; j < b.size(); ++j) {
                c[i + j] += a.c_[i] * b.c_[j];
            }
        }
        return Poly(std::move(c));
    }

  private:
    std::vector<double> c_;
};

inline Poly pow(const Poly &p, int n) {
    Poly r{1.0};
    for (int i = 0; i < n; ++i) {
        r = r * p;
    }
    return r;
}

// Three-vector-valued polynomial; coeffs[k] multiplies x^k.
struct VecPoly {
    std::vector<Eigen::Vector3d> coeffs;

    int degree() const { return static_cast<int>(coeffs.size()) - 1; }

    Eigen::Vector3d operator()(double x) const {
        Eigen::Vector3d acc = Eigen::Vector3d::Zero();
        for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) {
            acc = acc * x + *it;
        }
        return acc;
    }

    Poly component(int i) const {
        std::vector<double> c(coeffs.size());
        for (std::size_t k = 0; k < coeffs.size(); ++k) {
            c[k] = coeffs[k](i);
        }
        return Poly(std::move(c));
    }

    static VecPoly from_components(const Poly &a, const Poly &b, const Poly &c) {
        const std::size_t n = std::max({a.size(), b.size(), c.size()});
        VecPoly v;
        v.coeffs.resize(n);
        for (std::size_t k = 0; k < n; ++k) {
            v.coeffs[k] = Eigen::Vector3d(a[k], b[k], c[k]);
        }
        return v;
    }
};

// Bivariate polynomial in (x, y); coeffs(i, j) multiplies x^i y^j. The
// declared bidegree is (rows - 1, cols - 1) and is not trimmed.
class BiPoly {
  public:
    BiPoly() = default;
    explicit BiPoly(Eigen::MatrixXd coeffs) : c_(std::move(coeffs)) {}

    const Eigen::MatrixXd &coeffs() const noexcept { return c_; }
    int degree_x() const { return static_cast<int>(c_.rows()) - 1; }
    int degree_y() const { return static_cast<int>(c_.cols()) - 1; }

    double operator()(double x, double y) const { return in_y_at(x)(y); }

    // Univariate polynomial in y obtained by fixing x.
    Poly in_y_at(double x) const {
        std::vector<double> c(c_.cols());
        for (Eigen::Index j = 0; j < c_.cols(); ++j) {
            double acc = 0.0;
            for (Eigen::Index i = c_.rows() - 1; i >= 0; --i) {
                acc = acc * x + c_(i, j);
            }
            c[j] = acc;
        }
        return Poly(std::move(c));
    }

    Poly in_x_at(double y) const {
        std::vector<double> c(c_.rows());
        for (Eigen::Index i = 0; i < c_.rows(); ++i) {
            double acc = 0.0;
            for (Eigen::Index j = c_.cols() - 1; j >= 0; --j) {
                acc = acc * y + c_(i, j);
            }
            c[i] = acc;
        }
        return Poly(std::move(c));
    }

    // The coefficient of y^j as a polynomial in x.
    Poly y_coefficient(int j) const {
        std::vector<double> c(c_.rows());
        for (Eigen::Index i = 0; i < c_.rows(); ++i) {
            c[i] = c_(i, j);
        }
        return Poly(std::move(c));
    }

    // Restriction to the diagonal y = x.
    Poly diagonal() const {
        std::vector<double> c(c_.rows() + c_.cols() - 1, 0.0);
        for (Eigen::Index i = 0; i < c_.rows(); ++i) {
            for (Eigen::Index j = 0; j < c_.cols(); ++j) {
                c[i + j] += c_(i, j);
            }
        }
        return Poly(std::move(c));
    }

    double max_abs_coeff() const { return c_.size() ? c_.cwiseAbs().maxCoeff() : 0.0; }

  private:
    Eigen::MatrixXd c_;
};

// Roots closer than this are reported once.
inline constexpr double kRootMergeTol = 1e-8;

namespace detail {

inline void polish_newton(const Poly &p, double &x, int iters = 2) {
    for (int i = 0; i < iters; ++i) {
        const auto [f, df] = p.eval_with_derivative(x);
        if (df == 0.0 || !std::isfinite(f)) {
            return;
        }
        const double xn = x - f / df;
        if (!std::isfinite(xn) || std::abs(p(xn)) >= std::abs(f)) {
            return;
        }
        x = xn;
    }
}

inline std::vector<double> merge_sorted(std::vector<double> roots, double tol = kRootMergeTol) {
    std::sort(roots.begin(), roots.end());
    std::vector<double> out;
    for (double r : roots) {
        if (out.empty() || std::abs(r - out.back()) > tol) {
            out.push_back(r);
        }
    }
    return out;
}

inline std::vector<double> quadratic_roots(double c0, double c1, double c2) {
    if (c2 == 0.0) {
        if (c1 == 0.0) {
            return {};
        }
        return {-c0 / c1};
    }
    const double disc = c1 * c1 - 4.0 * c2 * c0;
    if (disc < 0.0) {
        return {};
    }
    const double q = -0.5 * (c1 + std::copysign(std::sqrt(disc), c1));
    if (q == 0.0) {
        return {0.0};
    }
    return {q / c2, c0 / q};
}

inline int sign_of(double v) { return (v > 0.0) - (v < 0.0); }

} // namespace detail

// Real roots of a polynomial of degree <= 3. The cubic case uses the
// trigonometric (three real roots) or hyperbolic (one real root) closed forms
// on the depressed cubic, so no complex arithmetic is involved.
inline std::vector<double> cubic_roots_trig(const Poly &p_in) {
    if (p_in.max_abs_coeff() == 0.0) {
        throw Error(ErrorKind::ZeroPolynomial, "cubic_roots_trig on the zero polynomial");
    }
    const Poly p = p_in.trimmed(1e-14);
    if (p.size() > 4) {
        throw Error(ErrorKind::DegreeDeficient, "cubic_roots_trig expects degree <= 3");
    }
    std::vector<double> roots;
    const int deg = static_cast<int>(p.size()) - 1;
    if (deg <= 0) {
        return roots;
    }
    if (deg <= 2) {
        roots = detail::quadratic_roots(p[0], p[1], p[2]);
    } else {
        const double a = p[2] / p[3], b = p[1] / p[3], c = p[0] / p[3];
        // x = t - a/3 gives t^3 + P t + Q = 0
        const double shift = a / 3.0;
        const double P = b - a * shift;
        const double Q = (2.0 * a * a * a) / 27.0 - a * b / 3.0 + c;
        constexpr double two_pi_3 = 2.0 * std::numbers::pi / 3.0;
        if (P == 0.0) {
            roots.push_back(std::cbrt(-Q) - shift);
        } else if (4.0 * P * P * P + 27.0 * Q * Q <= 0.0) {
            const double m = 2.0 * std::sqrt(-P / 3.0);
            const double arg = std::clamp(3.0 * Q / (P * m), -1.0, 1.0);
            const double theta = std::acos(arg) / 3.0;
            for (int k = 0; k < 3; ++k) {
                roots.push_back(m * std::cos(theta - two_pi_3 * k) - shift);
            }
        } else if (P < 0.0) {
            const double m = std::sqrt(-P / 3.0);
            const double arg = -1.5 * std::abs(Q) / (P * m);
            roots.push_back(-2.0 * detail::sign_of(Q) * m * std::cosh(std::acosh(arg) / 3.0) - shift);
        } else {
            const double m = std::sqrt(P / 3.0);
            const double arg = 1.5 * Q / (P * m);
            roots.push_back(-2.0 * m * std::sinh(std::asinh(arg) / 3.0) - shift);
        }
    }
    for (double &r : roots) {
        detail::polish_newton(p, r);
    }
    return detail::merge_sorted(std::move(roots));
}

// Sturm chain p0 = p, p1 = p', p_{k+1} = -rem(p_{k-1}, p_k), each member
// rescaled to unit max coefficient.
inline std::vector<Poly> sturm_chain(const Poly &p_in) {
    Poly p = p_in.trimmed(0.0);
    if (p.size() == 0) {
        throw Error(ErrorKind::ZeroPolynomial, "Sturm chain of the zero polynomial");
    }
    std::vector<Poly> chain;
    chain.push_back(p.scaled(1.0 / p.max_abs_coeff()));
    Poly d = chain[0].derivative().trimmed(0.0);
    if (d.size() == 0 || d.max_abs_coeff() == 0.0) {
        return chain;
    }
    chain.push_back(d.scaled(1.0 / d.max_abs_coeff()));
    while (chain.back().size() > 1) {
        const Poly &num = chain[chain.size() - 2];
        const Poly &den = chain.back();
        std::vector<double> r = num.coeffs();
        const std::size_t dn = den.size() - 1;
        const double lead = den.coeffs().back();
        for (std::size_t k = r.size() - 1; k >= dn; --k) {
            const double f = r[k] / lead;
            for (std::size_t j = 0; j <= dn; ++j) {
                r[k - dn + j] -= f * den.coeffs()[j];
            }
            if (k == dn) {
                break;
            }
        }
        r.resize(dn);
        Poly rem = Poly(std::move(r)).scaled(-1.0);
        // Remainders that vanish to working precision mean a repeated root;
        // the chain ends at the gcd.
        if (rem.max_abs_coeff() <= 1e-13 * std::max(num.max_abs_coeff(), 1.0)) {
            break;
        }
        rem = rem.trimmed(1e-15);
        chain.push_back(rem.scaled(1.0 / rem.max_abs_coeff()));
    }
    return chain;
}

inline int sturm_sign_changes(const std::vector<Poly> &chain, double x) {
    int changes = 0;
    int prev = 0;
    for (const Poly &q : chain) {
        const int s = detail::sign_of(q(x));
        if (s == 0) {
            continue;
        }
        if (prev != 0 && s != prev) {
            ++changes;
        }
        prev = s;
    }
    return changes;
}

namespace detail {

// Safeguarded Newton on a bracket with a sign change.
inline double refine_bracketed(const Poly &p, double a, double b, double fa) {
    double x = 0.5 * (a + b);
    for (int it = 0; it < 200; ++it) {
        const auto [f, df] = p.eval_with_derivative(x);
        if (f == 0.0) {
            return x;
        }
        if (sign_of(f) == sign_of(fa)) {
            a = x;
            fa = f;
        } else {
            b = x;
        }
        double xn = (df != 0.0) ? x - f / df : 0.5 * (a + b);
        if (!(xn > std::min(a, b) && xn < std::max(a, b))) {
            xn = 0.5 * (a + b);
        }
        if (std::abs(xn - x) <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(x)) ||
            std::abs(b - a) <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(x))) {
            return xn;
        }
        x = xn;
    }
    return x;
}

} // namespace detail

// All distinct real roots in (lo, hi), isolated by Sturm sign-change counts and
// refined by bisection and Newton.
inline std::vector<double> sturm_real_roots(const Poly &p_in, double lo, double hi) {
    if (!(lo < hi)) {
        throw Error(ErrorKind::IntervalDegenerate, "sturm_real_roots needs lo < hi");
    }
    if (p_in.max_abs_coeff() == 0.0) {
        throw Error(ErrorKind::ZeroPolynomial, "sturm_real_roots on the zero polynomial");
    }
    const Poly p = p_in.trimmed(0.0).scaled(1.0 / p_in.max_abs_coeff());
    if (p.size() <= 1) {
        return {};
    }
    const std::vector<Poly> chain = sturm_chain(p);
    const double width = hi - lo;
    auto nudge_off_root = [&](double x, double dir) {
        for (int i = 0; i < 8 && p(x) == 0.0; ++i) {
            x += dir * 1e-12 * std::max(width, std::abs(x));
        }
        return x;
    };
    lo = nudge_off_root(lo, -1.0);
    hi = nudge_off_root(hi, +1.0);

    struct Interval {
        double a, b;
        int va, vb;
    };
    std::vector<double> roots;
    std::vector<Interval> stack{{lo, hi, sturm_sign_changes(chain, lo), sturm_sign_changes(chain, hi)}};
    const double min_width = 1e-15 * std::max({1.0, std::abs(lo), std::abs(hi)});
    while (!stack.empty()) {
        const Interval iv = stack.back();
        stack.pop_back();
        int count = iv.va - iv.vb;
        const double fa = p(iv.a), fb = p(iv.b);
        const bool sign_change = detail::sign_of(fa) * detail::sign_of(fb) < 0;
        if (count <= 0 && sign_change) {
            count = 1; // floating-point chain missed an odd root
        }
        if (count <= 0) {
            continue;
        }
        if (count == 1 || iv.b - iv.a < min_width) {
            if (sign_change) {
                roots.push_back(detail::refine_bracketed(p, iv.a, iv.b, fa));
                continue;
            }
            if (count == 1) {
                // Even multiplicity: bisect on the Sturm count.
                double a = iv.a, b = iv.b;
                int va = iv.va;
                while (b - a > min_width) {
                    const double m = 0.5 * (a + b);
                    const int vm = sturm_sign_changes(chain, m);
                    if (va - vm >= 1) {
                        b = m;
                    } else {
                        a = m;
                        va = vm;
                    }
                }
                double r = 0.5 * (a + b);
                detail::polish_newton(p, r);
                roots.push_back(r);
                continue;
            }
            roots.push_back(0.5 * (iv.a + iv.b));
            continue;
        }
        double mid = 0.5 * (iv.a + iv.b);
        if (p(mid) == 0.0) {
            mid += 1e-3 * (iv.b - iv.a);
        }
        const int vm = sturm_sign_changes(chain, mid);
        stack.push_back({mid, iv.b, vm, iv.vb});
        stack.push_back({iv.a, mid, iv.va, vm});
    }
    for (double &r : roots) {
        const double before = r;
        detail::polish_newton(p, r, 1);
        if (!(r > lo && r < hi)) {
            r = before;
        }
    }
    return detail::merge_sorted(std::move(roots));
}

// Real roots in (lo, hi): closed form up to degree 3, Sturm isolation above.
inline std::vector<double> real_roots_in(const Poly &p, double lo, double hi) {
    const Poly t = p.trimmed(1e-14);
    if (t.size() <= 4) {
        std::vector<double> all = cubic_roots_trig(t);
        std::erase_if(all, [&](double r) { return !(r > lo && r < hi); });
        return all;
    }
    return sturm_real_roots(t, lo, hi);
}

// Componentwise a(x) x b(y) for vector polynomials in different variables.
inline std::array<BiPoly, 3> vec_cross(const VecPoly &a, const VecPoly &b) {
    const Eigen::Index na = static_cast<Eigen::Index>(a.coeffs.size());
    const Eigen::Index nb = static_cast<Eigen::Index>(b.coeffs.size());
    std::array<Eigen::MatrixXd, 3> c;
    for (auto &m : c) {
        m = Eigen::MatrixXd::Zero(std::max<Eigen::Index>(na, 1), std::max<Eigen::Index>(nb, 1));
    }
    for (Eigen::Index i = 0; i < na; ++i) {
        for (Eigen::Index j = 0; j < nb; ++j) {
            const Eigen::Vector3d x = a.coeffs[i].cross(b.coeffs[j]);
            for (int k = 0; k < 3; ++k) {
                c[k](i, j) = x(k);
            }
        }
    }
    return {BiPoly(c[0]), BiPoly(c[1]), BiPoly(c[2])};
}

// Sampling window for the evaluation-interpolation resultant.
struct ResultantOptions {
    double center = 0.0;
    double half_width = 1.5;
};

// Determinant of the Sylvester matrix of two univariate polynomials of
// formal degrees p.size()-1 and q.size()-1.
inline double sylvester_determinant(const Poly &p, const Poly &q) {
    const int m = static_cast<int>(p.size()) - 1;
    const int n = static_cast<int>(q.size()) - 1;
    const int dim = m + n;
    if (dim == 0) {
        return 1.0;
    }
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(dim, dim);
    for (int r = 0; r < n; ++r) {
        for (int k = 0; k <= m; ++k) {
            s(r, r + k) = p.coeffs()[m - k];
        }
    }
    for (int r = 0; r < m; ++r) {
        for (int k = 0; k <= n; ++k) {
            s(n + r, r + k) = q.coeffs()[n - k];
        }
    }
    return s.partialPivLu().determinant();
}

// Resultant of p and q with respect to y, as a polynomial in x. Values of the
// Sylvester determinant are sampled at Chebyshev nodes and the coefficients
// are recovered by least squares in the scaled variable (x - center)/half_width.
inline Poly sylvester_resultant(const BiPoly &p, const BiPoly &q, const ResultantOptions &opt = {}) {
    const int mp = p.degree_y(), mq = q.degree_y();
    if (mp < 1 || mq < 1) {
        throw Error(ErrorKind::DegreeDeficient, "resultant needs positive degree in the eliminated variable");
    }
    if (p.y_coefficient(mp).max_abs_coeff() == 0.0 || q.y_coefficient(mq).max_abs_coeff() == 0.0) {
        throw Error(ErrorKind::DegreeDeficient, "leading coefficient in the eliminated variable vanishes identically");
    }
    const int deg = p.degree_x() * mq + q.degree_x() * mp;
    const int ncoef = deg + 1;
    const int nodes = 2 * ncoef;
    Eigen::MatrixXd vander(nodes, ncoef);
    Eigen::VectorXd values(nodes);
    for (int k = 0; k < nodes; ++k) {
        const double t = std::cos(std::numbers::pi * (2.0 * k + 1.0) / (2.0 * nodes));
        const double x = opt.center + opt.half_width * t;
        values(k) = sylvester_determinant(p.in_y_at(x), q.in_y_at(x));
        double tk = 1.0;
        for (int j = 0; j < ncoef; ++j) {
            vander(k, j) = tk;
            tk *= t;
        }
    }
    const double vscale = values.cwiseAbs().maxCoeff();
    if (vscale == 0.0) {
        return Poly(std::vector<double>(ncoef, 0.0));
    }
    const Eigen::VectorXd a = vander.colPivHouseholderQr().solve(values / vscale) * vscale;
    // Back to x: sum_j a_j ((x - c)/s)^j by Horner composition.
    const Poly inner{-opt.center / opt.half_width, 1.0 / opt.half_width};
    Poly out{0.0};
    for (int j = ncoef - 1; j >= 0; --j) {
        out = out * inner + Poly{a(j)};
    }
    out.coeffs().resize(ncoef);
    return out;
}

// Least-squares quotient q minimizing ||num - den * q|| over coefficient
// vectors; used to strip a known exact factor. Returns q and the relative
// residual of the fit.
inline std::pair<Poly, double> divide_exact_factor(const Poly &num, const Poly &den) {
    const int nn = static_cast<int>(num.size());
    const int nd = static_cast<int>(den.size());
    const int nq = nn - nd + 1;
    if (nq <= 0) {
        return {Poly{0.0}, 1.0};
    }
    Eigen::MatrixXd conv = Eigen::MatrixXd::Zero(nn, nq);
    for (int j = 0; j < nq; ++j) {
        for (int i = 0; i < nd; ++i) {
            conv(i + j, j) = den.coeffs()[i];
        }
    }
    Eigen::VectorXd b(nn);
    for (int i = 0; i < nn; ++i) {
        b(i) = num.coeffs()[i];
    }
    // Column equilibration keeps the fit well scaled.
    Eigen::VectorXd col = conv.colwise().norm().transpose();
    for (int j = 0; j < nq; ++j) {
        if (col(j) == 0.0) {
            col(j) = 1.0;
        }
    }
    const Eigen::MatrixXd scaled = conv * col.cwiseInverse().asDiagonal();
    const Eigen::VectorXd y = scaled.colPivHouseholderQr().solve(b);
    const Eigen::VectorXd x = y.cwiseQuotient(col);
    const double rel = (conv * x - b).norm() / std::max(b.norm(), std::numeric_limits<double>::min());
    return {Poly(std::vector<double>(x.data(), x.data() + nq)), rel};
}

} // namespace rdhomog
