#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "rdhomog/error.hpp"
#include "rdhomog/robust.hpp"
#include "rdhomog/scene.hpp"
#include "rdhomog/solvers.hpp"

namespace rdhomog {

// ---------------------------------------------------------------------------
// Metrics

inline double side_error(Lambda gt, Lambda est) {
    return std::abs(est.value - gt.value) / std::max(std::abs(gt.value), 1e-6);
}

// Relative distortion error; geometric mean of both sides for two-sided cases.
inline double k_error(SolverCase sc, Lambda gt, Lambda gt_p, Lambda est, Lambda est_p) {
    const double a = side_error(gt, est);
    if (sc == SolverCase::OneSided) {
        return a;
    }
    return std::sqrt(a * side_error(gt_p, est_p));
}

struct ErrorRecord {
    SolverCase solver_case = SolverCase::OneSided;
    double noise_sigma = 0.0;
    int trial_index = 0;
    // NaN when the solver returned no candidate.
    double h_error = std::numeric_limits<double>::quiet_NaN();
    double k_error = std::numeric_limits<double>::quiet_NaN();
    int num_candidates = 0;
    double elapsed_us = 0.0;
    // Best candidate, meaningful only when num_candidates > 0.
    Lambda lam;
    Lambda lam_p;

    bool failed() const { return num_candidates == 0; }
};

// ---------------------------------------------------------------------------
// Parallel driver

// Worker count: hardware concurrency, capped by RD_HOMOG_THREADS when set.
inline unsigned worker_count() {
    unsigned n = std::max(1u, std::thread::hardware_concurrency());
    if (const char *env = std::getenv("RD_HOMOG_THREADS")) {
        char *end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && v >= 1) {
            n = std::min<unsigned>(n, static_cast<unsigned>(v));
        }
    }
    return n;
}

// Calls f(i) for i in [0, n). Each index writes only its own slot, so the
// result does not depend on scheduling.
template <class F>
void parallel_for(std::size_t n, F &&f, unsigned threads = worker_count()) {
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    std::exception_ptr failure;
    std::atomic<bool> failed{false};
    for (unsigned t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n && !failed; i = next++) {
                try {
                    f(i);
                } catch (...) {
                    if (!failed.exchange(true)) failure = std::current_exception();
                }
            }
        });
    }
    for (auto &th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
}

// ---------------------------------------------------------------------------
// Stability and noise protocols

// One minimal-solver trial: fresh five-point instance, all candidates scored
// against ground truth, the one closest in homography error kept.
inline ErrorRecord run_trial(const SceneConfig &base, int trial, const SolverOptions &sopt) {
    SceneConfig cfg = base;
    cfg.num_points = 5;
    cfg.outlier_fraction = 0.0;
    Rng rng = make_rng(cfg.rng_seed, static_cast<std::uint64_t>(trial));
    const SyntheticInstance inst = generate_instance(cfg, rng);
    const CorrSet5 sample = minimal_sample(inst.normalized());

    ErrorRecord rec;
    rec.solver_case = cfg.solver_case;
    rec.noise_sigma = cfg.noise_sigma_px;
    rec.trial_index = trial;
    std::vector<SolverCandidate> cands;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        cands = solve(cfg.solver_case, sample, sopt);
    } catch (const Error &) {
        cands.clear();
    }
    rec.elapsed_us = std::chrono::duration<double, std::micro>(std::chrono::steady_clock::now() - t0).count();
    rec.num_candidates = static_cast<int>(cands.size());
    for (const SolverCandidate &c : cands) {
        const double e = homography_error(c.h, inst.gt_h);
        if (std::isnan(rec.h_error) || e < rec.h_error) {
            rec.h_error = e;
            rec.k_error = k_error(cfg.solver_case, inst.gt_lambda, inst.gt_lambda_p, c.lam, c.lam_p);
            rec.lam = c.lam;
            rec.lam_p = c.lam_p;
        }
    }
    return rec;
}

inline std::vector<ErrorRecord> run_trials(const SceneConfig &cfg, int trials, const SolverOptions &sopt) {
    if (trials <= 0) {
        return {};
    }
    cfg.validate();
    std::vector<ErrorRecord> out(static_cast<std::size_t>(trials));
    parallel_for(out.size(), [&](std::size_t i) { out[i] = run_trial(cfg, static_cast<int>(i), sopt); });
    return out;
}

// Noise-free trials with the solver's default residual gate.
inline std::vector<ErrorRecord> run_stability(SceneConfig cfg, int trials, const SolverOptions &sopt = {}) {
    cfg.noise_sigma_px = 0.0;
    cfg.outlier_fraction = 0.0;
    return run_trials(cfg, trials, sopt);
}

// Noisy trials for every sigma. With noise the unused cross-product
// components no longer vanish, so the residual gate is disabled.
inline std::vector<ErrorRecord> run_noise(SceneConfig cfg, const std::vector<double> &sigmas, int trials_per_sigma) {
    SolverOptions sopt;
    sopt.max_residual = std::numeric_limits<double>::infinity();
    std::vector<ErrorRecord> out;
    cfg.outlier_fraction = 0.0;
    for (std::size_t k = 0; k < sigmas.size(); ++k) {
        cfg.noise_sigma_px = sigmas[k];
        // Each sigma level draws its own scenes.
        SceneConfig level = cfg;
        level.rng_seed = cfg.rng_seed + 0x9e3779b97f4a7c15ull * (k + 1);
        auto recs = run_trials(level, trials_per_sigma, sopt);
        out.insert(out.end(), recs.begin(), recs.end());
    }
    return out;
}

inline double median(std::vector<double> v) {
    if (v.empty()) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    if (v.size() % 2 == 1) {
        return *mid;
    }
    const double hi = *mid;
    const double lo = *std::max_element(v.begin(), mid);
    return 0.5 * (lo + hi);
}

// q in [0, 1], nearest-rank.
inline double quantile(std::vector<double> v, double q) {
    if (v.empty()) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    std::sort(v.begin(), v.end());
    const auto k = static_cast<std::size_t>(std::ceil(q * static_cast<double>(v.size())));
    return v[std::min(v.size() - 1, k == 0 ? 0 : k - 1)];
}

struct NoiseSummary {
    SolverCase solver_case = SolverCase::OneSided;
    double sigma_px = 0.0;
    double median_h_error = 0.0;
    double median_k_error = 0.0;
    int trials = 0;
    int failures = 0;
};

// Medians per (case, sigma) over non-failed trials, in first-seen order.
inline std::vector<NoiseSummary> summarize(const std::vector<ErrorRecord> &recs) {
    std::vector<NoiseSummary> out;
    std::vector<std::vector<double>> hs, ks;
    for (const ErrorRecord &r : recs) {
        auto it = std::find_if(out.begin(), out.end(), [&](const NoiseSummary &s) {
            return s.solver_case == r.solver_case && s.sigma_px == r.noise_sigma;
        });
        if (it == out.end()) {
            out.push_back({r.solver_case, r.noise_sigma, 0.0, 0.0, 0, 0});
            hs.emplace_back();
            ks.emplace_back();
            it = out.end() - 1;
        }
        const auto k = static_cast<std::size_t>(it - out.begin());
        ++it->trials;
        if (r.failed()) {
            ++it->failures;
        } else {
            hs[k].push_back(r.h_error);
            ks[k].push_back(r.k_error);
        }
    }
    for (std::size_t k = 0; k < out.size(); ++k) {
        out[k].median_h_error = median(hs[k]);
        out[k].median_k_error = median(ks[k]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// RANSAC over time

struct RansacBenchConfig {
    SceneConfig scene;
    int trials = 100;
    double time_budget_s = std::numeric_limits<double>::infinity();
    double inlier_threshold_px = 5.0;
    int min_iterations = 500;
    int max_iterations = 10000;
    bool lo_enabled = true;
    int grid_points = 50;
};

struct RansacTrial {
    int true_inliers = 0;
    // True inliers that ended up in the returned mask.
    int recovered_true = 0;
    int final_inliers = 0;
    int iterations = 0;
    double elapsed_s = 0.0;
    double h_error = std::numeric_limits<double>::quiet_NaN();
    std::vector<TracePoint> trace;
    bool failed = false;

    double recovered_fraction() const {
        return true_inliers == 0 ? 1.0 : static_cast<double>(recovered_true) / true_inliers;
    }
    // Best inlier count known at time t.
    int inliers_at(double t) const {
        int n = 0;
        for (const TracePoint &p : trace) {
            if (p.elapsed_s <= t) n = p.inliers;
        }
        return n;
    }
    // First time the best model covered `count` inliers, or infinity.
    double time_to(int count) const {
        for (const TracePoint &p : trace) {
            if (p.inliers >= count) return p.elapsed_s;
        }
        return std::numeric_limits<double>::infinity();
    }
};

struct CurvePoint {
    double time_s = 0.0;
    double mean_cumulative_inliers = 0.0;
};

struct RansacBenchResult {
    SolverCase solver_case = SolverCase::OneSided;
    double outlier_fraction = 0.0;
    double mean_true_inliers = 0.0;
    std::vector<RansacTrial> trials;
    std::vector<CurvePoint> curve;
};

inline RansacTrial run_ransac_trial(const RansacBenchConfig &bc, int trial) {
    Rng rng = make_rng(bc.scene.rng_seed, static_cast<std::uint64_t>(trial));
    const SyntheticInstance inst = generate_instance(bc.scene, rng);
    const std::vector<Correspondence> corrs = inst.normalized();

    RobustConfig rc;
    rc.solver_case = bc.scene.solver_case;
    rc.inlier_threshold_px = bc.inlier_threshold_px;
    rc.focal_scale = bc.scene.focal;
    rc.min_iterations = bc.min_iterations;
    rc.max_iterations = std::max(bc.max_iterations, bc.min_iterations);
    rc.lo_enabled = bc.lo_enabled;
    rc.time_budget_s = bc.time_budget_s;
    rc.rng_seed = bc.scene.rng_seed ^ (0x51ed270b27ull * (static_cast<std::uint64_t>(trial) + 1));

    RansacTrial out;
    out.true_inliers = static_cast<int>(std::count(inst.inlier_flags.begin(), inst.inlier_flags.end(), true));
    try {
        const RobustResult res = ransac(corrs, rc);
        out.final_inliers = res.num_inliers;
        out.iterations = res.iterations;
        out.elapsed_s = res.elapsed.count();
        out.trace = res.trace;
        out.h_error = homography_error(res.model.h, inst.gt_h);
        for (std::size_t i = 0; i < corrs.size(); ++i) {
            if (inst.inlier_flags[i] && res.inlier_mask[i]) ++out.recovered_true;
        }
    } catch (const Error &) {
        out.failed = true;
    }
    return out;
}

// Runs the robust harness per trial and averages the best-so-far inlier
// counts on a common time grid ending at the budget (or at the slowest trial
// when the budget is unbounded).
inline RansacBenchResult run_ransac_bench(const RansacBenchConfig &bc) {
    bc.scene.validate();
    if (bc.grid_points < 2) {
        throw Error(ErrorKind::ConfigInvalid, "time grid needs at least two points");
    }
    RansacBenchResult out;
    out.solver_case = bc.scene.solver_case;
    out.outlier_fraction = bc.scene.outlier_fraction;
    if (bc.trials <= 0) {
        return out;
    }
    out.trials.resize(static_cast<std::size_t>(bc.trials));
    parallel_for(out.trials.size(), [&](std::size_t i) { out.trials[i] = run_ransac_trial(bc, static_cast<int>(i)); });

    double t_end = bc.time_budget_s;
    if (!std::isfinite(t_end)) {
        t_end = 0.0;
        for (const RansacTrial &t : out.trials) t_end = std::max(t_end, t.elapsed_s);
    }
    double sum_true = 0.0;
    for (const RansacTrial &t : out.trials) sum_true += t.true_inliers;
    out.mean_true_inliers = sum_true / static_cast<double>(out.trials.size());
    for (int g = 0; g < bc.grid_points; ++g) {
        const double t = t_end * g / (bc.grid_points - 1);
        double s = 0.0;
        for (const RansacTrial &tr : out.trials) s += tr.inliers_at(t);
        out.curve.push_back({t, s / static_cast<double>(out.trials.size())});
    }
    return out;
}

// ---------------------------------------------------------------------------
// CSV

inline constexpr const char *kRecordHeader = "case,sigma_px,trial,h_error,k_error,num_candidates,elapsed_us";
inline constexpr const char *kSummaryHeader = "case,sigma_px,median_h_error,median_k_error,trials,failures";
inline constexpr const char *kCurveHeader = "case,outlier_fraction,time_s,mean_cumulative_inliers,true_inliers";
inline constexpr const char *kCorrespondenceHeader = "u1,v1,u2,v2";

namespace detail {

inline std::string fmt_real(double v) {
    if (std::isnan(v)) return "nan";
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

} // namespace detail

// elapsed_us is written as 0 unless `timing` is set, which keeps the file a
// pure function of seed and configuration.
inline void write_records_csv(std::ostream &os, const std::vector<ErrorRecord> &recs, bool timing = false) {
    os << kRecordHeader << '\n';
    for (const ErrorRecord &r : recs) {
        os << to_string(r.solver_case) << ',' << detail::fmt_real(r.noise_sigma) << ',' << r.trial_index << ','
           << detail::fmt_real(r.h_error) << ',' << detail::fmt_real(r.k_error) << ',' << r.num_candidates << ','
           << detail::fmt_real(timing ? r.elapsed_us : 0.0) << '\n';
    }
}

inline void write_summary_csv(std::ostream &os, const std::vector<NoiseSummary> &rows) {
    os << kSummaryHeader << '\n';
    for (const NoiseSummary &s : rows) {
        os << to_string(s.solver_case) << ',' << detail::fmt_real(s.sigma_px) << ','
           << detail::fmt_real(s.median_h_error) << ',' << detail::fmt_real(s.median_k_error) << ',' << s.trials
           << ',' << s.failures << '\n';
    }
}

inline void write_curve_csv(std::ostream &os, const std::vector<RansacBenchResult> &results) {
    os << kCurveHeader << '\n';
    for (const RansacBenchResult &r : results) {
        for (const CurvePoint &p : r.curve) {
            os << to_string(r.solver_case) << ',' << detail::fmt_real(r.outlier_fraction) << ','
               << detail::fmt_real(p.time_s) << ',' << detail::fmt_real(p.mean_cumulative_inliers) << ','
               << detail::fmt_real(r.mean_true_inliers) << '\n';
        }
    }
}

// Pixel correspondences, one per row.
inline void write_correspondences_csv(std::ostream &os, const std::vector<Correspondence> &px) {
    os << kCorrespondenceHeader << '\n';
    for (const Correspondence &c : px) {
        os << detail::fmt_real(c.src.x()) << ',' << detail::fmt_real(c.src.y()) << ',' << detail::fmt_real(c.dst.x())
           << ',' << detail::fmt_real(c.dst.y()) << '\n';
    }
}

inline std::vector<Correspondence> read_correspondences_csv(std::istream &is) {
    std::string line;
    int line_no = 0;
    const auto fail = [&](const std::string &what) {
        throw Error(ErrorKind::ParseError, "line " + std::to_string(line_no) + ": " + what);
    };
    const auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        const auto e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    bool header = false;
    std::vector<Correspondence> out;
    while (std::getline(is, line)) {
        ++line_no;
        line = trim(line);
        if (line.empty()) continue;
        if (!header) {
            std::string compact;
            for (char ch : line) {
                if (ch != ' ' && ch != '\t') compact += ch;
            }
            if (compact != kCorrespondenceHeader) fail(std::string("expected header ") + kCorrespondenceHeader);
            header = true;
            continue;
        }
        double v[4];
        std::size_t pos = 0;
        for (int k = 0; k < 4; ++k) {
            const std::size_t end = line.find(',', pos);
            if ((k < 3) != (end != std::string::npos)) fail("expected four comma-separated values");
            const std::string field = trim(line.substr(pos, end == std::string::npos ? std::string::npos : end - pos));
            char *stop = nullptr;
            v[k] = std::strtod(field.c_str(), &stop);
            if (field.empty() || *stop != '\0' || !std::isfinite(v[k])) fail("invalid number '" + field + "'");
            pos = end + 1;
        }
        out.push_back({Point2(v[0], v[1]), Point2(v[2], v[3])});
    }
    if (!header) fail("missing header");
    return out;
}

} // namespace rdhomog
