#pragma once

// Command-line front end. Depends on the single-header CLI11 and nlohmann/json
// in addition to the core library.

#include <cmath>
#include <fstream>
#include <iostream>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rdhomog/bench.hpp"
#include "rdhomog/robust.hpp"
#include "rdhomog/scene.hpp"
#include "rdhomog/solvers.hpp"

namespace rdhomog::cli {

using nlohmann::json;

inline json matrix_json(const Eigen::Matrix3d &m) {
    json a = json::array();
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) a.push_back(m(r, c));
    }
    return a;
}

inline json candidate_json(const SolverCandidate &c) {
    return {{"H", matrix_json(c.h.normalized().matrix())},
            {"lambda", c.lam.value},
            {"lambda_p", c.lam_p.value},
            {"residual", c.residual},
            {"transfer_residual", c.transfer_residual}};
}

inline json ground_truth_json(const SyntheticInstance &inst) {
    return {{"H", matrix_json(inst.gt_h.normalized().matrix())},
            {"lambda", inst.gt_lambda.value},
            {"lambda_p", inst.gt_lambda_p.value},
            {"focal", inst.focal}};
}

namespace detail {

// Output target: a file when a path is given, otherwise `fallback`.
class Sink {
public:
    Sink(const std::string &path, std::ostream &fallback) : os_(&fallback) {
        if (!path.empty() && path != "-") {
            file_ = std::make_unique<std::ofstream>(path);
            if (!*file_) throw Error(ErrorKind::ParseError, "cannot open '" + path + "' for writing");
            os_ = file_.get();
        }
    }
    std::ostream &stream() { return *os_; }
    void finish() {
        os_->flush();
        if (!*os_) throw Error(ErrorKind::ParseError, "write failed");
    }

private:
    std::unique_ptr<std::ofstream> file_;
    std::ostream *os_;
};

inline std::vector<SolverCase> cases_of(const std::string &name) {
    if (name == "all") {
        return {SolverCase::OneSided, SolverCase::TwoSidedEqual, SolverCase::TwoSidedIndependent};
    }
    return {parse_solver_case(name)};
}

} // namespace detail

struct SolveArgs {
    std::string input;
    std::string solver_case = "one-sided";
    bool ransac = false;
    double threshold_px = 5.0;
    std::uint64_t seed = 0;
    double focal = 1000.0;
    double cx = 0.0;
    double cy = 0.0;
    int min_iterations = 500;
    int max_iterations = 10000;
};

inline int do_solve(const SolveArgs &a, std::ostream &out) {
    std::ifstream in(a.input);
    if (!in) throw Error(ErrorKind::ParseError, "cannot read '" + a.input + "'");
    if (!(a.focal > 0.0)) throw Error(ErrorKind::ConfigInvalid, "focal must be positive");
    const SolverCase sc = parse_solver_case(a.solver_case);
    std::vector<Correspondence> corrs = read_correspondences_csv(in);
    const Point2 pp(a.cx, a.cy);
    for (Correspondence &c : corrs) {
        c.src = (c.src - pp) / a.focal;
        c.dst = (c.dst - pp) / a.focal;
    }
    json doc;
    doc["case"] = to_string(sc);
    doc["num_correspondences"] = corrs.size();
    if (a.ransac) {
        RobustConfig rc;
        rc.solver_case = sc;
        rc.inlier_threshold_px = a.threshold_px;
        rc.focal_scale = a.focal;
        rc.rng_seed = a.seed;
        rc.min_iterations = a.min_iterations;
        rc.max_iterations = a.max_iterations;
        const RobustResult res = ransac(corrs, rc);
        doc["model"] = candidate_json(res.model);
        doc["num_inliers"] = res.num_inliers;
        doc["inlier_mask"] = res.inlier_mask;
        doc["iterations"] = res.iterations;
        doc["models_evaluated"] = res.models_evaluated;
    } else {
        const CorrSet5 sample = minimal_sample(corrs);
        json cands = json::array();
        for (const SolverCandidate &c : solve(sc, sample)) cands.push_back(candidate_json(c));
        doc["candidates"] = std::move(cands);
    }
    out << doc.dump(2) << '\n';
    return 0;
}

struct GenArgs {
    std::string solver_case = "one-sided";
    int points = 100;
    double sigma = 0.0;
    double outliers = 0.0;
    std::uint64_t seed = 0;
    double focal = 1000.0;
    std::string out;
    std::string gt;
};

inline int do_gen(const GenArgs &a, std::ostream &out) {
    SceneConfig cfg;
    cfg.solver_case = parse_solver_case(a.solver_case);
    cfg.num_points = a.points;
    cfg.noise_sigma_px = a.sigma;
    cfg.outlier_fraction = a.outliers;
    cfg.rng_seed = a.seed;
    cfg.focal = a.focal;
    const SyntheticInstance inst = generate_instance(cfg);
    detail::Sink sink(a.out, out);
    write_correspondences_csv(sink.stream(), inst.pixels);
    sink.finish();
    if (!a.gt.empty()) {
        detail::Sink gt(a.gt, out);
        json doc = ground_truth_json(inst);
        doc["inliers"] = inst.inlier_flags;
        gt.stream() << doc.dump(2) << '\n';
        gt.finish();
    }
    return 0;
}

struct BenchArgs {
    std::string kind;
    std::string solver_case = "all";
    int trials = 1000;
    std::uint64_t seed = 0;
    std::string out;
    std::string summary;
    bool timing = false;
    std::vector<double> sigmas{0.0, 0.1, 0.5, 1.0, 2.0};
    std::vector<double> outlier_fractions{0.2, 0.4, 0.6};
    int points = 200;
    double sigma = 0.5;
    double budget_s = 0.05;
    int grid = 50;
    int min_iterations = 500;
};

inline int do_bench(const BenchArgs &a, std::ostream &out) {
    if (a.trials < 0) throw Error(ErrorKind::ConfigInvalid, "trials must be nonnegative");
    const auto cases = detail::cases_of(a.solver_case);
    detail::Sink sink(a.out, out);
    if (a.kind == "stability" || a.kind == "noise") {
        std::vector<ErrorRecord> all;
        for (SolverCase sc : cases) {
            SceneConfig cfg;
            cfg.solver_case = sc;
            cfg.rng_seed = a.seed;
            auto recs = a.kind == "stability" ? run_stability(cfg, a.trials) : run_noise(cfg, a.sigmas, a.trials);
            all.insert(all.end(), recs.begin(), recs.end());
        }
        write_records_csv(sink.stream(), all, a.timing);
        if (!a.summary.empty()) {
            detail::Sink s(a.summary, out);
            write_summary_csv(s.stream(), summarize(all));
            s.finish();
        }
    } else {
        std::vector<RansacBenchResult> results;
        for (SolverCase sc : cases) {
            for (double f : a.outlier_fractions) {
                RansacBenchConfig bc;
                bc.scene.solver_case = sc;
                bc.scene.num_points = a.points;
                bc.scene.noise_sigma_px = a.sigma;
                bc.scene.outlier_fraction = f;
                bc.scene.rng_seed = a.seed;
                bc.trials = a.trials;
                bc.time_budget_s = a.budget_s;
                bc.grid_points = a.grid;
                bc.min_iterations = a.min_iterations;
                results.push_back(run_ransac_bench(bc));
            }
        }
        write_curve_csv(sink.stream(), results);
    }
    sink.finish();
    return 0;
}

// Entry point shared by the executable and the tests. Returns the process
// exit code; diagnostics go to `err`.
inline int run(int argc, const char *const *argv, std::ostream &out = std::cout, std::ostream &err = std::cerr) {
    CLI::App app{"Homography and radial distortion from five point correspondences", "rdhomog"};
    app.require_subcommand(1);
    const std::vector<std::string> case_names{"one-sided", "equal", "independent"};
    std::vector<std::string> bench_case_names = case_names;
    bench_case_names.push_back("all");

    SolveArgs sa;
    auto *solve_cmd = app.add_subcommand("solve", "Estimate H and distortion from a correspondence CSV (u1,v1,u2,v2 in pixels)");
    solve_cmd->add_option("file", sa.input, "Correspondence CSV")->required();
    solve_cmd->add_option("--case", sa.solver_case, "Distortion configuration")->check(CLI::IsMember(case_names));
    solve_cmd->add_flag("--ransac", sa.ransac, "Run LO-RANSAC over all rows instead of the minimal solver on the first five");
    solve_cmd->add_option("--threshold-px", sa.threshold_px, "Inlier threshold in pixels")->check(CLI::PositiveNumber);
    solve_cmd->add_option("--seed", sa.seed, "RANSAC seed");
    solve_cmd->add_option("--focal", sa.focal, "Pixels per normalized unit");
    solve_cmd->add_option("--cx", sa.cx, "Principal point x in pixels");
    solve_cmd->add_option("--cy", sa.cy, "Principal point y in pixels");
    solve_cmd->add_option("--min-iterations", sa.min_iterations, "RANSAC iteration floor")->check(CLI::NonNegativeNumber);
    solve_cmd->add_option("--max-iterations", sa.max_iterations, "RANSAC iteration cap")->check(CLI::PositiveNumber);

    GenArgs ga;
    auto *gen_cmd = app.add_subcommand("gen", "Write a synthetic correspondence CSV and optional ground-truth JSON");
    gen_cmd->add_option("--case", ga.solver_case, "Distortion configuration")->check(CLI::IsMember(case_names));
    gen_cmd->add_option("--points", ga.points, "Number of correspondences")->check(CLI::PositiveNumber);
    gen_cmd->add_option("--sigma", ga.sigma, "Gaussian pixel noise")->check(CLI::NonNegativeNumber);
    gen_cmd->add_option("--outliers", ga.outliers, "Outlier fraction in [0, 1)");
    gen_cmd->add_option("--seed", ga.seed, "Scene seed");
    gen_cmd->add_option("--focal", ga.focal, "Focal length in pixels");
    gen_cmd->add_option("--out", ga.out, "Output CSV (default stdout)");
    gen_cmd->add_option("--gt", ga.gt, "Ground-truth JSON sidecar");

    BenchArgs ba;
    auto *bench_cmd = app.add_subcommand("bench", "Run a synthetic experiment and write CSV");
    bench_cmd->add_option("kind", ba.kind, "stability | noise | ransac")
        ->required()
        ->check(CLI::IsMember({"stability", "noise", "ransac"}));
    bench_cmd->add_option("--case", ba.solver_case, "Distortion configuration or 'all'")
        ->check(CLI::IsMember(bench_case_names));
    bench_cmd->add_option("--trials", ba.trials, "Trials per case (and per level)")->check(CLI::NonNegativeNumber);
    bench_cmd->add_option("--seed", ba.seed, "Base seed");
    bench_cmd->add_option("--out", ba.out, "Output CSV (default stdout)");
    bench_cmd->add_option("--summary", ba.summary, "Median summary CSV (stability/noise)");
    bench_cmd->add_flag("--timing", ba.timing, "Record per-call solver time instead of 0");
    bench_cmd->add_option("--sigmas", ba.sigmas, "Noise levels in pixels (noise)")->delimiter(',');
    bench_cmd->add_option("--outlier-fractions", ba.outlier_fractions, "Outlier ratios (ransac)")->delimiter(',');
    bench_cmd->add_option("--points", ba.points, "Correspondences per scene (ransac)")->check(CLI::Range(5, 1000000));
    bench_cmd->add_option("--sigma", ba.sigma, "Pixel noise (ransac)")->check(CLI::NonNegativeNumber);
    bench_cmd->add_option("--budget", ba.budget_s, "Time budget per trial in seconds (ransac)")
        ->check(CLI::NonNegativeNumber);
    bench_cmd->add_option("--grid", ba.grid, "Time grid points (ransac)")->check(CLI::Range(2, 100000));
    bench_cmd->add_option("--min-iterations", ba.min_iterations, "RANSAC iteration floor (ransac)")
        ->check(CLI::NonNegativeNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        return app.exit(e, out, err);
    }
    try {
        if (*solve_cmd) return do_solve(sa, out);
        if (*gen_cmd) return do_gen(ga, out);
        return do_bench(ba, out);
    } catch (const std::exception &e) {
        err << "rdhomog: " << e.what() << '\n';
        return 2;
    }
}

} // namespace rdhomog::cli
