#include <sstream>

#include <gtest/gtest.h>

#include "oracles.hpp"

using namespace rdhomog;

namespace {

std::vector<std::string> lines_of(const std::string &s) {
    std::vector<std::string> out;
    std::istringstream is(s);
    for (std::string l; std::getline(is, l);) out.push_back(l);
    return out;
}

SceneConfig base(SolverCase sc, std::uint64_t seed = 0) {
    SceneConfig c;
    c.solver_case = sc;
    c.rng_seed = seed;
    return c;
}

constexpr SolverCase kCases[] = {SolverCase::OneSided, SolverCase::TwoSidedEqual, SolverCase::TwoSidedIndependent};

} // namespace

TEST(Metrics, KError) {
    EXPECT_NEAR(k_error(SolverCase::OneSided, Lambda(-0.1), Lambda(0.0), Lambda(-0.11), Lambda(0.0)), 0.1, 1e-12);
    EXPECT_NEAR(k_error(SolverCase::TwoSidedIndependent, Lambda(-0.1), Lambda(-0.2), Lambda(-0.11), Lambda(-0.21)),
                std::sqrt(0.1 * 0.05), 1e-12);
    EXPECT_EQ(k_error(SolverCase::TwoSidedEqual, Lambda(-0.1), Lambda(-0.1), Lambda(-0.1), Lambda(-0.1)), 0.0);
}

TEST(Metrics, MedianAndQuantile) {
    EXPECT_EQ(rdhomog::median({3.0, 1.0, 2.0}), 2.0);
    EXPECT_EQ(rdhomog::median({4.0, 1.0, 2.0, 3.0}), 2.5);
    EXPECT_TRUE(std::isnan(rdhomog::median({})));
    std::vector<double> v;
    for (int i = 1; i <= 100; ++i) v.push_back(i);
    EXPECT_EQ(quantile(v, 0.99), 99.0);
    EXPECT_EQ(quantile(v, 1.0), 100.0);
}

TEST(Generator, NoiseFreeDataIsConsistent) {
    for (SolverCase sc : kCases) {
        for (std::uint64_t seed = 0; seed < 50; ++seed) {
            SceneConfig cfg = base(sc, seed);
            cfg.num_points = 20;
            const auto inst = generate_instance(cfg);
            ASSERT_EQ(inst.pixels.size(), 20u);
            const double half = cfg.focal * cfg.half_fov_tan();
            for (const Correspondence &c : inst.pixels) {
                const HomPoint x = inst.gt_h.matrix() * undistort(c.src / cfg.focal, inst.gt_lambda).homogeneous();
                const Point2 back = cfg.focal * distort(x.hnormalized(), inst.gt_lambda_p);
                EXPECT_LT((back - c.dst).norm(), 1e-9);
                EXPECT_LE(c.src.cwiseAbs().maxCoeff(), half);
            }
            if (sc == SolverCase::OneSided) {
                EXPECT_EQ(inst.gt_lambda_p.value, 0.0);
            }
            if (sc == SolverCase::TwoSidedEqual) {
                EXPECT_EQ(inst.gt_lambda_p.value, inst.gt_lambda.value);
            }
            EXPECT_GE(inst.gt_lambda.value, cfg.lambda_min);
            EXPECT_LE(inst.gt_lambda.value, cfg.lambda_max);
        }
    }
}

TEST(Generator, OutlierCountAndDeterminism) {
    SceneConfig cfg = base(SolverCase::TwoSidedEqual, 3);
    cfg.num_points = 200;
    cfg.outlier_fraction = 0.4;
    cfg.noise_sigma_px = 0.5;
    const auto a = generate_instance(cfg), b = generate_instance(cfg);
    EXPECT_EQ(std::count(a.inlier_flags.begin(), a.inlier_flags.end(), false), 80);
    EXPECT_EQ(a.inlier_flags, b.inlier_flags);
    for (std::size_t i = 0; i < a.pixels.size(); ++i) EXPECT_EQ(a.pixels[i].dst, b.pixels[i].dst);
}

TEST(Generator, RejectsBadConfig) {
    SceneConfig cfg;
    cfg.outlier_fraction = 1.0;
    EXPECT_THROW(generate_instance(cfg), Error);
    cfg = SceneConfig{};
    cfg.lambda_max = 0.5;
    EXPECT_THROW(generate_instance(cfg), Error);
}

TEST(Stability, ZeroTrialsIsEmpty) {
    EXPECT_TRUE(run_stability(base(SolverCase::OneSided), 0).empty());
    std::ostringstream os;
    write_records_csv(os, {});
    EXPECT_EQ(os.str(), std::string(kRecordHeader) + "\n");
}

TEST(Stability, RecordsAreAccurateAndDeterministic) {
    for (SolverCase sc : kCases) {
        const auto a = run_stability(base(sc, 7), 200);
        const auto b = run_stability(base(sc, 7), 200);
        ASSERT_EQ(a.size(), 200u);
        std::ostringstream sa, sb;
        write_records_csv(sa, a);
        write_records_csv(sb, b);
        EXPECT_EQ(sa.str(), sb.str());
        const auto rows = lines_of(sa.str());
        ASSERT_EQ(rows.size(), 201u);
        EXPECT_EQ(rows[0], kRecordHeader);
        std::vector<double> errs;
        for (int i = 0; i < 200; ++i) {
            EXPECT_EQ(a[i].trial_index, i);
            EXPECT_GE(a[i].num_candidates, 0);
            EXPECT_LE(a[i].num_candidates, max_candidates(sc));
            errs.push_back(a[i].failed() ? 1.0 : a[i].h_error);
        }
        EXPECT_LT(rdhomog::median(errs), 1e-9);
    }
}

TEST(Stability, TrialsAreIndependentOfCount) {
    const auto small = run_stability(base(SolverCase::TwoSidedIndependent, 8), 10);
    const auto large = run_stability(base(SolverCase::TwoSidedIndependent, 8), 30);
    for (int i = 0; i < 10; ++i) EXPECT_EQ(small[i].h_error, large[i].h_error);
}

TEST(Noise, SummaryGroupsByLevel) {
    const std::vector<double> sigmas{0.0, 1.0};
    const auto recs = run_noise(base(SolverCase::OneSided, 9), sigmas, 100);
    ASSERT_EQ(recs.size(), 200u);
    const auto sum = summarize(recs);
    ASSERT_EQ(sum.size(), 2u);
    EXPECT_EQ(sum[0].sigma_px, 0.0);
    EXPECT_EQ(sum[1].sigma_px, 1.0);
    EXPECT_EQ(sum[0].trials, 100);
    EXPECT_LT(sum[0].median_h_error, sum[1].median_h_error);
    EXPECT_GT(sum[1].median_h_error, 1e-6);
    std::ostringstream os;
    write_summary_csv(os, sum);
    const auto rows = lines_of(os.str());
    ASSERT_EQ(rows.size(), 3u);
    EXPECT_EQ(rows[0], kSummaryHeader);
}

TEST(Noise, ErrorGrowsWithSigma) {
    for (SolverCase sc : kCases) {
        const auto sum = summarize(run_noise(base(sc, 10), {0.1, 0.5, 2.0}, 300));
        ASSERT_EQ(sum.size(), 3u);
        EXPECT_LT(sum[0].median_h_error, sum[1].median_h_error);
        EXPECT_LT(sum[1].median_h_error, sum[2].median_h_error);
    }
}

TEST(RansacBench, CurveShapeAndMonotone) {
    RansacBenchConfig bc;
    bc.scene = base(SolverCase::OneSided, 11);
    bc.scene.num_points = 100;
    bc.scene.outlier_fraction = 0.3;
    bc.scene.noise_sigma_px = 0.5;
    bc.trials = 4;
    bc.min_iterations = 50;
    bc.grid_points = 10;
    const auto r = run_ransac_bench(bc);
    ASSERT_EQ(r.trials.size(), 4u);
    ASSERT_EQ(r.curve.size(), 10u);
    EXPECT_EQ(r.mean_true_inliers, 70.0);
    for (std::size_t i = 1; i < r.curve.size(); ++i) {
        EXPECT_GE(r.curve[i].time_s, r.curve[i - 1].time_s);
        EXPECT_GE(r.curve[i].mean_cumulative_inliers, r.curve[i - 1].mean_cumulative_inliers);
    }
    for (const auto &t : r.trials) {
        EXPECT_FALSE(t.failed);
        EXPECT_GE(t.recovered_fraction(), 0.9);
    }
    std::ostringstream os;
    write_curve_csv(os, {r});
    EXPECT_EQ(lines_of(os.str()).size(), 11u);
}

TEST(RansacBench, ZeroBudgetStillRuns) {
    RansacBenchConfig bc;
    bc.scene = base(SolverCase::TwoSidedEqual, 12);
    bc.scene.num_points = 50;
    bc.trials = 2;
    bc.time_budget_s = 0.0;
    bc.min_iterations = 5;
    const auto r = run_ransac_bench(bc);
    for (const auto &t : r.trials) EXPECT_GE(t.iterations, 5);
    EXPECT_EQ(r.curve.front().time_s, 0.0);
    EXPECT_EQ(r.curve.back().time_s, 0.0);
}

TEST(RansacTrial, TraceQueries) {
    RansacTrial t;
    t.trace = {{0.1, 10}, {0.2, 30}, {0.5, 40}};
    EXPECT_EQ(t.inliers_at(0.05), 0);
    EXPECT_EQ(t.inliers_at(0.2), 30);
    EXPECT_EQ(t.inliers_at(1.0), 40);
    EXPECT_EQ(t.time_to(30), 0.2);
    EXPECT_TRUE(std::isinf(t.time_to(41)));
}

TEST(Csv, CorrespondenceRoundTrip) {
    SceneConfig cfg = base(SolverCase::TwoSidedIndependent, 13);
    cfg.num_points = 25;
    cfg.noise_sigma_px = 1.0;
    const auto inst = generate_instance(cfg);
    std::stringstream ss;
    write_correspondences_csv(ss, inst.pixels);
    const auto back = read_correspondences_csv(ss);
    ASSERT_EQ(back.size(), inst.pixels.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
        EXPECT_EQ(back[i].src, inst.pixels[i].src);
        EXPECT_EQ(back[i].dst, inst.pixels[i].dst);
    }
}

TEST(Csv, ParseErrorsCarryLineNumber) {
    std::istringstream bad("u1,v1,u2,v2\n1,2,3,4\n1,2,x,4\n");
    try {
        read_correspondences_csv(bad);
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.kind(), ErrorKind::ParseError);
        EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
    }
    std::istringstream short_row("u1,v1,u2,v2\n1,2,3\n");
    EXPECT_THROW(read_correspondences_csv(short_row), Error);
}
