#include <chrono>
#include <cmath>
#include <thread>

#include "doctest.h"
#include "efrlfn/bench.hpp"
#include "../support/oracles.hpp"

using namespace efrlfn;

TEST_SUITE("bench") {
  TEST_CASE("measure_fps on a sleeping stub") {
    int calls = 0;
    const BenchOptions opts{10, 3, 2};
    const auto r = measure_fps([&](int) {
      ++calls;
      std::this_thread::sleep_for(std::chrono::milliseconds(2));
    }, opts, "stub", Shape{1, 3, 4, 4}, 2);
    CHECK(calls == 10 * 3 + 2);
    REQUIRE(r.per_run_ms.size() == 3);
    CHECK(r.model_id == "stub");
    CHECK(r.frames == 10);
    CHECK(r.runs == 3);
    // 2 ms sleeps cap throughput at 500 fps; scheduling only makes it slower.
    CHECK(r.fps_mean <= 500.0);
    CHECK(r.fps_mean > 100.0);
    double mean_ms = 0.0;
    for (double ms : r.per_run_ms) mean_ms += ms / 3.0;
    CHECK(r.fps_mean == doctest::Approx(10.0 / (mean_ms / 1000.0)));
    std::vector<double> fps;
    for (double ms : r.per_run_ms) fps.push_back(10.0 / (ms / 1000.0));
    const double m = oracle::sample_mean(fps);
    double ss = 0.0;
    for (double f : fps) ss += (f - m) * (f - m);
    CHECK(r.fps_std == doctest::Approx(std::sqrt(ss / 2.0)));

    const auto single = measure_fps([](int) {}, BenchOptions{5, 1, 0});
    CHECK(single.fps_std == 0.0);
    CHECK_THROWS_AS(measure_fps([](int) {}, BenchOptions{0, 1, 0}), std::invalid_argument);
    CHECK_THROWS_WITH_AS(measure_fps([](int f) { if (f == 3) throw std::runtime_error("boom"); }, BenchOptions{5, 1, 0}),
                         doctest::Contains("frame 3"), std::runtime_error);
  }

  TEST_CASE("bench_model runs the forward pass") {
    ModelConfig cfg;
    cfg.channels = 4;
    cfg.blocks = 1;
    const auto model = Model<float>::build(cfg);
    const auto frames = bench_frames(2, 8, 10, 1);
    REQUIRE(frames.size() == 2);
    CHECK(frames[0].shape() == Shape{1, 3, 8, 10});
    const auto r = bench_model(model, frames, BenchOptions{4, 2, 1}, "tiny");
    CHECK(r.input_dims == Shape{1, 3, 8, 10});
    CHECK(r.scale == 2);
    CHECK(r.fps_mean > 0.0);
  }

  TEST_CASE("pareto front") {
    const std::vector<QualitySpeed> pts{{"a", 30.0, 10.0}, {"b", 29.0, 50.0}, {"c", 28.0, 40.0},
                                        {"d", 31.0, 5.0},  {"e", 29.0, 50.0}, {"f", 27.0, 100.0}};
    const auto front = pareto_front(pts);
    std::vector<std::string> ids;
    for (const auto& p : front) ids.push_back(p.id);
    CHECK(ids == std::vector<std::string>{"d", "a", "b", "e", "f"});
    CHECK_THROWS_AS(pareto_front({}), std::invalid_argument);
  }

  TEST_CASE("confidence interval") {
    const std::vector<double> v{30.0, 31.0, 29.0, 32.0, 28.0};
    const auto s = summarize_ci(v);
    CHECK(s.mean == doctest::Approx(30.0));
    CHECK(s.n == 5);
    // sample std sqrt(10/4)
    CHECK(s.ci == doctest::Approx(1.96 * std::sqrt(2.5) / std::sqrt(5.0)));
    const std::vector<double> one{7.0};
    CHECK(summarize_ci(one).ci == 0.0);
  }

  TEST_CASE("report round trips and rejects duplicates") {
    BenchResult a;
    a.model_id = "efrlfn";
    a.fps_mean = 123.456789;
    a.fps_std = 1.5;
    BenchResult b;
    b.model_id = "bicubic";
    b.fps_mean = 1000.0;
    const std::vector<BenchResult> bench{a, b};
    const std::vector<MetricTable> tables{
        {"psnr", {{"efrlfn", {30.1, 30.5, 29.7}}, {"bicubic", {28.0, 28.2}}, {"other", {27.0}}}},
        {"ssim", {{"efrlfn", {0.91, 0.92}}}}};
    const auto report = build_report(bench, tables);
    REQUIRE(report.rows.size() == 3);
    CHECK(report.rows[0].model_id == "efrlfn");
    CHECK(report.rows[2].model_id == "other");
    CHECK_FALSE(report.rows[2].fps_mean.has_value());
    CHECK_FALSE(report.rows[1].metrics[1].has_value());
    CHECK(report.rows[0].metrics[0]->n == 3);

    const auto csv = report_to_csv(report);
    CHECK(csv.rfind("model_id,psnr_mean,psnr_ci,psnr_n,ssim_mean,ssim_ci,ssim_n,fps_mean,fps_std", 0) == 0);
    CHECK(report_from_csv(csv) == report);
    CHECK(report_from_json(report_to_json(report)) == report);

    const std::vector<BenchResult> dup{a, a};
    CHECK_THROWS_AS(build_report(dup, {}), std::invalid_argument);
    const std::vector<MetricTable> dup_rows{{"psnr", {{"x", {1.0}}, {"x", {2.0}}}}};
    CHECK_THROWS_AS(build_report({}, dup_rows), std::invalid_argument);
    CHECK_THROWS_AS(report_from_csv("id,psnr_mean\n"), std::invalid_argument);
    CHECK_THROWS_WITH(report_from_csv("model_id,psnr_mean,psnr_ci,psnr_n\nx,abc,1,2\n"), doctest::Contains("line 2"));
  }
}
