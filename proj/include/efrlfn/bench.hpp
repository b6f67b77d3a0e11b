#pragma once

// Throughput measurement (warmup, then timed sequential runs over a fixed
// frame sequence), Pareto fronts over (quality, fps), and CSV/JSON reports.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "efrlfn/model.hpp"
#include "efrlfn/tensor.hpp"

namespace efrlfn {

struct BenchResult {
  std::string model_id;
  int frames = 0;
  int runs = 0;
  std::vector<double> per_run_ms;
  double fps_mean = 0.0;  // frames / mean run seconds
  double fps_std = 0.0;   // sample std of per-run fps; 0 when runs == 1
  Shape input_dims;
  int scale = 0;
};

struct BenchOptions {
  int frames = 100;
  int runs = 3;
  int warmup = 10;
};

// Called once per frame with the frame index in [0, frames).
using FrameRunner = std::function<void(int frame)>;

BenchResult measure_fps(const FrameRunner& runner, const BenchOptions& options = {},
                        std::string model_id = {}, Shape input_dims = {}, int scale = 0);

// Seeded uniform-noise frames of shape (1,3,h,w).
std::vector<Tensor<float>> bench_frames(int count, std::size_t h, std::size_t w, std::uint64_t seed);

// Times Model::infer over `frames` cycled by index. Only the forward pass is
// timed; no decode or encode.
BenchResult bench_model(const Model<float>& model, std::span<const Tensor<float>> frames,
                        const BenchOptions& options = {}, std::string model_id = {});

struct QualitySpeed {
  std::string id;
  double quality = 0.0;
  double fps = 0.0;
};

// Points not dominated under (quality up, fps up), sorted by ascending fps.
std::vector<QualitySpeed> pareto_front(std::span<const QualitySpeed> points);

struct MetricSummary {
  double mean = 0.0;
  double ci = 0.0;  // 1.96 * sample std / sqrt(n); 0 for n == 1
  std::size_t n = 0;
  friend bool operator==(const MetricSummary&, const MetricSummary&) = default;
};

MetricSummary summarize_ci(std::span<const double> values);

// Per-video scores of one metric for several models.
struct MetricTable {
  std::string metric;
  std::vector<std::pair<std::string, std::vector<double>>> scores;
};

struct ReportRow {
  std::string model_id;
  std::vector<std::optional<MetricSummary>> metrics;  // aligned with Report::metric_names
  std::optional<double> fps_mean;
  std::optional<double> fps_std;
  friend bool operator==(const ReportRow&, const ReportRow&) = default;
};

struct Report {
  std::vector<std::string> metric_names;
  std::vector<ReportRow> rows;
  friend bool operator==(const Report&, const Report&) = default;
};

// Rows follow bench order, then models seen only in metric tables. Duplicate
// ids within the bench results or within one table are rejected.
Report build_report(std::span<const BenchResult> bench, std::span<const MetricTable> metrics);

// Columns: model_id, {metric}_mean, {metric}_ci, {metric}_n ..., then
// fps_mean, fps_std when any row has timings. Missing values are empty.
std::string report_to_csv(const Report& report);
Report report_from_csv(const std::string& text);
std::string report_to_json(const Report& report);
Report report_from_json(const std::string& text);
void write_report(const Report& report, const std::filesystem::path& csv,
                  const std::filesystem::path& json);

std::string bench_to_json(const BenchResult& result);

}  // namespace efrlfn
