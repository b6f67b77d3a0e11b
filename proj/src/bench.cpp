#include "efrlfn/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

#include "efrlfn/metrics.hpp"
#include "json.hpp"

namespace efrlfn {

BenchResult measure_fps(const FrameRunner& runner, const BenchOptions& options,
                        std::string model_id, Shape input_dims, int scale) {
  if (options.frames < 1) throw std::invalid_argument("measure_fps: frames must be >= 1");
  if (options.runs < 1) throw std::invalid_argument("measure_fps: runs must be >= 1");
  if (options.warmup < 0) throw std::invalid_argument("measure_fps: warmup must be >= 0");
  auto call = [&](int frame, const char* phase) {
    try {
      runner(frame);
    } catch (const std::exception& e) {
      throw std::runtime_error(std::string("measure_fps: runner failed at ") + phase + " frame " +
                               std::to_string(frame) + ": " + e.what());
    }
  };
  for (int i = 0; i < options.warmup; ++i) call(i % options.frames, "warmup");

  BenchResult out;
  out.model_id = std::move(model_id);
  out.frames = options.frames;
  out.runs = options.runs;
  out.input_dims = input_dims;
  out.scale = scale;
  std::vector<double> fps;
  for (int run = 0; run < options.runs; ++run) {
    const auto start = std::chrono::steady_clock::now();
    for (int f = 0; f < options.frames; ++f) call(f, "timed");
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    out.per_run_ms.push_back(ms);
    fps.push_back(options.frames / (ms / 1000.0));
  }
  double mean_ms = 0.0;
  for (double ms : out.per_run_ms) mean_ms += ms;
  mean_ms /= static_cast<double>(out.per_run_ms.size());
  out.fps_mean = options.frames / (mean_ms / 1000.0);
  out.fps_std = options.runs > 1 ? mean_std(fps).std : 0.0;
  return out;
}

std::vector<Tensor<float>> bench_frames(int count, std::size_t h, std::size_t w, std::uint64_t seed) {
  if (count < 1) throw std::invalid_argument("bench_frames: count must be >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  std::vector<Tensor<float>> frames;
  for (int i = 0; i < count; ++i) {
    Tensor<float> t(Shape{1, 3, h, w});
    for (float& v : t.mutable_data()) v = u(rng);
    frames.push_back(std::move(t));
  }
  return frames;
}

BenchResult bench_model(const Model<float>& model, std::span<const Tensor<float>> frames,
                        const BenchOptions& options, std::string model_id) {
  if (frames.empty()) throw std::invalid_argument("bench_model: no frames");
  volatile float sink = 0.0f;
  auto runner = [&](int f) {
    const Tensor<float> out = model.infer(frames[static_cast<std::size_t>(f) % frames.size()]);
    sink = out.data()[0];
  };
  return measure_fps(runner, options, std::move(model_id), frames.front().shape(), model.config().scale);
}

std::vector<QualitySpeed> pareto_front(std::span<const QualitySpeed> points) {
  if (points.empty()) throw std::invalid_argument("pareto_front: no points");
  std::vector<QualitySpeed> front;
  for (const auto& p : points) {
    const bool dominated = std::any_of(points.begin(), points.end(), [&](const QualitySpeed& q) {
      return q.quality >= p.quality && q.fps >= p.fps && (q.quality > p.quality || q.fps > p.fps);
    });
    if (!dominated) front.push_back(p);
  }
  std::stable_sort(front.begin(), front.end(),
                   [](const QualitySpeed& a, const QualitySpeed& b) { return a.fps < b.fps; });
  return front;
}

MetricSummary summarize_ci(std::span<const double> values) {
  const MeanStd ms = mean_std(values);
  MetricSummary out;
  out.mean = ms.mean;
  out.n = values.size();
  out.ci = values.size() > 1 ? 1.96 * ms.std / std::sqrt(static_cast<double>(values.size())) : 0.0;
  return out;
}

Report build_report(std::span<const BenchResult> bench, std::span<const MetricTable> metrics) {
  Report report;
  auto row_index = [&](const std::string& id) -> std::size_t {
    for (std::size_t i = 0; i < report.rows.size(); ++i)
      if (report.rows[i].model_id == id) return i;
    return report.rows.size();
  };
  for (const auto& b : bench) {
    if (row_index(b.model_id) != report.rows.size()) {
      throw std::invalid_argument("report: duplicate model id '" + b.model_id + "'");
    }
    report.rows.push_back({b.model_id, {}, b.fps_mean, b.fps_std});
  }
  for (const auto& table : metrics) {
    if (std::find(report.metric_names.begin(), report.metric_names.end(), table.metric) !=
        report.metric_names.end()) {
      throw std::invalid_argument("report: duplicate metric '" + table.metric + "'");
    }
    report.metric_names.push_back(table.metric);
    std::set<std::string> seen;
    for (const auto& [id, values] : table.scores) {
      if (!seen.insert(id).second) {
        throw std::invalid_argument("report: duplicate model id '" + id + "' in metric " + table.metric);
      }
      std::size_t i = row_index(id);
      if (i == report.rows.size()) report.rows.push_back({id, {}, std::nullopt, std::nullopt});
      auto& row = report.rows[i];
      row.metrics.resize(report.metric_names.size());
      row.metrics.back() = summarize_ci(values);
    }
  }
  for (auto& row : report.rows) row.metrics.resize(report.metric_names.size());
  return report;
}

namespace {

std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

bool has_fps(const Report& report) {
  return std::any_of(report.rows.begin(), report.rows.end(),
                     [](const ReportRow& r) { return r.fps_mean.has_value(); });
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::optional<double> parse_cell(const std::string& cell, std::size_t line) {
  if (cell.empty()) return std::nullopt;
  try {
    std::size_t used = 0;
    const double v = std::stod(cell, &used);
    if (used == cell.size()) return v;
  } catch (const std::exception&) {
  }
  throw std::invalid_argument("report csv line " + std::to_string(line) + ": bad number '" + cell + "'");
}

}  // namespace

std::string report_to_csv(const Report& report) {
  std::ostringstream out;
  out << "model_id";
  for (const auto& m : report.metric_names) out << ',' << m << "_mean," << m << "_ci," << m << "_n";
  const bool fps = has_fps(report);
  if (fps) out << ",fps_mean,fps_std";
  out << '\n';
  for (const auto& row : report.rows) {
    out << row.model_id;
    for (const auto& m : row.metrics) {
      if (m) {
        out << ',' << format_number(m->mean) << ',' << format_number(m->ci) << ',' << m->n;
      } else {
        out << ",,,";
      }
    }
    if (fps) {
      out << ',' << (row.fps_mean ? format_number(*row.fps_mean) : "") << ','
          << (row.fps_std ? format_number(*row.fps_std) : "");
    }
    out << '\n';
  }
  return out.str();
}

Report report_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("report csv: empty");
  const auto header = split_fields(line);
  if (header.empty() || header[0] != "model_id") throw std::invalid_argument("report csv line 1: missing model_id");
  Report report;
  std::size_t col = 1;
  while (col < header.size() && header[col] != "fps_mean") {
    const std::string& h = header[col];
    if (h.size() < 6 || h.substr(h.size() - 5) != "_mean") {
      throw std::invalid_argument("report csv line 1: unexpected column " + h);
    }
    const std::string name = h.substr(0, h.size() - 5);
    if (col + 2 >= header.size() || header[col + 1] != name + "_ci" || header[col + 2] != name + "_n") {
      throw std::invalid_argument("report csv line 1: incomplete columns for " + name);
    }
    report.metric_names.push_back(name);
    col += 3;
  }
  const bool fps = col < header.size();
  if (fps && (header.size() != col + 2 || header[col] != "fps_mean" || header[col + 1] != "fps_std")) {
    throw std::invalid_argument("report csv line 1: unexpected trailing columns");
  }
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = split_fields(line);
    if (f.size() != header.size()) {
      throw std::invalid_argument("report csv line " + std::to_string(line_no) + ": wrong field count");
    }
    ReportRow row;
    row.model_id = f[0];
    for (std::size_t m = 0; m < report.metric_names.size(); ++m) {
      const auto mean = parse_cell(f[1 + 3 * m], line_no);
      const auto ci = parse_cell(f[2 + 3 * m], line_no);
      const auto n = parse_cell(f[3 + 3 * m], line_no);
      if (mean && ci && n) {
        row.metrics.push_back(MetricSummary{*mean, *ci, static_cast<std::size_t>(*n)});
      } else {
        row.metrics.push_back(std::nullopt);
      }
    }
    if (fps) {
      row.fps_mean = parse_cell(f[col], line_no);
      row.fps_std = parse_cell(f[col + 1], line_no);
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

std::string report_to_json(const Report& report) {
  nlohmann::ordered_json j;
  j["metrics"] = report.metric_names;
  j["rows"] = nlohmann::ordered_json::array();
  for (const auto& row : report.rows) {
    nlohmann::ordered_json r;
    r["model_id"] = row.model_id;
    r["metrics"] = nlohmann::ordered_json::object();
    for (std::size_t m = 0; m < row.metrics.size(); ++m) {
      if (!row.metrics[m]) continue;
      r["metrics"][report.metric_names[m]] = {
          {"mean", row.metrics[m]->mean}, {"ci", row.metrics[m]->ci}, {"n", row.metrics[m]->n}};
    }
    if (row.fps_mean) r["fps_mean"] = *row.fps_mean;
    if (row.fps_std) r["fps_std"] = *row.fps_std;
    j["rows"].push_back(r);
  }
  return j.dump(2);
}

Report report_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  Report report;
  report.metric_names = j.at("metrics").get<std::vector<std::string>>();
  for (const auto& r : j.at("rows")) {
    ReportRow row;
    row.model_id = r.at("model_id").get<std::string>();
    for (const auto& name : report.metric_names) {
      if (r.at("metrics").contains(name)) {
        const auto& m = r["metrics"][name];
        row.metrics.push_back(MetricSummary{m.at("mean").get<double>(), m.at("ci").get<double>(),
                                            m.at("n").get<std::size_t>()});
      } else {
        row.metrics.push_back(std::nullopt);
      }
    }
    if (r.contains("fps_mean")) row.fps_mean = r["fps_mean"].get<double>();
    if (r.contains("fps_std")) row.fps_std = r["fps_std"].get<double>();
    report.rows.push_back(std::move(row));
  }
  return report;
}

void write_report(const Report& report, const std::filesystem::path& csv,
                  const std::filesystem::path& json) {
  std::ofstream c(csv);
  std::ofstream j(json);
  if (!c) throw std::runtime_error("cannot write " + csv.string());
  if (!j) throw std::runtime_error("cannot write " + json.string());
  c << report_to_csv(report);
  j << report_to_json(report) << '\n';
}

std::string bench_to_json(const BenchResult& r) {
  nlohmann::ordered_json j{{"model_id", r.model_id},
                           {"frames", r.frames},
                           {"runs", r.runs},
                           {"per_run_ms", r.per_run_ms},
                           {"fps_mean", r.fps_mean},
                           {"fps_std", r.fps_std},
                           {"input_dims", {r.input_dims.n, r.input_dims.c, r.input_dims.h, r.input_dims.w}},
                           {"scale", r.scale}};
  return j.dump(2);
}

}  // namespace efrlfn
