#include "efrlfn/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "efrlfn/metrics.hpp"

namespace efrlfn {

template <typename T>
double mean_abs_luma_diff(const Tensor<T>& a, const Tensor<T>& b) {
  if (!(a.shape() == b.shape())) {
    throw std::invalid_argument("scene filter: frame dims differ " + a.shape().str() + " vs " +
                                b.shape().str());
  }
  const auto ya = luma(a);
  const auto yb = luma(b);
  double total = 0.0;
  for (std::size_t i = 0; i < ya.size(); ++i) total += std::abs(ya[i] - yb[i]);
  return total / static_cast<double>(ya.size());
}

template <typename T>
FilterDecision scene_static_filter(const Tensor<T>& first, const Tensor<T>& f100,
                                   const Tensor<T>& f150, double tau) {
  const double d100 = mean_abs_luma_diff(first, f100);
  const double d150 = mean_abs_luma_diff(first, f150);
  return (d100 < tau && d150 < tau) ? FilterDecision::discard : FilterDecision::keep;
}

PcaResult pca(const Eigen::MatrixXd& x, int k) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  if (n < 2) throw std::invalid_argument("pca: need at least 2 rows");
  if (k < 1 || k > std::min<Eigen::Index>(n - 1, d)) {
    throw std::invalid_argument("pca: k = " + std::to_string(k) + " outside [1, " +
                                std::to_string(std::min<Eigen::Index>(n - 1, d)) + "]");
  }
  PcaResult out;
  out.mean = x.colwise().mean();
  const Eigen::MatrixXd centred = x.rowwise() - out.mean;
  const Eigen::MatrixXd cov = (centred.transpose() * centred) / static_cast<double>(n - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw std::runtime_error("pca: eigen-solve failed");
  // Eigen returns ascending order.
  out.eigenvalues = solver.eigenvalues().reverse();
  out.components.resize(d, k);
  for (int j = 0; j < k; ++j) {
    Eigen::VectorXd v = solver.eigenvectors().col(d - 1 - j);
    Eigen::Index largest = 0;
    v.cwiseAbs().maxCoeff(&largest);
    if (v(largest) < 0) v = -v;
    out.components.col(j) = v;
  }
  out.scores = centred * out.components;
  return out;
}

Eigen::MatrixXd pca_project(const Eigen::MatrixXd& x, int k) { return pca(x, k).scores; }

namespace {

double squared_distance(const Eigen::MatrixXd& x, Eigen::Index row, const Eigen::MatrixXd& c,
                        Eigen::Index centroid) {
  return (x.row(row) - c.row(centroid)).squaredNorm();
}

// Nearest centroid; ties go to the lower index.
int nearest(const Eigen::MatrixXd& x, Eigen::Index row, const Eigen::MatrixXd& c, double* dist) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < c.rows(); ++j) {
    const double dj = squared_distance(x, row, c, j);
    if (dj < best_d) {
      best_d = dj;
      best = static_cast<int>(j);
    }
  }
  if (dist) *dist = best_d;
  return best;
}

}  // namespace

KMeansResult kmeans(const Eigen::MatrixXd& x, int k, std::uint64_t seed, int max_iter) {
  const Eigen::Index n = x.rows();
  if (k < 1) throw std::invalid_argument("kmeans: k must be >= 1");
  if (n < k) {
    throw std::invalid_argument("kmeans: " + std::to_string(n) + " points for k = " +
                                std::to_string(k));
  }
  std::mt19937_64 rng(seed);
  KMeansResult out;
  out.centroids.resize(k, x.cols());

  // k-means++ seeding.
  std::vector<bool> chosen(static_cast<std::size_t>(n), false);
  std::uniform_int_distribution<Eigen::Index> first(0, n - 1);
  Eigen::Index pick = first(rng);
  out.centroids.row(0) = x.row(pick);
  chosen[static_cast<std::size_t>(pick)] = true;
  std::vector<double> d2(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) d2[i] = squared_distance(x, i, out.centroids, 0);
  for (int j = 1; j < k; ++j) {
    const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    if (total > 0.0) {
      std::uniform_real_distribution<double> u(0.0, total);
      double target = u(rng);
      pick = n - 1;
      for (Eigen::Index i = 0; i < n; ++i) {
        target -= d2[i];
        if (target < 0.0 && d2[i] > 0.0) {
          pick = i;
          break;
        }
      }
      if (d2[pick] == 0.0) {
        // Rounding at the tail; fall back to the farthest point.
        pick = std::max_element(d2.begin(), d2.end()) - d2.begin();
      }
    } else {
      // Every point coincides with a centroid; take the first unused row.
      pick = std::find(chosen.begin(), chosen.end(), false) - chosen.begin();
    }
    chosen[static_cast<std::size_t>(pick)] = true;
    out.centroids.row(j) = x.row(pick);
    for (Eigen::Index i = 0; i < n; ++i) d2[i] = std::min(d2[i], squared_distance(x, i, out.centroids, j));
  }

  out.labels.assign(static_cast<std::size_t>(n), -1);
  std::vector<double> dist(static_cast<std::size_t>(n));
  for (int iter = 0; iter < max_iter; ++iter) {
    bool changed = false;
    double inertia = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const int label = nearest(x, i, out.centroids, &dist[i]);
      changed = changed || label != out.labels[i];
      out.labels[i] = label;
      inertia += dist[i];
    }
    out.inertia_trace.push_back(inertia);
    out.inertia = inertia;
    out.iterations = iter + 1;
    if (!changed) break;

    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, x.cols());
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(out.labels[i]) += x.row(i);
      ++counts[out.labels[i]];
    }
    for (int j = 0; j < k; ++j) {
      if (counts[j] > 0) {
        out.centroids.row(j) = sums.row(j) / counts[j];
        continue;
      }
      // Empty cluster: re-seed at the point farthest from its centroid.
      const Eigen::Index far = std::max_element(dist.begin(), dist.end()) - dist.begin();
      out.centroids.row(j) = x.row(far);
      dist[far] = 0.0;
    }
  }
  return out;
}

std::string to_string(Split split) {
  switch (split) {
    case Split::test: return "test";
    case Split::train: return "train";
    case Split::val: return "val";
  }
  return "?";
}

std::size_t SplitAssignment::count(Split split) const {
  return static_cast<std::size_t>(std::count(splits.begin(), splits.end(), split));
}

Eigen::MatrixXd categorization_features(std::span<const VideoFeatureRecord> records) {
  const auto n = static_cast<Eigen::Index>(records.size());
  if (n == 0) throw std::invalid_argument("categorize: no records");
  const std::size_t dim = records.front().embedding.size();
  for (const auto& r : records) {
    if (r.embedding.size() != dim) {
      throw std::invalid_argument("categorize: record " + r.id + " has embedding length " +
                                  std::to_string(r.embedding.size()) + ", expected " +
                                  std::to_string(dim));
    }
    for (double v : {r.si, r.ti, r.bitrate, r.quality}) {
      if (!std::isfinite(v)) throw std::invalid_argument("categorize: non-finite field in " + r.id);
    }
  }
  Eigen::MatrixXd scalars(n, 4);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = records[static_cast<std::size_t>(i)];
    scalars.row(i) << r.si, r.ti, r.bitrate, r.quality;
  }
  // z-score with population std; constant columns become zero.
  for (Eigen::Index j = 0; j < 4; ++j) {
    const double mu = scalars.col(j).mean();
    const double sd = std::sqrt((scalars.col(j).array() - mu).square().mean());
    if (sd > 0) {
      scalars.col(j) = ((scalars.col(j).array() - mu) / sd).matrix();
    } else {
      scalars.col(j).setZero();
    }
  }
  const int pca_k = std::min<int>(kPcaDims, std::min<int>(static_cast<int>(n) - 1, static_cast<int>(dim)));
  if (dim == 0 || pca_k < 1) return scalars;

  Eigen::MatrixXd emb(n, static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < n; ++i)
    for (std::size_t j = 0; j < dim; ++j) emb(i, static_cast<Eigen::Index>(j)) = records[i].embedding[j];
  const Eigen::MatrixXd projected = pca_project(emb, pca_k);
  Eigen::MatrixXd features(n, 4 + pca_k);
  features << scalars, projected;
  return features;
}

SplitAssignment categorize(std::span<const VideoFeatureRecord> records, int clusters,
                           std::uint64_t seed) {
  if (records.size() < static_cast<std::size_t>(std::max(clusters, 1))) {
    throw std::invalid_argument("categorize: " + std::to_string(records.size()) +
                                " records for " + std::to_string(clusters) + " clusters");
  }
  const Eigen::MatrixXd features = categorization_features(records);
  const KMeansResult km = kmeans(features, clusters, seed);

  SplitAssignment out;
  out.ids.reserve(records.size());
  for (const auto& r : records) out.ids.push_back(r.id);
  out.clusters = km.labels;
  out.splits.assign(records.size(), Split::train);

  for (int c = 0; c < clusters; ++c) {
    std::size_t best = records.size();
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < records.size(); ++i) {
      if (km.labels[i] != c) continue;
      const double d = (features.row(static_cast<Eigen::Index>(i)) - km.centroids.row(c)).squaredNorm();
      if (d < best_d || (d == best_d && records[i].id < records[best].id)) {
        best_d = d;
        best = i;
      }
    }
    if (best < records.size()) out.splits[best] = Split::test;
  }

  std::vector<std::size_t> rest;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (out.splits[i] != Split::test) rest.push_back(i);
  }
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::shuffle(rest.begin(), rest.end(), rng);
  const std::size_t val = (rest.size() + 10) / 11;
  for (std::size_t i = 0; i < val; ++i) out.splits[rest[i]] = Split::val;
  return out;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

double parse_number(const std::string& text, std::size_t line, const char* column) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("features csv line " + std::to_string(line) + ": bad " + column +
                                " value '" + text + "'");
  }
}

}  // namespace

std::vector<VideoFeatureRecord> read_feature_records(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("features csv: empty input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_csv_line(line);
  const std::vector<std::string> fixed{"id", "si", "ti", "bitrate", "quality"};
  if (header.size() < fixed.size() || !std::equal(fixed.begin(), fixed.end(), header.begin())) {
    throw std::invalid_argument("features csv line 1: header must start with id,si,ti,bitrate,quality");
  }
  const std::size_t dim = header.size() - fixed.size();
  for (std::size_t j = 0; j < dim; ++j) {
    if (header[fixed.size() + j] != "e" + std::to_string(j)) {
      throw std::invalid_argument("features csv line 1: expected column e" + std::to_string(j));
    }
  }
  std::vector<VideoFeatureRecord> records;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != header.size()) {
      throw std::invalid_argument("features csv line " + std::to_string(line_no) + ": " +
                                  std::to_string(f.size()) + " fields, expected " +
                                  std::to_string(header.size()));
    }
    VideoFeatureRecord r;
    r.id = f[0];
    r.si = parse_number(f[1], line_no, "si");
    r.ti = parse_number(f[2], line_no, "ti");
    r.bitrate = parse_number(f[3], line_no, "bitrate");
    r.quality = parse_number(f[4], line_no, "quality");
    for (std::size_t j = 0; j < dim; ++j) r.embedding.push_back(parse_number(f[5 + j], line_no, "embedding"));
    records.push_back(std::move(r));
  }
  return records;
}

std::vector<VideoFeatureRecord> read_feature_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_feature_records(in);
}

void write_feature_records(std::ostream& out, std::span<const VideoFeatureRecord> records) {
  const std::size_t dim = records.empty() ? 0 : records.front().embedding.size();
  out << "id,si,ti,bitrate,quality";
  for (std::size_t j = 0; j < dim; ++j) out << ",e" << j;
  out << '\n';
  out.precision(17);
  for (const auto& r : records) {
    out << r.id << ',' << r.si << ',' << r.ti << ',' << r.bitrate << ',' << r.quality;
    for (double v : r.embedding) out << ',' << v;
    out << '\n';
  }
}

void write_split(std::ostream& out, const SplitAssignment& split) {
  out << "id,split\n";
  for (std::size_t i = 0; i < split.ids.size(); ++i) {
    out << split.ids[i] << ',' << to_string(split.splits[i]) << '\n';
  }
}

double keys_kernel(double x, double a) {
  const double t = std::abs(x);
  if (t <= 1.0) return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
  if (t < 2.0) return ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a;
  return 0.0;
}

namespace {

struct CubicTaps {
  std::ptrdiff_t index[4];
  double weight[4];
};

std::vector<CubicTaps> cubic_taps(std::size_t in, std::size_t out) {
  std::vector<CubicTaps> taps(out);
  const double ratio = static_cast<double>(in) / static_cast<double>(out);
  const auto last = static_cast<std::ptrdiff_t>(in) - 1;
  for (std::size_t o = 0; o < out; ++o) {
    const double src = (static_cast<double>(o) + 0.5) * ratio - 0.5;
    const double base = std::floor(src);
    for (int t = 0; t < 4; ++t) {
      const double pos = base - 1.0 + t;
      taps[o].weight[t] = keys_kernel(src - pos);
      taps[o].index[t] = std::clamp(static_cast<std::ptrdiff_t>(pos), std::ptrdiff_t{0}, last);
    }
  }
  return taps;
}

}  // namespace

template <typename T>
Tensor<T> bicubic_resize(const Tensor<T>& image, std::size_t out_h, std::size_t out_w) {
  const Shape s = image.shape();
  if (out_h < 1 || out_w < 1) throw std::invalid_argument("bicubic_resize: output dims must be >= 1");
  if (s.h < 1 || s.w < 1) throw std::invalid_argument("bicubic_resize: empty input");
  const auto ty = cubic_taps(s.h, out_h);
  const auto tx = cubic_taps(s.w, out_w);
  const auto in = image.data();
  Tensor<T> out(Shape{s.n, s.c, out_h, out_w});
  auto dst = out.mutable_data();
  const std::ptrdiff_t planes = static_cast<std::ptrdiff_t>(s.n * s.c);

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t p = 0; p < planes; ++p) {
    const T* plane = in.data() + static_cast<std::size_t>(p) * s.plane();
    std::vector<double> rows(s.h * out_w);
    for (std::size_t y = 0; y < s.h; ++y)
      for (std::size_t x = 0; x < out_w; ++x) {
        double acc = 0.0;
        for (int t = 0; t < 4; ++t) acc += tx[x].weight[t] * static_cast<double>(plane[y * s.w + tx[x].index[t]]);
        rows[y * out_w + x] = acc;
      }
    T* target = dst.data() + static_cast<std::size_t>(p) * out_h * out_w;
    for (std::size_t y = 0; y < out_h; ++y)
      for (std::size_t x = 0; x < out_w; ++x) {
        double acc = 0.0;
        for (int t = 0; t < 4; ++t) acc += ty[y].weight[t] * rows[ty[y].index[t] * out_w + x];
        target[y * out_w + x] = static_cast<T>(std::clamp(acc, 0.0, 1.0));
      }
  }
  return out;
}

template <typename T>
std::vector<ImagePair<T>> make_pairs(std::span<const NamedImage<T>> hr, int scale, LrMode mode,
                                     std::span<const NamedImage<T>> lr) {
  if (scale < 1) throw std::invalid_argument("make_pairs: scale must be >= 1");
  const auto r = static_cast<std::size_t>(scale);
  std::vector<ImagePair<T>> pairs;
  if (mode == LrMode::synthetic) {
    for (const auto& item : hr) {
      const Shape s = item.image.shape();
      const std::size_t h = s.h / r * r;
      const std::size_t w = s.w / r * r;
      if (h == 0 || w == 0) {
        throw std::invalid_argument("make_pairs: " + item.id + " smaller than the scale factor");
      }
      Tensor<T> cropped = item.image;
      if (h != s.h || w != s.w) {
        Tensor<T> c(Shape{s.n, s.c, h, w});
        auto d = c.mutable_data();
        for (std::size_t p = 0; p < s.n * s.c; ++p)
          for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < w; ++x)
              d[(p * h + y) * w + x] = item.image.data()[(p * s.h + y) * s.w + x];
        cropped = c;
      }
      pairs.push_back({item.id, bicubic_resize(cropped, h / r, w / r), cropped});
    }
    return pairs;
  }
  if (lr.size() != hr.size()) {
    throw std::invalid_argument("make_pairs: " + std::to_string(hr.size()) + " HR images but " +
                                std::to_string(lr.size()) + " LR images");
  }
  for (std::size_t i = 0; i < hr.size(); ++i) {
    const Shape hs = hr[i].image.shape();
    const Shape ls = lr[i].image.shape();
    if (lr[i].id != hr[i].id) {
      throw std::invalid_argument("make_pairs: LR id " + lr[i].id + " paired with HR id " + hr[i].id);
    }
    if (hs.h % r != 0 || hs.w % r != 0 || ls.h * r != hs.h || ls.w * r != hs.w || ls.c != hs.c ||
        ls.n != hs.n) {
      throw std::invalid_argument("make_pairs: " + hr[i].id + " LR " + ls.str() +
                                  " is not HR " + hs.str() + " / " + std::to_string(scale));
    }
    pairs.push_back({hr[i].id, lr[i].image, hr[i].image});
  }
  return pairs;
}

#define EFRLFN_INSTANTIATE(T)                                                                  \
  template double mean_abs_luma_diff(const Tensor<T>&, const Tensor<T>&);                      \
  template FilterDecision scene_static_filter(const Tensor<T>&, const Tensor<T>&,              \
                                              const Tensor<T>&, double);                       \
  template Tensor<T> bicubic_resize(const Tensor<T>&, std::size_t, std::size_t);               \
  template std::vector<ImagePair<T>> make_pairs(std::span<const NamedImage<T>>, int, LrMode,   \
                                                std::span<const NamedImage<T>>);
EFRLFN_INSTANTIATE(float)
EFRLFN_INSTANTIATE(double)
#undef EFRLFN_INSTANTIATE

}  // namespace efrlfn
