#pragma once

// Corpus curation: static-intro filtering, feature-space clustering into a
// representative test set with a 10:1 train/val split, and bicubic
// degradation for building LR/HR pairs.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "efrlfn/tensor.hpp"

namespace efrlfn {

// ---------------------------------------------------------------- filtering

enum class FilterDecision { keep, discard };

// Mean absolute luma difference that still counts as "static".
inline constexpr double kDefaultStaticTau = 2.0 / 255.0;

template <typename T>
double mean_abs_luma_diff(const Tensor<T>& a, const Tensor<T>& b);

// Discards iff both (first, f100) and (first, f150) differ by less than tau.
template <typename T>
FilterDecision scene_static_filter(const Tensor<T>& first, const Tensor<T>& f100,
                                   const Tensor<T>& f150, double tau = kDefaultStaticTau);

// ------------------------------------------------------------- PCA / k-means

struct PcaResult {
  Eigen::MatrixXd scores;       // n x k
  Eigen::MatrixXd components;   // d x k, unit columns, largest |loading| positive
  Eigen::VectorXd eigenvalues;  // all d covariance eigenvalues, descending
  Eigen::RowVectorXd mean;
};

PcaResult pca(const Eigen::MatrixXd& x, int k);
Eigen::MatrixXd pca_project(const Eigen::MatrixXd& x, int k);

struct KMeansResult {
  std::vector<int> labels;
  Eigen::MatrixXd centroids;  // k x d
  double inertia = 0.0;
  int iterations = 0;
  std::vector<double> inertia_trace;  // after each Lloyd assignment
};

// k-means++ seeding then Lloyd iterations to an assignment fixpoint.
KMeansResult kmeans(const Eigen::MatrixXd& x, int k, std::uint64_t seed, int max_iter = 300);

// ------------------------------------------------------------ categorization

struct VideoFeatureRecord {
  std::string id;
  double si = 0.0;
  double ti = 0.0;
  double bitrate = 0.0;
  double quality = 0.0;
  std::vector<double> embedding;
};

enum class Split { test, train, val };
std::string to_string(Split split);

struct SplitAssignment {
  // In input record order.
  std::vector<std::string> ids;
  std::vector<Split> splits;
  std::vector<int> clusters;

  std::size_t count(Split split) const;
};

inline constexpr int kDefaultClusters = 20;
inline constexpr int kPcaDims = 3;

// Features: z-scored [si, ti, bitrate, quality] ++ PCA(embedding, 3).
// Per cluster the record nearest its centroid (ties: smallest id) is test;
// the rest are shuffled by seed and split so val gets ceil(m/11).
SplitAssignment categorize(std::span<const VideoFeatureRecord> records,
                           int clusters = kDefaultClusters, std::uint64_t seed = 0);

Eigen::MatrixXd categorization_features(std::span<const VideoFeatureRecord> records);

// CSV header: id,si,ti,bitrate,quality,e0..e{d-1}
std::vector<VideoFeatureRecord> read_feature_records(std::istream& in);
std::vector<VideoFeatureRecord> read_feature_records(const std::filesystem::path& path);
void write_feature_records(std::ostream& out, std::span<const VideoFeatureRecord> records);
// CSV header: id,split
void write_split(std::ostream& out, const SplitAssignment& split);

// ---------------------------------------------------------------- resampling

// Keys cubic convolution kernel.
double keys_kernel(double x, double a = -0.5);

// Separable Keys (a = -0.5) resampling with half-pixel centres and
// edge-clamped taps; output clamped to [0,1].
template <typename T>
Tensor<T> bicubic_resize(const Tensor<T>& image, std::size_t out_h, std::size_t out_w);

template <typename T>
struct ImagePair {
  std::string id;
  Tensor<T> lr;
  Tensor<T> hr;
};

template <typename T>
struct NamedImage {
  std::string id;
  Tensor<T> image;
};

enum class LrMode { synthetic, real };

// Synthetic mode crops HR to multiples of `scale` and downsamples it
// bicubically. Real mode checks each supplied LR is exactly HR / scale.
template <typename T>
std::vector<ImagePair<T>> make_pairs(std::span<const NamedImage<T>> hr, int scale, LrMode mode,
                                     std::span<const NamedImage<T>> lr = {});

}  // namespace efrlfn
