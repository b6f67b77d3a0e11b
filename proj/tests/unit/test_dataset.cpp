#include <algorithm>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "doctest.h"
#include "efrlfn/dataset.hpp"
#include "efrlfn/synthetic.hpp"
#include "../support/oracles.hpp"

using namespace efrlfn;

namespace {

// Direct 2-D sum over the 4x4 clamped neighbourhood.
double bicubic_oracle(const Tensor<double>& img, std::size_t plane, std::size_t oy, std::size_t ox,
                      std::size_t out_h, std::size_t out_w) {
  const Shape s = img.shape();
  const double sy = (oy + 0.5) * static_cast<double>(s.h) / static_cast<double>(out_h) - 0.5;
  const double sx = (ox + 0.5) * static_cast<double>(s.w) / static_cast<double>(out_w) - 0.5;
  auto k = [](double t) {
    t = std::abs(t);
    if (t <= 1) return 1.5 * t * t * t - 2.5 * t * t + 1;
    if (t < 2) return -0.5 * t * t * t + 2.5 * t * t - 4 * t + 2;
    return 0.0;
  };
  double acc = 0.0;
  for (long j = static_cast<long>(std::floor(sy)) - 1; j <= static_cast<long>(std::floor(sy)) + 2; ++j)
    for (long i = static_cast<long>(std::floor(sx)) - 1; i <= static_cast<long>(std::floor(sx)) + 2; ++i) {
      const long cy = std::clamp<long>(j, 0, static_cast<long>(s.h) - 1);
      const long cx = std::clamp<long>(i, 0, static_cast<long>(s.w) - 1);
      acc += k(sy - j) * k(sx - i) * img.data()[plane * s.plane() + cy * s.w + cx];
    }
  return std::clamp(acc, 0.0, 1.0);
}

std::vector<VideoFeatureRecord> clustered_records(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<VideoFeatureRecord> out;
  for (std::size_t i = 0; i < n; ++i) {
    const double centre = static_cast<double>(i % 20);
    VideoFeatureRecord r;
    char id[16];
    std::snprintf(id, sizeof id, "v%03zu", i);
    r.id = id;
    r.si = 10 * centre + g(rng);
    r.ti = 5 * std::sin(centre) + 0.2 * g(rng);
    r.bitrate = 1000 + 50 * centre + g(rng);
    r.quality = 0.5 + 0.01 * g(rng);
    for (int d = 0; d < 6; ++d) r.embedding.push_back(std::cos(centre * (d + 1)) + 0.05 * g(rng));
    out.push_back(r);
  }
  return out;
}

}  // namespace

TEST_SUITE("dataset") {
  TEST_CASE("static scene filter") {
    const Tensor<double> base(Shape{1, 3, 4, 4}, 0.5);
    const Tensor<double> near(Shape{1, 3, 4, 4}, 0.5 + 1.0 / 255.0);
    const Tensor<double> far(Shape{1, 3, 4, 4}, 0.5 + 3.0 / 255.0);
    CHECK(mean_abs_luma_diff(base, far) == doctest::Approx(3.0 / 255.0));
    CHECK(scene_static_filter(base, near, near) == FilterDecision::discard);
    CHECK(scene_static_filter(base, near, far) == FilterDecision::keep);
    CHECK(scene_static_filter(base, far, near) == FilterDecision::keep);
    // Strict comparison: a difference exactly at tau keeps the clip.
    const double d = mean_abs_luma_diff(base, near);
    CHECK(scene_static_filter(base, near, near, d) == FilterDecision::keep);
    CHECK_THROWS_AS(mean_abs_luma_diff(base, Tensor<double>(Shape{1, 3, 4, 5})), std::invalid_argument);
  }

  TEST_CASE("pca on rank-1 data") {
    Eigen::MatrixXd x(6, 3);
    const Eigen::RowVector3d dir(1, 2, 2);
    for (int i = 0; i < 6; ++i) x.row(i) = (i - 2.5) * dir + Eigen::RowVector3d(3, -1, 4);
    const auto r = pca(x, 1);
    CHECK(r.eigenvalues(1) == doctest::Approx(0.0).epsilon(1e-10));
    CHECK(r.eigenvalues(2) == doctest::Approx(0.0).epsilon(1e-10));
    CHECK(r.components(0, 0) == doctest::Approx(1.0 / 3.0));
    CHECK(r.components(1, 0) == doctest::Approx(2.0 / 3.0));
    for (int i = 0; i < 6; ++i) CHECK(r.scores(i, 0) == doctest::Approx(3.0 * (i - 2.5)));
    CHECK_THROWS_AS(pca(x, 0), std::invalid_argument);
    CHECK_THROWS_AS(pca(x, 4), std::invalid_argument);
  }

  TEST_CASE("pca agrees with power iteration and reconstructs") {
    std::mt19937_64 rng(21);
    std::normal_distribution<double> g(0.0, 1.0);
    Eigen::MatrixXd x(40, 5);
    for (int i = 0; i < 40; ++i)
      for (int j = 0; j < 5; ++j) x(i, j) = g(rng) * (j + 1);
    const auto r = pca(x, 5);
    const Eigen::MatrixXd centred = x.rowwise() - x.colwise().mean();
    const Eigen::MatrixXd cov = centred.transpose() * centred / 39.0;
    const auto [vals, vecs] = oracle::power_iteration(cov, 3);
    for (int j = 0; j < 3; ++j) {
      CHECK(r.eigenvalues(j) == doctest::Approx(vals(j)).epsilon(1e-8));
      CHECK(std::abs(r.components.col(j).dot(vecs.col(j))) == doctest::Approx(1.0).epsilon(1e-6));
    }
    const Eigen::MatrixXd back = (r.scores * r.components.transpose()).rowwise() + r.mean;
    CHECK((back - x).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((pca_project(x, 2) - r.scores.leftCols(2)).cwiseAbs().maxCoeff() < 1e-12);
  }

  TEST_CASE("kmeans on separated blobs") {
    std::mt19937_64 rng(22);
    std::normal_distribution<double> g(0.0, 0.1);
    Eigen::MatrixXd x(60, 2);
    for (int i = 0; i < 60; ++i) {
      const int c = i % 3;
      x(i, 0) = 10.0 * c + g(rng);
      x(i, 1) = -5.0 * c + g(rng);
    }
    const auto km = kmeans(x, 3, 7);
    for (int i = 3; i < 60; ++i) CHECK(km.labels[i] == km.labels[i % 3]);
    CHECK(std::set<int>(km.labels.begin(), km.labels.end()).size() == 3);
    for (std::size_t i = 1; i < km.inertia_trace.size(); ++i)
      CHECK(km.inertia_trace[i] <= km.inertia_trace[i - 1] + 1e-12);
    double inertia = 0.0;
    for (int i = 0; i < 60; ++i) inertia += (x.row(i) - km.centroids.row(km.labels[i])).squaredNorm();
    CHECK(km.inertia == doctest::Approx(inertia));
    const auto again = kmeans(x, 3, 7);
    CHECK(again.labels == km.labels);
    CHECK_THROWS_AS(kmeans(x, 61, 1), std::invalid_argument);
    CHECK_THROWS_AS(kmeans(x, 0, 1), std::invalid_argument);
  }

  TEST_CASE("categorize splits 220 records") {
    const auto records = clustered_records(220, 23);
    const auto split = categorize(records, 20, 5);
    CHECK(split.count(Split::test) == 20);
    CHECK(split.count(Split::val) == 19);
    CHECK(split.count(Split::train) == 181);
    std::set<int> test_clusters;
    for (std::size_t i = 0; i < records.size(); ++i)
      if (split.splits[i] == Split::test) test_clusters.insert(split.clusters[i]);
    CHECK(test_clusters.size() == 20);
    CHECK(categorize(records, 20, 5).splits == split.splits);
    CHECK(split.ids.front() == "v000");

    const auto features = categorization_features(records);
    CHECK(features.cols() == 7);
    for (int j = 0; j < 4; ++j) {
      CHECK(features.col(j).mean() == doctest::Approx(0.0).epsilon(1e-9));
      CHECK(std::sqrt(features.col(j).array().square().mean()) == doctest::Approx(1.0));
    }
    auto bad = records;
    bad[3].embedding.pop_back();
    CHECK_THROWS_AS(categorize(bad, 20, 5), std::invalid_argument);
    CHECK_THROWS_AS(categorize(std::span(records).first(10), 20, 5), std::invalid_argument);
  }

  TEST_CASE("feature csv round trip") {
    const auto records = clustered_records(5, 24);
    std::stringstream ss;
    write_feature_records(ss, records);
    const auto back = read_feature_records(ss);
    REQUIRE(back.size() == 5);
    for (std::size_t i = 0; i < 5; ++i) {
      CHECK(back[i].id == records[i].id);
      CHECK(back[i].si == records[i].si);
      CHECK(back[i].embedding == records[i].embedding);
    }
    std::stringstream bad("id,si,ti,bitrate,quality\nx,1,2,oops,4\n");
    CHECK_THROWS(read_feature_records(bad));
  }

  TEST_CASE("keys kernel") {
    CHECK(keys_kernel(0.0) == 1.0);
    CHECK(keys_kernel(0.25) == 0.8671875);
    CHECK(keys_kernel(0.75) == 0.2265625);
    CHECK(keys_kernel(1.25) == -0.0703125);
    CHECK(keys_kernel(-1.25) == -0.0703125);
    CHECK(keys_kernel(1.75) == -0.0234375);
    CHECK(keys_kernel(1.0) == 0.0);
    CHECK(keys_kernel(2.0) == 0.0);
    for (double f : {0.0, 0.1, 0.5, 0.9})
      CHECK(keys_kernel(f + 1) + keys_kernel(f) + keys_kernel(1 - f) + keys_kernel(2 - f) == doctest::Approx(1.0));
  }

  TEST_CASE("bicubic resize") {
    // Hand-computed 4 -> 2 on a ramp row.
    Tensor<double> row(Shape{1, 1, 1, 4}, std::vector<double>{0.0, 0.1, 0.2, 0.3});
    const auto half = bicubic_resize(row, 1, 2);
    CHECK(half.data()[0] == doctest::Approx(0.04375));
    CHECK(half.data()[1] == doctest::Approx(0.25625));

    std::mt19937_64 rng(25);
    const auto img = oracle::random_tensor(Shape{1, 3, 12, 10}, rng, 0, 1);
    CHECK(bicubic_resize(img, 12, 10).data().size() == img.numel());
    const auto same = bicubic_resize(img, 12, 10);
    for (std::size_t i = 0; i < img.numel(); ++i) CHECK(same.data()[i] == doctest::Approx(img.data()[i]).epsilon(1e-14));
    for (auto [oh, ow] : {std::pair<std::size_t, std::size_t>{6, 5}, {3, 4}, {24, 15}}) {
      const auto out = bicubic_resize(img, oh, ow);
      for (std::size_t p = 0; p < 3; ++p)
        for (std::size_t y = 0; y < oh; ++y)
          for (std::size_t x = 0; x < ow; ++x)
            CHECK(out.data()[(p * oh + y) * ow + x] == doctest::Approx(bicubic_oracle(img, p, y, x, oh, ow)).epsilon(1e-12));
    }
    const Tensor<double> flat(Shape{1, 3, 8, 8}, 0.37);
    const auto flat_small = bicubic_resize(flat, 4, 4);
    for (double v : flat_small.data()) CHECK(v == doctest::Approx(0.37).epsilon(1e-14));
    const auto f = bicubic_resize(Tensor<float>(Shape{1, 3, 12, 10}, 0.5f), 6, 5);
    CHECK(f.shape() == Shape{1, 3, 6, 5});
  }

  TEST_CASE("make_pairs") {
    const auto corpus = synthetic_corpus<double>(2, 17, 22, 3);
    const auto pairs = make_pairs<double>(corpus, 4, LrMode::synthetic);
    REQUIRE(pairs.size() == 2);
    CHECK(pairs[0].id == "synth_000");
    CHECK(pairs[0].hr.shape() == Shape{1, 3, 16, 20});
    CHECK(pairs[0].lr.shape() == Shape{1, 3, 4, 5});
    CHECK(pairs[0].hr.at(0, 1, 3, 7) == corpus[0].image.at(0, 1, 3, 7));

    std::vector<NamedImage<double>> hr{{"a", Tensor<double>(Shape{1, 3, 8, 8}, 0.5)}};
    std::vector<NamedImage<double>> lr{{"a", Tensor<double>(Shape{1, 3, 4, 4}, 0.5)}};
    CHECK(make_pairs<double>(hr, 2, LrMode::real, lr).size() == 1);
    std::vector<NamedImage<double>> wrong{{"b", Tensor<double>(Shape{1, 3, 4, 4}, 0.5)}};
    CHECK_THROWS_AS(make_pairs<double>(hr, 2, LrMode::real, wrong), std::invalid_argument);
    std::vector<NamedImage<double>> off{{"a", Tensor<double>(Shape{1, 3, 4, 3}, 0.5)}};
    CHECK_THROWS_AS(make_pairs<double>(hr, 2, LrMode::real, off), std::invalid_argument);
    CHECK_THROWS_AS(make_pairs<double>(hr, 2, LrMode::real), std::invalid_argument);
    CHECK_THROWS_AS(make_pairs<double>(hr, 16, LrMode::synthetic), std::invalid_argument);
  }

  TEST_CASE("synthetic images are seeded and in range") {
    const auto a = synthetic_image<double>(20, 24, 9);
    const auto b = synthetic_image<double>(20, 24, 9);
    const auto c = synthetic_image<double>(20, 24, 10);
    CHECK(std::equal(a.data().begin(), a.data().end(), b.data().begin()));
    CHECK_FALSE(std::equal(a.data().begin(), a.data().end(), c.data().begin()));
    for (double v : a.data()) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
    const auto seq = synthetic_sequence<double>(3, 16, 16, 1.0, 4);
    CHECK(seq.size() == 3);
  }
}
