#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "doctest.h"
#include "efrlfn/ranking.hpp"

using namespace efrlfn;

namespace {

PairwiseStudy study_from(const std::vector<std::string>& items, const std::vector<std::vector<double>>& wins) {
  PairwiseStudy s;
  s.items = items;
  s.wins = wins;
  s.ties.assign(items.size(), std::vector<double>(items.size(), 0.0));
  return s;
}

PairwiseStudy simulate(const std::vector<double>& truth, int per_pair, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::string> items;
  for (std::size_t i = 0; i < truth.size(); ++i) items.push_back("m" + std::to_string(i));
  std::vector<std::vector<double>> wins(truth.size(), std::vector<double>(truth.size(), 0.0));
  for (std::size_t i = 0; i < truth.size(); ++i)
    for (std::size_t j = i + 1; j < truth.size(); ++j) {
      std::binomial_distribution<int> b(per_pair, truth[i] / (truth[i] + truth[j]));
      const int w = b(rng);
      wins[i][j] = w;
      wins[j][i] = per_pair - w;
    }
  return study_from(items, wins);
}

}  // namespace

TEST_SUITE("ranking") {
  TEST_CASE("two items at 3:1") {
    const auto s = study_from({"a", "b"}, {{0, 3}, {1, 0}});
    const auto fit = fit_bradley_terry(s);
    CHECK(fit.converged);
    CHECK_FALSE(fit.smoothed);
    CHECK(fit.scores[0] == doctest::Approx(1.5).epsilon(1e-9));
    CHECK(fit.scores[1] == doctest::Approx(0.5).epsilon(1e-9));
  }

  TEST_CASE("symmetric results give equal scores") {
    const auto s = study_from({"a", "b", "c"}, {{0, 5, 5}, {5, 0, 5}, {5, 5, 0}});
    const auto fit = fit_bradley_terry(s);
    for (double v : fit.scores) CHECK(v == doctest::Approx(1.0));
  }

  TEST_CASE("fit satisfies the likelihood equations and the LL rises") {
    const auto s = simulate({1.0, 2.0, 0.5, 4.0}, 40, 3);
    const auto fit = fit_bradley_terry(s);
    REQUIRE(fit.converged);
    double mean = 0.0;
    for (double v : fit.scores) mean += v / 4.0;
    CHECK(mean == doctest::Approx(1.0));
    for (std::size_t i = 0; i < 4; ++i) {
      double won = 0.0, expected = 0.0;
      for (std::size_t j = 0; j < 4; ++j) {
        if (i == j) continue;
        won += s.wins[i][j];
        expected += s.comparisons(i, j) * fit.scores[i] / (fit.scores[i] + fit.scores[j]);
      }
      CHECK(expected == doctest::Approx(won).epsilon(1e-8));
    }
    for (std::size_t k = 1; k < fit.log_likelihood.size(); ++k)
      CHECK(fit.log_likelihood[k] >= fit.log_likelihood[k - 1] -
                                         4 * std::numeric_limits<double>::epsilon() * std::abs(fit.log_likelihood[k - 1]));
    CHECK(bt_log_likelihood(s, fit.scores) == doctest::Approx(fit.log_likelihood.back()));
  }

  TEST_CASE("simulation recovers the true ordering") {
    const std::vector<double> truth{0.25, 0.5, 1.0, 2.0, 4.0};
    const auto s = simulate(truth, 400, 4);
    const auto fit = fit_bradley_terry(s);
    double mean = 0.0;
    for (double t : truth) mean += t / 5.0;
    for (std::size_t i = 0; i < 5; ++i) {
      CHECK(std::abs(std::log(fit.scores[i]) - std::log(truth[i] / mean)) < 0.2);
      if (i > 0) CHECK(fit.scores[i] > fit.scores[i - 1]);
    }
  }

  TEST_CASE("smoothing only when some item never wins") {
    const auto s = study_from({"a", "b", "c"}, {{0, 4, 3}, {1, 0, 2}, {0, 0, 0}});
    const auto fit = fit_bradley_terry(s);
    CHECK(fit.smoothed);
    for (double v : fit.scores) {
      CHECK(std::isfinite(v));
      CHECK(v > 0.0);
    }
    CHECK(fit.scores[0] > fit.scores[1]);
    CHECK(fit.scores[1] > fit.scores[2]);
  }

  TEST_CASE("disconnected graph is reported") {
    const auto s = study_from({"a", "b", "c", "d"}, {{0, 1, 0, 0}, {1, 0, 0, 0}, {0, 0, 0, 2}, {0, 0, 1, 0}});
    CHECK(connected_components(s).size() == 2);
    CHECK_THROWS_WITH_AS(fit_bradley_terry(s), doctest::Contains("{a,b} {c,d}"), std::invalid_argument);
  }

  TEST_CASE("bootstrap intervals shrink with more data") {
    const std::vector<double> truth{0.5, 1.0, 2.0};
    const auto small = simulate(truth, 20, 5);
    const auto large = simulate(truth, 500, 5);
    const auto a = bootstrap_ci(small, 200, 9);
    const auto b = bootstrap_ci(large, 200, 9);
    CHECK(a.replicates == 200);
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(a.low[i] <= a.high[i]);
      CHECK(b.high[i] - b.low[i] < a.high[i] - a.low[i]);
    }
    const auto again = bootstrap_ci(small, 200, 9);
    CHECK(again.low == a.low);
    CHECK(again.high == a.high);

    const auto ranked = rank_items(small, 200, 9);
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(ranked.ci_low[i] <= ranked.scores[i]);
      CHECK(ranked.scores[i] <= ranked.ci_high[i]);
    }
    std::ostringstream out;
    write_ranking(out, ranked);
    CHECK(out.str().rfind("item,score,ci_low,ci_high\n", 0) == 0);
  }

  TEST_CASE("verification filter and ties") {
    const std::vector<Response> rs{
        {"w1", "b", "a", Choice::left, true},  {"w1", "a", "b", Choice::tie, true},
        {"w2", "a", "b", Choice::left, true},  {"w2", "a", "c", Choice::left, false},
        {"w3", "c", "a", Choice::right, true},
    };
    const auto s = filter_responses(rs);
    CHECK(s.items == std::vector<std::string>{"a", "b", "c"});
    const auto a = s.index_of("a"), b = s.index_of("b"), c = s.index_of("c");
    CHECK(s.wins[b][a] == 1.5);
    CHECK(s.wins[a][b] == 0.5);
    CHECK(s.ties[a][b] == 1.0);
    CHECK(s.wins[a][c] == 1.0);
    CHECK(s.wins[c][a] == 0.0);
    CHECK_THROWS_AS(s.index_of("zz"), std::out_of_range);
  }

  TEST_CASE("responses csv") {
    std::istringstream good("worker,pair_left,pair_right,choice,verified\nw1,a,b,left,1\nw2,b,a,tie,0\n");
    const auto rs = read_responses(good);
    REQUIRE(rs.size() == 2);
    CHECK(rs[1].choice == Choice::tie);
    CHECK_FALSE(rs[1].verified);
    std::istringstream bad_choice("worker,pair_left,pair_right,choice,verified\nw1,a,b,up,1\n");
    CHECK_THROWS_WITH(read_responses(bad_choice), doctest::Contains("line 2"));
    std::istringstream self("worker,pair_left,pair_right,choice,verified\nw1,a,b,left,1\nw1,a,a,left,1\n");
    CHECK_THROWS_WITH(read_responses(self), doctest::Contains("line 3"));
    std::istringstream header("who,l,r,c,v\n");
    CHECK_THROWS(read_responses(header));
  }
}
