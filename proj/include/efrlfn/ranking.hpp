#pragma once

// Bradley-Terry scores from pairwise preferences: verification filtering,
// minorize-maximize fitting and per-pair binomial bootstrap intervals.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace efrlfn {

enum class Choice { left, right, tie };

struct Response {
  std::string worker;
  std::string left;
  std::string right;
  Choice choice = Choice::tie;
  bool verified = true;
};

// CSV: worker,pair_left,pair_right,choice,verified with choice in
// {left,right,tie} and verified in {0,1}. Errors name the line.
std::vector<Response> read_responses(std::istream& in);
std::vector<Response> read_responses(const std::filesystem::path& path);

struct PairwiseStudy {
  std::vector<std::string> items;
  // wins[i][j]: times i was preferred over j, ties counted as 0.5 each way.
  std::vector<std::vector<double>> wins;
  // ties[i][j] == ties[j][i]: raw tie counts.
  std::vector<std::vector<double>> ties;

  std::size_t size() const { return items.size(); }
  double comparisons(std::size_t i, std::size_t j) const { return wins[i][j] + wins[j][i]; }
  std::size_t index_of(const std::string& item) const;
  void add_item(const std::string& item);
};

// Drops every response of a worker who failed any verification question and
// aggregates the rest. Items are sorted by id.
PairwiseStudy filter_responses(std::span<const Response> responses);

// Groups of items connected through nonzero comparisons.
std::vector<std::vector<std::string>> connected_components(const PairwiseStudy& study);

struct FitOptions {
  int max_iter = 10000;
  double tol = 1e-12;  // max relative change of any score
  double smoothing = 0.01;
};

struct BtFit {
  std::vector<double> scores;  // mean 1
  int iterations = 0;
  bool converged = false;
  bool smoothed = false;  // pseudo-counts were added
  std::vector<double> log_likelihood;  // initial value, then after each iteration
};

// Throws std::invalid_argument listing components when the comparison graph
// is disconnected. When some item has no wins, every compared ordered pair
// gets `smoothing` extra wins.
BtFit fit_bradley_terry(const PairwiseStudy& study, const FitOptions& options = {});

double bt_log_likelihood(const PairwiseStudy& study, std::span<const double> scores);

struct BootstrapCi {
  std::vector<double> low;   // 2.5th percentile
  std::vector<double> high;  // 97.5th percentile
  int replicates = 0;
  int skipped = 0;
  std::optional<std::string> warning;  // set when more than 5% were skipped
};

// Each replicate redraws every pair's outcomes as Binomial(n_ij, p_ij) with
// n_ij the rounded comparison count. Replicate seeds derive from `seed`.
BootstrapCi bootstrap_ci(const PairwiseStudy& study, int n_boot = 1000, std::uint64_t seed = 0,
                         const FitOptions& options = {});

struct RankingResult {
  std::vector<std::string> items;
  std::vector<double> scores;
  std::vector<double> ci_low;
  std::vector<double> ci_high;
  double n_effective = 0.0;
  std::optional<std::string> warning;
};

// Fit plus bootstrap. Intervals are widened if needed so that
// ci_low <= score <= ci_high.
RankingResult rank_items(const PairwiseStudy& study, int n_boot = 1000, std::uint64_t seed = 0,
                         const FitOptions& options = {});

// CSV: item,score,ci_low,ci_high
void write_ranking(std::ostream& out, const RankingResult& result);

}  // namespace efrlfn
