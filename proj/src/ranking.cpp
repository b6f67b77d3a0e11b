#include "efrlfn/ranking.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

namespace efrlfn {

namespace {

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

[[noreturn]] void bad_line(std::size_t line, const std::string& why) {
  throw std::invalid_argument("responses csv line " + std::to_string(line) + ": " + why);
}

}  // namespace

std::vector<Response> read_responses(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) return {};
  if (trim(line) != "worker,pair_left,pair_right,choice,verified") {
    bad_line(1, "expected header worker,pair_left,pair_right,choice,verified");
  }
  std::vector<Response> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) f.push_back(trim(field));
    if (line.back() == ',') f.emplace_back();
    if (f.size() != 5) bad_line(line_no, std::to_string(f.size()) + " fields, expected 5");
    Response r;
    r.worker = f[0];
    r.left = f[1];
    r.right = f[2];
    if (r.worker.empty() || r.left.empty() || r.right.empty()) bad_line(line_no, "empty field");
    if (r.left == r.right) bad_line(line_no, "item compared with itself");
    if (f[3] == "left") r.choice = Choice::left;
    else if (f[3] == "right") r.choice = Choice::right;
    else if (f[3] == "tie") r.choice = Choice::tie;
    else bad_line(line_no, "choice must be left, right or tie, got '" + f[3] + "'");
    if (f[4] == "1") r.verified = true;
    else if (f[4] == "0") r.verified = false;
    else bad_line(line_no, "verified must be 0 or 1, got '" + f[4] + "'");
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<Response> read_responses(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_responses(in);
}

std::size_t PairwiseStudy::index_of(const std::string& item) const {
  const auto it = std::find(items.begin(), items.end(), item);
  if (it == items.end()) throw std::out_of_range("study: unknown item " + item);
  return static_cast<std::size_t>(it - items.begin());
}

void PairwiseStudy::add_item(const std::string& item) {
  items.push_back(item);
  for (auto& row : wins) row.push_back(0.0);
  for (auto& row : ties) row.push_back(0.0);
  wins.emplace_back(items.size(), 0.0);
  ties.emplace_back(items.size(), 0.0);
}

PairwiseStudy filter_responses(std::span<const Response> responses) {
  std::set<std::string> failed;
  for (const auto& r : responses)
    if (!r.verified) failed.insert(r.worker);
  std::set<std::string> items;
  for (const auto& r : responses) {
    if (failed.count(r.worker)) continue;
    items.insert(r.left);
    items.insert(r.right);
  }
  PairwiseStudy study;
  for (const auto& item : items) study.add_item(item);
  for (const auto& r : responses) {
    if (failed.count(r.worker)) continue;
    const std::size_t a = study.index_of(r.left);
    const std::size_t b = study.index_of(r.right);
    switch (r.choice) {
      case Choice::left: study.wins[a][b] += 1.0; break;
      case Choice::right: study.wins[b][a] += 1.0; break;
      case Choice::tie:
        study.wins[a][b] += 0.5;
        study.wins[b][a] += 0.5;
        study.ties[a][b] += 1.0;
        study.ties[b][a] += 1.0;
        break;
    }
  }
  return study;
}

std::vector<std::vector<std::string>> connected_components(const PairwiseStudy& study) {
  const std::size_t m = study.size();
  std::vector<int> comp(m, -1);
  std::vector<std::vector<std::string>> out;
  for (std::size_t s = 0; s < m; ++s) {
    if (comp[s] >= 0) continue;
    const int id = static_cast<int>(out.size());
    out.emplace_back();
    std::vector<std::size_t> stack{s};
    comp[s] = id;
    while (!stack.empty()) {
      const std::size_t i = stack.back();
      stack.pop_back();
      out.back().push_back(study.items[i]);
      for (std::size_t j = 0; j < m; ++j) {
        if (comp[j] < 0 && study.comparisons(i, j) > 0) {
          comp[j] = id;
          stack.push_back(j);
        }
      }
    }
  }
  return out;
}

double bt_log_likelihood(const PairwiseStudy& study, std::span<const double> scores) {
  // log(pi/(pi+pj)) = -log1p(pj/pi), summed with Neumaier compensation so
  // the MM trace is not swamped by rounding near convergence.
  double ll = 0.0, carry = 0.0;
  for (std::size_t i = 0; i < study.size(); ++i)
    for (std::size_t j = 0; j < study.size(); ++j) {
      if (i == j || study.wins[i][j] <= 0) continue;
      const double term = -study.wins[i][j] * std::log1p(scores[j] / scores[i]);
      const double t = ll + term;
      carry += std::abs(ll) >= std::abs(term) ? (ll - t) + term : (term - t) + ll;
      ll = t;
    }
  return ll + carry;
}

namespace {

void normalize_mean_one(std::vector<double>& pi) {
  double mean = 0.0;
  for (double p : pi) mean += p;
  mean /= static_cast<double>(pi.size());
  for (double& p : pi) p /= mean;
}

}  // namespace

BtFit fit_bradley_terry(const PairwiseStudy& input, const FitOptions& options) {
  const std::size_t m = input.size();
  BtFit fit;
  if (m == 0) return fit;
  const auto components = connected_components(input);
  if (components.size() > 1) {
    std::string list;
    for (const auto& c : components) {
      list += " {";
      for (std::size_t i = 0; i < c.size(); ++i) list += (i ? "," : "") + c[i];
      list += "}";
    }
    throw std::invalid_argument("bradley-terry: comparison graph is disconnected:" + list);
  }
  PairwiseStudy study = input;
  std::vector<double> total_wins(m, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) total_wins[i] += study.wins[i][j];
  if (m > 1 && std::any_of(total_wins.begin(), total_wins.end(), [](double w) { return w <= 0; })) {
    fit.smoothed = true;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j)
        if (i != j && input.comparisons(i, j) > 0) study.wins[i][j] += options.smoothing;
    std::fill(total_wins.begin(), total_wins.end(), 0.0);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j) total_wins[i] += study.wins[i][j];
  }

  std::vector<double> pi(m, 1.0);
  fit.log_likelihood.push_back(bt_log_likelihood(study, pi));
  std::vector<double> next(m);
  for (int iter = 0; iter < options.max_iter && m > 1; ++iter) {
    for (std::size_t i = 0; i < m; ++i) {
      double denom = 0.0;
      for (std::size_t j = 0; j < m; ++j) {
        if (i != j) denom += study.comparisons(i, j) / (pi[i] + pi[j]);
      }
      next[i] = total_wins[i] / denom;
    }
    normalize_mean_one(next);
    double change = 0.0;
    for (std::size_t i = 0; i < m; ++i) change = std::max(change, std::abs(next[i] - pi[i]) / pi[i]);
    pi.swap(next);
    fit.iterations = iter + 1;
    fit.log_likelihood.push_back(bt_log_likelihood(study, pi));
    if (change < options.tol) {
      fit.converged = true;
      break;
    }
  }
  if (m == 1) fit.converged = true;
  fit.scores = pi;
  return fit;
}

namespace {

double percentile(std::vector<double> values, double q) {
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

}  // namespace

BootstrapCi bootstrap_ci(const PairwiseStudy& study, int n_boot, std::uint64_t seed,
                         const FitOptions& options) {
  if (n_boot < 1) throw std::invalid_argument("bootstrap: n_boot must be >= 1");
  fit_bradley_terry(study, options);  // surfaces errors on the full study
  const std::size_t m = study.size();
  std::vector<std::vector<double>> samples(static_cast<std::size_t>(n_boot));
  std::vector<char> ok(static_cast<std::size_t>(n_boot), 0);

#pragma omp parallel for schedule(dynamic)
  for (int b = 0; b < n_boot; ++b) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(b)};
    std::mt19937_64 rng(seq);
    PairwiseStudy replicate = study;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = i + 1; j < m; ++j) {
        const double n = study.comparisons(i, j);
        if (n <= 0) continue;
        const auto trials = static_cast<long long>(std::llround(n));
        std::binomial_distribution<long long> draw(trials, study.wins[i][j] / n);
        const auto k = static_cast<double>(draw(rng));
        replicate.wins[i][j] = k;
        replicate.wins[j][i] = static_cast<double>(trials) - k;
      }
    try {
      samples[static_cast<std::size_t>(b)] = fit_bradley_terry(replicate, options).scores;
      ok[static_cast<std::size_t>(b)] = 1;
    } catch (const std::exception&) {
    }
  }

  BootstrapCi out;
  out.replicates = n_boot;
  out.low.assign(m, 0.0);
  out.high.assign(m, 0.0);
  std::vector<std::vector<double>> per_item(m);
  for (int b = 0; b < n_boot; ++b) {
    if (!ok[static_cast<std::size_t>(b)]) {
      ++out.skipped;
      continue;
    }
    for (std::size_t i = 0; i < m; ++i) per_item[i].push_back(samples[static_cast<std::size_t>(b)][i]);
  }
  if (out.skipped > 0 && static_cast<double>(out.skipped) > 0.05 * n_boot) {
    out.warning = "bootstrap: " + std::to_string(out.skipped) + " of " + std::to_string(n_boot) +
                  " replicates failed to fit";
  }
  if (out.skipped == n_boot) throw std::runtime_error("bootstrap: every replicate failed to fit");
  for (std::size_t i = 0; i < m; ++i) {
    out.low[i] = percentile(per_item[i], 0.025);
    out.high[i] = percentile(per_item[i], 0.975);
  }
  return out;
}

RankingResult rank_items(const PairwiseStudy& study, int n_boot, std::uint64_t seed,
                         const FitOptions& options) {
  RankingResult out;
  out.items = study.items;
  out.scores = fit_bradley_terry(study, options).scores;
  for (std::size_t i = 0; i < study.size(); ++i)
    for (std::size_t j = i + 1; j < study.size(); ++j) out.n_effective += study.comparisons(i, j);
  if (study.size() == 0) return out;
  const BootstrapCi ci = bootstrap_ci(study, n_boot, seed, options);
  out.warning = ci.warning;
  for (std::size_t i = 0; i < study.size(); ++i) {
    out.ci_low.push_back(std::min(ci.low[i], out.scores[i]));
    out.ci_high.push_back(std::max(ci.high[i], out.scores[i]));
  }
  return out;
}

void write_ranking(std::ostream& out, const RankingResult& result) {
  out << "item,score,ci_low,ci_high\n";
  const auto old = out.precision(12);
  for (std::size_t i = 0; i < result.items.size(); ++i) {
    out << result.items[i] << ',' << result.scores[i] << ',' << result.ci_low[i] << ','
        << result.ci_high[i] << '\n';
  }
  out.precision(old);
}

}  // namespace efrlfn
