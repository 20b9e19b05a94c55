#pragma once

// Agreement, accuracy and significance statistics for comparing reward
// models across participants.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "irda/core/error.hpp"
#include "irda/core/random.hpp"

namespace irda::metrics {

// ---------------------------------------------------------------------------
// Fleiss' kappa

struct Kappa {
  double value = 0.0;
  /// Every rating fell in one category; value is set to 1 by convention.
  bool degenerate = false;
};

/// `m[item][rater]` in {0, 1}.
inline Kappa fleiss_kappa(const std::vector<std::vector<int>>& m) {
  if (m.size() < 2) fail(ErrorKind::TooFewSamples, "need at least 2 items");
  const std::size_t n = m.front().size();
  if (n < 2) fail(ErrorKind::TooFewSamples, "need at least 2 raters");
  const double N = static_cast<double>(m.size());
  const double raters = static_cast<double>(n);
  double p_bar = 0.0, ones = 0.0;
  for (const auto& row : m) {
    if (row.size() != n) fail(ErrorKind::DimensionMismatch, "every item needs the same number of ratings");
    double n1 = 0.0;
    for (int v : row) {
      if (v != 0 && v != 1) fail(ErrorKind::OutOfRange, "ratings must be 0 or 1");
      n1 += v;
    }
    const double n0 = raters - n1;
    p_bar += (n0 * n0 + n1 * n1 - raters) / (raters * (raters - 1.0));
    ones += n1;
  }
  p_bar /= N;
  const double p1 = ones / (N * raters);
  const double p0 = 1.0 - p1;
  const double pe = p0 * p0 + p1 * p1;
  if (pe == 1.0) {
    if (p_bar == 1.0) return {1.0, true};
    fail(ErrorKind::DegenerateMarginals, "expected agreement is 1");
  }
  return {(p_bar - pe) / (1.0 - pe), false};
}

// ---------------------------------------------------------------------------
// Jaccard

struct JaccardResult {
  double mean = 0.0;
  std::vector<std::string> participants;    // sorted; matrix order
  std::vector<std::vector<double>> matrix;  // symmetric, diagonal 1
  /// Some pair had two empty sets (J taken as 1).
  bool empty_pair = false;
};

inline double jaccard(const std::set<std::string>& a, const std::set<std::string>& b, bool* both_empty = nullptr) {
  if (both_empty) *both_empty = a.empty() && b.empty();
  if (a.empty() && b.empty()) return 1.0;
  std::size_t inter = 0;
  for (const auto& x : a) inter += b.count(x);
  return static_cast<double>(inter) / static_cast<double>(a.size() + b.size() - inter);
}

inline JaccardResult jaccard_mean(const std::map<std::string, std::set<std::string>>& features) {
  if (features.size() < 2) fail(ErrorKind::TooFewSamples, "need at least 2 participants");
  JaccardResult r;
  std::vector<const std::set<std::string>*> sets;
  for (const auto& [pid, s] : features) {
    r.participants.push_back(pid);
    sets.push_back(&s);
  }
  const std::size_t n = sets.size();
  r.matrix.assign(n, std::vector<double>(n, 1.0));
  double sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      bool empty = false;
      const double v = jaccard(*sets[i], *sets[j], &empty);
      r.empty_pair = r.empty_pair || empty;
      r.matrix[i][j] = r.matrix[j][i] = v;
      sum += v;
      ++pairs;
    }
  }
  r.mean = sum / static_cast<double>(pairs);
  return r;
}

// ---------------------------------------------------------------------------
// Accuracy

namespace detail {
inline void check_pair(const std::vector<int>& t, const std::vector<int>& p) {
  if (t.size() != p.size()) fail(ErrorKind::DimensionMismatch, "truth and predictions differ in length");
  if (t.empty()) fail(ErrorKind::TooFewSamples, "no predictions");
}
}  // namespace detail

inline double accuracy(const std::vector<int>& truth, const std::vector<int>& pred) {
  detail::check_pair(truth, pred);
  std::size_t ok = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) ok += truth[i] == pred[i];
  return static_cast<double>(ok) / static_cast<double>(truth.size());
}

/// Mean of the per-class recalls over the classes present in `truth`.
inline double balanced_accuracy(const std::vector<int>& truth, const std::vector<int>& pred) {
  detail::check_pair(truth, pred);
  std::map<int, std::pair<std::size_t, std::size_t>> per;  // class -> (hits, total)
  for (std::size_t i = 0; i < truth.size(); ++i) {
    auto& [hit, total] = per[truth[i]];
    ++total;
    hit += truth[i] == pred[i];
  }
  if (per.size() < 2) fail(ErrorKind::SingleClassTruth, "truth contains one class only");
  double sum = 0.0;
  for (const auto& [_, ht] : per) sum += static_cast<double>(ht.first) / static_cast<double>(ht.second);
  return sum / static_cast<double>(per.size());
}

// ---------------------------------------------------------------------------
// Bootstrap

struct BootstrapCI {
  double lo = 0.0;
  double hi = 0.0;
  double mean = 0.0;
};

/// Linear-interpolation quantile of sorted data.
inline double quantile_sorted(const std::vector<double>& sorted, double q) {
  const double h = q * static_cast<double>(sorted.size() - 1);
  const auto i = static_cast<std::size_t>(std::floor(h));
  if (i + 1 >= sorted.size()) return sorted.back();
  return sorted[i] + (h - static_cast<double>(i)) * (sorted[i + 1] - sorted[i]);
}

/// Percentile interval of resampled means. Each resample draws from its own
/// seed stream, so results do not depend on evaluation order.
inline BootstrapCI bootstrap_ci(const std::vector<double>& samples, std::size_t n_resamples = 10000,
                                double level = 0.95, std::uint64_t seed = 0) {
  if (samples.empty()) fail(ErrorKind::TooFewSamples, "no samples to bootstrap");
  if (!(level > 0.0 && level < 1.0)) fail(ErrorKind::OutOfRange, "level must lie in (0, 1)");
  if (n_resamples < 1) fail(ErrorKind::OutOfRange, "need at least one resample");
  // Means are taken relative to the first sample so a constant input maps
  // to exactly that constant.
  const double ref = samples.front();
  const double n = static_cast<double>(samples.size());
  auto mean_of = [&](auto&& pick) {
    double s = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) s += pick(i) - ref;
    return ref + s / n;
  };
  BootstrapCI r;
  r.mean = mean_of([&](std::size_t i) { return samples[i]; });
  std::vector<double> means(n_resamples);
  for (std::size_t b = 0; b < n_resamples; ++b) {
    Rng rng(derive_seed(seed, b));
    means[b] = mean_of([&](std::size_t) { return samples[uniform_index(rng, samples.size())]; });
  }
  std::sort(means.begin(), means.end());
  const double alpha = (1.0 - level) / 2.0;
  r.lo = quantile_sorted(means, alpha);
  r.hi = quantile_sorted(means, 1.0 - alpha);
  return r;
}

// ---------------------------------------------------------------------------
// Wilcoxon signed-rank

struct Wilcoxon {
  double w = 0.0;  // min(W+, W-)
  double w_plus = 0.0;
  double w_minus = 0.0;
  double p = 1.0;  // two-sided
  std::size_t n_effective = 0;
  bool exact = false;
};

inline constexpr std::size_t kExactLimit = 20;

/// Average ranks (1-based) of |d|, ties sharing the mean rank.
inline std::vector<double> signed_rank_ranks(const std::vector<double>& abs_d) {
  std::vector<std::size_t> order(abs_d.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return abs_d[a] < abs_d[b]; });
  std::vector<double> ranks(abs_d.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && abs_d[order[j + 1]] == abs_d[order[i]]) ++j;
    const double r = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

/// Differences are a - b. Zero differences are dropped.
inline Wilcoxon wilcoxon_signed_rank(const std::vector<std::pair<double, double>>& pairs) {
  std::vector<double> d;
  for (const auto& [a, b] : pairs)
    if (a - b != 0.0) d.push_back(a - b);
  if (d.empty()) fail(ErrorKind::AllZeroDifferences, "every paired difference is zero");
  std::vector<double> abs_d(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) abs_d[i] = std::fabs(d[i]);
  const auto ranks = signed_rank_ranks(abs_d);

  Wilcoxon r;
  r.n_effective = d.size();
  for (std::size_t i = 0; i < d.size(); ++i) (d[i] > 0 ? r.w_plus : r.w_minus) += ranks[i];
  r.w = std::min(r.w_plus, r.w_minus);
  const double n = static_cast<double>(d.size());

  if (d.size() <= kExactLimit) {
    // Doubled ranks are integers; count sign patterns by their doubled W+.
    r.exact = true;
    std::vector<int> twice(ranks.size());
    int total = 0;
    for (std::size_t i = 0; i < ranks.size(); ++i) total += twice[i] = static_cast<int>(std::lround(2 * ranks[i]));
    std::vector<double> count(static_cast<std::size_t>(total) + 1, 0.0);
    count[0] = 1.0;
    for (int t : twice)
      for (int s = total; s >= t; --s) count[static_cast<std::size_t>(s)] += count[static_cast<std::size_t>(s - t)];
    const auto w2 = std::lround(2 * r.w);
    double tail = 0.0;
    for (long s = 0; s <= w2; ++s) tail += count[static_cast<std::size_t>(s)];
    r.p = std::min(1.0, 2.0 * tail / std::ldexp(1.0, static_cast<int>(d.size())));
    return r;
  }

  double tie_term = 0.0;
  std::map<double, std::size_t> groups;
  for (double rk : ranks) ++groups[rk];
  for (const auto& [_, t] : groups) {
    const double tt = static_cast<double>(t);
    tie_term += tt * tt * tt - tt;
  }
  const double mean = n * (n + 1.0) / 4.0;
  const double var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
  const double z = std::min(0.0, r.w - mean + 0.5) / std::sqrt(var);
  r.p = std::min(1.0, std::erfc(-z / std::sqrt(2.0)));
  return r;
}

// ---------------------------------------------------------------------------
// Report

struct ReportRow {
  std::string metric;
  std::string group;
  double mean = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  std::optional<double> p;
};

inline void write_report(std::ostream& out, const std::vector<ReportRow>& rows, char sep = '\t') {
  out << "metric" << sep << "group" << sep << "mean" << sep << "ci_lo" << sep << "ci_hi" << sep << "p\n";
  auto num = [](double v) {
    std::ostringstream s;
    s << std::setprecision(6) << v;
    return s.str();
  };
  for (const auto& r : rows) {
    out << r.metric << sep << r.group << sep << num(r.mean) << sep << num(r.ci_lo) << sep << num(r.ci_hi) << sep
        << (r.p ? num(*r.p) : "") << '\n';
  }
}

}  // namespace irda::metrics
