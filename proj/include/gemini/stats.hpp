#pragma once

// Rank-based comparison of score groups: Kruskal-Wallis omnibus test, Dunn
// pairwise post-hoc test with Bonferroni correction, and five-number
// summaries for box plots.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "gemini/config.hpp"
#include "gemini/error.hpp"
#include "gemini/evaluation.hpp"

namespace gemini::stats {

struct ScoreGroup {
  std::string name;
  std::vector<double> scores;
};

// ------------------------------------------------------ special functions

namespace detail {

inline constexpr double kEps = 1e-16;
inline constexpr int kMaxIter = 10000;

// P(a, x) by its power series; converges quickly for x < a + 1.
inline double gamma_p_series(double a, double x) {
  double ap = a, sum = 1.0 / a, del = sum;
  for (int n = 0; n < kMaxIter; ++n) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::fabs(del) < std::fabs(sum) * kEps) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Q(a, x) by Lentz's continued fraction; used for x >= a + 1.
inline double gamma_q_fraction(double a, double x) {
  constexpr double tiny = 1e-300;
  double b = x + 1.0 - a, c = 1.0 / tiny, d = 1.0 / b, h = d;
  for (int i = 1; i < kMaxIter; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

} // namespace detail

/// Regularized upper incomplete gamma Q(a, x).
inline double gamma_q(double a, double x) {
  if (!(a > 0.0) || x < 0.0) throw ValidationError("gamma_q: need a > 0 and x >= 0");
  if (x == 0.0) return 1.0;
  if (x < a + 1.0) return 1.0 - detail::gamma_p_series(a, x);
  return detail::gamma_q_fraction(a, x);
}

inline double chi2_sf(double x, double df) {
  if (x <= 0.0) return 1.0;
  return gamma_q(0.5 * df, 0.5 * x);
}

inline double normal_sf(double z) { return 0.5 * std::erfc(z / std::numbers::sqrt2); }

// p-values are reported in (0, 1]; results that underflow are held at the
// smallest normal double.
inline double clamp_p(double p) { return std::clamp(p, std::numeric_limits<double>::min(), 1.0); }

// ---------------------------------------------------------------- ranking

struct PooledRanks {
  std::vector<std::vector<double>> ranks; // per group, aligned with input scores
  std::size_t total = 0;
  double tie_sum = 0.0; // sum over tie blocks of t^3 - t
};

/// Midranks (1-based) over the union of all groups.
inline PooledRanks pooled_midranks(std::span<const ScoreGroup> groups) {
  struct Item {
    double value;
    std::size_t group, index;
  };
  std::vector<Item> items;
  PooledRanks out;
  out.ranks.resize(groups.size());
  for (std::size_t g = 0; g < groups.size(); ++g) {
    out.ranks[g].resize(groups[g].scores.size());
    for (std::size_t i = 0; i < groups[g].scores.size(); ++i) items.push_back({groups[g].scores[i], g, i});
  }
  std::sort(items.begin(), items.end(), [](const Item &a, const Item &b) { return a.value < b.value; });
  out.total = items.size();
  for (std::size_t i = 0; i < items.size();) {
    std::size_t j = i;
    while (j < items.size() && items[j].value == items[i].value) ++j;
    const double t = static_cast<double>(j - i);
    const double midrank = 0.5 * static_cast<double>(i + 1 + j); // mean of ranks i+1..j
    for (std::size_t m = i; m < j; ++m) out.ranks[items[m].group][items[m].index] = midrank;
    out.tie_sum += t * t * t - t;
    i = j;
  }
  return out;
}

inline void check_groups(std::span<const ScoreGroup> groups) {
  if (groups.size() < 2) throw ValidationError("need at least 2 groups");
  for (const auto &g : groups)
    if (g.scores.empty()) throw ValidationError("group '" + g.name + "' is empty");
}

struct KruskalResult {
  double h = 0.0;
  double p = 1.0;
  int df = 0;
};

/// Tie-corrected Kruskal-Wallis H with a chi-square(k-1) p-value.
inline KruskalResult kruskal_wallis(std::span<const ScoreGroup> groups) {
  check_groups(groups);
  const PooledRanks pr = pooled_midranks(groups);
  const double n = static_cast<double>(pr.total);
  KruskalResult out;
  out.df = static_cast<int>(groups.size()) - 1;
  const double correction = 1.0 - pr.tie_sum / (n * n * n - n);
  if (pr.total < 2 || correction <= 0.0) return out; // every value identical

  double sum = 0.0;
  for (const auto &r : pr.ranks) {
    const double rs = std::accumulate(r.begin(), r.end(), 0.0);
    sum += rs * rs / static_cast<double>(r.size());
  }
  const double h = 12.0 / (n * (n + 1.0)) * sum - 3.0 * (n + 1.0);
  out.h = std::max(0.0, h / correction);
  out.p = clamp_p(chi2_sf(out.h, out.df));
  return out;
}

struct PairwiseMatrix {
  std::vector<std::string> names;
  std::vector<std::vector<double>> p; // symmetric, unit diagonal
  double correction_factor = 1.0;
};

/// Dunn's test on pooled midranks; two-sided normal p-values multiplied by
/// the number of pairs (Bonferroni) and capped at 1. Pass bonferroni=false
/// for the raw p-values.
inline PairwiseMatrix dunn_posthoc(std::span<const ScoreGroup> groups, bool bonferroni = true) {
  check_groups(groups);
  const PooledRanks pr = pooled_midranks(groups);
  const std::size_t k = groups.size();
  const double n = static_cast<double>(pr.total);
  const double sigma2 = n * (n + 1.0) / 12.0 - (pr.total > 1 ? pr.tie_sum / (12.0 * (n - 1.0)) : 0.0);

  std::vector<double> mean_rank(k);
  for (std::size_t g = 0; g < k; ++g)
    mean_rank[g] = std::accumulate(pr.ranks[g].begin(), pr.ranks[g].end(), 0.0) /
                   static_cast<double>(pr.ranks[g].size());

  PairwiseMatrix out;
  out.correction_factor = bonferroni ? static_cast<double>(k * (k - 1) / 2) : 1.0;
  out.p.assign(k, std::vector<double>(k, 1.0));
  for (const auto &g : groups) out.names.push_back(g.name);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) {
      double p = 1.0;
      if (sigma2 > 0.0) {
        const double se = std::sqrt(sigma2 * (1.0 / static_cast<double>(groups[i].scores.size()) +
                                              1.0 / static_cast<double>(groups[j].scores.size())));
        const double z = (mean_rank[i] - mean_rank[j]) / se;
        p = clamp_p(std::min(1.0, 2.0 * normal_sf(std::fabs(z)) * out.correction_factor));
      }
      out.p[i][j] = out.p[j][i] = p;
    }
  }
  return out;
}

struct TestReport {
  KruskalResult omnibus;
  PairwiseMatrix pairwise;
};

inline TestReport compare_groups(std::span<const ScoreGroup> groups) {
  return {kruskal_wallis(groups), dunn_posthoc(groups)};
}

// ------------------------------------------------------------ grouping

enum class GroupKey { GraphType, Feature };
enum class Pooling { Means, Folds };

inline GroupKey parse_group_key(std::string_view s) {
  if (s == "graph_type" || s == "graph") return GroupKey::GraphType;
  if (s == "feature") return GroupKey::Feature;
  throw ValidationError("unknown grouping key '" + std::string(s) + "'");
}

inline Pooling parse_pooling(std::string_view s) {
  if (s == "means") return Pooling::Means;
  if (s == "folds") return Pooling::Folds;
  throw ValidationError("unknown pooling '" + std::string(s) + "'");
}

inline std::string group_name(const ModelConfig &c, GroupKey key) {
  if (key == GroupKey::GraphType) {
    switch (c.graph_type) {
    case GraphType::Dual: return "both_wsum";
    case GraphType::Merged: return "both_merged";
    case GraphType::FCG: return "single_fcg";
    case GraphType::PCG: return "single_pcg";
    }
  }
  switch (c.feature) {
  case FeatureMode::Entropy: return "means_entropy";
  case FeatureMode::LDP: return "means_ldp";
  case FeatureMode::LdpEntropy: return "means_ldp_entropy";
  }
  return "?";
}

/// Groups runs by graph type or feature and keeps each group's k highest
/// scores. Pooling::Means ranks per-configuration mean F1; Pooling::Folds
/// pools the individual fold scores instead. Groups come back sorted by name.
inline std::vector<ScoreGroup> top_k_by_group(std::span<const RunSummary> runs, GroupKey key, std::size_t k = 100,
                                              Pooling pool = Pooling::Means) {
  std::map<std::string, std::vector<double>> by_name;
  for (const auto &r : runs) {
    auto &dst = by_name[group_name(r.config, key)];
    if (pool == Pooling::Means) {
      dst.push_back(r.mean);
    } else {
      if (r.fold_f1.empty()) throw ValidationError("fold pooling needs per-fold scores");
      dst.insert(dst.end(), r.fold_f1.begin(), r.fold_f1.end());
    }
  }
  std::vector<ScoreGroup> out;
  for (auto &[name, scores] : by_name) {
    std::sort(scores.begin(), scores.end(), std::greater<>());
    if (scores.size() > k) scores.resize(k);
    out.push_back({name, std::move(scores)});
  }
  return out;
}

// ------------------------------------------------------------ box plots

struct FiveNumber {
  double min = 0, q1 = 0, median = 0, q3 = 0, max = 0;
};

// Linear interpolation between order statistics at position q * (n - 1).
inline double quantile(std::vector<double> sorted_or_not, double q) {
  if (sorted_or_not.empty()) throw ValidationError("quantile of an empty set");
  std::sort(sorted_or_not.begin(), sorted_or_not.end());
  const double pos = q * static_cast<double>(sorted_or_not.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted_or_not.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted_or_not[lo] + frac * (sorted_or_not[hi] - sorted_or_not[lo]);
}

inline FiveNumber five_number_summary(const std::vector<double> &scores) {
  if (scores.empty()) throw ValidationError("five-number summary of an empty group");
  return {quantile(scores, 0.0), quantile(scores, 0.25), quantile(scores, 0.5), quantile(scores, 0.75),
          quantile(scores, 1.0)};
}

inline std::string emit_boxplot_summary(std::span<const ScoreGroup> groups) {
  std::string out = "group,n,min,q1,median,q3,max\n";
  for (const auto &g : groups) {
    const FiveNumber f = five_number_summary(g.scores);
    out += g.name + "," + std::to_string(g.scores.size());
    for (double v : {f.min, f.q1, f.median, f.q3, f.max}) out += "," + gemini::detail::format_double(v);
    out += "\n";
  }
  return out;
}

/// Pairwise p-value matrix with group names as header row and first
/// column; the omnibus result sits in a leading comment line.
inline std::string format_test_report(const TestReport &r) {
  using gemini::detail::sprintf;
  std::string out = sprintf("# kruskal_wallis H=%.17g df=%d p=%.6e correction=bonferroni factor=%g\n",
                            r.omnibus.h, r.omnibus.df, r.omnibus.p, r.pairwise.correction_factor);
  out += "group";
  for (const auto &n : r.pairwise.names) out += "," + n;
  out += "\n";
  for (std::size_t i = 0; i < r.pairwise.names.size(); ++i) {
    out += r.pairwise.names[i];
    for (double p : r.pairwise.p[i]) out += sprintf(",%.6e", p);
    out += "\n";
  }
  return out;
}

} // namespace gemini::stats
