#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <functional>
#include <mutex>
#include <numeric>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "gemini/config.hpp"
#include "gemini/error.hpp"
#include "gemini/graph.hpp"
#include "gemini/io.hpp"
#include "gemini/metrics.hpp"
#include "gemini/model.hpp"
#include "gemini/training.hpp"

namespace gemini {

inline constexpr int kDefaultFolds = 5;

/// Partitions sample indices into k folds. Each class is shuffled and dealt
/// round-robin; the deal continues across classes so fold sizes differ by at
/// most one as well. Each returned fold is sorted.
inline std::vector<std::vector<std::size_t>> stratified_folds(std::span<const Label> labels, int k,
                                                              std::uint64_t seed) {
  if (k < 2) throw ValidationError("need at least 2 folds");
  std::vector<std::size_t> by_class[2];
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[to_int(labels[i])].push_back(i);
  for (int c = 0; c < 2; ++c)
    if (!by_class[c].empty() && by_class[c].size() < static_cast<std::size_t>(k))
      throw ValidationError(detail::sprintf("class %d has %zu samples, fewer than %d folds", c,
                                            by_class[c].size(), k));
  if (labels.size() < static_cast<std::size_t>(k)) throw ValidationError("fewer samples than folds");

  std::mt19937_64 rng(mix_seed(seed, 0xF01D));
  std::vector<std::vector<std::size_t>> folds(static_cast<std::size_t>(k));
  std::size_t slot = 0;
  for (auto &members : by_class) {
    std::shuffle(members.begin(), members.end(), rng);
    for (std::size_t idx : members) folds[slot++ % folds.size()].push_back(idx);
  }
  for (auto &f : folds) std::sort(f.begin(), f.end());
  return folds;
}

struct RunSummary {
  ModelConfig config;
  std::vector<double> fold_f1;
  double mean = 0.0;
  double std = 0.0; // sample standard deviation
  double min = 0.0;
  double median = 0.0;
  double max = 0.0;
};

inline double median_of(std::vector<double> v) {
  if (v.empty()) throw ValidationError("median of an empty set");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline RunSummary summarize(const ModelConfig &cfg, std::vector<double> fold_f1) {
  if (fold_f1.empty()) throw ValidationError("no fold scores to summarize");
  RunSummary s;
  s.config = cfg;
  const double n = static_cast<double>(fold_f1.size());
  s.mean = std::accumulate(fold_f1.begin(), fold_f1.end(), 0.0) / n;
  double ss = 0.0;
  for (double f : fold_f1) ss += (f - s.mean) * (f - s.mean);
  s.std = fold_f1.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  s.min = *std::min_element(fold_f1.begin(), fold_f1.end());
  s.max = *std::max_element(fold_f1.begin(), fold_f1.end());
  s.median = median_of(fold_f1);
  s.fold_f1 = std::move(fold_f1);
  return s;
}

// Runs task(i) for i in [0, n) on up to `jobs` threads.
inline void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)> &task) {
  const auto workers = static_cast<std::size_t>(std::max(1, jobs));
  if (workers == 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < std::min(workers, n); ++w) {
    pool.emplace_back([&] {
      for (std::size_t i; (i = next++) < n;) {
        try {
          task(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto &t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

struct FoldOutcome {
  double f1 = 0.0;
  TrainResult train;
};

struct CrossValidationResult {
  RunSummary summary;
  std::vector<FoldOutcome> folds;
};

inline std::uint64_t fold_train_seed(std::uint64_t seed, std::size_t fold) { return mix_seed(seed, 100 + fold); }

/// k-fold cross-validation of one configuration. Folds depend only on the
/// labels and `seed`, so every configuration run with the same seed sees
/// the same partition. The fold score is the best-epoch validation F1.
inline CrossValidationResult cross_validate_prepared(std::span<const PreparedSample> samples,
                                                     const ModelConfig &cfg, std::uint64_t seed,
                                                     int k = kDefaultFolds, int jobs = 1) {
  validate(cfg);
  std::vector<Label> labels;
  for (const auto &s : samples) labels.push_back(s.label);
  const auto folds = stratified_folds(labels, k, seed);

  CrossValidationResult out;
  out.folds.resize(folds.size());
  parallel_for(folds.size(), jobs, [&](std::size_t f) {
    std::vector<PreparedSample> train, val;
    for (std::size_t g = 0; g < folds.size(); ++g)
      for (std::size_t idx : folds[g]) (g == f ? val : train).push_back(samples[idx]);
    ModelConfig run_cfg = cfg;
    run_cfg.train.seed = fold_train_seed(seed, f);
    TrainResult r = train_run(train, val, run_cfg);
    out.folds[f].f1 = r.best_val_f1;
    out.folds[f].train = std::move(r);
  });
  std::vector<double> scores;
  for (const auto &f : out.folds) scores.push_back(f.f1);
  out.summary = summarize(cfg, std::move(scores));
  return out;
}

inline CrossValidationResult cross_validate(const Dataset &ds, const ModelConfig &cfg, std::uint64_t seed,
                                            int k = kDefaultFolds, int jobs = 1) {
  const auto prepared = prepare_dataset(ds, cfg);
  return cross_validate_prepared(prepared, cfg, seed, k, jobs);
}

// Cross product of declared configuration values.
struct GridSpec {
  std::vector<GraphType> graph_types{GraphType::Dual};
  std::vector<FeatureMode> features{FeatureMode::LdpEntropy};
  std::vector<ArchKind> archs{ArchKind::GCN};
  std::vector<int> layers{2};
  std::vector<int> fcs{2};
  std::vector<int> dims{32};
  std::vector<SchedulerKind> schedulers{SchedulerKind::OneCycle};
  TrainConfig train;
  double dropout = 0.5;

  std::vector<ModelConfig> expand() const {
    std::vector<ModelConfig> out;
    for (auto g : graph_types)
      for (auto f : features)
        for (auto a : archs)
          for (int l : layers)
            for (int fc : fcs)
              for (int d : dims)
                for (auto s : schedulers) {
                  ModelConfig c = make_config(g, f, a, l, fc, d, s);
                  c.train = train;
                  c.train.scheduler = s;
                  c.dropout = dropout;
                  out.push_back(c);
                }
    return out;
  }
};

/// One summary per grid cell, all on the same folds, sorted by mean F1
/// (descending, grid order on ties).
inline std::vector<RunSummary> run_grid(const Dataset &ds, const GridSpec &grid, std::uint64_t seed, int jobs = 1,
                                        int k = kDefaultFolds) {
  const auto cells = grid.expand();
  for (const auto &c : cells) validate(c);
  std::vector<RunSummary> out(cells.size());
  parallel_for(cells.size(), jobs, [&](std::size_t i) { out[i] = cross_validate(ds, cells[i], seed, k).summary; });
  std::stable_sort(out.begin(), out.end(), [](const RunSummary &a, const RunSummary &b) { return a.mean > b.mean; });
  return out;
}

// ---------------------------------------------------------------- CSV output

inline constexpr const char *kConfigColumns = "graph_type,feature,model_arch,join_embeddings,layer,fc,dim,scheduler";

inline std::string config_columns(const ModelConfig &c) {
  return to_string(c.graph_type) + "," + to_string(c.feature) + "," + to_string(c.arch) + "," +
         to_string(c.join) + "," + std::to_string(c.layers) + "," + std::to_string(c.fc) + "," +
         std::to_string(c.dim) + "," + to_string(c.train.scheduler);
}

inline std::string format_fold_csv(std::span<const RunSummary> runs) {
  std::string out = std::string(kConfigColumns) + ",fold,f1\n";
  for (const auto &r : runs)
    for (std::size_t f = 0; f < r.fold_f1.size(); ++f)
      out += config_columns(r.config) + "," + std::to_string(f) + "," + detail::format_double(r.fold_f1[f]) + "\n";
  return out;
}

inline std::string format_summary_csv(std::span<const RunSummary> runs) {
  std::string out = std::string(kConfigColumns) + ",mean,std,min,median,max\n";
  for (const auto &r : runs) {
    out += config_columns(r.config);
    for (double v : {r.mean, r.std, r.min, r.median, r.max}) out += "," + detail::format_double(v);
    out += "\n";
  }
  return out;
}

inline std::vector<std::string> split_csv_row(std::string_view line) {
  std::vector<std::string> cells;
  std::size_t pos = 0;
  while (true) {
    auto comma = line.find(',', pos);
    cells.emplace_back(line.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return cells;
}

inline double parse_double(const std::string &s, const std::string &where) {
  try {
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception &) {
    throw ValidationError(where + "not a number '" + s + "'");
  }
}

inline int parse_int(const std::string &s, const std::string &where) {
  int v = 0;
  if (!detail::parse_uint(s, v)) throw ValidationError(where + "not a non-negative integer '" + s + "'");
  return v;
}

inline ModelConfig parse_config_columns(const std::vector<std::string> &cells, const std::string &where) {
  try {
    ModelConfig c;
    c.graph_type = parse_graph_type(cells.at(0));
    c.feature = parse_feature_mode(cells.at(1));
    c.arch = parse_arch(cells.at(2));
    c.join = parse_join_mode(cells.at(3));
    c.layers = parse_int(cells.at(4), where);
    c.fc = parse_int(cells.at(5), where);
    c.dim = parse_int(cells.at(6), where);
    c.train.scheduler = parse_scheduler(cells.at(7));
    return c;
  } catch (const ValidationError &e) {
    throw ValidationError(where + e.what());
  }
}

/// Reads a summary CSV back. Fold scores are not part of this file and stay empty.
inline std::vector<RunSummary> parse_summary_csv(std::string_view text, const std::string &origin) {
  auto lines = detail::split_lines(text);
  const std::string header = std::string(kConfigColumns) + ",mean,std,min,median,max";
  if (lines.empty() || lines[0] != header) throw ValidationError(origin + ":1: unexpected summary header");
  std::vector<RunSummary> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const std::string where = origin + ":" + std::to_string(i + 1) + ": ";
    auto cells = split_csv_row(lines[i]);
    if (cells.size() != 13) throw ValidationError(where + "expected 13 columns");
    RunSummary r;
    r.config = parse_config_columns(cells, where);
    r.mean = parse_double(cells[8], where);
    r.std = parse_double(cells[9], where);
    r.min = parse_double(cells[10], where);
    r.median = parse_double(cells[11], where);
    r.max = parse_double(cells[12], where);
    out.push_back(std::move(r));
  }
  return out;
}

struct FoldRow {
  ModelConfig config;
  int fold = 0;
  double f1 = 0.0;
};

inline std::vector<FoldRow> parse_fold_csv(std::string_view text, const std::string &origin) {
  auto lines = detail::split_lines(text);
  const std::string header = std::string(kConfigColumns) + ",fold,f1";
  if (lines.empty() || lines[0] != header) throw ValidationError(origin + ":1: unexpected fold header");
  std::vector<FoldRow> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const std::string where = origin + ":" + std::to_string(i + 1) + ": ";
    auto cells = split_csv_row(lines[i]);
    if (cells.size() != 10) throw ValidationError(where + "expected 10 columns");
    out.push_back({parse_config_columns(cells, where), parse_int(cells[8], where), parse_double(cells[9], where)});
  }
  return out;
}

inline std::string format_epoch_log(const ModelConfig &cfg, std::uint64_t seed, std::span<const EpochRecord> history) {
  std::string out = "# config=" + canonical_string(cfg) + "\n";
  out += "# fingerprint=" + fingerprint_hex(cfg) + " seed=" + std::to_string(seed) + "\n";
  out += "epoch,loss,val_f1,lr\n";
  for (const auto &r : history)
    out += std::to_string(r.epoch) + "," + detail::format_double(r.loss) + "," + detail::format_double(r.val_f1) +
           "," + detail::format_double(r.lr) + "\n";
  return out;
}

} // namespace gemini
