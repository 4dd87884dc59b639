// gemini: command-line front end for dataset generation, training,
// cross-validation, grids and the statistics/report stage.
//
// Exit codes: 0 success, 1 invalid input or flags, 2 I/O failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "gemini/gemini.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace gemini;

namespace {

struct ModelFlags {
  std::string graph = "dual";
  std::string feature = "ldp+entropy";
  std::string arch = "gcn";
  int layers = 2;
  int fc = 2;
  int dim = 32;
  std::string scheduler = "onecycle";
};

struct TrainFlags {
  int epochs = 100;
  int batch_size = 32;
  double lr = 1e-3;
  double dropout = 0.5;
};

void add_train_flags(CLI::App *cmd, TrainFlags &t) {
  cmd->add_option("--epochs", t.epochs, "Training epochs per run")->capture_default_str()->check(CLI::PositiveNumber);
  cmd->add_option("--batch-size", t.batch_size, "Samples per optimizer step (gradient accumulation)")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  cmd->add_option("--lr", t.lr, "Base learning rate (OneCycle peak, Plateau start)")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  cmd->add_option("--dropout", t.dropout, "Dropout rate in the classifier head")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 0.99));
}

void add_model_flags(CLI::App *cmd, ModelFlags &m) {
  cmd->add_option("--graph", m.graph, "Input graphs: fcg, pcg, merged, dual")->capture_default_str();
  cmd->add_option("--feature", m.feature, "Node features: ldp, entropy, ldp+entropy")->capture_default_str();
  cmd->add_option("--arch", m.arch, "Convolution: gcn, gin, sage, sgc, mlp")->capture_default_str();
  cmd->add_option("--layers", m.layers, "Convolution layers (SGC: propagation steps)")->capture_default_str();
  cmd->add_option("--fc", m.fc, "Dense layers in the classifier head, output layer included")->capture_default_str();
  cmd->add_option("--dim", m.dim, "Hidden width")->capture_default_str();
  cmd->add_option("--scheduler", m.scheduler, "Learning-rate schedule: onecycle, plateau")->capture_default_str();
}

ModelConfig build_config(const ModelFlags &m, const TrainFlags &t) {
  ModelConfig c = make_config(parse_graph_type(m.graph), parse_feature_mode(m.feature), parse_arch(m.arch), m.layers,
                              m.fc, m.dim, parse_scheduler(m.scheduler));
  c.dropout = t.dropout;
  c.train.epochs = t.epochs;
  c.train.batch_size = t.batch_size;
  c.train.base_lr = t.lr;
  validate(c);
  return c;
}

std::string hex64(std::uint64_t v) { return detail::sprintf("%016llx", static_cast<unsigned long long>(v)); }

json config_json(const ModelConfig &c) {
  return {{"graph_type", to_string(c.graph_type)}, {"feature", to_string(c.feature)},
          {"model_arch", to_string(c.arch)},       {"join_embeddings", to_string(c.join)},
          {"layer", c.layers},                     {"fc", c.fc},
          {"dim", c.dim},                          {"dropout", c.dropout},
          {"scheduler", to_string(c.train.scheduler)}, {"epochs", c.train.epochs},
          {"batch_size", c.train.batch_size},      {"base_lr", c.train.base_lr},
          {"fingerprint", fingerprint_hex(c)}};
}

void write_run_json(const fs::path &dir, json meta) {
  detail::write_text_file(dir / "run.json", meta.dump(2) + "\n");
}

std::string slug(const ModelConfig &c) {
  std::string f = to_string(c.feature);
  std::replace(f.begin(), f.end(), '+', '_');
  std::string a = to_string(c.arch);
  std::transform(a.begin(), a.end(), a.begin(), [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  return detail::sprintf("%s-%s-%s-l%d-fc%d-d%d-%s-%s", to_string(c.graph_type).c_str(), f.c_str(), a.c_str(),
                         c.layers, c.fc, c.dim, c.train.scheduler == SchedulerKind::OneCycle ? "onecycle" : "plateau",
                         fingerprint_hex(c).substr(0, 8).c_str());
}

std::vector<fs::path> find_files(const fs::path &root, const std::string &name) {
  if (!fs::is_directory(root)) throw IoError("not a directory: " + root.string());
  std::vector<fs::path> out;
  for (const auto &e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file() && e.path().filename() == name) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

// Summaries from every summary.csv below `root`; fold scores are attached
// from the sibling folds.csv when present.
std::vector<RunSummary> collect_runs(const fs::path &root) {
  std::vector<RunSummary> runs;
  for (const auto &path : find_files(root, "summary.csv")) {
    auto batch = parse_summary_csv(detail::read_text_file(path), path.string());
    const fs::path folds_path = path.parent_path() / "folds.csv";
    if (fs::exists(folds_path)) {
      std::map<std::string, std::vector<double>> scores;
      for (const auto &row : parse_fold_csv(detail::read_text_file(folds_path), folds_path.string()))
        scores[config_columns(row.config)].push_back(row.f1);
      for (auto &r : batch)
        if (auto it = scores.find(config_columns(r.config)); it != scores.end()) r.fold_f1 = it->second;
    }
    runs.insert(runs.end(), batch.begin(), batch.end());
  }
  if (runs.empty()) throw ValidationError("no summary.csv found under " + root.string());
  return runs;
}

// ------------------------------------------------------------ subcommands

int cmd_gen(const GenSpec &spec, const std::string &mode, const fs::path &out) {
  GenSpec s = spec;
  s.mode = parse_signal_mode(mode);
  const Dataset ds = generate(s);
  store_dataset(ds, out);
  std::size_t mal = 0;
  for (const auto &x : ds.samples) mal += x.label == Label::Malicious;
  write_run_json(out, {{"command", "gen"},
                       {"seed", s.seed},
                       {"fingerprint", hex64(fnv1a(describe(s)))},
                       {"mode", to_string(s.mode)},
                       {"n", s.n_samples},
                       {"malicious", mal},
                       {"strength", s.strength},
                       {"entropy_shift", s.entropy_shift}});
  std::printf("wrote %zu samples (%zu malicious) to %s\n", ds.samples.size(), mal, out.string().c_str());
  return 0;
}

int cmd_ingest(const fs::path &data, const std::string &out) {
  const Dataset ds = load_dataset(data);
  std::size_t mal = 0, fcg_nodes = 0, fcg_edges = 0, pcg_nodes = 0, pcg_edges = 0;
  for (const auto &s : ds.samples) {
    mal += s.label == Label::Malicious;
    fcg_nodes += s.fcg.node_count;
    fcg_edges += s.fcg.edges.size();
    pcg_nodes += s.pcg.node_count;
    pcg_edges += s.pcg.edges.size();
  }
  std::printf("%zu samples (%zu malicious, %zu benign)\n", ds.samples.size(), mal, ds.samples.size() - mal);
  std::printf("fcg: %zu nodes, %zu edges\npcg: %zu nodes, %zu edges\n", fcg_nodes, fcg_edges, pcg_nodes, pcg_edges);
  std::printf("merged: %zu nodes, %zu edges\n", fcg_nodes + pcg_nodes, fcg_edges + pcg_edges);
  if (!out.empty()) {
    store_dataset(ds, out);
    const std::string manifest = detail::read_text_file(fs::path(out) / "manifest.jsonl");
    write_run_json(out, {{"command", "ingest"},
                         {"seed", 0},
                         {"fingerprint", hex64(fnv1a(manifest))},
                         {"source", data.string()},
                         {"samples", ds.samples.size()},
                         {"malicious", mal}});
  }
  return 0;
}

int cmd_train(const fs::path &data, const ModelConfig &cfg, std::uint64_t seed, const fs::path &out) {
  const Dataset ds = load_dataset(data);
  const auto prepared = prepare_dataset(ds, cfg);
  std::vector<Label> labels;
  for (const auto &s : prepared) labels.push_back(s.label);
  // Hold out the first stratified fifth for model selection.
  const auto folds = stratified_folds(labels, kDefaultFolds, seed);
  std::vector<PreparedSample> train, val;
  for (std::size_t f = 0; f < folds.size(); ++f)
    for (std::size_t i : folds[f]) (f == 0 ? val : train).push_back(prepared[i]);

  ModelConfig run_cfg = cfg;
  run_cfg.train.seed = seed;
  const TrainResult r = train_run(train, val, run_cfg);
  save_checkpoint(r.best_params, run_cfg, out / "model.ckpt");
  detail::write_text_file(out / "epochs.csv", format_epoch_log(run_cfg, seed, r.history));
  GeminiNet net(run_cfg, r.best_params);
  const Vector2 alpha = net.alpha();
  json meta{{"command", "train"},
            {"seed", seed},
            {"fingerprint", fingerprint_hex(run_cfg)},
            {"config", config_json(run_cfg)},
            {"train_samples", train.size()},
            {"validation_samples", val.size()},
            {"best_epoch", r.best_epoch},
            {"best_val_f1", r.best_val_f1},
            {"gate_alpha", {alpha(0), alpha(1)}}};
  write_run_json(out, meta);
  std::printf("best epoch %d, validation F1 %.4f\n", r.best_epoch, r.best_val_f1);
  return 0;
}

int cmd_cv(const fs::path &data, const ModelConfig &cfg, std::uint64_t seed, int jobs, const fs::path &out) {
  const Dataset ds = load_dataset(data);
  const CrossValidationResult r = cross_validate(ds, cfg, seed, kDefaultFolds, jobs);
  const fs::path dir = out / slug(cfg);
  const std::vector<RunSummary> one{r.summary};
  detail::write_text_file(dir / "summary.csv", format_summary_csv(one));
  detail::write_text_file(dir / "folds.csv", format_fold_csv(one));
  json fold_meta = json::array();
  for (std::size_t f = 0; f < r.folds.size(); ++f) {
    const auto fold_seed = fold_train_seed(seed, f);
    detail::write_text_file(dir / detail::sprintf("fold%zu.epochs.csv", f),
                            format_epoch_log(cfg, fold_seed, r.folds[f].train.history));
    fold_meta.push_back({{"fold", f},
                         {"seed", fold_seed},
                         {"best_epoch", r.folds[f].train.best_epoch},
                         {"f1", r.folds[f].f1}});
  }
  write_run_json(dir, {{"command", "cv"},
                       {"seed", seed},
                       {"fingerprint", fingerprint_hex(cfg)},
                       {"config", config_json(cfg)},
                       {"folds", fold_meta}});
  std::printf("%s mean F1 %.4f (std %.4f) -> %s\n", canonical_string(cfg).c_str(), r.summary.mean, r.summary.std,
              dir.string().c_str());
  return 0;
}

struct GridFlags {
  std::vector<std::string> graphs{"dual"};
  std::vector<std::string> features{"ldp+entropy"};
  std::vector<std::string> archs{"gcn"};
  std::vector<int> layers{2};
  std::vector<int> fcs{2};
  std::vector<int> dims{32};
  std::vector<std::string> schedulers{"onecycle"};
};

template <typename T, typename F>
std::vector<T> parse_all(const std::vector<std::string> &in, F parse) {
  std::vector<T> out;
  for (const auto &s : in) out.push_back(parse(s));
  return out;
}

int cmd_grid(const fs::path &data, const GridFlags &g, const TrainFlags &t, std::uint64_t seed, int jobs,
             const fs::path &out) {
  GridSpec spec;
  spec.graph_types = parse_all<GraphType>(g.graphs, parse_graph_type);
  spec.features = parse_all<FeatureMode>(g.features, parse_feature_mode);
  spec.archs = parse_all<ArchKind>(g.archs, parse_arch);
  spec.layers = g.layers;
  spec.fcs = g.fcs;
  spec.dims = g.dims;
  spec.schedulers = parse_all<SchedulerKind>(g.schedulers, parse_scheduler);
  spec.train.epochs = t.epochs;
  spec.train.batch_size = t.batch_size;
  spec.train.base_lr = t.lr;
  spec.dropout = t.dropout;
  const auto cells = spec.expand();
  for (const auto &c : cells) validate(c);

  const Dataset ds = load_dataset(data);
  const auto runs = run_grid(ds, spec, seed, jobs);
  detail::write_text_file(out / "summary.csv", format_summary_csv(runs));
  detail::write_text_file(out / "folds.csv", format_fold_csv(runs));
  json cell_meta = json::array();
  std::string all;
  for (const auto &c : cells) {
    cell_meta.push_back(config_json(c));
    all += canonical_string(c) + "\n";
  }
  write_run_json(out, {{"command", "grid"},
                       {"seed", seed},
                       {"fingerprint", hex64(fnv1a(all))},
                       {"cells", cell_meta}});
  std::printf("%zu configurations, best mean F1 %.4f -> %s\n", runs.size(), runs.front().mean,
              (out / "summary.csv").string().c_str());
  return 0;
}

int cmd_stats(const fs::path &runs_dir, const std::string &group_by, std::size_t top_k, const std::string &pool,
              const fs::path &out) {
  const stats::GroupKey key = stats::parse_group_key(group_by);
  const stats::Pooling pooling = stats::parse_pooling(pool);
  if (top_k == 0) throw ValidationError("--top-k must be positive");
  const auto runs = collect_runs(runs_dir);
  const auto groups = stats::top_k_by_group(runs, key, top_k, pooling);
  if (groups.size() < 2)
    throw ValidationError("need at least 2 groups for the comparison, found " + std::to_string(groups.size()));
  const auto report = stats::compare_groups(groups);
  detail::write_text_file(out / "pairwise.csv", stats::format_test_report(report));
  detail::write_text_file(out / "boxplot.csv", stats::emit_boxplot_summary(groups));
  const std::string options = "group_by=" + group_by + ";top_k=" + std::to_string(top_k) + ";pool=" + pool;
  json sizes = json::object();
  for (const auto &g : groups) sizes[g.name] = g.scores.size();
  write_run_json(out, {{"command", "stats"},
                       {"seed", 0},
                       {"fingerprint", hex64(fnv1a(options))},
                       {"options", options},
                       {"groups", sizes},
                       {"kruskal_h", report.omnibus.h},
                       {"kruskal_p", report.omnibus.p}});
  std::printf("Kruskal-Wallis H=%.4f df=%d p=%.3e over %zu groups -> %s\n", report.omnibus.h, report.omnibus.df,
              report.omnibus.p, groups.size(), out.string().c_str());
  return 0;
}

int cmd_report(const fs::path &runs_dir, std::size_t top, const fs::path &out) {
  auto runs = collect_runs(runs_dir);
  std::stable_sort(runs.begin(), runs.end(), [](const RunSummary &a, const RunSummary &b) { return a.mean > b.mean; });
  auto head = [&](std::vector<RunSummary> v) {
    if (v.size() > top) v.resize(top);
    return v;
  };
  detail::write_text_file(out / "top_overall.csv", format_summary_csv(head(runs)));
  for (GraphType g : {GraphType::Dual, GraphType::Merged, GraphType::FCG, GraphType::PCG}) {
    std::vector<RunSummary> subset;
    for (const auto &r : runs)
      if (r.config.graph_type == g) subset.push_back(r);
    if (!subset.empty()) detail::write_text_file(out / ("top_" + to_string(g) + ".csv"), format_summary_csv(head(subset)));
  }
  write_run_json(out, {{"command", "report"},
                       {"seed", 0},
                       {"fingerprint", hex64(fnv1a("top=" + std::to_string(top)))},
                       {"runs", runs.size()}});
  std::printf("%zu runs ranked -> %s\n", runs.size(), out.string().c_str());
  return 0;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Dual-graph (FCG + PCG) malware classifier toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "gemini 0.1.0");

  GenSpec gen;
  std::string gen_mode = "complementary";
  std::string out;
  std::string data;
  std::uint64_t seed = 0;
  int jobs = 1;

  auto *gen_cmd = app.add_subcommand("gen", "Generate a synthetic labeled dataset");
  gen_cmd->add_option("--n", gen.n_samples, "Number of samples")->capture_default_str()->check(CLI::PositiveNumber);
  gen_cmd->add_option("--mode", gen_mode, "Signal placement: fcg_only, pcg_only, complementary")->capture_default_str();
  gen_cmd->add_option("--balance", gen.balance, "Fraction of malicious samples")->capture_default_str();
  gen_cmd->add_option("--strength", gen.strength, "Signal strength in [0, 1]")->capture_default_str();
  gen_cmd->add_option("--entropy-shift", gen.entropy_shift, "Upward shift of malicious entropy in [0, 1]")
      ->capture_default_str();
  gen_cmd->add_option("--fcg-min", gen.fcg_min, "Smallest FCG")->capture_default_str();
  gen_cmd->add_option("--fcg-max", gen.fcg_max, "Largest FCG")->capture_default_str();
  gen_cmd->add_option("--pcg-min", gen.pcg_min, "Smallest PCG")->capture_default_str();
  gen_cmd->add_option("--pcg-max", gen.pcg_max, "Largest PCG")->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed, "Random seed")->capture_default_str();
  gen_cmd->add_option("--out", out, "Output dataset directory")->required();

  auto *ingest_cmd = app.add_subcommand("ingest", "Validate a dataset directory and optionally rewrite it");
  ingest_cmd->add_option("--data", data, "Dataset directory (manifest.jsonl + graphs/)")->required();
  ingest_cmd->add_option("--out", out, "Write a normalized copy here");

  ModelFlags model;
  TrainFlags train;

  auto *train_cmd = app.add_subcommand("train", "Train one model on a stratified 80/20 split");
  train_cmd->add_option("--data", data, "Dataset directory")->required();
  add_model_flags(train_cmd, model);
  add_train_flags(train_cmd, train);
  train_cmd->add_option("--seed", seed, "Random seed")->capture_default_str();
  train_cmd->add_option("--out", out, "Output directory")->required();

  auto *cv_cmd = app.add_subcommand("cv", "5-fold cross-validation of one configuration");
  cv_cmd->add_option("--data", data, "Dataset directory")->required();
  add_model_flags(cv_cmd, model);
  add_train_flags(cv_cmd, train);
  cv_cmd->add_option("--seed", seed, "Random seed (fixes folds and initialization)")->capture_default_str();
  cv_cmd->add_option("--jobs", jobs, "Folds trained in parallel")->capture_default_str()->check(CLI::PositiveNumber);
  cv_cmd->add_option("--out", out, "Output root; results go to <out>/<config>/")->required();

  GridFlags grid;
  auto *grid_cmd = app.add_subcommand("grid", "Cross-validate every configuration in a cross product");
  grid_cmd->add_option("--data", data, "Dataset directory")->required();
  grid_cmd->add_option("--graph", grid.graphs, "Graph types (comma separated)")->delimiter(',')->capture_default_str();
  grid_cmd->add_option("--feature", grid.features, "Feature modes")->delimiter(',')->capture_default_str();
  grid_cmd->add_option("--arch", grid.archs, "Architectures")->delimiter(',')->capture_default_str();
  grid_cmd->add_option("--layers", grid.layers, "Layer counts")->delimiter(',')->capture_default_str();
  grid_cmd->add_option("--fc", grid.fcs, "Head depths")->delimiter(',')->capture_default_str();
  grid_cmd->add_option("--dim", grid.dims, "Hidden widths")->delimiter(',')->capture_default_str();
  grid_cmd->add_option("--scheduler", grid.schedulers, "Schedulers")->delimiter(',')->capture_default_str();
  add_train_flags(grid_cmd, train);
  grid_cmd->add_option("--seed", seed, "Random seed (same folds for every cell)")->capture_default_str();
  grid_cmd->add_option("--jobs", jobs, "Grid cells run in parallel")->capture_default_str()->check(CLI::PositiveNumber);
  grid_cmd->add_option("--out", out, "Output directory")->required();

  std::string runs_dir, group_by = "graph_type", pool = "means";
  std::size_t top_k = 100;
  auto *stats_cmd = app.add_subcommand("stats", "Kruskal-Wallis and Dunn tests over top-k scores per group");
  stats_cmd->add_option("--runs", runs_dir, "Directory searched recursively for summary.csv")->required();
  stats_cmd->add_option("--group-by", group_by, "Grouping key: graph_type, feature")->capture_default_str();
  stats_cmd->add_option("--top-k", top_k, "Scores kept per group")->capture_default_str();
  stats_cmd->add_option("--pool", pool, "Score pool: means (per configuration) or folds")->capture_default_str();
  stats_cmd->add_option("--out", out, "Output directory")->required();

  std::size_t top = 10;
  auto *report_cmd = app.add_subcommand("report", "Rank configurations overall and per graph type");
  report_cmd->add_option("--runs", runs_dir, "Directory searched recursively for summary.csv")->required();
  report_cmd->add_option("--top", top, "Rows per table")->capture_default_str()->check(CLI::PositiveNumber);
  report_cmd->add_option("--out", out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp &e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp &e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion &e) {
    return app.exit(e);
  } catch (const CLI::ParseError &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  try {
    if (*gen_cmd) return cmd_gen(gen, gen_mode, out);
    if (*ingest_cmd) return cmd_ingest(data, out);
    if (*train_cmd) return cmd_train(data, build_config(model, train), seed, out);
    if (*cv_cmd) return cmd_cv(data, build_config(model, train), seed, jobs, out);
    if (*grid_cmd) return cmd_grid(data, grid, train, seed, jobs, out);
    if (*stats_cmd) return cmd_stats(runs_dir, group_by, top_k, pool, out);
    if (*report_cmd) return cmd_report(runs_dir, top, out);
  } catch (const IoError &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ValidationError &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
