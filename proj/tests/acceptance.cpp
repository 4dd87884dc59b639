// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fail.

#include <sys/wait.h>

#include <CLI11.hpp>
#include <json.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "gemini/gemini.hpp"
#include "support.hpp"

using namespace gemini;
using gemini::testing::Rng;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string &what) {
    if (!ok) {
      pass = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char *f, double v) { return detail::sprintf(f, v); }

// ------------------------------------------------------------- criteria

Outcome gradient_fidelity() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  std::size_t checked = 0, kinks = 0;
  for (ArchKind arch : gemini::testing::all_archs()) {
    for (GraphType g : gemini::testing::all_graph_types()) {
      const ModelConfig cfg = gemini::testing::micro_config(arch, g);
      Rng rng(500 + static_cast<int>(arch) * 10 + static_cast<int>(g));
      for (int trial = 0; trial < 3; ++trial) {
        ModelParams params = init_params(cfg, rng());
        params.gate.value(0, 0) = 0.3;
        params.gate.value(1, 0) = -0.2;
        for_each_param(params, [&](const std::string &name, Tensor2 &t) {
          if (name.ends_with(".b") || name.ends_with(".b2")) t.value.setRandom() *= 0.1;
        });
        const SamplePair s = gemini::testing::random_pair(rng, 6, 6, trial % 2 ? Label::Malicious : Label::Benign);
        const PreparedSample prepared = prepare_sample(s, cfg);
        for (bool dropout : {false, true}) {
          const auto r = gemini::testing::gradient_check(cfg, params, prepared, dropout);
          checked += r.checked;
          kinks += r.kinks;
          if (r.max_rel_error > worst) worst = r.max_rel_error;
          o.require(r.max_rel_error < 1e-4,
                    to_string(arch) + "/" + to_string(g) + " " + r.worst + " rel " + fmt("%.3g", r.max_rel_error));
        }
      }
    }
  }
  const double sec = seconds_since(t0);
  o.require(kinks * 20 <= checked, "too many ReLU kinks skipped");
  o.require(sec < 30.0, fmt("runtime %.1fs", sec));
  if (o.pass)
    o.detail = detail::sprintf("max rel %.2e over %zu entries (%zu kinks skipped), %.1fs", worst, checked, kinks, sec);
  return o;
}

double histogram_entropy(const std::vector<std::uint8_t> &bytes) {
  std::map<std::uint8_t, double> counts;
  for (auto b : bytes) counts[b] += 1.0;
  const double n = static_cast<double>(bytes.size());
  double acc = 0.0;
  for (const auto &[sym, c] : counts) acc += c * std::log2(c);
  return std::log2(n) - acc / n;
}

Outcome oracle_equivalence() {
  Outcome o;
  double ldp_err = 0.0, ent_err = 0.0, prop_err = 0.0;
  Rng rng(61);
  for (int i = 0; i < 50; ++i) {
    const std::size_t n = 1 + rng() % 12;
    const Graph g = gemini::testing::random_graph(rng, n, rng() % (3 * n + 1), 0.15);
    ldp_err = std::max(ldp_err, (local_degree_profile(g) - gemini::testing::dense_ldp(g)).cwiseAbs().maxCoeff());
  }
  for (int i = 0; i < 200; ++i) {
    std::vector<std::uint8_t> bytes(1 + rng() % 4000);
    const auto alphabet = 1 + rng() % 256;
    for (auto &b : bytes) b = static_cast<std::uint8_t>(rng() % alphabet);
    ent_err = std::max(ent_err, std::fabs(shannon_entropy(bytes) - histogram_entropy(bytes)));
  }
  for (ArchKind arch : gemini::testing::all_archs()) {
    if (arch == ArchKind::MLP) continue;
    for (int i = 0; i < 40; ++i) {
      const std::size_t n = 1 + rng() % 30;
      const Graph g = gemini::testing::random_graph(rng, n, rng() % (3 * n + 1), 0.1);
      const Matrix h = Matrix::Random(static_cast<Eigen::Index>(n), 4);
      const Propagator p(arch, g);
      prop_err = std::max(prop_err, (p.apply(h) - gemini::testing::dense_operator(arch, g) * h).cwiseAbs().maxCoeff());
    }
  }
  o.require(ldp_err <= 1e-12, fmt("ldp err %.3g", ldp_err));
  o.require(ent_err <= 1e-12, fmt("entropy err %.3g", ent_err));
  o.require(prop_err <= 1e-10, fmt("propagation err %.3g", prop_err));
  if (o.pass)
    o.detail = detail::sprintf("ldp %.1e, entropy %.1e, propagation %.1e", ldp_err, ent_err, prop_err);
  return o;
}

Outcome statistics_fixtures() {
  Outcome o;
  const std::vector<stats::ScoreGroup> groups{{"a", {1, 2, 3}}, {"b", {4, 5, 6}}, {"c", {7, 8, 9}}};
  const auto kw = stats::kruskal_wallis(groups);
  o.require(std::fabs(kw.h - 7.2) <= 1e-9, fmt("H %.12g", kw.h));
  o.require(std::fabs(kw.p - 0.02732) <= 1e-5, fmt("p %.8g", kw.p));
  o.require(kw.df == 2, "df");

  const auto dunn = stats::dunn_posthoc(groups);
  for (std::size_t i = 0; i < 3; ++i) {
    o.require(dunn.p[i][i] == 1.0, "diagonal");
    for (std::size_t j = 0; j < 3; ++j) {
      o.require(dunn.p[i][j] == dunn.p[j][i], "asymmetric");
      o.require(dunn.p[i][j] > 0.0 && dunn.p[i][j] <= 1.0, "p out of range");
    }
  }
  const std::vector<stats::ScoreGroup> same{{"x", {0.5, 0.7, 0.9}}, {"y", {0.5, 0.7, 0.9}}, {"z", {0.5, 0.7, 0.9}}};
  const auto dsame = stats::dunn_posthoc(same);
  for (const auto &row : dsame.p)
    for (double p : row) o.require(p == 1.0, "identical groups p != 1");

  const double chi = stats::chi2_sf(7.815, 3.0);
  o.require(std::fabs(chi - 0.05) <= 5e-4, fmt("chi2 sf %.6g", chi));
  if (o.pass) o.detail = detail::sprintf("H=%.10g p=%.6f chi2_sf(7.815,3)=%.5f", kw.h, kw.p, chi);
  return o;
}

Outcome merged_graph_invariants() {
  Outcome o;
  Rng rng(71);
  for (int i = 0; i < 100; ++i) {
    const Graph g1 = gemini::testing::random_graph(rng, 1 + rng() % 40, rng() % 80);
    const Graph g2 = gemini::testing::random_graph(rng, 1 + rng() % 10, rng() % 20);
    const Graph m = merge_graphs(g1, g2);
    o.require(m.node_count == g1.node_count + g2.node_count, "node count");
    o.require(m.edges.size() == g1.edges.size() + g2.edges.size(), "edge count");
    for (const Edge &e : m.edges)
      if ((e.source < g1.node_count) != (e.target < g1.node_count)) o.require(false, "cross edge");
  }
  Graph fcg, pcg;
  fcg.node_count = 449960;
  pcg.node_count = 3053;
  fcg.edges.assign(1048741, Edge{0, 0});
  pcg.edges.assign(2663, Edge{0, 0});
  const Graph total = merge_graphs(fcg, pcg);
  o.require(total.node_count == 453013, "corpus nodes");
  o.require(total.edges.size() == 1051404, "corpus edges");
  if (o.pass) o.detail = "100 pairs additive, no cross edges; corpus 453013 nodes / 1051404 edges";
  return o;
}

Outcome overfit_smoke() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  const ModelConfig cfg = gemini::testing::overfit_config(200);
  const auto data = gemini::testing::overfit_set(cfg);
  const TrainResult r = train_run(data, data, cfg);
  const double sec = seconds_since(t0);
  o.require(r.best_val_f1 == 1.0, fmt("best training F1 %.4f", r.best_val_f1));
  for (int e = 3; e < 10; ++e) {
    const double prev = r.history[e - 3].loss + r.history[e - 2].loss + r.history[e - 1].loss;
    const double cur = r.history[e - 2].loss + r.history[e - 1].loss + r.history[e].loss;
    o.require(cur <= prev + 1e-12, "smoothed loss rises at epoch " + std::to_string(e));
  }
  o.require(sec < 120.0, fmt("runtime %.1fs", sec));
  if (o.pass) o.detail = detail::sprintf("F1 1.0 first at epoch %d, %.1fs", r.best_epoch, sec);
  return o;
}

// Shared by the directional and feature-ordering criteria. The generator and
// training settings are pinned in fixtures/directional.json.
struct Calibrated {
  nlohmann::json fixture;
  Dataset ds;
  std::map<std::string, double> means;

  explicit Calibrated(const fs::path &path)
      : fixture(nlohmann::json::parse(detail::read_text_file(path))), ds(generate(spec())) {}

  GenSpec spec() const {
    const auto &g = fixture.at("generator");
    GenSpec s;
    s.n_samples = g.at("n_samples");
    s.seed = g.at("seed");
    s.mode = parse_signal_mode(g.at("mode").get<std::string>());
    s.balance = g.at("balance");
    s.strength = g.at("strength");
    s.entropy_shift = g.at("entropy_shift");
    s.fcg_min = g.at("fcg_min");
    s.fcg_max = g.at("fcg_max");
    s.pcg_min = g.at("pcg_min");
    s.pcg_max = g.at("pcg_max");
    return s;
  }

  ModelConfig config(GraphType g, FeatureMode f, ArchKind a) const {
    const auto &m = fixture.at("model");
    const auto &t = fixture.at("train");
    ModelConfig c = make_config(g, f, a, m.at("layers"), m.at("fc"), m.at("dim"),
                                parse_scheduler(m.at("scheduler").get<std::string>()));
    c.train.epochs = t.at("epochs");
    c.train.batch_size = t.at("batch_size");
    c.train.base_lr = t.at("base_lr");
    return c;
  }

  double mean(GraphType g, FeatureMode f, ArchKind a) {
    const ModelConfig c = config(g, f, a);
    const std::string key = canonical_string(c);
    if (auto it = means.find(key); it != means.end()) return it->second;
    return means[key] = cross_validate(ds, c, fixture.at("cv_seed").get<std::uint64_t>()).summary.mean;
  }
};

Outcome directional(Calibrated &cal) {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  std::string summary;
  for (ArchKind a : {ArchKind::GCN, ArchKind::SGC}) {
    const double dual = cal.mean(GraphType::Dual, FeatureMode::LdpEntropy, a);
    summary += to_string(a) + fmt(" dual %.3f", dual);
    for (GraphType g : {GraphType::Merged, GraphType::FCG, GraphType::PCG}) {
      const double m = cal.mean(g, FeatureMode::LdpEntropy, a);
      summary += " " + to_string(g) + fmt(" %.3f", m);
      o.require(dual >= m + 0.02, to_string(a) + " dual-" + to_string(g) + fmt(" margin %.3f", dual - m));
    }
    summary += "; ";
  }
  const double sec = seconds_since(t0);
  o.require(sec < 900.0, fmt("runtime %.0fs", sec));
  o.detail = summary + fmt("%.0fs", sec) + (o.detail.empty() ? "" : " | " + o.detail);
  return o;
}

Outcome feature_ordering(Calibrated &cal) {
  Outcome o;
  const double both = cal.mean(GraphType::Dual, FeatureMode::LdpEntropy, ArchKind::GCN);
  const double ldp = cal.mean(GraphType::Dual, FeatureMode::LDP, ArchKind::GCN);
  const double ent = cal.mean(GraphType::Dual, FeatureMode::Entropy, ArchKind::GCN);
  o.require(both >= ldp, "ldp+entropy < ldp");
  o.require(both >= ent, "ldp+entropy < entropy");
  o.detail = detail::sprintf("ldp+entropy %.3f, ldp %.3f, entropy %.3f", both, ldp, ent) +
             (o.detail.empty() ? "" : " | " + o.detail);
  return o;
}

int run_cli(const std::string &args, const fs::path &log) {
  const std::string cmd = std::string(GEMINI_CLI) + " " + args + " >" + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome determinism(const fs::path &work) {
  Outcome o;
  fs::remove_all(work);
  fs::create_directories(work);
  const fs::path data = work / "data";
  o.require(run_cli("gen --n 200 --mode complementary --seed 42 --out " + data.string(), work / "gen.log") == 0,
            "gen failed");
  const std::string flags = "cv --data " + data.string() +
                            " --graph dual --feature ldp+entropy --arch gcn --layers 4 --fc 2 --dim 32"
                            " --scheduler onecycle --epochs 100 --batch-size 32 --lr 0.01 --seed 1 --out ";
  o.require(run_cli(flags + (work / "a").string(), work / "a.log") == 0, "first cv failed");
  o.require(run_cli(flags + (work / "b").string(), work / "b.log") == 0, "second cv failed");
  if (!o.pass) return o;
  std::size_t compared = 0;
  for (const auto &e : fs::recursive_directory_iterator(work / "a")) {
    if (!e.is_regular_file()) continue;
    const fs::path rel = fs::relative(e.path(), work / "a");
    const fs::path other = work / "b" / rel;
    o.require(fs::exists(other), "missing " + rel.string());
    if (fs::exists(other))
      o.require(detail::read_text_file(e.path()) == detail::read_text_file(other), "differs: " + rel.string());
    if (rel.filename() == "summary.csv") ++compared;
  }
  o.require(compared == 1, "expected one summary.csv");
  if (o.pass) o.detail = "summary.csv, folds.csv, epoch logs and run.json byte-identical";
  return o;
}

Outcome invariance() {
  Outcome o;
  Rng rng(81);
  double perm_err = 0.0;
  for (ArchKind arch : gemini::testing::all_archs()) {
    for (GraphType g : gemini::testing::all_graph_types()) {
      const ModelConfig cfg = make_config(g, FeatureMode::LdpEntropy, arch, 3, 2, 8, SchedulerKind::OneCycle);
      const ModelParams params = init_params(cfg, rng());
      for (int trial = 0; trial < 3; ++trial) {
        SamplePair s = gemini::testing::random_pair(rng, 30, 8);
        const Vector2 a = forward(params, cfg, s);
        s.fcg = gemini::testing::permute(s.fcg, gemini::testing::random_permutation(rng, s.fcg.node_count));
        s.pcg = gemini::testing::permute(s.pcg, gemini::testing::random_permutation(rng, s.pcg.node_count));
        perm_err = std::max(perm_err, (a - forward(params, cfg, s)).cwiseAbs().maxCoeff());
      }
    }
  }
  o.require(perm_err <= 1e-9, fmt("permutation err %.3g", perm_err));

  double simplex_err = 0.0;
  {
    const ModelConfig cfg = gemini::testing::overfit_config(1);
    const auto data = gemini::testing::overfit_set(cfg);
    GeminiNet net(cfg, init_params(cfg, 3));
    AdamState adam;
    for (int step = 0; step < 100; ++step) {
      net.zero_grad();
      for (std::size_t i = 0; i < 4; ++i) {
        const auto &s = data[(step * 4 + i) % data.size()];
        net.backward(cross_entropy_grad(net.forward(s), to_int(s.label)));
      }
      adam_step(net.params(), adam, 0.05);
      const Eigen::Vector2d a = net.alpha();
      simplex_err = std::max(simplex_err, std::fabs(a.sum() - 1.0));
      o.require(a.minCoeff() >= 0.0, "negative gate weight");
    }
  }
  o.require(simplex_err <= 1e-12, fmt("gate simplex err %.3g", simplex_err));

  double softmax_err = 0.0;
  for (int i = 0; i < 200; ++i) {
    const Eigen::VectorXd z = Eigen::VectorXd::Random(2 + i % 4) * (1.0 + 5.0 * i);
    softmax_err = std::max(softmax_err, std::fabs(softmax(z).sum() - 1.0));
  }
  o.require(softmax_err <= 1e-12, fmt("softmax err %.3g", softmax_err));

  // Scheduler traces: closed form per step, and the rates recorded by training.
  const long total = 100;
  const double peak = 0.01;
  for (long s = 0; s < total; ++s) {
    double want;
    if (s <= 30) {
      want = peak / 25.0 + (peak - peak / 25.0) * static_cast<double>(s) / 30.0;
    } else {
      const double t = static_cast<double>(s - 30) / 69.0;
      want = peak / 1e4 + (peak - peak / 1e4) * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
    }
    if (std::fabs(one_cycle_lr(s, total, peak) - want) > 4.0 * std::numeric_limits<double>::epsilon() * want)
      o.require(false, "onecycle step " + std::to_string(s));
  }
  {
    ModelConfig cfg = gemini::testing::overfit_config(12);
    cfg.train.batch_size = 5; // 4 optimizer steps per epoch
    const auto data = gemini::testing::overfit_set(cfg);
    const TrainResult r = train_run(data, data, cfg);
    for (const auto &rec : r.history)
      o.require(rec.lr == one_cycle_lr(4L * (rec.epoch + 1) - 1, 48, cfg.train.base_lr),
                "onecycle trace epoch " + std::to_string(rec.epoch));

    cfg.train.scheduler = SchedulerKind::Plateau;
    cfg.train.epochs = 40;
    const TrainResult p = train_run(data, data, cfg);
    PlateauState replay{cfg.train.base_lr};
    for (const auto &rec : p.history) {
      o.require(rec.lr == replay.lr, "plateau trace epoch " + std::to_string(rec.epoch));
      reduce_on_plateau(rec.val_f1, replay);
    }
    PlateauState flat;
    const std::vector<double> forty(40, 0.5);
    o.require(reduce_on_plateau(forty, flat) == 1.25e-4, "plateau halving");
  }
  if (o.pass)
    o.detail = detail::sprintf("permutation %.1e, simplex %.1e, softmax %.1e, scheduler traces exact", perm_err,
                               simplex_err, softmax_err);
  return o;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Acceptance checks"};
  std::string work_dir = (fs::temp_directory_path() / "gemini_acceptance").string();
  std::vector<std::string> only;
  app.add_option("--work-dir", work_dir, "Scratch directory for CLI runs")->capture_default_str();
  app.add_option("--only", only, "Run only the named criteria");
  CLI11_PARSE(app, argc, argv);

  Calibrated cal(fs::path(GEMINI_FIXTURE_DIR) / "directional.json");
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gradient-fidelity", gradient_fidelity},
      {"oracle-equivalence", oracle_equivalence},
      {"statistics-fixtures", statistics_fixtures},
      {"merged-graph-invariants", merged_graph_invariants},
      {"overfit-smoke", overfit_smoke},
      {"directional-reproduction", [&] { return directional(cal); }},
      {"feature-ordering", [&] { return feature_ordering(cal); }},
      {"determinism", [&] { return determinism(fs::path(work_dir) / "determinism"); }},
      {"invariance", invariance},
  };

  int failed = 0;
  for (const auto &[name, check] : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), name) == only.end()) continue;
    Outcome o;
    try {
      o = check();
    } catch (const std::exception &e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    failed += o.pass ? 0 : 1;
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
