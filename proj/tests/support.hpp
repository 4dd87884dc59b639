#pragma once

// Shared helpers for the unit and acceptance suites: random graphs, dense
// reference implementations and a finite-difference gradient checker.

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "gemini/gemini.hpp"

namespace gemini::testing {

using Rng = std::mt19937_64;

// Random directed graph; `loop_prob` controls self-loops, duplicates are
// removed by canonicalize().
inline Graph random_graph(Rng &rng, std::size_t n, std::size_t edges, double loop_prob = 0.1) {
  Graph g;
  g.node_count = n;
  std::uniform_int_distribution<NodeId> pick(0, static_cast<NodeId>(n - 1));
  std::bernoulli_distribution loop(loop_prob);
  for (std::size_t i = 0; i < edges; ++i) {
    const NodeId s = pick(rng);
    NodeId t = pick(rng);
    if (loop(rng)) t = s;
    g.edges.push_back({s, t});
  }
  return canonicalize(std::move(g));
}

inline SamplePair random_pair(Rng &rng, std::size_t max_fcg, std::size_t max_pcg, Label label = Label::Benign) {
  std::uniform_int_distribution<std::size_t> nf(1, max_fcg), np(1, max_pcg);
  SamplePair s;
  s.id = "rand";
  s.label = label;
  const std::size_t a = nf(rng), b = np(rng);
  s.fcg = random_graph(rng, a, 2 * a);
  s.pcg = random_graph(rng, b, b + 1);
  s.entropy = std::uniform_real_distribution<double>(0.0, 8.0)(rng);
  return s;
}

// Symmetric 0/1 adjacency; a self-loop sets the diagonal entry.
inline Matrix dense_adjacency(const Graph &g) {
  const auto n = static_cast<Eigen::Index>(g.node_count);
  Matrix a = Matrix::Zero(n, n);
  for (const Edge &e : g.edges) {
    a(e.source, e.target) = 1.0;
    a(e.target, e.source) = 1.0;
  }
  return a;
}

inline Matrix dense_ldp(const Graph &g) {
  const Matrix a = dense_adjacency(g);
  const Eigen::Index n = a.rows();
  const Eigen::VectorXd deg = a.rowwise().sum();
  Matrix out = Matrix::Zero(n, 5);
  for (Eigen::Index v = 0; v < n; ++v) {
    out(v, 0) = deg(v);
    std::vector<double> nd;
    for (Eigen::Index u = 0; u < n; ++u)
      if (a(v, u) != 0.0) nd.push_back(deg(u));
    if (nd.empty()) continue;
    double sum = 0.0;
    for (double x : nd) sum += x;
    const double mean = sum / static_cast<double>(nd.size());
    double var = 0.0;
    for (double x : nd) var += (x - mean) * (x - mean);
    out(v, 1) = *std::min_element(nd.begin(), nd.end());
    out(v, 2) = *std::max_element(nd.begin(), nd.end());
    out(v, 3) = mean;
    out(v, 4) = std::sqrt(var / static_cast<double>(nd.size()));
  }
  return out;
}

// Dense form of the propagation operator used by each architecture.
inline Matrix dense_operator(ArchKind arch, const Graph &g) {
  const Matrix a = dense_adjacency(g);
  const Eigen::Index n = a.rows();
  const Matrix id = Matrix::Identity(n, n);
  switch (arch) {
  case ArchKind::GCN:
  case ArchKind::SGC: {
    const Matrix at = a + id;
    const Eigen::VectorXd d = at.rowwise().sum().array().rsqrt();
    return d.asDiagonal() * at * d.asDiagonal();
  }
  case ArchKind::GIN: return id + a;
  case ArchKind::SAGE: {
    Matrix m = a;
    for (Eigen::Index v = 0; v < n; ++v) {
      const double s = a.row(v).sum();
      if (s > 0) m.row(v) /= s;
    }
    return m;
  }
  case ArchKind::MLP: return id;
  }
  return id;
}

inline double sample_loss(GeminiNet &net, const PreparedSample &s, std::uint64_t dropout_seed, bool dropout) {
  Rng rng(dropout_seed);
  const Vector2 p = net.forward(s, dropout ? &rng : nullptr);
  return cross_entropy_loss(p, to_int(s.label));
}

struct GradCheck {
  double max_rel_error = 0.0;
  std::string worst;
  std::size_t checked = 0;
  std::size_t kinks = 0; // entries skipped because a ReLU switches inside the step
};

// Compares analytic gradients of the cross-entropy loss with central
// differences for every scalar parameter. Relative error per entry is
// |a - n| / max(|a|, |n|, 1e-6). An entry whose forward and backward
// one-sided differences disagree is not differentiable at this step size
// (a ReLU input crosses zero) and is counted in `kinks` instead.
inline GradCheck gradient_check(const ModelConfig &cfg, const ModelParams &params, const PreparedSample &s,
                                bool dropout, double step = 1e-5, std::uint64_t dropout_seed = 99) {
  GeminiNet net(cfg, params);
  net.zero_grad();
  {
    Rng rng(dropout_seed);
    const Vector2 p = net.forward(s, dropout ? &rng : nullptr);
    net.backward(cross_entropy_grad(p, to_int(s.label)));
  }
  ModelParams analytic = net.params();
  const double base = sample_loss(net, s, dropout_seed, dropout);

  GradCheck out;
  std::vector<std::pair<std::string, Tensor2 *>> tensors;
  for_each_param(net.params(), [&](const std::string &name, Tensor2 &t) { tensors.push_back({name, &t}); });
  std::vector<const Tensor2 *> grads;
  for_each_param(analytic, [&](const std::string &, const Tensor2 &t) { grads.push_back(&t); });

  for (std::size_t k = 0; k < tensors.size(); ++k) {
    Tensor2 &t = *tensors[k].second;
    for (Eigen::Index i = 0; i < t.value.size(); ++i) {
      const double orig = t.value.data()[i];
      t.value.data()[i] = orig + step;
      const double up = sample_loss(net, s, dropout_seed, dropout);
      t.value.data()[i] = orig - step;
      const double down = sample_loss(net, s, dropout_seed, dropout);
      t.value.data()[i] = orig;
      const double fwd = (up - base) / step, bwd = (base - down) / step;
      if (std::fabs(fwd - bwd) > 1e-2 * std::max({std::fabs(fwd), std::fabs(bwd), 1e-3})) {
        ++out.kinks;
        continue;
      }
      const double numeric = (up - down) / (2.0 * step);
      const double a = grads[k]->grad.data()[i];
      const double rel = std::fabs(a - numeric) / std::max({std::fabs(a), std::fabs(numeric), 1e-6});
      ++out.checked;
      if (rel > out.max_rel_error) {
        out.max_rel_error = rel;
        out.worst = tensors[k].first + "[" + std::to_string(i) + "]";
      }
    }
  }
  return out;
}

// Micro model used by the gradient tests: graphs of at most 6 nodes, width 4.
inline ModelConfig micro_config(ArchKind arch, GraphType g) {
  ModelConfig c = make_config(g, FeatureMode::LdpEntropy, arch, 2, 2, 4, SchedulerKind::OneCycle);
  return c;
}

// Overfit smoke test: 16 generated samples, trained and scored on themselves.
// A single-layer head keeps dropout out of the training loss.
inline ModelConfig overfit_config(int epochs) {
  ModelConfig cfg = make_config(GraphType::Dual, FeatureMode::LdpEntropy, ArchKind::GCN, 2, 1, 32,
                                SchedulerKind::OneCycle);
  cfg.train.epochs = epochs;
  cfg.train.batch_size = 16;
  cfg.train.base_lr = 5e-3;
  cfg.train.seed = 7;
  return cfg;
}

inline std::vector<PreparedSample> overfit_set(const ModelConfig &cfg) {
  GenSpec spec;
  spec.n_samples = 16;
  spec.seed = 7;
  return prepare_dataset(generate(spec), cfg);
}

inline std::vector<ArchKind> all_archs() {
  return {ArchKind::GCN, ArchKind::GIN, ArchKind::SAGE, ArchKind::SGC, ArchKind::MLP};
}

inline std::vector<GraphType> all_graph_types() {
  return {GraphType::FCG, GraphType::PCG, GraphType::Merged, GraphType::Dual};
}

// Relabels nodes of `g` through `perm` (new id = perm[old id]).
inline Graph permute(const Graph &g, const std::vector<NodeId> &perm) {
  Graph out;
  out.node_count = g.node_count;
  for (const Edge &e : g.edges) out.edges.push_back({perm[e.source], perm[e.target]});
  return canonicalize(std::move(out));
}

inline std::vector<NodeId> random_permutation(Rng &rng, std::size_t n) {
  std::vector<NodeId> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = static_cast<NodeId>(i);
  std::shuffle(p.begin(), p.end(), rng);
  return p;
}

} // namespace gemini::testing
