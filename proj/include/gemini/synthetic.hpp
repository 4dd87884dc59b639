#pragma once

// Seeded generator of labeled FCG/PCG pairs.
//
// Benign topology: function call graphs grow by preferential attachment;
// process graphs are random spawn trees with a few extra interaction edges.
// Malicious samples may carry two structural cues:
//   fcg cue  a couple of hub functions with many extra outgoing calls
//   pcg cue  deep spawn chains plus one fan-out burst of child processes
// In complementary mode a malicious sample carries a cue with probability
// `strength`, and the cue lands in exactly one modality chosen by a fair
// coin, so each graph alone sees only part of the signal.
// File entropy is Beta-distributed on [0, 8]; `entropy_shift` moves the
// malicious distribution upward.

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "gemini/config.hpp"
#include "gemini/error.hpp"
#include "gemini/graph.hpp"

namespace gemini {

enum class SignalMode { FcgOnly, PcgOnly, Complementary };

inline std::string to_string(SignalMode m) {
  switch (m) {
  case SignalMode::FcgOnly: return "fcg_only";
  case SignalMode::PcgOnly: return "pcg_only";
  case SignalMode::Complementary: return "complementary";
  }
  return "?";
}

inline SignalMode parse_signal_mode(std::string_view s) {
  if (s == "fcg_only" || s == "fcg") return SignalMode::FcgOnly;
  if (s == "pcg_only" || s == "pcg") return SignalMode::PcgOnly;
  if (s == "complementary") return SignalMode::Complementary;
  throw ValidationError("unknown signal mode '" + std::string(s) + "'");
}

struct GenSpec {
  std::size_t n_samples = 200;
  double balance = 0.5; // fraction malicious
  std::uint64_t seed = 0;
  std::size_t fcg_min = 50;
  std::size_t fcg_max = 400;
  std::size_t pcg_min = 3;
  std::size_t pcg_max = 20;
  SignalMode mode = SignalMode::Complementary;
  double strength = 0.8;
  double entropy_shift = 0.5;
};

inline void validate(const GenSpec &s) {
  if (s.n_samples == 0) throw ValidationError("n_samples must be positive");
  if (!(s.balance >= 0.0 && s.balance <= 1.0)) throw ValidationError("balance must lie in [0, 1]");
  if (s.fcg_min < 1 || s.fcg_max < s.fcg_min) throw ValidationError("invalid fcg size range");
  if (s.pcg_min < 1 || s.pcg_max < s.pcg_min) throw ValidationError("invalid pcg size range");
  if (!(s.strength >= 0.0 && s.strength <= 1.0)) throw ValidationError("strength must lie in [0, 1]");
  if (!(s.entropy_shift >= 0.0 && s.entropy_shift <= 1.0))
    throw ValidationError("entropy_shift must lie in [0, 1]");
}

namespace synth {

using Rng = std::mt19937_64;

inline std::size_t uniform_size(Rng &rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

inline bool coin(Rng &rng, double p) { return std::bernoulli_distribution(p)(rng); }

inline double beta(Rng &rng, double a, double b) {
  const double x = std::gamma_distribution<double>(a, 1.0)(rng);
  const double y = std::gamma_distribution<double>(b, 1.0)(rng);
  return x / (x + y);
}

// Preferential attachment: each new function is linked to one or two
// existing ones picked proportionally to (degree + 1). Part of the node
// budget goes to short wrapper-call chains hanging off random functions.
inline Graph call_graph(Rng &rng, std::size_t n) {
  Graph g;
  g.node_count = n;
  const std::size_t chain_budget = uniform_size(rng, 0, n / 5);
  const std::size_t core = std::max<std::size_t>(1, n - chain_budget);
  std::vector<NodeId> pool{0};
  for (NodeId v = 1; v < core; ++v) {
    const int links = (v >= 2 && coin(rng, 0.5)) ? 2 : 1;
    for (int l = 0; l < links; ++l) {
      const NodeId u = pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng)];
      if (coin(rng, 0.8))
        g.edges.push_back({u, v});
      else
        g.edges.push_back({v, u});
      pool.push_back(u);
      pool.push_back(v);
    }
    pool.push_back(v);
  }
  NodeId next = static_cast<NodeId>(core);
  while (next < n) {
    const std::size_t len = std::min<std::size_t>(uniform_size(rng, 3, 8), n - next);
    NodeId prev = std::uniform_int_distribution<NodeId>(0, next - 1)(rng);
    for (std::size_t i = 0; i < len; ++i, ++next) {
      g.edges.push_back({prev, next});
      prev = next;
    }
  }
  return g;
}

inline void add_hub_cue(Rng &rng, Graph &g, double intensity) {
  const auto extra = static_cast<std::size_t>(std::lround(intensity * 0.6 * static_cast<double>(g.node_count)));
  std::uniform_int_distribution<NodeId> pick(0, static_cast<NodeId>(g.node_count - 1));
  const NodeId hubs[2] = {pick(rng), pick(rng)};
  for (std::size_t i = 0; i < extra; ++i) {
    const NodeId hub = hubs[i % 2];
    NodeId callee = pick(rng);
    if (callee == hub) callee = (callee + 1) % static_cast<NodeId>(g.node_count);
    g.edges.push_back({hub, callee});
  }
}

// Shallow spawn tree (half of all processes start from the root); with
// `chain_bias` > 0 a new process more often descends from the most recent
// one, which deepens the tree.
inline Graph process_graph(Rng &rng, std::size_t n, double chain_bias) {
  Graph g;
  g.node_count = n;
  for (NodeId v = 1; v < n; ++v) {
    NodeId parent = 0;
    if (coin(rng, chain_bias))
      parent = v - 1;
    else if (coin(rng, 0.5))
      parent = std::uniform_int_distribution<NodeId>(0, v - 1)(rng);
    g.edges.push_back({parent, v});
  }
  const std::size_t interactions = n / 5;
  std::uniform_int_distribution<NodeId> pick(0, static_cast<NodeId>(n - 1));
  for (std::size_t i = 0; i < interactions && n > 1; ++i) {
    NodeId a = pick(rng), b = pick(rng);
    if (a != b) g.edges.push_back({a, b});
  }
  return g;
}

inline void add_burst_cue(Rng &rng, Graph &g, double intensity) {
  const auto children = static_cast<std::size_t>(std::lround(3.0 + 5.0 * intensity));
  const auto spawner = std::uniform_int_distribution<NodeId>(0, static_cast<NodeId>(g.node_count - 1))(rng);
  for (std::size_t c = 0; c < children; ++c) {
    g.edges.push_back({spawner, static_cast<NodeId>(g.node_count)});
    ++g.node_count;
  }
}

} // namespace synth

inline std::string describe(const GenSpec &s) {
  return "source=synthetic mode=" + to_string(s.mode) + " strength=" + detail::format_double(s.strength) +
         " entropy_shift=" + detail::format_double(s.entropy_shift) + " n=" + std::to_string(s.n_samples) +
         " balance=" + detail::format_double(s.balance) + " seed=" + std::to_string(s.seed) +
         " fcg=" + std::to_string(s.fcg_min) + ".." + std::to_string(s.fcg_max) +
         " pcg=" + std::to_string(s.pcg_min) + ".." + std::to_string(s.pcg_max) + "\n";
}

inline Dataset generate(const GenSpec &spec) {
  validate(spec);
  const auto n_mal = static_cast<std::size_t>(std::lround(spec.balance * static_cast<double>(spec.n_samples)));
  std::vector<Label> labels(spec.n_samples, Label::Benign);
  std::fill(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(n_mal), Label::Malicious);
  synth::Rng order_rng(mix_seed(spec.seed, 0));
  std::shuffle(labels.begin(), labels.end(), order_rng);

  Dataset ds;
  ds.provenance = describe(spec);
  ds.samples.reserve(spec.n_samples);
  for (std::size_t i = 0; i < spec.n_samples; ++i) {
    synth::Rng rng(mix_seed(spec.seed, 1000 + i));
    const bool malicious = labels[i] == Label::Malicious;

    bool fcg_cue = false, pcg_cue = false;
    double intensity = spec.strength;
    if (malicious) {
      switch (spec.mode) {
      case SignalMode::FcgOnly: fcg_cue = true; break;
      case SignalMode::PcgOnly: pcg_cue = true; break;
      case SignalMode::Complementary:
        if (synth::coin(rng, spec.strength)) (synth::coin(rng, 0.5) ? fcg_cue : pcg_cue) = true;
        intensity = 1.0;
        break;
      }
    }

    SamplePair s;
    s.id = detail::sprintf("syn-%05zu", i);
    s.label = labels[i];
    s.fcg = synth::call_graph(rng, synth::uniform_size(rng, spec.fcg_min, spec.fcg_max));
    if (fcg_cue) synth::add_hub_cue(rng, s.fcg, intensity);
    s.pcg = synth::process_graph(rng, synth::uniform_size(rng, spec.pcg_min, spec.pcg_max),
                                 pcg_cue ? 0.3 + 0.6 * intensity : 0.0);
    if (pcg_cue) synth::add_burst_cue(rng, s.pcg, intensity);
    s.fcg = canonicalize(std::move(s.fcg));
    s.pcg = canonicalize(std::move(s.pcg));

    const double a = malicious ? 5.0 + 10.0 * spec.entropy_shift : 5.0;
    s.entropy = 8.0 * synth::beta(rng, a, 3.0);
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

} // namespace gemini
