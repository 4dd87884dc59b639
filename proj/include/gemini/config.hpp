#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "gemini/error.hpp"
#include "gemini/features.hpp"

namespace gemini {

enum class ArchKind { GCN, GIN, SAGE, SGC, MLP };
enum class GraphType { FCG, PCG, Merged, Dual };
enum class JoinMode { WeightedSum, Merged, None };
enum class SchedulerKind { OneCycle, Plateau };

inline std::string to_string(ArchKind a) {
  switch (a) {
  case ArchKind::GCN: return "GCN";
  case ArchKind::GIN: return "GIN";
  case ArchKind::SAGE: return "SAGE";
  case ArchKind::SGC: return "SGC";
  case ArchKind::MLP: return "MLP";
  }
  return "?";
}

inline ArchKind parse_arch(std::string_view s) {
  if (s == "gcn" || s == "GCN") return ArchKind::GCN;
  if (s == "gin" || s == "GIN") return ArchKind::GIN;
  if (s == "sage" || s == "SAGE" || s == "graphsage") return ArchKind::SAGE;
  if (s == "sgc" || s == "SGC") return ArchKind::SGC;
  if (s == "mlp" || s == "MLP") return ArchKind::MLP;
  throw ValidationError("unknown architecture '" + std::string(s) + "'");
}

inline std::string to_string(GraphType g) {
  switch (g) {
  case GraphType::FCG: return "fcg";
  case GraphType::PCG: return "pcg";
  case GraphType::Merged: return "merged";
  case GraphType::Dual: return "dual";
  }
  return "?";
}

inline GraphType parse_graph_type(std::string_view s) {
  if (s == "fcg") return GraphType::FCG;
  if (s == "pcg") return GraphType::PCG;
  if (s == "merged") return GraphType::Merged;
  if (s == "dual") return GraphType::Dual;
  throw ValidationError("unknown graph type '" + std::string(s) + "'");
}

inline std::string to_string(JoinMode j) {
  switch (j) {
  case JoinMode::WeightedSum: return "wsum";
  case JoinMode::Merged: return "merged";
  case JoinMode::None: return "none";
  }
  return "?";
}

inline JoinMode parse_join_mode(std::string_view s) {
  if (s == "wsum") return JoinMode::WeightedSum;
  if (s == "merged") return JoinMode::Merged;
  if (s == "none") return JoinMode::None;
  throw ValidationError("unknown join mode '" + std::string(s) + "'");
}

inline JoinMode join_mode_for(GraphType g) {
  switch (g) {
  case GraphType::Dual: return JoinMode::WeightedSum;
  case GraphType::Merged: return JoinMode::Merged;
  default: return JoinMode::None;
  }
}

inline std::string to_string(SchedulerKind s) {
  return s == SchedulerKind::OneCycle ? "OneCycleLR" : "ReduceLROnPlateau";
}

inline SchedulerKind parse_scheduler(std::string_view s) {
  if (s == "onecycle" || s == "OneCycleLR") return SchedulerKind::OneCycle;
  if (s == "plateau" || s == "ReduceLROnPlateau") return SchedulerKind::Plateau;
  throw ValidationError("unknown scheduler '" + std::string(s) + "'");
}

struct TrainConfig {
  int epochs = 100;
  int batch_size = 32;
  double base_lr = 1e-3;
  std::uint64_t seed = 0;
  SchedulerKind scheduler = SchedulerKind::OneCycle;
  // OneCycle peaks at base_lr * onecycle_peak_factor.
  double onecycle_peak_factor = 1.0;
  double plateau_factor = 0.5;
  int plateau_patience = 10;
  double plateau_threshold = 1e-4;
  double plateau_min_lr = 1e-6;
};

inline void validate(const TrainConfig &t) {
  if (t.epochs < 1) throw ValidationError("epochs must be >= 1");
  if (t.batch_size < 1) throw ValidationError("batch_size must be >= 1");
  if (!(t.base_lr > 0.0)) throw ValidationError("base_lr must be > 0");
  if (!(t.onecycle_peak_factor > 0.0)) throw ValidationError("onecycle peak factor must be > 0");
}

// One cell of a configuration grid.
struct ModelConfig {
  GraphType graph_type = GraphType::Dual;
  FeatureMode feature = FeatureMode::LdpEntropy;
  ArchKind arch = ArchKind::GCN;
  JoinMode join = JoinMode::WeightedSum;
  int layers = 2;
  int fc = 2;
  int dim = 32;
  double dropout = 0.5;
  TrainConfig train;

  SchedulerKind scheduler() const { return train.scheduler; }
  Eigen::Index input_width() const { return feature_width(feature); }
  int branch_count() const { return graph_type == GraphType::Dual ? 2 : 1; }
};

inline ModelConfig make_config(GraphType g, FeatureMode f, ArchKind a, int layers, int fc, int dim,
                               SchedulerKind sched) {
  ModelConfig c;
  c.graph_type = g;
  c.feature = f;
  c.arch = a;
  c.join = join_mode_for(g);
  c.layers = layers;
  c.fc = fc;
  c.dim = dim;
  c.train.scheduler = sched;
  return c;
}

inline void validate(const ModelConfig &c) {
  if (c.join != join_mode_for(c.graph_type))
    throw ValidationError("join_embeddings '" + to_string(c.join) + "' does not match graph type '" +
                          to_string(c.graph_type) + "'");
  if (c.layers < 1) throw ValidationError("layer count must be >= 1");
  if (c.fc < 1) throw ValidationError("fc count must be >= 1");
  if (c.dim < 1) throw ValidationError("hidden dim must be >= 1");
  if (!(c.dropout >= 0.0 && c.dropout < 1.0)) throw ValidationError("dropout must lie in [0, 1)");
  validate(c.train);
}

// Stable textual form of every setting that influences a run, seed excluded.
inline std::string canonical_string(const ModelConfig &c) {
  const TrainConfig &t = c.train;
  return "graph_type=" + to_string(c.graph_type) + ";feature=" + to_string(c.feature) +
         ";model_arch=" + to_string(c.arch) + ";join_embeddings=" + to_string(c.join) +
         ";layer=" + std::to_string(c.layers) + ";fc=" + std::to_string(c.fc) +
         ";dim=" + std::to_string(c.dim) + ";dropout=" + detail::format_double(c.dropout) +
         ";scheduler=" + to_string(t.scheduler) + ";epochs=" + std::to_string(t.epochs) +
         ";batch_size=" + std::to_string(t.batch_size) + ";base_lr=" + detail::format_double(t.base_lr) +
         ";onecycle_peak_factor=" + detail::format_double(t.onecycle_peak_factor) +
         ";plateau=" + detail::format_double(t.plateau_factor) + "/" +
         std::to_string(t.plateau_patience) + "/" + detail::format_double(t.plateau_threshold) + "/" +
         detail::format_double(t.plateau_min_lr) + ";pool=mean;optimizer=adam";
}

// FNV-1a 64.
inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t fingerprint(const ModelConfig &c) { return fnv1a(canonical_string(c)); }

inline std::string fingerprint_hex(const ModelConfig &c) {
  return detail::sprintf("%016llx", static_cast<unsigned long long>(fingerprint(c)));
}

// Derives independent stream seeds (splitmix64 finalizer).
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

} // namespace gemini
