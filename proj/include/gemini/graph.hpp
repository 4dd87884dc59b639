#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "gemini/error.hpp"

namespace gemini {

using NodeId = std::uint32_t;

struct Edge {
  NodeId source = 0;
  NodeId target = 0;

  friend bool operator==(const Edge &, const Edge &) = default;
  friend auto operator<=>(const Edge &, const Edge &) = default;
};

// Directed graph over nodes 0..node_count-1. Function call graphs and
// process call graphs share this representation.
struct Graph {
  std::size_t node_count = 1;
  std::vector<Edge> edges;
  bool directed = true;

  friend bool operator==(const Graph &, const Graph &) = default;
};

inline void validate(const Graph &g) {
  if (g.node_count == 0)
    throw ValidationError("graph must have at least one node");
  for (std::size_t i = 0; i < g.edges.size(); ++i) {
    const Edge &e = g.edges[i];
    for (NodeId end : {e.source, e.target}) {
      if (end >= g.node_count)
        throw ValidationError(detail::sprintf("edge %zu endpoint %u >= node_count %zu", i,
                                              static_cast<unsigned>(end), g.node_count));
    }
  }
}

// Sorts edges by (source, target) and drops exact duplicates. Self-loops stay.
inline Graph canonicalize(Graph g) {
  validate(g);
  std::sort(g.edges.begin(), g.edges.end());
  g.edges.erase(std::unique(g.edges.begin(), g.edges.end()), g.edges.end());
  return g;
}

inline bool is_canonical(const Graph &g) {
  return std::adjacent_find(g.edges.begin(), g.edges.end(),
                            [](const Edge &a, const Edge &b) { return !(a < b); }) ==
         g.edges.end();
}

// Disjoint union: g2's node i becomes i + g1.node_count. No edges are added
// between the two components.
inline Graph merge_graphs(const Graph &g1, const Graph &g2) {
  validate(g1);
  validate(g2);
  Graph out;
  out.node_count = g1.node_count + g2.node_count;
  out.edges = g1.edges;
  out.edges.reserve(g1.edges.size() + g2.edges.size());
  const auto offset = static_cast<NodeId>(g1.node_count);
  for (const Edge &e : g2.edges)
    out.edges.push_back({e.source + offset, e.target + offset});
  return out;
}

enum class Label : int { Benign = 0, Malicious = 1 };

inline int to_int(Label l) { return static_cast<int>(l); }

inline Label label_from_int(long long v) {
  if (v != 0 && v != 1) throw ValidationError("label must be 0 or 1");
  return static_cast<Label>(v);
}

// One binary: its static call graph, its sandbox process graph and the
// byte entropy of the file.
struct SamplePair {
  std::string id;
  Label label = Label::Benign;
  Graph fcg;
  Graph pcg;
  double entropy = 0.0;

  friend bool operator==(const SamplePair &, const SamplePair &) = default;
};

struct Dataset {
  std::vector<SamplePair> samples;
  std::string provenance;

  friend bool operator==(const Dataset &, const Dataset &) = default;

  std::vector<Label> labels() const {
    std::vector<Label> out;
    out.reserve(samples.size());
    for (const auto &s : samples) out.push_back(s.label);
    return out;
  }
};

inline void validate(const Dataset &ds) {
  if (ds.samples.empty()) throw ValidationError("dataset is empty");
  std::unordered_set<std::string> ids;
  for (const auto &s : ds.samples) {
    if (!ids.insert(s.id).second) throw ValidationError("duplicate sample id '" + s.id + "'");
    if (!(s.entropy >= 0.0 && s.entropy <= 8.0))
      throw ValidationError("sample '" + s.id + "': entropy must lie in [0, 8]");
    label_from_int(to_int(s.label));
    validate(s.fcg);
    validate(s.pcg);
  }
}

} // namespace gemini
