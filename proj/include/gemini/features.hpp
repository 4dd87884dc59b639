#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "gemini/error.hpp"
#include "gemini/graph.hpp"

namespace gemini {

using Matrix = Eigen::MatrixXd;

enum class FeatureMode { LDP, Entropy, LdpEntropy };

inline constexpr Eigen::Index feature_width(FeatureMode m) {
  switch (m) {
  case FeatureMode::LDP: return 5;
  case FeatureMode::Entropy: return 1;
  case FeatureMode::LdpEntropy: return 6;
  }
  return 0;
}

inline std::string to_string(FeatureMode m) {
  switch (m) {
  case FeatureMode::LDP: return "ldp";
  case FeatureMode::Entropy: return "entropy";
  case FeatureMode::LdpEntropy: return "ldp+entropy";
  }
  return "?";
}

inline FeatureMode parse_feature_mode(std::string_view s) {
  if (s == "ldp") return FeatureMode::LDP;
  if (s == "entropy") return FeatureMode::Entropy;
  if (s == "ldp+entropy" || s == "ldp_entropy") return FeatureMode::LdpEntropy;
  throw ValidationError("unknown feature mode '" + std::string(s) + "'");
}

/// Shannon entropy of a byte string in bits per byte, in [0, 8].
inline double shannon_entropy(std::span<const std::uint8_t> bytes) {
  if (bytes.empty()) throw ValidationError("entropy of an empty byte sequence is undefined");
  std::array<std::size_t, 256> counts{};
  for (std::uint8_t b : bytes) ++counts[b];
  const double n = static_cast<double>(bytes.size());
  double h = 0.0;
  for (std::size_t c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / n;
    h -= p * std::log2(p);
  }
  return h < 0.0 ? 0.0 : h;
}

inline double shannon_entropy(std::string_view bytes) {
  return shannon_entropy(std::span<const std::uint8_t>(
      reinterpret_cast<const std::uint8_t *>(bytes.data()), bytes.size()));
}

/// Neighbor lists of the undirected simple view of g. A self-loop makes a
/// node its own neighbor; reciprocal and repeated edges collapse.
inline std::vector<std::vector<NodeId>> undirected_neighbors(const Graph &g) {
  std::vector<std::vector<NodeId>> nbrs(g.node_count);
  for (const Edge &e : g.edges) {
    nbrs[e.source].push_back(e.target);
    if (e.source != e.target) nbrs[e.target].push_back(e.source);
  }
  for (auto &list : nbrs) {
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());
  }
  return nbrs;
}

/// Local Degree Profile: per node [deg, min, max, mean, std] where the
/// statistics run over the degrees of its neighbors. std is the population
/// standard deviation; nodes without neighbors get all zeros.
inline Matrix local_degree_profile(const Graph &g) {
  validate(g);
  const auto nbrs = undirected_neighbors(g);
  const auto n = static_cast<Eigen::Index>(g.node_count);
  Matrix out = Matrix::Zero(n, 5);
  for (Eigen::Index v = 0; v < n; ++v) {
    const auto &list = nbrs[static_cast<std::size_t>(v)];
    out(v, 0) = static_cast<double>(list.size());
    if (list.empty()) continue;
    double lo = 1e300, hi = -1e300, sum = 0.0;
    for (NodeId u : list) {
      const double d = static_cast<double>(nbrs[u].size());
      lo = std::min(lo, d);
      hi = std::max(hi, d);
      sum += d;
    }
    const double k = static_cast<double>(list.size());
    const double mean = sum / k;
    double var = 0.0;
    for (NodeId u : list) {
      const double diff = static_cast<double>(nbrs[u].size()) - mean;
      var += diff * diff;
    }
    out(v, 1) = lo;
    out(v, 2) = hi;
    out(v, 3) = mean;
    out(v, 4) = std::sqrt(var / k);
  }
  return out;
}

/// Initial node features. The file entropy is broadcast to every node and,
/// for LdpEntropy, appended after the five LDP columns.
inline Matrix build_features(const Graph &g, double entropy, FeatureMode mode) {
  if (!(entropy >= 0.0 && entropy <= 8.0)) throw ValidationError("entropy must lie in [0, 8]");
  const auto n = static_cast<Eigen::Index>(g.node_count);
  switch (mode) {
  case FeatureMode::LDP: return local_degree_profile(g);
  case FeatureMode::Entropy: validate(g); return Matrix::Constant(n, 1, entropy);
  case FeatureMode::LdpEntropy: {
    Matrix out(n, 6);
    out.leftCols(5) = local_degree_profile(g);
    out.col(5).setConstant(entropy);
    return out;
  }
  }
  return {};
}

} // namespace gemini
