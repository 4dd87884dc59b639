#pragma once

// Sparse message-passing operators. Directed edges are symmetrized; the
// GCN/SGC operator additionally adds one self-loop per node:
//
//   GCN, SGC   D~^-1/2 (A + I) D~^-1/2
//   GIN        I + A                      (epsilon fixed at 0)
//   SAGE       D^-1 A                     (neighbor mean, zero row if isolated)
//   MLP        none
//
// A is the 0/1 adjacency of the undirected view, so a self-loop present in
// the data sets A(v,v) = 1 and the GCN diagonal becomes 2.

#include <cmath>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "gemini/config.hpp"
#include "gemini/features.hpp"
#include "gemini/graph.hpp"

namespace gemini {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using RowVector = Eigen::RowVectorXd;

inline SparseMatrix gcn_operator(const Graph &g) {
  const auto nbrs = undirected_neighbors(g);
  const auto n = static_cast<Eigen::Index>(g.node_count);
  std::vector<double> inv_sqrt(g.node_count);
  for (std::size_t v = 0; v < g.node_count; ++v)
    inv_sqrt[v] = 1.0 / std::sqrt(static_cast<double>(nbrs[v].size() + 1));
  std::vector<Eigen::Triplet<double>> trips;
  for (std::size_t v = 0; v < g.node_count; ++v) {
    trips.emplace_back(v, v, inv_sqrt[v] * inv_sqrt[v]);
    for (NodeId u : nbrs[v]) trips.emplace_back(v, u, inv_sqrt[v] * inv_sqrt[u]);
  }
  SparseMatrix m(n, n);
  m.setFromTriplets(trips.begin(), trips.end()); // duplicates (the self-loop case) are summed
  return m;
}

inline SparseMatrix sum_operator(const Graph &g) {
  const auto nbrs = undirected_neighbors(g);
  const auto n = static_cast<Eigen::Index>(g.node_count);
  std::vector<Eigen::Triplet<double>> trips;
  for (std::size_t v = 0; v < g.node_count; ++v) {
    trips.emplace_back(v, v, 1.0);
    for (NodeId u : nbrs[v]) trips.emplace_back(v, u, 1.0);
  }
  SparseMatrix m(n, n);
  m.setFromTriplets(trips.begin(), trips.end());
  return m;
}

inline SparseMatrix mean_operator(const Graph &g) {
  const auto nbrs = undirected_neighbors(g);
  const auto n = static_cast<Eigen::Index>(g.node_count);
  std::vector<Eigen::Triplet<double>> trips;
  for (std::size_t v = 0; v < g.node_count; ++v) {
    const double w = nbrs[v].empty() ? 0.0 : 1.0 / static_cast<double>(nbrs[v].size());
    for (NodeId u : nbrs[v]) trips.emplace_back(v, u, w);
  }
  SparseMatrix m(n, n);
  m.setFromTriplets(trips.begin(), trips.end());
  return m;
}

// Aggregation operator for one architecture, plus its transpose for the
// backward pass.
struct Propagator {
  ArchKind arch = ArchKind::MLP;
  Eigen::Index node_count = 0;
  SparseMatrix op;
  SparseMatrix op_t;

  Propagator() = default;
  Propagator(ArchKind a, const Graph &g) : arch(a), node_count(static_cast<Eigen::Index>(g.node_count)) {
    validate(g);
    switch (a) {
    case ArchKind::GCN:
    case ArchKind::SGC: op = gcn_operator(g); break;
    case ArchKind::GIN: op = sum_operator(g); break;
    case ArchKind::SAGE: op = mean_operator(g); break;
    case ArchKind::MLP: return;
    }
    op_t = op.transpose();
  }

  Matrix apply(const Matrix &h) const { return op * h; }
  Matrix apply_transpose(const Matrix &h) const { return op_t * h; }
};

inline Matrix relu(const Matrix &x) { return x.cwiseMax(0.0); }

inline Matrix relu_backward(const Matrix &grad_out, const Matrix &pre) {
  return (pre.array() > 0.0).select(grad_out, 0.0);
}

} // namespace gemini
