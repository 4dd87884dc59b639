#include <gtest/gtest.h>

#include "gemini/propagation.hpp"
#include "support.hpp"

using namespace gemini;
using gemini::testing::Rng;

TEST(Propagation, MatchesDenseOperator) {
  Rng rng(41);
  for (ArchKind arch : gemini::testing::all_archs()) {
    for (int i = 0; i < 40; ++i) {
      const std::size_t n = 1 + rng() % 30;
      const Graph g = gemini::testing::random_graph(rng, n, rng() % (3 * n + 1), 0.1);
      const Matrix h = Matrix::Random(static_cast<Eigen::Index>(n), 3);
      const Propagator p(arch, g);
      const Matrix dense = gemini::testing::dense_operator(arch, g);
      if (arch == ArchKind::MLP) continue;
      EXPECT_LE((p.apply(h) - dense * h).cwiseAbs().maxCoeff(), 1e-10) << to_string(arch);
      EXPECT_LE((p.apply_transpose(h) - dense.transpose() * h).cwiseAbs().maxCoeff(), 1e-10) << to_string(arch);
    }
  }
}

TEST(Propagation, GcnHandExample) {
  // Path 0-1-2: degrees with self-loop 2, 3, 2.
  Graph g;
  g.node_count = 3;
  g.edges = {{0, 1}, {2, 1}};
  const Matrix a = Matrix(gcn_operator(g));
  EXPECT_NEAR(a(0, 0), 0.5, 1e-15);
  EXPECT_NEAR(a(0, 1), 1.0 / std::sqrt(6.0), 1e-15);
  EXPECT_NEAR(a(1, 1), 1.0 / 3.0, 1e-15);
  EXPECT_EQ(a(0, 2), 0.0);
}

TEST(Propagation, DataSelfLoopDoublesGcnDiagonal) {
  Graph g;
  g.node_count = 1;
  g.edges = {{0, 0}};
  // (A + I)(0,0) = 2 and the degree is 2, so the normalized entry is 1.
  EXPECT_NEAR(Matrix(gcn_operator(g))(0, 0), 1.0, 1e-15);
  EXPECT_NEAR(Matrix(sum_operator(g))(0, 0), 2.0, 1e-15);
}

TEST(Propagation, SageIsolatedRowIsZero) {
  Graph g;
  g.node_count = 3;
  g.edges = {{0, 1}};
  const Matrix m = Matrix(mean_operator(g));
  EXPECT_TRUE(m.row(2).isZero(0.0));
  EXPECT_NEAR(m.row(0).sum(), 1.0, 1e-15);
}

TEST(Propagation, GcnIsSymmetric) {
  Rng rng(43);
  for (int i = 0; i < 20; ++i) {
    const Graph g = gemini::testing::random_graph(rng, 2 + i, 3 * i);
    const Matrix a = Matrix(gcn_operator(g));
    EXPECT_LE((a - a.transpose()).cwiseAbs().maxCoeff(), 1e-15);
  }
}

TEST(Relu, ForwardAndBackward) {
  Matrix x(1, 3);
  x << -1.0, 0.0, 2.0;
  EXPECT_EQ(relu(x), (Matrix(1, 3) << 0.0, 0.0, 2.0).finished());
  EXPECT_EQ(relu_backward(Matrix::Ones(1, 3), x), (Matrix(1, 3) << 0.0, 0.0, 1.0).finished());
}
