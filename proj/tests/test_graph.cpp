#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "nlgt/graph.hpp"
#include "nlgt/spectral.hpp"

using namespace nlgt;

TEST(KhopRing, RejectsHopRadiusWithoutRoom) {
  EXPECT_THROW(make_khop_ring(2, 1, 0.8), InvalidInput);
  EXPECT_THROW(make_khop_ring(5, 3, 0.8), InvalidInput);
  EXPECT_THROW(make_khop_ring(5, 0, 0.8), InvalidInput);
}

TEST(KhopRing, RejectsTotalWeightOutsideUnitInterval) {
  EXPECT_THROW(make_khop_ring(5, 1, 0.0), InvalidInput);
  EXPECT_THROW(make_khop_ring(5, 1, 1.0), InvalidInput);
}

TEST(KhopRing, FiveRingHasWeightPointFour) {
  const auto g = make_khop_ring(5, 1, 0.8);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_DOUBLE_EQ(g.weight(i, (i + 1) % 5), 0.4);
    EXPECT_DOUBLE_EQ(g.weight(i, (i + 4) % 5), 0.4);
    EXPECT_EQ(g.weight(i, (i + 2) % 5), 0.0);
    EXPECT_NEAR(g.weights().row(static_cast<Eigen::Index>(i)).sum(), 0.8, 1e-15);
  }
}

TEST(KhopRing, TwoHopOnFiveNodesIsComplete) {
  const auto g = make_khop_ring(5, 2, 0.8);
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t j = 0; j < 5; ++j) EXPECT_DOUBLE_EQ(g.weight(i, j), i == j ? 0.0 : 0.2);
    EXPECT_NEAR(g.weights().row(static_cast<Eigen::Index>(i)).sum(), 0.8, 1e-15);
  }
  EXPECT_TRUE(g.symmetric());
}

TEST(KhopRing, DirectedVariantIsBalancedButNotSymmetric) {
  const auto g = make_khop_ring(6, 2, 0.8, true);
  EXPECT_FALSE(g.symmetric());
  EXPECT_TRUE(check_weight_balanced(g.weights()).balanced);
  EXPECT_TRUE(is_strongly_connected(g.weights()));
}

TEST(WeightedGraph, RejectsInvalidMatrices) {
  Matrix neg = Matrix::Zero(2, 2);
  neg(0, 1) = -0.1;
  neg(1, 0) = -0.1;
  EXPECT_THROW(WeightedGraph{neg}, InvalidInput);
  Matrix heavy = Matrix::Constant(2, 2, 1.0);
  heavy.diagonal().setZero();
  EXPECT_THROW(WeightedGraph{heavy}, InvalidInput);
  Matrix loop = Matrix::Zero(2, 2);
  loop(0, 1) = loop(1, 0) = 0.3;
  loop(0, 0) = 0.1;
  EXPECT_THROW(WeightedGraph{loop}, InvalidInput);
  Matrix split = Matrix::Zero(4, 4);
  split(0, 1) = split(1, 0) = split(2, 3) = split(3, 2) = 0.5;
  EXPECT_THROW(WeightedGraph{split}, InvalidInput);
}

TEST(Laplacian, TwoNodeGraph) {
  Matrix w = Matrix::Zero(2, 2);
  w(0, 1) = w(1, 0) = 0.5;
  const Matrix l = laplacian(WeightedGraph(w)).matrix();
  Matrix expected(2, 2);
  expected << -0.5, 0.5, 0.5, -0.5;
  EXPECT_EQ(l, expected);
  const auto ev = eigenvalues(l);
  EXPECT_NEAR(ev[0].real(), -1.0, 1e-14);
  EXPECT_NEAR(std::abs(ev[1]), 0.0, 1e-14);
}

TEST(Laplacian, FiveRingMatchesCirculantFormula) {
  const auto ev = eigenvalues(laplacian(make_khop_ring(5, 1, 0.8)).matrix());
  Spectrum expected;
  for (int j = 0; j < 5; ++j) expected.emplace_back(-0.8 * (1.0 - std::cos(2.0 * std::numbers::pi * j / 5.0)), 0.0);
  EXPECT_LT(matching_distance(ev, expected), 1e-13);
}

TEST(Laplacian, RowsAndColumnsSumToZeroOverRandomSeeds) {
  for (std::uint64_t seed = 0; seed < 120; ++seed) {
    Rng rng(seed);
    const std::size_t n = 3 + rng.below(10);
    const std::size_t k = 1 + rng.below((n - 1) / 2);
    const auto g = make_khop_ring(n, k, rng.uniform(0.1, 0.99)).permuted(random_permutation(n, rng));
    const Matrix l = laplacian(g).matrix();
    EXPECT_LT(l.rowwise().sum().cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_LT(l.colwise().sum().cwiseAbs().maxCoeff(), 1e-14);
    const auto ev = eigenvalues(l);
    std::size_t zeros = 0;
    for (const auto& v : ev) {
      if (std::abs(v) < 1e-9 * l.norm()) {
        ++zeros;
      } else {
        EXPECT_LT(v.real(), 0.0);
      }
    }
    EXPECT_EQ(zeros, 1u) << "seed " << seed;
  }
}

TEST(WeightBalance, Examples) {
  Matrix sym(3, 3);
  sym << 0, 0.2, 0.1, 0.2, 0, 0.3, 0.1, 0.3, 0;
  auto r = check_weight_balanced(sym);
  EXPECT_TRUE(r.balanced);
  EXPECT_EQ(r.max_imbalance, 0.0);

  Matrix cyc = Matrix::Zero(3, 3);
  cyc(1, 0) = cyc(2, 1) = cyc(0, 2) = 0.3;
  r = check_weight_balanced(cyc);
  EXPECT_TRUE(r.balanced);
  EXPECT_EQ(r.max_imbalance, 0.0);

  Matrix one = Matrix::Zero(3, 3);
  one(1, 0) = 0.3;
  r = check_weight_balanced(one);
  EXPECT_FALSE(r.balanced);
  EXPECT_DOUBLE_EQ(r.max_imbalance, 0.3);
}

TEST(WeightBalance, RemovingABidirectionalLinkKeepsBalance) {
  Matrix w = make_khop_ring(7, 2, 0.8).weights();
  w(0, 1) = w(1, 0) = 0.0;
  EXPECT_TRUE(check_weight_balanced(w).balanced);
  EXPECT_TRUE(is_strongly_connected(w));
}

TEST(Schedule, FixedModeReturnsBase) {
  const auto g = make_khop_ring(6, 2, 0.8);
  const auto s = SwitchingSchedule::fixed(g);
  EXPECT_EQ(s.graph_at(0.0), g);
  EXPECT_EQ(s.graph_at(123.456), g);
}

TEST(Schedule, PiecewiseConstantWithinInterval) {
  const SwitchingSchedule s(make_khop_ring(7, 1, 0.8), 0.001, 42, SwitchMode::permute);
  for (int k = 0; k < 50; ++k) {
    const double t = k * 0.001;
    EXPECT_EQ(s.graph_at(t), s.graph_at(t + 0.0005)) << k;
  }
}

TEST(Schedule, DeterministicAndActuallySwitching) {
  const SwitchingSchedule a(make_khop_ring(7, 1, 0.8), 0.001, 42, SwitchMode::permute);
  const SwitchingSchedule b(make_khop_ring(7, 1, 0.8), 0.001, 42, SwitchMode::permute);
  std::size_t changes = 0;
  for (int k = 0; k < 30; ++k) {
    const double t = k * 0.001 + 0.0003;
    EXPECT_EQ(a.graph_at(t).weights(), b.graph_at(t).weights());
    EXPECT_TRUE(graph_violations(a.graph_at(t).weights()).empty());
    if (k > 0 && !(a.graph_at(t) == a.graph_at(t - 0.001))) ++changes;
  }
  EXPECT_GT(changes, 20u);
}

TEST(Schedule, IntervalBoundaryBelongsToNextInterval) {
  const SwitchingSchedule s(make_khop_ring(5, 1, 0.8), 0.001, 1, SwitchMode::permute);
  EXPECT_EQ(s.interval_at(0.003), 3u);
  EXPECT_EQ(s.interval_at(0.0029999), 2u);
  EXPECT_THROW(s.interval_at(-1.0), InvalidInput);
}

TEST(EdgeList, RoundTripAndErrors) {
  const auto g = make_khop_ring(6, 2, 0.7, true);
  std::stringstream ss;
  write_edge_list(ss, g);
  EXPECT_EQ(read_edge_list(ss), g);

  std::istringstream bad_header("nodes 3\n");
  EXPECT_THROW(read_edge_list(bad_header), InvalidInput);
  std::istringstream bad_index("n 2\n0 5 0.3\n");
  EXPECT_THROW(read_edge_list(bad_index), InvalidInput);
  std::istringstream unbalanced("n 2\n0 1 0.3\n");
  EXPECT_THROW(read_edge_list(unbalanced), InvalidInput);
}
