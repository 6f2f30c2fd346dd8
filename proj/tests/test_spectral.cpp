#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <sstream>

#include "nlgt/graph.hpp"
#include "nlgt/spectral.hpp"
#include "nlgt/verify.hpp"

using namespace nlgt;

namespace {

HessianAggregate identity_hessian(Eigen::Index n, Eigen::Index m) {
  return HessianAggregate::from_blocks(std::vector<Matrix>(static_cast<std::size_t>(n), Matrix::Identity(m, m)));
}

Laplacian two_node(double w) {
  Matrix a(2, 2);
  a << 0, w, w, 0;
  return laplacian(WeightedGraph(a));
}

}  // namespace

TEST(Assemble, TwoNodeExampleMatrix) {
  const auto l = two_node(0.4);
  const auto mats = assemble(l, l, identity_hessian(2, 1), LinkGainSnapshot::uniform(2, 1.0), 0.1, 1);
  Matrix expected(4, 4);
  expected << -0.4, 0.4, -0.1, 0, 0.4, -0.4, 0, -0.1, -0.4, 0.4, -0.5, 0.4, 0.4, -0.4, 0.4, -0.5;
  EXPECT_LE((mats.Mg - expected).cwiseAbs().maxCoeff(), 1e-15);
  const auto rep = spectral_report(mats, 1);
  EXPECT_EQ(rep.zero_count, 1u);
  EXPECT_TRUE(rep.stable);
  EXPECT_LT(rep.max_nonzero_real, 0.0);
  EXPECT_NEAR(rep.lambda_under, 0.8, 1e-14);
}

TEST(Assemble, AlphaZeroHasTwoMZeros) {
  const auto l = laplacian(make_khop_ring(5, 1, 0.6));
  for (const Eigen::Index m : {1, 2}) {
    const auto mats = assemble(l, l, identity_hessian(5, m), LinkGainSnapshot::uniform(5 * m, 1.0), 0.0, m);
    const auto rep = spectral_report(mats, m);
    EXPECT_EQ(rep.zero_count, static_cast<std::size_t>(2 * m));
    EXPECT_FALSE(rep.stable);
  }
}

TEST(Assemble, UniformGainScalesMg0) {
  Rng rng(1);
  const auto l = laplacian(make_khop_ring(6, 2, 0.7));
  std::vector<Matrix> blocks;
  for (int i = 0; i < 6; ++i) blocks.push_back(random_spd(2, rng));
  const auto h = HessianAggregate::from_blocks(blocks);
  const auto one = assemble(l, l, h, LinkGainSnapshot::uniform(12, 1.0), 0.3, 2);
  const auto c = assemble(l, l, h, LinkGainSnapshot::uniform(12, 0.37), 0.3, 2);
  EXPECT_LE((c.Mg0 - 0.37 * one.M0).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_EQ(one.Mg0, one.M0);
  // identity gains reproduce the directly built linear matrix bit for bit
  EXPECT_EQ(one.Mg, linear_system_matrix(l, l, h, 0.3, 2));
}

TEST(Assemble, Rejections) {
  const auto l = two_node(0.4);
  EXPECT_THROW(assemble(l, l, identity_hessian(3, 1), LinkGainSnapshot::uniform(2, 1.0), 0.1, 1), InvalidInput);
  EXPECT_THROW(assemble(l, l, identity_hessian(2, 1), LinkGainSnapshot::uniform(3, 1.0), 0.1, 1), InvalidInput);
  EXPECT_THROW(assemble(l, l, identity_hessian(2, 1), LinkGainSnapshot::uniform(2, 1.0), -0.1, 1), InvalidInput);
}

TEST(Eigenvalues, SortedAndExactForTriangular) {
  Matrix a(3, 3);
  a << -3, 1, 2, 0, 1, 5, 0, 0, -1;
  const auto ev = eigenvalues(a);
  ASSERT_EQ(ev.size(), 3u);
  EXPECT_NEAR(ev[0].real(), -3, 1e-14);
  EXPECT_NEAR(ev[1].real(), -1, 1e-14);
  EXPECT_NEAR(ev[2].real(), 1, 1e-14);
  Matrix nan = Matrix::Zero(2, 2);
  nan(0, 0) = std::nan("");
  EXPECT_THROW(eigenvalues(nan), NumericalFailure);
}

TEST(EigenDerivative, IdentityHessian) {
  for (const int n : {3, 4, 7}) {
    const auto l = laplacian(make_khop_ring(static_cast<std::size_t>(n), 1, 0.5));
    const auto mats = assemble(l, l, identity_hessian(n, 1), LinkGainSnapshot::uniform(n, 1.0), 0.0, 1);
    const auto rep = eigen_derivative_check(mats, 1);
    EXPECT_TRUE(rep.pass) << rep.relative_error;
    ASSERT_EQ(rep.reduced_eigenvalues.size(), 2u);
    EXPECT_NEAR(rep.reduced_eigenvalues[0].real(), -n, 1e-12);
    EXPECT_NEAR(rep.reduced_eigenvalues[1].real(), 0.0, 1e-12);
    // the consensus mode moves with slope -1 (mean of the identity Hessians)
    EXPECT_NEAR(rep.predicted[0].real(), -1.0, 1e-12);
    EXPECT_NEAR(rep.predicted[1].real(), 0.0, 1e-12);
    EXPECT_NEAR(rep.finite_difference[0].real(), -1.0, 1e-6);
  }
}

TEST(EigenDerivative, QuadraticsGiveMeanHessian) {
  Rng rng(8);
  const auto l = laplacian(make_khop_ring(5, 2, 0.8));
  std::vector<Matrix> blocks;
  Matrix sum = Matrix::Zero(2, 2);
  for (int i = 0; i < 5; ++i) {
    blocks.push_back(random_spd(2, rng));
    sum += blocks.back();
  }
  const auto mats = assemble(l, l, HessianAggregate::from_blocks(blocks), LinkGainSnapshot::uniform(10, 1.0), 0.0, 2);
  const auto rep = eigen_derivative_check(mats, 2);
  EXPECT_TRUE(rep.pass) << rep.relative_error;
  auto expect = eigenvalues(Matrix(-sum / 5.0));
  Spectrum want = {0.0, 0.0};
  want.insert(want.end(), expect.begin(), expect.end());
  std::sort(want.begin(), want.end(), spectrum_less);
  EXPECT_LE(matching_distance(rep.predicted, want), 1e-10);
  const auto hs = eigenvalues(Matrix(-sum));
  EXPECT_LE(matching_distance(rep.hessian_sum_eigenvalues, hs), 1e-12);
}

TEST(EigenDerivative, RandomFixturesPass) {
  Rng rng(20);
  for (int k = 0; k < 40; ++k) {
    const auto fx = random_stability_fixture(rng);
    auto mats = fx.matrices();
    EXPECT_TRUE(eigen_derivative_check(mats, fx.m).pass) << k;
  }
}

TEST(Matching, Examples) {
  EXPECT_NEAR(matching_distance({0.0, -1.0}, {0.1, -1.05}), 0.1, 1e-15);
  EXPECT_NEAR(matching_distance({0.0, -1.0}, {-1.05, 0.1}), 0.1, 1e-15);
  EXPECT_EQ(matching_distance({}, {}), 0.0);
  EXPECT_THROW(matching_distance({0.0}, {0.0, 1.0}), InvalidInput);
  const Complex i(0, 1);
  EXPECT_NEAR(matching_distance({i, -i}, {-i, i}), 0.0, 0.0);
}

TEST(Matching, ShiftInvarianceAndBruteForce) {
  Rng rng(42);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.below(6);
    Spectrum a(n), b(n);
    for (auto& v : a) v = Complex(rng.uniform(-2, 2), rng.uniform(-2, 2));
    for (auto& v : b) v = Complex(rng.uniform(-2, 2), rng.uniform(-2, 2));
    const double d = matching_distance(a, b);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    double brute = std::numeric_limits<double>::infinity();
    do {
      double worst = 0.0;
      for (std::size_t k = 0; k < n; ++k) worst = std::max(worst, std::abs(a[k] - b[perm[k]]));
      brute = std::min(brute, worst);
    } while (std::next_permutation(perm.begin(), perm.end()));
    EXPECT_EQ(d, brute);
    const Complex shift(rng.uniform(-1, 1), rng.uniform(-1, 1));
    Spectrum as = a, bs = b;
    for (auto& v : as) v += shift;
    for (auto& v : bs) v += shift;
    EXPECT_NEAR(matching_distance(as, bs), d, 1e-14);
    EXPECT_EQ(matching_distance(a, b), matching_distance(b, a));
  }
}

TEST(StepSizeBounds, TightExamples) {
  EXPECT_DOUBLE_EQ(step_size_bounds(1, 1, 1, 0.5, 2, 4, 1).alpha_bar_tight, 0.5);
  EXPECT_DOUBLE_EQ(step_size_bounds(0.5, 1.5, 2, 1, 2, 4, 1).alpha_bar_tight, 0.25);
  EXPECT_THROW(step_size_bounds(0, 1, 1, 1, 1, 1, 1), InvalidInput);
  EXPECT_THROW(step_size_bounds(2, 1, 1, 1, 1, 1, 1), InvalidInput);
}

TEST(StepSizeBounds, MonotoneInSectorAndCurvature) {
  const auto base = step_size_bounds(0.5, 1.5, 2, 0.3, 1.7, 5, 1);
  const auto wider = step_size_bounds(0.2, 1.8, 2, 0.3, 1.7, 5, 1);
  const auto stiffer = step_size_bounds(0.5, 1.5, 4, 0.3, 1.7, 5, 1);
  for (const auto* b : {&wider, &stiffer}) {
    EXPECT_LT(b->alpha_bar_tight, base.alpha_bar_tight);
    EXPECT_LT(b->log10_alpha_bar_spectral, base.log10_alpha_bar_spectral);
    EXPECT_LE(b->alpha_bar_matching, base.alpha_bar_matching);
  }
  EXPECT_GT(base.alpha_bar_matching, 0.0);
  EXPECT_LE(base.matching_residual, 1e-9 * base.kappa * base.lambda_under);
  EXPECT_FALSE(base.matching_at_grid_edge);
}

TEST(StepSizeBounds, SpectralBoundSurvivesUnderflow) {
  const auto b = step_size_bounds(0.2, 1.8, 186, 0.339, 1.71, 200, 4);
  EXPECT_TRUE(std::isfinite(b.log10_alpha_bar_spectral));
  EXPECT_LT(b.log10_alpha_bar_spectral, -300);
}

TEST(Sweep, ZeroAlphaColumnIsUnstableAndBoundsAreConservative) {
  Rng rng(3);
  SweepFixture fx;
  fx.w = laplacian(make_khop_ring(5, 1, 0.8));
  fx.a = fx.w;
  std::vector<Matrix> blocks;
  for (int i = 0; i < 5; ++i) blocks.push_back(random_spd(1, rng));
  fx.hessian = HessianAggregate::from_blocks(blocks);
  const std::vector<double> alphas{0.0, 1e-3, 1e-2, 0.1, 1.0, 100.0};
  const std::vector<XiRegime> regimes{{"kappa", 0.5}, {"one", 1.0}, {"K", 1.5}};
  const auto cells = stability_sweep(fx, alphas, regimes, 0.05, 3);
  ASSERT_EQ(cells.size(), alphas.size() * regimes.size());
  for (std::size_t k = 0; k < cells.size(); ++k) {
    EXPECT_EQ(cells[k].alpha, alphas[k / 3]);
    EXPECT_EQ(cells[k].regime, regimes[k % 3].name);
    EXPECT_TRUE(cells[k].error.empty());
    if (cells[k].alpha == 0.0) {
      EXPECT_FALSE(cells[k].stable);
      EXPECT_EQ(cells[k].zero_count, 2u);
    }
  }
  const auto rep = spectral_report(assemble(fx.w, fx.a, fx.hessian, LinkGainSnapshot::uniform(5, 1.0), 0.0, 1), 1);
  const auto b = step_size_bounds(0.5, 1.5, fx.hessian.gamma, rep.lambda_under, rep.lambda_max, 5, 1);
  for (const auto& r : regimes) {
    EXPECT_GE(stability_frontier(cells, r.name, false), b.alpha_bar_tight);
    EXPECT_GE(stability_frontier(cells, r.name, true), b.alpha_bar_tight);
  }
  // large alpha destabilizes only the Euler discretization, the continuous spectrum stays left
  const auto& far = cells.back();
  EXPECT_TRUE(far.stable);
  EXPECT_FALSE(far.discrete_stable);
  std::ostringstream os;
  write_sweep_csv(os, cells);
  EXPECT_EQ(os.str().substr(0, os.str().find('\n')),
            "alpha,xi_regime,gain,zero_count,max_nonzero_real,stable,discrete_stable,error");
}

TEST(Sweep, FailingCellsAreRecorded) {
  SweepFixture fx;
  fx.w = laplacian(make_khop_ring(5, 1, 0.8));
  fx.a = fx.w;
  fx.hessian = HessianAggregate::from_blocks(std::vector<Matrix>(5, Matrix::Identity(1, 1)));
  const auto cells = stability_sweep(fx, {0.1, -1.0}, {{"one", 1.0}, {"nan", std::nan("")}});
  ASSERT_EQ(cells.size(), 4u);
  EXPECT_TRUE(cells[0].error.empty());
  EXPECT_FALSE(cells[1].error.empty());
  EXPECT_FALSE(cells[2].error.empty());
  EXPECT_FALSE(cells[3].error.empty());
  EXPECT_EQ(stability_frontier(cells, "nan", false), 0.0);
}

TEST(Sweep, SignErrorMutantIsDetected) {
  Rng rng(77);
  int caught = 0;
  for (int k = 0; k < 30; ++k) {
    const auto fx = random_stability_fixture(rng);
    auto mats = fx.matrices();
    EXPECT_TRUE(spectral_report(mats, fx.m).stable);
    inject_sign_error(mats);
    caught += spectral_report(mats, fx.m).stable ? 0 : 1;
  }
  EXPECT_EQ(caught, 30);
}
