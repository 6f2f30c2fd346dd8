#pragma once

// Randomized property corpus behind `nlgt verify`, plus the fixture
// generator shared with the acceptance suite.

#include <algorithm>
#include <cmath>
#include <functional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "nlgt/cost.hpp"
#include "nlgt/engine.hpp"
#include "nlgt/graph.hpp"
#include "nlgt/nonlinear.hpp"
#include "nlgt/random.hpp"
#include "nlgt/spectral.hpp"
#include "nlgt/svmlab.hpp"

namespace nlgt {

/// Weight-balanced digraph: a weighted sum of random Hamiltonian cycles
/// (each a permutation matrix without fixed points), total weight below one.
inline WeightedGraph random_balanced_digraph(std::size_t n, Rng& rng) {
  const auto N = static_cast<Eigen::Index>(n);
  Matrix w = Matrix::Zero(N, N);
  const std::size_t cycles = 1 + rng.below(3);
  const double total = rng.uniform(0.3, 0.95);
  std::vector<double> share(cycles);
  double s = 0.0;
  for (auto& v : share) s += (v = rng.uniform(0.2, 1.0));
  for (std::size_t c = 0; c < cycles; ++c) {
    const auto order = random_permutation(n, rng);
    for (std::size_t k = 0; k < n; ++k) {
      const auto i = static_cast<Eigen::Index>(order[k]);
      const auto j = static_cast<Eigen::Index>(order[(k + 1) % n]);
      w(i, j) += total * share[c] / s;
    }
  }
  return WeightedGraph(std::move(w));
}

/// Random symmetric positive definite m x m block with spectrum in [lo, hi].
inline Matrix random_spd(Eigen::Index m, Rng& rng, double lo = 0.5, double hi = 3.0) {
  Matrix a(m, m);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = rng.normal();
  const Eigen::HouseholderQR<Matrix> qr(a);
  const Matrix q = qr.householderQ();
  Vector d(m);
  for (Eigen::Index i = 0; i < m; ++i) d[i] = rng.uniform(lo, hi);
  Matrix h = q * d.asDiagonal() * q.transpose();
  return 0.5 * (h + h.transpose());
}

/// Constant-gain stability fixture: n in [3, 8], m in {1, 2},
/// a relabelled k-hop ring or a random balanced digraph, gain drawn from the
/// sector of a random link, alpha below alpha_bar_tight.
struct StabilityFixture {
  WeightedGraph w{Matrix::Zero(1, 1)};
  HessianAggregate hessian;
  Eigen::Index m = 1;
  LinkNonlinearity link = LinkNonlinearity::identity();
  SectorBounds sector;
  double gain = 1.0;
  double alpha = 0.0;
  StepSizeBounds bounds;

  std::size_t n() const { return w.size(); }
  SystemMatrices matrices() const {
    const auto l = laplacian(w);
    return assemble(l, l, hessian, LinkGainSnapshot::uniform(static_cast<Eigen::Index>(n()) * m, gain), alpha, m);
  }
};

inline StabilityFixture random_stability_fixture(Rng& rng) {
  StabilityFixture f;
  const std::size_t n = 3 + rng.below(6);
  f.m = 1 + static_cast<Eigen::Index>(rng.below(2));
  if (rng.below(2) == 0) {
    const auto k = 1 + rng.below((n - 1) / 2);
    f.w = make_khop_ring(n, k, rng.uniform(0.3, 0.95)).permuted(random_permutation(n, rng));
  } else {
    f.w = random_balanced_digraph(n, rng);
  }
  std::vector<Matrix> blocks;
  for (std::size_t i = 0; i < n; ++i) blocks.push_back(random_spd(f.m, rng));
  f.hessian = HessianAggregate::from_blocks(std::move(blocks));
  static const double rhos[] = {0.25, 1.0, 1.6};
  const auto pick = rng.below(4);
  f.link = pick == 0 ? LinkNonlinearity::identity() : LinkNonlinearity::log_quantizer(rhos[pick - 1]);
  f.sector = sector_bounds(f.link, Interval{-10.0, 10.0}, SectorMode::linearized);
  f.gain = rng.uniform(f.sector.kappa, f.sector.K);
  const auto s = summarize_laplacian(laplacian(f.w).matrix());
  f.bounds = step_size_bounds(f.sector.kappa, f.sector.K, f.hessian.gamma, s.smallest_nonzero_real, s.largest_modulus,
                              n, static_cast<std::size_t>(f.m));
  f.alpha = rng.uniform(0.02, 0.98) * f.bounds.alpha_bar_tight;
  return f;
}

/// Deliberate defect for testing the tests: the -alpha H block of Mg with its sign flipped.
inline void inject_sign_error(SystemMatrices& s) {
  const Eigen::Index nm = s.n * s.m;
  s.Mg.bottomRightCorner(nm, nm) += 2.0 * s.alpha * s.hessian.dense();
}

struct SuiteResult {
  std::string name;
  std::size_t passed = 0;
  std::size_t total = 0;
  std::vector<std::string> failures;

  void check(bool ok, const std::string& what) {
    ++total;
    if (ok) {
      ++passed;
    } else {
      failures.push_back(what);
    }
  }
  bool ok() const { return passed == total; }
};

struct VerifyOptions {
  std::uint64_t seed = 20240501;
  std::size_t stability_fixtures = 200;
  bool inject_sign_error = false;
};

namespace detail {

inline SuiteResult verify_graph(Rng& rng) {
  SuiteResult r;
  r.name = "graph";
  for (std::size_t n = 2; n <= 10; ++n) {
    for (std::size_t k = 1; k <= (n - 1) / 2; ++k) {
      const std::string tag = "ring n=" + std::to_string(n) + " k=" + std::to_string(k);
      const auto g = make_khop_ring(n, k, 0.8);
      const Matrix l = laplacian(g).matrix();
      r.check(l.rowwise().sum().cwiseAbs().maxCoeff() < 1e-14, tag + ": Laplacian row sums vanish");
      r.check(l.colwise().sum().cwiseAbs().maxCoeff() < 1e-14, tag + ": Laplacian column sums vanish");
      const auto ev = eigenvalues(l);
      std::size_t zeros = 0;
      bool lhp = true;
      for (const auto& v : ev) {
        if (std::abs(v) < 1e-10) ++zeros;
        if (v.real() > 1e-12) lhp = false;
      }
      r.check(zeros == 1 && lhp, tag + ": one zero eigenvalue, rest in the left half-plane");
      const SwitchingSchedule sched(g, 0.1, rng.next(), SwitchMode::permute);
      const auto g2 = sched.graph_at(0.35);
      const auto ev2 = eigenvalues(laplacian(g2).matrix());
      r.check(matching_distance(ev, ev2) < 1e-10, tag + ": relabelling preserves the spectrum");
      r.check(graph_violations(g2.weights()).empty(), tag + ": relabelled graph stays admissible");
      std::stringstream ss;
      write_edge_list(ss, g2);
      r.check(read_edge_list(ss) == g2, tag + ": edge list round trip");
    }
  }
  for (int trial = 0; trial < 40; ++trial) {
    const auto n = 2 + rng.below(9);
    const auto g = random_balanced_digraph(n, rng);
    const auto bc = check_weight_balanced(g.weights());
    r.check(bc.balanced && is_strongly_connected(g.weights()),
            "random digraph " + std::to_string(trial) + ": balanced and strongly connected");
  }
  Matrix bad = Matrix::Zero(3, 3);
  bad(0, 1) = 0.5;
  bad(1, 2) = 0.5;
  r.check(!graph_violations(bad).empty(), "unbalanced path graph is rejected");
  return r;
}

inline SuiteResult verify_nonlinearity(Rng& rng) {
  SuiteResult r;
  r.name = "nonlinearity";
  const Interval dom{-50.0, 50.0};
  std::vector<std::pair<LinkNonlinearity, SectorMode>> links;
  for (const double rho : {0.1, 0.25, 0.5, 1.0, 1.6}) links.emplace_back(LinkNonlinearity::log_quantizer(rho), SectorMode::tight);
  for (const double rho : {0.1, 0.5, 1.0}) links.emplace_back(LinkNonlinearity::uniform_quantizer(rho), SectorMode::linearized);
  for (const double lim : {0.5, 2.0}) links.emplace_back(LinkNonlinearity::saturation(lim), SectorMode::linearized);
  links.emplace_back(LinkNonlinearity::identity(), SectorMode::linearized);
  links.emplace_back(LinkNonlinearity::composite(LinkNonlinearity::saturation(3.0), LinkNonlinearity::log_quantizer(0.5)),
                     SectorMode::tight);
  for (const auto& [g, mode] : links) {
    const auto b = sector_bounds(g, dom, mode);
    const auto rep = verify_assumption2(g, b, 4000, rng.next());
    r.check(rep.oddness.pass, g.describe() + ": odd");
    r.check(rep.monotonicity.pass, g.describe() + ": non-decreasing");
    r.check(rep.sector.pass, g.describe() + ": inside its sector");
    r.check(b.strongly_sign_preserving == (g.kind() != LinkKind::uniform_quantizer),
            g.describe() + ": sign-preservation flag");
  }
  // linearized-mode ratios for the log quantizer are exact rationals
  for (const auto& [rho, ratio] : std::vector<std::pair<double, double>>{{1.6, 9.0}, {1.0, 3.0}, {0.25, 9.0 / 7.0}}) {
    const auto b = sector_bounds(LinkNonlinearity::log_quantizer(rho), dom, SectorMode::linearized);
    r.check(std::abs(b.ratio() - ratio) <= 4e-16 * ratio, "log quantizer rho=" + fmt_double(rho) + ": sector ratio");
  }
  return r;
}

inline SuiteResult verify_cost(Rng& rng) {
  SuiteResult r;
  r.name = "cost";
  auto fd_check = [&](const LocalCost& f, const Vector& x, const std::string& tag) {
    const Eigen::Index m = x.size();
    const auto ev = f.evaluate(x);
    Vector g_fd(m);
    Matrix h_fd(m, m);
    for (Eigen::Index k = 0; k < m; ++k) {
      const double h = 1e-5 * std::max(1.0, std::abs(x[k]));
      Vector xp = x, xm = x;
      xp[k] += h;
      xm[k] -= h;
      g_fd[k] = (f.value(xp) - f.value(xm)) / (2 * h);
      h_fd.col(k) = (f.gradient(xp) - f.gradient(xm)) / (2 * h);
    }
    const double gs = std::max(1.0, ev.gradient.norm());
    const double hs = std::max(1.0, ev.hessian.norm());
    r.check((g_fd - ev.gradient).norm() <= 1e-6 * gs, tag + ": gradient matches finite differences");
    r.check((h_fd - ev.hessian).norm() <= 1e-5 * hs, tag + ": Hessian matches finite differences");
    r.check((ev.hessian - ev.hessian.transpose()).norm() <= 1e-12 * hs, tag + ": Hessian symmetric");
    r.check(Eigen::LLT<Matrix>(ev.hessian).info() == Eigen::Success, tag + ": Hessian positive definite");
  };
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index m = 1 + static_cast<Eigen::Index>(rng.below(4));
    Vector b(m), x(m);
    for (Eigen::Index k = 0; k < m; ++k) b[k] = rng.uniform(-2, 2), x[k] = rng.uniform(-2, 2);
    fd_check(QuadraticCost(random_spd(m, rng), b), x, "quadratic " + std::to_string(trial));
  }
  const auto data = generate_ellipse_data(60, rng.next());
  const Matrix feats = FeatureMap::apply_rows(data.points);
  for (int trial = 0; trial < 20; ++trial) {
    const SvmHingeCost f(feats, data.labels, rng.uniform(0.5, 2.0), rng.uniform(1.0, 4.0), 1e-3, rng.uniform(0.5, 3.0));
    Vector x(4);
    for (Eigen::Index k = 0; k < 4; ++k) x[k] = rng.uniform(-2, 2);
    fd_check(f, x, "svm " + std::to_string(trial));
  }
  for (const double mu : {0.5, 2.0, 10.0}) {
    bool ok = true;
    for (double z = -20; z <= 20; z += 0.37) {
      const double gap = smoothing_gap(z, mu);
      ok = ok && gap >= -1e-15 && gap <= std::log(2.0) / mu + 1e-15;
    }
    r.check(ok, "smoothing gap within [0, log 2 / mu] for mu=" + fmt_double(mu));
  }
  return r;
}

inline SuiteResult verify_stability(Rng& rng, const VerifyOptions& opt) {
  SuiteResult r;
  r.name = "stability";
  for (std::size_t k = 0; k < opt.stability_fixtures; ++k) {
    const auto f = random_stability_fixture(rng);
    auto mats = f.matrices();
    if (opt.inject_sign_error) inject_sign_error(mats);
    const auto rep = spectral_report(mats, f.m);
    r.check(rep.stable, "fixture " + std::to_string(k) + " (n=" + std::to_string(f.n()) + " m=" +
                            std::to_string(f.m) + " " + f.link.describe() + "): zeros=" +
                            std::to_string(rep.zero_count) + " max_re=" + fmt_double(rep.max_nonzero_real));
  }
  return r;
}

inline SuiteResult verify_conservation(Rng& rng) {
  SuiteResult r;
  r.name = "conservation";
  for (int trial = 0; trial < 12; ++trial) {
    const std::size_t n = 3 + rng.below(5);
    const Eigen::Index m = 1 + static_cast<Eigen::Index>(rng.below(2));
    std::vector<CostHandle> agents;
    for (std::size_t i = 0; i < n; ++i) {
      Vector b(m);
      for (Eigen::Index k = 0; k < m; ++k) b[k] = rng.uniform(-1, 1);
      agents.push_back(std::make_shared<QuadraticCost>(random_spd(m, rng), b));
    }
    const CostModel model(m, std::move(agents));
    Vector x0(static_cast<Eigen::Index>(n) * m);
    for (Eigen::Index k = 0; k < x0.size(); ++k) x0[k] = rng.uniform(-1, 1);
    SolverConfig cfg(SwitchingSchedule(random_balanced_digraph(n, rng), 0.05, rng.next(), SwitchMode::permute));
    cfg.alpha = 0.05;
    cfg.eta = 0.01;
    cfg.t_end = 5.0;
    cfg.sample_stride = 10;
    for (const auto& g : {LinkNonlinearity::identity(), LinkNonlinearity::log_quantizer(1.0)}) {
      for (const auto integ : {Integrator::euler, Integrator::rk4}) {
        cfg.g_x = cfg.g_y = g;
        cfg.integrator = integ;
        const auto run = integrate(x0, model, cfg);
        double worst = 0.0;
        for (const auto& row : run.trace) worst = std::max(worst, row.conservation_residual);
        r.check(run.status == RunStatus::completed && worst <= 1e-10,
                "quadratic " + std::to_string(trial) + " " + g.describe() + " " + to_string(integ) +
                    ": residual " + fmt_double(worst));
      }
    }
  }
  return r;
}

inline SuiteResult verify_matching(Rng& rng) {
  SuiteResult r;
  r.name = "matching";
  auto random_spectrum = [&](std::size_t k) {
    Spectrum s;
    for (std::size_t i = 0; i < k; ++i) s.emplace_back(rng.uniform(-3, 3), rng.uniform(-1, 1));
    return s;
  };
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t k = 1 + rng.below(6);
    const auto a = random_spectrum(k), b = random_spectrum(k), c = random_spectrum(k);
    const double ab = matching_distance(a, b);
    const std::string tag = "spectra " + std::to_string(trial);
    r.check(matching_distance(a, a) == 0.0, tag + ": identity");
    r.check(ab == matching_distance(b, a), tag + ": symmetry");
    r.check(matching_distance(a, c) <= ab + matching_distance(b, c) + 1e-12, tag + ": triangle inequality");
    auto shuffled = a;
    rng.shuffle(shuffled);
    r.check(matching_distance(shuffled, b) == ab, tag + ": permutation invariance");
    // brute force over all permutations
    std::vector<std::size_t> perm(k);
    for (std::size_t i = 0; i < k; ++i) perm[i] = i;
    double best = std::numeric_limits<double>::infinity();
    do {
      double worst = 0.0;
      for (std::size_t i = 0; i < k; ++i) worst = std::max(worst, std::abs(a[i] - b[perm[i]]));
      best = std::min(best, worst);
    } while (std::next_permutation(perm.begin(), perm.end()));
    r.check(ab == best, tag + ": equals brute-force optimum");
  }
  return r;
}

}  // namespace detail

/// Runs every suite with streams split off one seed; identical seeds give
/// identical detail.
inline std::vector<SuiteResult> run_verify(const VerifyOptions& opt = {}) {
  std::vector<SuiteResult> out;
  Rng graph_rng(mix_seed(opt.seed, 0)), nl_rng(mix_seed(opt.seed, 1)), cost_rng(mix_seed(opt.seed, 2)),
      th_rng(mix_seed(opt.seed, 3)), cons_rng(mix_seed(opt.seed, 4)), match_rng(mix_seed(opt.seed, 5));
  out.push_back(detail::verify_graph(graph_rng));
  out.push_back(detail::verify_nonlinearity(nl_rng));
  out.push_back(detail::verify_cost(cost_rng));
  out.push_back(detail::verify_stability(th_rng, opt));
  out.push_back(detail::verify_conservation(cons_rng));
  out.push_back(detail::verify_matching(match_rng));
  return out;
}

inline bool print_verify(std::ostream& os, const std::vector<SuiteResult>& suites) {
  std::size_t passed = 0, total = 0;
  for (const auto& s : suites) {
    os << s.name << ": " << s.passed << '/' << s.total << " passed\n";
    for (const auto& f : s.failures) os << "  FAIL " << f << '\n';
    passed += s.passed;
    total += s.total;
  }
  os << "total: " << passed << '/' << total << " passed\n";
  return passed == total;
}

}  // namespace nlgt
