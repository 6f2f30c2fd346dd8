#pragma once

// Linearized system matrices of the gradient-tracking dynamics, their spectra,
// the zero-eigenvalue perturbation check, optimal matching distance between
// spectra, step-size bound formulas, and the (alpha, Xi) stability sweep.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "nlgt/cost.hpp"
#include "nlgt/graph.hpp"
#include "nlgt/nonlinear.hpp"
#include "nlgt/types.hpp"

namespace nlgt {

using Complex = std::complex<double>;
using Spectrum = std::vector<Complex>;

/// A (x) I_m.
inline Matrix kron_identity(const Matrix& a, Eigen::Index m) {
  Matrix out = Matrix::Zero(a.rows() * m, a.cols() * m);
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      if (a(i, j) == 0.0) continue;
      for (Eigen::Index k = 0; k < m; ++k) out(i * m + k, j * m + k) = a(i, j);
    }
  }
  return out;
}

/// Diagonal similarity scaling by powers of two (Parlett-Reinsch); leaves the
/// spectrum unchanged while evening out row and column norms.
inline Matrix balance(Matrix a) {
  const Eigen::Index n = a.rows();
  bool converged = false;
  for (int sweep = 0; !converged && sweep < 100; ++sweep) {
    converged = true;
    for (Eigen::Index i = 0; i < n; ++i) {
      double c = a.col(i).cwiseAbs().sum() - std::abs(a(i, i));
      double r = a.row(i).cwiseAbs().sum() - std::abs(a(i, i));
      if (c == 0.0 || r == 0.0) continue;
      const double s = c + r;
      double f = 1.0;
      double g = r / 2.0;
      while (c < g) {
        f *= 2.0;
        c *= 4.0;
      }
      g = r * 2.0;
      while (c > g) {
        f /= 2.0;
        c /= 4.0;
      }
      if ((c + r) / f < 0.95 * s) {
        converged = false;
        a.row(i) /= f;
        a.col(i) *= f;
      }
    }
  }
  return a;
}

inline bool spectrum_less(const Complex& a, const Complex& b) {
  if (a.real() != b.real()) return a.real() < b.real();
  return a.imag() < b.imag();
}

/// All eigenvalues of a general real matrix, sorted by real part.
inline Spectrum eigenvalues(const Matrix& a) {
  if (a.rows() != a.cols()) throw InvalidInput("eigenvalues: matrix is not square");
  if (a.rows() == 0) return {};
  if (!a.allFinite()) throw NumericalFailure("eigenvalues: matrix has non-finite entries");
  Eigen::EigenSolver<Matrix> es(balance(a), false);
  if (es.info() != Eigen::Success) throw NumericalFailure("eigensolver did not converge");
  Spectrum out(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
  std::sort(out.begin(), out.end(), spectrum_less);
  return out;
}

/// H * B computed block row by block row, without forming H densely.
inline Matrix hessian_times(const HessianAggregate& h, const Matrix& b) {
  Matrix out(b.rows(), b.cols());
  Eigen::Index off = 0;
  for (const auto& blk : h.blocks) {
    out.middleRows(off, blk.rows()).noalias() = blk * b.middleRows(off, blk.rows());
    off += blk.rows();
  }
  return out;
}

struct SystemMatrices {
  Matrix M0;
  Matrix M1;
  Matrix Mg0;
  Matrix Mg;
  double alpha = 0.0;
  Eigen::Index n = 0;
  Eigen::Index m = 0;
  // inputs kept for the derivative check and bound evaluation
  Matrix w_laplacian;
  Matrix a_laplacian;
  HessianAggregate hessian;
  Vector xi_x;
  Vector xi_y;
};

namespace detail {

inline void check_assembly_inputs(const Laplacian& w, const Laplacian& a, const HessianAggregate& h, Eigen::Index m,
                                  double alpha) {
  if (m <= 0) throw InvalidInput("assemble: m must be positive");
  if (w.size() != a.size()) throw InvalidInput("assemble: W and A Laplacians differ in size");
  const auto nm = static_cast<Eigen::Index>(w.size()) * m;
  if (h.size() != nm) throw InvalidInput("assemble: Hessian size does not match n*m");
  if (!(alpha >= 0.0)) throw InvalidInput("assemble: alpha must be non-negative");
}

}  // namespace detail

/// Block assembly with per-component link gains (right-multiplied):
///   Mg0 = [[(W (x) I) Xi_x, 0], [H (W (x) I) Xi_x, (A (x) I) Xi_y]],  Mg = Mg0 + alpha M1.
inline SystemMatrices assemble(const Laplacian& w, const Laplacian& a, const HessianAggregate& h,
                               const LinkGainSnapshot& xi_x, const LinkGainSnapshot& xi_y, double alpha,
                               Eigen::Index m) {
  detail::check_assembly_inputs(w, a, h, m, alpha);
  const auto n = static_cast<Eigen::Index>(w.size());
  const Eigen::Index nm = n * m;
  if (xi_x.xi.size() != nm || xi_y.xi.size() != nm) throw InvalidInput("assemble: gain snapshot size is not n*m");

  const Matrix wk = kron_identity(w.matrix(), m);
  const Matrix ak = kron_identity(a.matrix(), m);
  const Matrix hw = hessian_times(h, wk);

  SystemMatrices s;
  s.alpha = alpha;
  s.n = n;
  s.m = m;
  s.w_laplacian = w.matrix();
  s.a_laplacian = a.matrix();
  s.hessian = h;
  s.xi_x = xi_x.xi;
  s.xi_y = xi_y.xi;

  s.M0 = Matrix::Zero(2 * nm, 2 * nm);
  s.M0.topLeftCorner(nm, nm) = wk;
  s.M0.bottomLeftCorner(nm, nm) = hw;
  s.M0.bottomRightCorner(nm, nm) = ak;

  s.M1 = Matrix::Zero(2 * nm, 2 * nm);
  s.M1.topRightCorner(nm, nm) = -Matrix::Identity(nm, nm);
  s.M1.bottomRightCorner(nm, nm) = -h.dense();

  s.Mg0 = Matrix::Zero(2 * nm, 2 * nm);
  s.Mg0.topLeftCorner(nm, nm) = wk * xi_x.xi.asDiagonal();
  s.Mg0.bottomLeftCorner(nm, nm) = hw * xi_x.xi.asDiagonal();
  s.Mg0.bottomRightCorner(nm, nm) = ak * xi_y.xi.asDiagonal();

  s.Mg = s.Mg0 + alpha * s.M1;
  return s;
}

inline SystemMatrices assemble(const Laplacian& w, const Laplacian& a, const HessianAggregate& h,
                               const LinkGainSnapshot& xi, double alpha, Eigen::Index m) {
  return assemble(w, a, h, xi, xi, alpha, m);
}

/// The linear-link matrix [[W (x) I, -alpha I], [H (W (x) I), A (x) I - alpha H]], built directly.
inline Matrix linear_system_matrix(const Laplacian& w, const Laplacian& a, const HessianAggregate& h, double alpha,
                                   Eigen::Index m) {
  detail::check_assembly_inputs(w, a, h, m, alpha);
  const Eigen::Index nm = static_cast<Eigen::Index>(w.size()) * m;
  const Matrix wk = kron_identity(w.matrix(), m);
  const Matrix ak = kron_identity(a.matrix(), m);
  Matrix out = Matrix::Zero(2 * nm, 2 * nm);
  out.topLeftCorner(nm, nm) = wk;
  out.topRightCorner(nm, nm) = -alpha * Matrix::Identity(nm, nm);
  out.bottomLeftCorner(nm, nm) = hessian_times(h, wk);
  out.bottomRightCorner(nm, nm) = ak - alpha * h.dense();
  return out;
}

struct LaplacianSummary {
  double smallest_nonzero_real = 0.0;  // min |Re| over nonzero eigenvalues
  double largest_modulus = 0.0;
};

inline LaplacianSummary summarize_laplacian(const Matrix& l, double rel_tol = 1e-9) {
  const auto ev = eigenvalues(l);
  LaplacianSummary s;
  for (const auto& v : ev) s.largest_modulus = std::max(s.largest_modulus, std::abs(v));
  const double tol = rel_tol * std::max(1.0, s.largest_modulus);
  s.smallest_nonzero_real = std::numeric_limits<double>::infinity();
  for (const auto& v : ev) {
    if (std::abs(v) > tol) s.smallest_nonzero_real = std::min(s.smallest_nonzero_real, std::abs(v.real()));
  }
  if (!std::isfinite(s.smallest_nonzero_real)) s.smallest_nonzero_real = 0.0;
  return s;
}

struct SpectralReport {
  Spectrum eigenvalues;
  std::size_t zero_count = 0;
  double max_nonzero_real = -std::numeric_limits<double>::infinity();
  double lambda_under = 0.0;  // smallest nonzero |Re| of sigma(M0)
  double lambda_max = 0.0;    // largest |lambda| of sigma(M0)
  double zero_tol = 0.0;
  Eigen::Index m = 0;
  bool stable = false;

  /// Euler step x+ = (I + eta Mg) x keeps the non-zero modes contracting.
  bool discrete_stable(double eta) const {
    if (zero_count != static_cast<std::size_t>(m)) return false;
    for (const auto& v : eigenvalues) {
      if (std::abs(v) <= zero_tol) continue;
      if (std::abs(1.0 + eta * v) >= 1.0) return false;
    }
    return true;
  }
};

/// Eigen-decomposition of Mg with zero counting at rel_tol * max|lambda|.
/// sigma(M0) = sigma(W (x) I) u sigma(A (x) I), so its summary comes from the
/// n x n Laplacians.
inline SpectralReport spectral_report(const SystemMatrices& mats, Eigen::Index m, double rel_tol = 1e-8) {
  SpectralReport r;
  r.m = m;
  r.eigenvalues = eigenvalues(mats.Mg);
  double scale = 0.0;
  for (const auto& v : r.eigenvalues) scale = std::max(scale, std::abs(v));
  r.zero_tol = rel_tol * scale;
  for (const auto& v : r.eigenvalues) {
    if (std::abs(v) <= r.zero_tol) {
      ++r.zero_count;
    } else {
      r.max_nonzero_real = std::max(r.max_nonzero_real, v.real());
    }
  }
  const auto sw = summarize_laplacian(mats.w_laplacian);
  const auto sa = summarize_laplacian(mats.a_laplacian);
  r.lambda_under = std::min(sw.smallest_nonzero_real, sa.smallest_nonzero_real);
  r.lambda_max = std::max(sw.largest_modulus, sa.largest_modulus);
  r.stable = r.zero_count == static_cast<std::size_t>(m) && r.max_nonzero_real < 0.0;
  return r;
}

struct Matching {
  double distance = 0.0;
  std::vector<std::size_t> assignment;  // a[i] is matched with b[assignment[i]]
};

/// Bottleneck assignment: minimize over permutations the largest |a_i - b_pi(i)|.
/// Binary search over the sorted candidate distances with an augmenting-path
/// feasibility test.
inline Matching bottleneck_matching(const Spectrum& a, const Spectrum& b) {
  if (a.size() != b.size()) {
    throw InvalidInput("matching distance needs equal cardinality (" + std::to_string(a.size()) + " vs " +
                       std::to_string(b.size()) + ")");
  }
  const std::size_t n = a.size();
  if (n == 0) return {};
  std::vector<double> dist(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) dist[i * n + j] = std::abs(a[i] - b[j]);
  std::vector<double> cand = dist;
  std::sort(cand.begin(), cand.end());
  cand.erase(std::unique(cand.begin(), cand.end()), cand.end());

  std::vector<std::size_t> match_b;
  std::vector<char> visited;
  auto feasible = [&](double thr, std::vector<std::size_t>& owner) {
    owner.assign(n, n);
    std::function<bool(std::size_t)> augment = [&](std::size_t i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (dist[i * n + j] > thr || visited[j]) continue;
        visited[j] = 1;
        if (owner[j] == n || augment(owner[j])) {
          owner[j] = i;
          return true;
        }
      }
      return false;
    };
    for (std::size_t i = 0; i < n; ++i) {
      visited.assign(n, 0);
      if (!augment(i)) return false;
    }
    return true;
  };

  std::size_t lo = 0;
  std::size_t hi = cand.size() - 1;
  while (lo < hi) {
    const std::size_t mid = (lo + hi) / 2;
    if (feasible(cand[mid], match_b)) {
      hi = mid;
    } else {
      lo = mid + 1;
    }
  }
  feasible(cand[lo], match_b);
  Matching out;
  out.distance = cand[lo];
  out.assignment.assign(n, 0);
  for (std::size_t j = 0; j < n; ++j) out.assignment[match_b[j]] = j;
  return out;
}

inline double matching_distance(const Spectrum& a, const Spectrum& b) { return bottleneck_matching(a, b).distance; }

struct EigenDerivativeReport {
  Matrix reduced;                 // V^T M1 V_g with 1-vector left and Xi^{-1} 1 right null vectors
  Spectrum reduced_eigenvalues;   // {0^m} u sigma(-sum_i H_i Xi_y,i^{-1})
  Spectrum hessian_sum_eigenvalues;  // sigma(-sum_i H_i)
  bool reduced_block_triangular = false;
  bool reduced_nonzero_negative = false;
  Spectrum predicted;             // d lambda / d alpha at alpha = 0 (normalized projection)
  Spectrum finite_difference;     // central differences at alpha = +-h
  double relative_error = 0.0;
  double tolerance = 1e-4;
  bool pass = false;
};

/// First-order motion of the 2m zero eigenvalues of Mg0 when alpha M1 is added.
/// Right null vectors are R = blockdiag(Xi_x^{-1}(1 (x) I), Xi_y^{-1}(1 (x) I)),
/// left ones L = [[1^T (x) I, 0], [-(1^T (x) I) H, 1^T (x) I]]; the derivatives
/// are the eigenvalues of (L R)^{-1} L M1 R. The unnormalized V^T M1 V_g has the
/// same zero pattern and sign but is scaled by the null-vector inner products.
inline EigenDerivativeReport eigen_derivative_check(const SystemMatrices& mats, Eigen::Index m, double h = 1e-6,
                                                    double tol = 1e-4) {
  const Eigen::Index n = mats.n;
  const Eigen::Index nm = n * m;
  if (mats.xi_x.minCoeff() <= 0.0 || mats.xi_y.minCoeff() <= 0.0) {
    throw InvalidInput("eigen derivative check needs strictly positive link gains");
  }
  const Matrix ones = kron_identity(Matrix::Ones(n, 1), m);  // nm x m
  const Matrix hd = mats.hessian.dense();

  Matrix right = Matrix::Zero(2 * nm, 2 * m);
  right.topLeftCorner(nm, m) = mats.xi_x.cwiseInverse().asDiagonal() * ones;
  right.bottomRightCorner(nm, m) = mats.xi_y.cwiseInverse().asDiagonal() * ones;
  Matrix left = Matrix::Zero(2 * m, 2 * nm);
  left.topLeftCorner(m, nm) = ones.transpose();
  left.bottomLeftCorner(m, nm) = -ones.transpose() * hd;
  left.bottomRightCorner(m, nm) = ones.transpose();
  Matrix plain_left = Matrix::Zero(2 * m, 2 * nm);
  plain_left.topLeftCorner(m, nm) = ones.transpose();
  plain_left.bottomRightCorner(m, nm) = ones.transpose();

  EigenDerivativeReport rep;
  rep.tolerance = tol;
  rep.reduced = plain_left * mats.M1 * right;
  rep.reduced_eigenvalues = eigenvalues(rep.reduced);
  const double rscale = std::max(1.0, rep.reduced.cwiseAbs().maxCoeff());
  rep.reduced_block_triangular = rep.reduced.bottomLeftCorner(m, m).cwiseAbs().maxCoeff() <= 1e-12 * rscale ||
                                 rep.reduced.topRightCorner(m, m).cwiseAbs().maxCoeff() <= 1e-12 * rscale;
  std::size_t negative = 0;
  for (const auto& v : rep.reduced_eigenvalues) {
    if (v.real() < -1e-12 * rscale) ++negative;
  }
  rep.reduced_nonzero_negative = negative == static_cast<std::size_t>(m);

  Matrix hsum = Matrix::Zero(m, m);
  for (const auto& blk : mats.hessian.blocks) hsum -= blk;
  rep.hessian_sum_eigenvalues = eigenvalues(hsum);

  const Matrix lr = left * right;
  const Matrix projected = lr.fullPivLu().solve(left * mats.M1 * right);
  rep.predicted = eigenvalues(projected);

  auto smallest = [&](const Matrix& mat) {
    Spectrum ev = eigenvalues(mat);
    std::sort(ev.begin(), ev.end(), [](const Complex& x, const Complex& y) { return std::abs(x) < std::abs(y); });
    ev.resize(static_cast<std::size_t>(2 * m));
    return ev;
  };
  Spectrum plus = smallest(mats.Mg0 + h * mats.M1);
  Spectrum minus = smallest(mats.Mg0 - h * mats.M1);
  for (auto& v : plus) v /= h;
  for (auto& v : minus) v /= -h;
  const auto pairing = bottleneck_matching(plus, minus);
  rep.finite_difference.resize(plus.size());
  for (std::size_t i = 0; i < plus.size(); ++i) rep.finite_difference[i] = 0.5 * (plus[i] + minus[pairing.assignment[i]]);
  std::sort(rep.finite_difference.begin(), rep.finite_difference.end(), spectrum_less);

  double pscale = 0.0;
  for (const auto& v : rep.predicted) pscale = std::max(pscale, std::abs(v));
  rep.relative_error = matching_distance(rep.predicted, rep.finite_difference) / std::max(pscale, 1e-300);
  rep.pass = rep.relative_error <= tol && rep.reduced_block_triangular && rep.reduced_nonzero_negative;
  return rep;
}

struct StepSizeBounds {
  double alpha_bar_matching = 0.0;
  double alpha_bar_spectral = 0.0;
  double log10_alpha_bar_spectral = 0.0;
  double alpha_bar_tight = 0.0;
  double matching_residual = 0.0;   // |expr(alpha) - kappa lambda_under| at the minimizer
  double matching_grid_lo = 1e-6;   // lower end of the search grid after extension
  bool matching_at_grid_edge = false;
  std::string matching_formula;     // "gamma<1" or "gamma>=1"
  std::string tight_decay_source = "lambda_under";
  bool equal_graphs_assumed = true;  // false flags W != A for the tight formula
  double kappa = 0.0, K = 0.0, gamma = 0.0, lambda_under = 0.0, lambda_max = 0.0;
  std::size_t n = 0, m = 0;
};

namespace detail {

/// Left side of the infinity-norm matching criterion as a function of alpha.
inline double matching_expression(double alpha, double K, double gamma, double nm) {
  const double e = 1.0 - 1.0 / nm;
  if (gamma < 1.0) {
    const double inner = 2.0 * K + 2.0 * gamma + std::max(2.0 * K + gamma * (2.0 * K + alpha), 2.0 * K + alpha);
    return 4.0 * std::pow(inner, e) * std::pow(alpha, 1.0 / nm);
  }
  return 4.0 * std::pow(4.0 * K + gamma * (4.0 * K + alpha), e) * std::pow(alpha * gamma, 1.0 / nm);
}

}  // namespace detail

/// All three step-size bounds. The matching bound minimizes
/// |expr(alpha) - kappa lambda_under| over a 1024-point log grid whose lower
/// end starts at 1e-6 and is pushed down by decades until the expression drops
/// below the target, then refines with golden-section search in log alpha.
inline StepSizeBounds step_size_bounds(double kappa, double K, double gamma, double lambda_under, double lambda_max,
                                       std::size_t n, std::size_t m) {
  if (!(kappa > 0.0) || !(K > 0.0) || !(gamma > 0.0) || !(lambda_under > 0.0) || !(lambda_max > 0.0) || n == 0 ||
      m == 0) {
    throw InvalidInput("step_size_bounds: all inputs must be positive");
  }
  if (kappa > K) throw InvalidInput("step_size_bounds: kappa must not exceed K");
  StepSizeBounds b;
  b.kappa = kappa;
  b.K = K;
  b.gamma = gamma;
  b.lambda_under = lambda_under;
  b.lambda_max = lambda_max;
  b.n = n;
  b.m = m;
  const double nm = static_cast<double>(n * m);
  const double target = kappa * lambda_under;

  b.alpha_bar_tight = std::min(kappa * lambda_under / gamma, lambda_under / (K * gamma));

  const double log_spec = nm * std::log(target) - nm * std::log(4.0) - (nm - 1.0) * std::log(K) -
                          (nm - 1.0) * std::log(2.0 * lambda_max + target) - std::log(std::max(1.0, gamma));
  b.log10_alpha_bar_spectral = log_spec / std::log(10.0);
  b.alpha_bar_spectral = std::exp(log_spec);

  b.matching_formula = gamma < 1.0 ? "gamma<1" : "gamma>=1";
  auto objective = [&](double log_alpha) {
    return std::abs(detail::matching_expression(std::exp(log_alpha), K, gamma, nm) - target);
  };
  double lo = 1e-6;
  const double hi = 1e3;
  while (detail::matching_expression(lo, K, gamma, nm) >= target && lo > 1e-300) lo /= 10.0;
  b.matching_grid_lo = lo;
  constexpr int grid = 1024;
  const double llo = std::log(lo);
  const double lhi = std::log(hi);
  int best = 0;
  double best_val = std::numeric_limits<double>::infinity();
  for (int i = 0; i < grid; ++i) {
    const double v = objective(llo + (lhi - llo) * i / (grid - 1));
    if (v < best_val) {
      best_val = v;
      best = i;
    }
  }
  double a = llo + (lhi - llo) * std::max(best - 1, 0) / (grid - 1);
  double c = llo + (lhi - llo) * std::min(best + 1, grid - 1) / (grid - 1);
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = c - phi * (c - a);
  double x2 = a + phi * (c - a);
  double f1 = objective(x1);
  double f2 = objective(x2);
  for (int it = 0; it < 200 && (c - a) > 1e-14 * std::max(1.0, std::abs(c)); ++it) {
    if (f1 <= f2) {
      c = x2;
      x2 = x1;
      f2 = f1;
      x1 = c - phi * (c - a);
      f1 = objective(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + phi * (c - a);
      f2 = objective(x2);
    }
  }
  double la = 0.5 * (a + c);
  if (objective(la) > best_val) la = llo + (lhi - llo) * best / (grid - 1);
  b.alpha_bar_matching = std::exp(la);
  b.matching_residual = objective(la);
  b.matching_at_grid_edge = best == 0 || best == grid - 1;
  return b;
}

struct XiRegime {
  std::string name;
  double gain = 1.0;
};

struct SweepFixture {
  Laplacian w{Matrix()};
  Laplacian a{Matrix()};
  HessianAggregate hessian;
  Eigen::Index m = 1;
};

struct SweepCell {
  double alpha = 0.0;
  std::string regime;
  double gain = 1.0;
  std::size_t zero_count = 0;
  double max_nonzero_real = 0.0;
  bool stable = false;
  bool has_discrete = false;
  bool discrete_stable = false;
  std::string error;  // set when the cell could not be evaluated
};

/// Every (alpha, Xi) cell evaluated independently on `jobs` threads; results
/// come back in row-major (alpha outer, regime inner) order. A failing cell
/// keeps its error message and the sweep carries on.
inline std::vector<SweepCell> stability_sweep(const SweepFixture& fx, const std::vector<double>& alphas,
                                              const std::vector<XiRegime>& regimes, double eta = 0.0,
                                              unsigned jobs = 1) {
  const std::size_t total = alphas.size() * regimes.size();
  std::vector<SweepCell> cells(total);
  const Eigen::Index nm = static_cast<Eigen::Index>(fx.w.size()) * fx.m;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < total; k = next++) {
      const double alpha = alphas[k / regimes.size()];
      const auto& reg = regimes[k % regimes.size()];
      cells[k].alpha = alpha;
      cells[k].regime = reg.name;
      cells[k].gain = reg.gain;
      try {
        const auto xi = LinkGainSnapshot::uniform(nm, reg.gain);
        const auto mats = assemble(fx.w, fx.a, fx.hessian, xi, alpha, fx.m);
        const auto rep = spectral_report(mats, fx.m);
        auto& cell = cells[k];
        cell.alpha = alpha;
        cell.regime = reg.name;
        cell.gain = reg.gain;
        cell.zero_count = rep.zero_count;
        cell.max_nonzero_real = rep.zero_count == rep.eigenvalues.size() ? 0.0 : rep.max_nonzero_real;
        cell.stable = rep.stable;
        if (eta > 0.0) {
          cell.has_discrete = true;
          cell.discrete_stable = rep.discrete_stable(eta);
        }
      } catch (const std::exception& e) {
        cells[k].error = e.what();
      }
    }
  };
  const unsigned threads = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::size_t>(total, 1))));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return cells;
}

/// Columns: alpha, xi_regime, gain, zero_count, max_nonzero_real, stable,
/// discrete_stable (empty without eta), error.
inline void write_sweep_csv(std::ostream& os, const std::vector<SweepCell>& cells) {
  os << "alpha,xi_regime,gain,zero_count,max_nonzero_real,stable,discrete_stable,error\n";
  for (const auto& c : cells) {
    os << fmt_double(c.alpha) << ',' << c.regime << ',' << fmt_double(c.gain) << ',' << c.zero_count << ','
       << fmt_double(c.max_nonzero_real) << ',' << (c.stable ? 1 : 0) << ','
       << (c.has_discrete ? (c.discrete_stable ? "1" : "0") : "") << ',' << c.error << '\n';
  }
}

/// Largest alpha in the sorted grid below which every cell of a regime is stable.
inline double stability_frontier(const std::vector<SweepCell>& cells, const std::string& regime, bool discrete) {
  std::vector<const SweepCell*> rows;
  for (const auto& c : cells)
    if (c.regime == regime) rows.push_back(&c);
  std::sort(rows.begin(), rows.end(), [](const SweepCell* x, const SweepCell* y) { return x->alpha < y->alpha; });
  double frontier = 0.0;
  for (const auto* c : rows) {
    if (c->alpha == 0.0) continue;
    const bool ok = c->error.empty() && (discrete ? c->discrete_stable : c->stable);
    if (!ok) break;
    frontier = c->alpha;
  }
  return frontier;
}

}  // namespace nlgt
