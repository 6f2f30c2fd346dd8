#pragma once

// Fixed-step integration of the gradient-tracking dynamics
//   x_i' = -sum_j w_ij (g_x(x_i) - g_x(x_j)) - alpha y_i
//   y_i' = -sum_j a_ij (g_y(y_i) - g_y(y_j)) + hess f_i(x_i) x_i'
// over a piecewise-constant topology, with trace recording and runtime checks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "nlgt/cost.hpp"
#include "nlgt/graph.hpp"
#include "nlgt/nonlinear.hpp"
#include "nlgt/types.hpp"

namespace nlgt {

enum class YInit { zero, gradient };
enum class Integrator { euler, rk4 };
enum class RunStatus { completed, diverged };

inline const char* to_string(YInit v) { return v == YInit::zero ? "zero" : "gradient"; }
inline const char* to_string(Integrator v) { return v == Integrator::euler ? "euler" : "rk4"; }
inline const char* to_string(RunStatus v) { return v == RunStatus::completed ? "completed" : "diverged"; }

struct SolverConfig {
  explicit SolverConfig(SwitchingSchedule w) : schedule_w(std::move(w)) {}

  double alpha = 1.0;
  double eta = 1e-3;
  double t_end = 10.0;
  YInit y_init = YInit::gradient;
  LinkNonlinearity g_x = LinkNonlinearity::identity();
  LinkNonlinearity g_y = LinkNonlinearity::identity();
  SwitchingSchedule schedule_w;
  std::optional<SwitchingSchedule> schedule_a;  // defaults to the W schedule
  Integrator integrator = Integrator::euler;
  std::size_t sample_stride = 1;
  double blowup = 1e12;
  std::optional<Vector> reference;  // optimizer x* in R^m, enables the Lyapunov column
  bool check_hessian = true;
  std::optional<Interval> domain;  // sector-bound domain; exceeding it only warns
};

struct StateDerivative {
  Vector dx;
  Vector dy;
};

/// Tracks how often the local Hessians fail to be positive definite.
struct HessianMonitor {
  std::size_t evaluations = 0;
  std::size_t violations = 0;
  double min_eigenvalue = std::numeric_limits<double>::infinity();

  void observe(const Matrix& h) {
    ++evaluations;
    if (Eigen::LLT<Matrix>(h).info() == Eigen::Success) return;
    ++violations;
    Eigen::SelfAdjointEigenSolver<Matrix> es(h, Eigen::EigenvaluesOnly);
    min_eigenvalue = std::min(min_eigenvalue, es.eigenvalues().minCoeff());
  }
};

/// Laplacian action (L (x) I) v for agent-major stacked v: with v viewed as an
/// m x n matrix V (column i = agent i), the result is V L^T.
inline Vector laplacian_apply(const Matrix& l, const Vector& v, Eigen::Index m) {
  const Eigen::Index n = l.rows();
  Vector out(v.size());
  Eigen::Map<Matrix>(out.data(), m, n).noalias() = Eigen::Map<const Matrix>(v.data(), m, n) * l.transpose();
  return out;
}

inline StateDerivative derivative(const Vector& x, const Vector& y, const Laplacian& lw, const Laplacian& la,
                                  const CostModel& model, double alpha, const LinkNonlinearity& g_x,
                                  const LinkNonlinearity& g_y, HessianMonitor* monitor = nullptr) {
  model.check_state(x);
  model.check_state(y);
  if (lw.size() != model.n() || la.size() != model.n()) throw InvalidInput("derivative: graph size differs from agent count");
  const Eigen::Index m = model.m();
  StateDerivative d;
  d.dx = laplacian_apply(lw.matrix(), g_x.apply(x), m) - alpha * y;
  d.dy = laplacian_apply(la.matrix(), g_y.apply(y), m);
  for (std::size_t i = 0; i < model.n(); ++i) {
    const Matrix h = model.agent(i).hessian(model.block(x, i));
    if (monitor) monitor->observe(h);
    d.dy.segment(static_cast<Eigen::Index>(i) * m, m).noalias() += h * d.dx.segment(static_cast<Eigen::Index>(i) * m, m);
  }
  return d;
}

struct TraceRow {
  double t = 0.0;
  Vector x;
  Vector y;
  double cost = 0.0;
  double sum_gradient_norm = 0.0;
  double consensus_error = 0.0;
  double conservation_residual = 0.0;
  double lyapunov = std::numeric_limits<double>::quiet_NaN();
};

struct RunResult {
  std::vector<TraceRow> trace;
  RunStatus status = RunStatus::completed;
  double t_final = 0.0;
  Vector x;
  Vector y;
  double eta_used = 0.0;
  std::size_t steps_taken = 0;
  std::size_t steps_planned = 0;
  double max_abs_state = 0.0;
  double conserved_offset = 0.0;  // |sum y(0) - sum grad f(x(0))|
  HessianMonitor hessian;
  std::vector<std::string> warnings;
};

/// Mean agent state x-bar in R^m.
inline Vector agent_mean(const Vector& stacked, Eigen::Index m) {
  return block_sum(stacked, m) / static_cast<double>(stacked.size() / m);
}

/// max_i |x_i - x-bar|.
inline double consensus_error(const Vector& x, Eigen::Index m) {
  const Vector mean = agent_mean(x, m);
  double worst = 0.0;
  for (Eigen::Index off = 0; off < x.size(); off += m) worst = std::max(worst, (x.segment(off, m) - mean).norm());
  return worst;
}

/// |(sum y - sum grad f)(t) - (sum y - sum grad f)(0)|.
inline double conservation_residual(const CostModel& model, const Vector& x, const Vector& y,
                                    const Vector& initial_offset) {
  return ((block_sum(y, model.m()) - sum_gradient(model, x)) - initial_offset).norm();
}

/// V = 0.5 |delta|^2 with delta = [x - 1 (x) x*; y].
inline double lyapunov_value(const Vector& x, const Vector& y, const Vector& reference) {
  const Eigen::Index m = reference.size();
  double v = y.squaredNorm();
  for (Eigen::Index off = 0; off < x.size(); off += m) v += (x.segment(off, m) - reference).squaredNorm();
  return 0.5 * v;
}

/// Largest step not above eta that divides the switching period.
inline double snap_step(double eta, double period, std::string* warning = nullptr) {
  if (!(eta > 0.0) || !std::isfinite(eta)) throw InvalidInput("integration step eta must be positive");
  if (!std::isfinite(period) || period >= std::numeric_limits<double>::max()) return eta;
  const double ratio = period / eta;
  const double k = std::round(ratio);
  if (k >= 1.0 && std::abs(ratio - k) <= 1e-9 * k) return eta;
  const double snapped = period / std::ceil(ratio);
  if (warning) {
    *warning = "eta " + fmt_double(eta) + " does not divide switch_period " + fmt_double(period) + "; using " +
               fmt_double(snapped);
  }
  return snapped;
}

/// Integrates from x0 with y(0) set by config.y_init. The topology is read at
/// the midpoint of each step, so a step never mixes two graphs.
inline RunResult integrate(const Vector& x0, const CostModel& model, const SolverConfig& cfg) {
  model.check_state(x0);
  if (!(cfg.alpha > 0.0) || !std::isfinite(cfg.alpha)) throw InvalidInput("alpha must be positive");
  if (!(cfg.t_end >= 0.0) || !std::isfinite(cfg.t_end)) throw InvalidInput("t_end must be non-negative");
  if (cfg.sample_stride == 0) throw InvalidInput("sample_stride must be at least 1");
  if (cfg.schedule_w.base_graph().size() != model.n()) throw InvalidInput("graph size differs from agent count");
  const SwitchingSchedule& sched_a = cfg.schedule_a ? *cfg.schedule_a : cfg.schedule_w;
  if (sched_a.base_graph().size() != model.n()) throw InvalidInput("A graph size differs from agent count");
  if (cfg.reference && cfg.reference->size() != model.m()) throw InvalidInput("reference optimizer has wrong dimension");

  RunResult res;
  std::string warning;
  double eta = snap_step(cfg.eta, cfg.schedule_w.switch_period(), &warning);
  if (!warning.empty()) res.warnings.push_back(warning);
  if (cfg.schedule_a) {
    warning.clear();
    eta = snap_step(eta, cfg.schedule_a->switch_period(), &warning);
    if (!warning.empty()) res.warnings.push_back(warning);
  }
  res.eta_used = eta;
  const auto steps = static_cast<std::size_t>(std::ceil(cfg.t_end / eta - 1e-9));
  res.steps_planned = steps;
  const Eigen::Index m = model.m();

  Vector x = x0;
  Vector y = cfg.y_init == YInit::gradient ? stacked_gradient(model, x0) : Vector::Zero(x0.size());
  const Vector offset = block_sum(y, m) - sum_gradient(model, x);
  res.conserved_offset = offset.norm();

  auto record = [&](double t) {
    TraceRow row;
    row.t = t;
    row.x = x;
    row.y = y;
    row.cost = global_cost(model, x);
    const Vector sg = sum_gradient(model, x);
    row.sum_gradient_norm = sg.norm();
    row.consensus_error = consensus_error(x, m);
    row.conservation_residual = ((block_sum(y, m) - sg) - offset).norm();
    if (cfg.reference) row.lyapunov = lyapunov_value(x, y, *cfg.reference);
    res.trace.push_back(std::move(row));
  };

  // Laplacians of the current interval, rebuilt only when the interval changes.
  std::uint64_t cached_w = std::numeric_limits<std::uint64_t>::max();
  std::uint64_t cached_a = cached_w;
  Laplacian lw{Matrix()};
  Laplacian la{Matrix()};
  auto graphs_for = [&](double t_mid) {
    const auto kw = cfg.schedule_w.interval_at(t_mid);
    if (kw != cached_w) {
      lw = laplacian(cfg.schedule_w.graph_for_interval(kw));
      cached_w = kw;
    }
    const auto ka = sched_a.interval_at(t_mid);
    if (ka != cached_a) {
      la = laplacian(sched_a.graph_for_interval(ka));
      cached_a = ka;
    }
  };
  HessianMonitor* mon = cfg.check_hessian ? &res.hessian : nullptr;
  auto f = [&](const Vector& xs, const Vector& ys) {
    return derivative(xs, ys, lw, la, model, cfg.alpha, cfg.g_x, cfg.g_y, mon);
  };

  record(0.0);
  res.max_abs_state = std::max(x.cwiseAbs().maxCoeff(), y.cwiseAbs().maxCoeff());
  for (std::size_t k = 0; k < steps; ++k) {
    const double t0 = static_cast<double>(k) * eta;
    graphs_for(t0 + 0.5 * eta);
    if (cfg.integrator == Integrator::euler) {
      const auto d = f(x, y);
      x += eta * d.dx;
      y += eta * d.dy;
    } else {
      const auto k1 = f(x, y);
      const auto k2 = f(x + 0.5 * eta * k1.dx, y + 0.5 * eta * k1.dy);
      const auto k3 = f(x + 0.5 * eta * k2.dx, y + 0.5 * eta * k2.dy);
      const auto k4 = f(x + eta * k3.dx, y + eta * k3.dy);
      x += (eta / 6.0) * (k1.dx + 2.0 * k2.dx + 2.0 * k3.dx + k4.dx);
      y += (eta / 6.0) * (k1.dy + 2.0 * k2.dy + 2.0 * k3.dy + k4.dy);
    }
    res.steps_taken = k + 1;
    const double t1 = static_cast<double>(k + 1) * eta;
    const bool finite = x.allFinite() && y.allFinite();
    const double mag = finite ? std::max(x.cwiseAbs().maxCoeff(), y.cwiseAbs().maxCoeff())
                              : std::numeric_limits<double>::infinity();
    res.max_abs_state = std::max(res.max_abs_state, mag);
    if (!finite || mag > cfg.blowup) {
      res.status = RunStatus::diverged;
      res.t_final = t1;
      res.x = x;
      res.y = y;
      return res;
    }
    if ((k + 1) % cfg.sample_stride == 0) record(t1);
  }
  res.t_final = static_cast<double>(steps) * eta;
  res.x = x;
  res.y = y;
  if (cfg.domain && res.max_abs_state > cfg.domain->max_abs()) {
    res.warnings.push_back("state magnitude " + fmt_double(res.max_abs_state) + " left the declared sector domain of radius " +
                           fmt_double(cfg.domain->max_abs()));
  }
  if (res.hessian.violations) {
    res.warnings.push_back("Hessian not positive definite at " + std::to_string(res.hessian.violations) +
                           " evaluations (min eigenvalue " + fmt_double(res.hessian.min_eigenvalue) + ")");
  }
  return res;
}

inline std::vector<double> lyapunov_series(const RunResult& run, const Vector& reference) {
  std::vector<double> v;
  v.reserve(run.trace.size());
  for (const auto& row : run.trace) v.push_back(lyapunov_value(row.x, row.y, reference));
  return v;
}

/// v[k+1] / v[k] for consecutive samples (NaN where v[k] == 0).
inline std::vector<double> decrease_ratios(const std::vector<double>& v) {
  std::vector<double> out;
  for (std::size_t k = 1; k < v.size(); ++k) {
    out.push_back(v[k - 1] > 0.0 ? v[k] / v[k - 1] : std::numeric_limits<double>::quiet_NaN());
  }
  return out;
}

/// Number of samples where V grows by more than rel_tol relative to the previous sample.
inline std::size_t lyapunov_increases(const std::vector<double>& v, double rel_tol = 1e-12) {
  std::size_t count = 0;
  for (std::size_t k = 1; k < v.size(); ++k) {
    if (v[k] > v[k - 1] * (1.0 + rel_tol) + 1e-300) ++count;
  }
  return count;
}

/// Decay rate -d log V / dt fitted by least squares to the upper envelope of
/// log V, using samples after `skip_fraction` of the run and above `floor`.
inline double lyapunov_decay_rate(const std::vector<double>& t, const std::vector<double>& v, double floor,
                                  double skip_fraction = 0.1) {
  if (t.size() != v.size() || v.size() < 3) throw InvalidInput("decay fit needs matching series of length >= 3");
  std::vector<double> env(v.size());
  double run_max = 0.0;
  for (std::size_t k = v.size(); k-- > 0;) {
    run_max = std::max(run_max, v[k]);
    env[k] = run_max;
  }
  const double t_start = t.front() + skip_fraction * (t.back() - t.front());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t cnt = 0;
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (t[k] < t_start || !(env[k] > floor)) continue;
    const double ly = std::log(env[k]);
    sx += t[k];
    sy += ly;
    sxx += t[k] * t[k];
    sxy += t[k] * ly;
    ++cnt;
  }
  if (cnt < 2) throw InvalidInput("decay fit: fewer than two samples above the floor");
  const double c = static_cast<double>(cnt);
  const double slope = (c * sxy - sx * sy) / (c * sxx - sx * sx);
  return -slope;
}

/// Trace CSV columns: t, cost, sum_gradient_norm, consensus_error,
/// conservation_residual, lyapunov, then x_<agent>_<k> and y_<agent>_<k>.
inline void write_trace_csv(std::ostream& os, const RunResult& run, Eigen::Index m) {
  os << "t,cost,sum_gradient_norm,consensus_error,conservation_residual,lyapunov";
  if (!run.trace.empty()) {
    const Eigen::Index nm = run.trace.front().x.size();
    for (const char* name : {"x", "y"}) {
      for (Eigen::Index i = 0; i < nm; ++i) os << ',' << name << '_' << i / m << '_' << i % m;
    }
  }
  os << '\n';
  for (const auto& row : run.trace) {
    os << fmt_double(row.t) << ',' << fmt_double(row.cost) << ',' << fmt_double(row.sum_gradient_norm) << ','
       << fmt_double(row.consensus_error) << ',' << fmt_double(row.conservation_residual) << ','
       << (std::isnan(row.lyapunov) ? std::string() : fmt_double(row.lyapunov));
    for (const Vector* v : {&row.x, &row.y}) {
      for (Eigen::Index i = 0; i < v->size(); ++i) os << ',' << fmt_double((*v)[i]);
    }
    os << '\n';
  }
}

}  // namespace nlgt
