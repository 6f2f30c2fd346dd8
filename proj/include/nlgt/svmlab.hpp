#pragma once

// Distributed SVM layer: synthetic two-class data separable after a quadratic
// feature map, partitioning across agents, a centralized gradient-descent
// reference, classifier scoring, and the end-to-end distributed experiment.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <memory>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "nlgt/cost.hpp"
#include "nlgt/engine.hpp"
#include "nlgt/random.hpp"
#include "nlgt/types.hpp"

namespace nlgt {

struct LabeledDataset {
  Matrix points;  // N x 2
  Vector labels;  // +1 / -1
  std::uint64_t seed = 0;
  double radius = 0.6;
  double margin_gap = 0.05;

  Eigen::Index size() const { return points.rows(); }
};

inline void validate_dataset(const LabeledDataset& d) {
  if (d.points.cols() != 2) throw InvalidInput("dataset points must have 2 columns");
  if (d.points.rows() != d.labels.size()) throw InvalidInput("dataset points and labels differ in count");
  bool pos = false;
  bool neg = false;
  for (Eigen::Index j = 0; j < d.labels.size(); ++j) {
    if (d.labels[j] == 1.0) {
      pos = true;
    } else if (d.labels[j] == -1.0) {
      neg = true;
    } else {
      throw InvalidInput("dataset label on row " + std::to_string(j) + " is not +1 or -1");
    }
  }
  if (!pos || !neg) throw InvalidInput("dataset must contain both classes");
}

/// Uniform points on [-1, 1]^2, labelled +1 outside radius r and -1 on or
/// inside it; points within margin_gap of the circle are redrawn.
inline LabeledDataset generate_ellipse_data(std::size_t n_points, std::uint64_t seed, double radius = 0.6,
                                            double margin_gap = 0.05) {
  if (n_points < 2) throw InvalidInput("dataset needs at least 2 points");
  if (!(radius > 0.0 && radius < 1.0)) throw InvalidInput("radius must lie in (0, 1)");
  if (!(margin_gap >= 0.0)) throw InvalidInput("margin gap must be non-negative");
  LabeledDataset d;
  d.seed = seed;
  d.radius = radius;
  d.margin_gap = margin_gap;
  d.points.resize(static_cast<Eigen::Index>(n_points), 2);
  d.labels.resize(static_cast<Eigen::Index>(n_points));
  Rng rng(seed);
  const std::size_t budget = 1000 * n_points;
  std::size_t draws = 0;
  for (std::size_t j = 0; j < n_points; ++j) {
    for (;;) {
      if (++draws > budget) throw InvalidInput("resampling budget exhausted; margin gap too large");
      const double a = rng.uniform(-1.0, 1.0);
      const double b = rng.uniform(-1.0, 1.0);
      const double r = std::hypot(a, b);
      if (std::abs(r - radius) < margin_gap) continue;
      const auto J = static_cast<Eigen::Index>(j);
      d.points(J, 0) = a;
      d.points(J, 1) = b;
      d.labels[J] = r > radius ? 1.0 : -1.0;
      break;
    }
  }
  validate_dataset(d);
  return d;
}

inline void write_dataset_csv(std::ostream& os, const LabeledDataset& d) {
  os << "x1,x2,label\n";
  for (Eigen::Index j = 0; j < d.size(); ++j) {
    os << fmt_double(d.points(j, 0)) << ',' << fmt_double(d.points(j, 1)) << ',' << (d.labels[j] > 0 ? "1" : "-1")
       << '\n';
  }
}

/// Rows "x1,x2,label"; an optional non-numeric header line is skipped.
inline LabeledDataset read_dataset_csv(std::istream& is) {
  std::vector<double> a;
  std::vector<double> b;
  std::vector<double> l;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 3) throw InvalidInput("dataset csv: expected 3 columns on line " + std::to_string(line_no));
    try {
      std::size_t used = 0;
      double v[3];
      for (int k = 0; k < 3; ++k) {
        v[k] = std::stod(cells[static_cast<std::size_t>(k)], &used);
        if (cells[static_cast<std::size_t>(k)].find_first_not_of(" \t\r", used) != std::string::npos) {
          throw std::invalid_argument("trailing");
        }
      }
      a.push_back(v[0]);
      b.push_back(v[1]);
      l.push_back(v[2]);
    } catch (const std::logic_error&) {
      if (line_no == 1 && a.empty()) continue;  // header
      throw InvalidInput("dataset csv: malformed number on line " + std::to_string(line_no));
    }
  }
  LabeledDataset d;
  d.points.resize(static_cast<Eigen::Index>(a.size()), 2);
  d.labels.resize(static_cast<Eigen::Index>(a.size()));
  for (std::size_t j = 0; j < a.size(); ++j) {
    const auto J = static_cast<Eigen::Index>(j);
    d.points(J, 0) = a[j];
    d.points(J, 1) = b[j];
    d.labels[J] = l[j];
  }
  validate_dataset(d);
  return d;
}

/// phi(chi) = [chi1^2, chi2^2, sqrt(2) chi1 chi2], so phi(a).phi(b) = (a.b)^2.
struct FeatureMap {
  static constexpr Eigen::Index feature_dim = 3;
  static constexpr Eigen::Index decision_dim = 4;

  static Vector apply(double c1, double c2) {
    Vector f(3);
    f << c1 * c1, c2 * c2, std::sqrt(2.0) * c1 * c2;
    return f;
  }

  static Matrix apply_rows(const Matrix& points) {
    Matrix out(points.rows(), 3);
    for (Eigen::Index j = 0; j < points.rows(); ++j) out.row(j) = apply(points(j, 0), points(j, 1)).transpose();
    return out;
  }
};

enum class PartitionMode { stratified, contiguous };

struct Partition {
  std::vector<std::vector<std::size_t>> agents;

  std::size_t total() const {
    std::size_t s = 0;
    for (const auto& a : agents) s += a.size();
    return s;
  }
};

/// stratified: each class shuffled, then dealt round-robin, the deal position
/// carrying over from one class to the next; contiguous: index blocks.
inline Partition partition(const LabeledDataset& d, std::size_t n, PartitionMode mode, std::uint64_t seed) {
  const auto total = static_cast<std::size_t>(d.size());
  if (n == 0) throw InvalidInput("partition needs at least one agent");
  if (n > total) throw InvalidInput("partition: more agents (" + std::to_string(n) + ") than points (" +
                                    std::to_string(total) + ")");
  Partition p;
  p.agents.resize(n);
  if (mode == PartitionMode::contiguous) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i * total / n; j < (i + 1) * total / n; ++j) p.agents[i].push_back(j);
    }
    return p;
  }
  Rng rng(seed);
  std::size_t deal = 0;
  for (const double cls : {-1.0, 1.0}) {
    std::vector<std::size_t> idx;
    for (std::size_t j = 0; j < total; ++j)
      if (d.labels[static_cast<Eigen::Index>(j)] == cls) idx.push_back(j);
    rng.shuffle(idx);
    for (const auto j : idx) p.agents[deal++ % n].push_back(j);
  }
  for (auto& a : p.agents) std::sort(a.begin(), a.end());
  return p;
}

struct Classifier {
  Vector omega = Vector::Zero(3);
  double nu = 0.0;

  static Classifier from_decision(const Vector& x) { return {x.head(3), x[3]}; }
  Vector as_decision() const {
    Vector x(4);
    x << omega, nu;
    return x;
  }
  bool degenerate() const { return omega.isZero(0.0); }
  double score(double c1, double c2) const { return omega.dot(FeatureMap::apply(c1, c2)) - nu; }
};

struct Evaluation {
  double accuracy = 0.0;
  std::size_t true_pos = 0;
  std::size_t true_neg = 0;
  std::size_t false_pos = 0;
  std::size_t false_neg = 0;
  std::size_t ties = 0;  // counted as wrong, inside false_pos / false_neg
};

inline Evaluation evaluate(const Classifier& c, const LabeledDataset& d) {
  Evaluation e;
  for (Eigen::Index j = 0; j < d.size(); ++j) {
    const double s = c.score(d.points(j, 0), d.points(j, 1));
    const bool positive = d.labels[j] > 0.0;
    if (s == 0.0) ++e.ties;
    if (positive) {
      (s > 0.0 ? e.true_pos : e.false_neg)++;
    } else {
      (s < 0.0 ? e.true_neg : e.false_pos)++;
    }
  }
  e.accuracy = d.size() ? static_cast<double>(e.true_pos + e.true_neg) / static_cast<double>(d.size()) : 0.0;
  return e;
}

/// matched: regularizer and eps_nu scaled by n so the centralized objective
/// equals the distributed sum at consensus; literal: counted once.
enum class RegularizerMode { matched, literal };

struct OracleResult {
  Classifier classifier;
  double objective = 0.0;
  double gradient_norm = 0.0;
  std::size_t iterations = 0;
};

/// Gradient descent with Armijo backtracking (c = 1e-4, shrink 0.5) on the
/// smoothed centralized objective, from zero, until |grad| <= tol. Each line
/// search starts from the Barzilai-Borwein step s.s / s.y, which keeps the
/// poorly scaled bias direction from stalling plain descent.
inline OracleResult centralized_oracle(const LabeledDataset& d, double c, double mu, double eps_nu, double tol,
                                       double reg_scale = 1.0, std::size_t max_iter = 1'000'000) {
  validate_dataset(d);
  if (!(tol > 0.0)) throw InvalidInput("oracle tolerance must be positive");
  const SvmHingeCost cost(FeatureMap::apply_rows(d.points), d.labels, c, mu, eps_nu * reg_scale, reg_scale);
  Vector x = Vector::Zero(FeatureMap::decision_dim);
  auto ev = cost.evaluate(x);
  double step = 1.0;
  OracleResult out;
  for (std::size_t it = 0; it < max_iter; ++it) {
    const double gn2 = ev.gradient.squaredNorm();
    if (std::sqrt(gn2) <= tol) {
      out.classifier = Classifier::from_decision(x);
      out.objective = ev.value;
      out.gradient_norm = std::sqrt(gn2);
      out.iterations = it;
      return out;
    }
    Vector trial;
    for (;;) {
      trial = x - step * ev.gradient;
      // slack of a few ulps of f: near the optimum the required decrease drops below f's rounding
      const double slack = 8.0 * std::numeric_limits<double>::epsilon() * std::abs(ev.value);
      if (cost.value(trial) <= ev.value - 1e-4 * step * gn2 + slack) break;
      step *= 0.5;
      if (step < 1e-300) throw NumericalFailure("oracle line search collapsed");
    }
    auto next = cost.evaluate(trial);
    const Vector s = trial - x;
    const Vector yv = next.gradient - ev.gradient;
    const double sy = s.dot(yv);
    step = sy > 0.0 ? s.squaredNorm() / sy : 2.0 * step;
    x = std::move(trial);
    ev = std::move(next);
  }
  throw NumericalFailure("centralized oracle hit the iteration cap before reaching tol");
}

inline double reg_scale_for(RegularizerMode mode, std::size_t n_agents) {
  return mode == RegularizerMode::matched ? static_cast<double>(n_agents) : 1.0;
}

struct DsvmSetup {
  LabeledDataset data;
  Partition parts;
  double c = 1.0;
  double mu = 2.0;
  double eps_nu = 1e-6;
  RegularizerMode regularizer = RegularizerMode::matched;
  double oracle_tol = 1e-8;
  Vector x0;  // stacked initial states, n * 4
};

inline CostModel build_svm_model(const LabeledDataset& d, const Partition& p, double c, double mu, double eps_nu) {
  const Matrix features = FeatureMap::apply_rows(d.points);
  std::vector<CostHandle> agents;
  for (const auto& idx : p.agents) {
    Matrix f(static_cast<Eigen::Index>(idx.size()), 3);
    Vector l(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) {
      f.row(static_cast<Eigen::Index>(k)) = features.row(static_cast<Eigen::Index>(idx[k]));
      l[static_cast<Eigen::Index>(k)] = d.labels[static_cast<Eigen::Index>(idx[k])];
    }
    agents.push_back(std::make_shared<SvmHingeCost>(std::move(f), std::move(l), c, mu, eps_nu));
  }
  return CostModel(FeatureMap::decision_dim, std::move(agents));
}

struct DsvmReport {
  RunResult run;
  OracleResult oracle;
  std::vector<Classifier> agents;
  Classifier consensus;  // mean of the agents' final decisions
  double consensus_spread = 0.0;
  double distance_to_oracle = 0.0;  // infinity norm on [omega; nu]
  Evaluation consensus_eval;
  Evaluation oracle_eval;
  double final_sum_gradient_norm = 0.0;
};

inline DsvmReport dsvm_experiment(const DsvmSetup& setup, SolverConfig cfg) {
  const auto model = build_svm_model(setup.data, setup.parts, setup.c, setup.mu, setup.eps_nu);
  DsvmReport rep;
  rep.oracle = centralized_oracle(setup.data, setup.c, setup.mu, setup.eps_nu, setup.oracle_tol,
                                  reg_scale_for(setup.regularizer, model.n()));
  if (!cfg.reference) cfg.reference = rep.oracle.classifier.as_decision();
  rep.run = integrate(setup.x0, model, cfg);
  const Eigen::Index m = model.m();
  for (std::size_t i = 0; i < model.n(); ++i) {
    rep.agents.push_back(Classifier::from_decision(rep.run.x.segment(static_cast<Eigen::Index>(i) * m, m)));
  }
  rep.consensus = Classifier::from_decision(agent_mean(rep.run.x, m));
  rep.consensus_spread = consensus_error(rep.run.x, m);
  rep.distance_to_oracle = (rep.consensus.as_decision() - rep.oracle.classifier.as_decision()).cwiseAbs().maxCoeff();
  rep.consensus_eval = evaluate(rep.consensus, setup.data);
  rep.oracle_eval = evaluate(rep.oracle.classifier, setup.data);
  rep.final_sum_gradient_norm = rep.run.x.allFinite() ? sum_gradient(model, rep.run.x).norm()
                                                      : std::numeric_limits<double>::infinity();
  return rep;
}

inline void write_classifier(std::ostream& os, const Classifier& c, const std::string& label) {
  os << "classifier: " << label << '\n';
  for (Eigen::Index k = 0; k < c.omega.size(); ++k) os << "omega_" << k << ": " << fmt_double(c.omega[k]) << '\n';
  os << "nu: " << fmt_double(c.nu) << '\n';
  os << "degenerate: " << (c.degenerate() ? "true" : "false") << '\n';
}

}  // namespace nlgt
