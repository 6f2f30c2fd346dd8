#pragma once

// Weight-balanced network topologies, their Laplacians, and switching schedules.
//
// Convention: w(i, j) is the weight on link j -> i. The Laplacian keeps the
// off-diagonal weights and puts minus the row sum on the diagonal, so its
// spectrum lies in the closed left half-plane.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <queue>
#include <sstream>
#include <string>
#include <vector>

#include "nlgt/random.hpp"
#include "nlgt/types.hpp"

namespace nlgt {

struct BalanceCheck {
  bool balanced = false;
  double max_imbalance = 0.0;
};

/// max_i |sum_j w_ji - sum_j w_ij| compared against tol.
inline BalanceCheck check_weight_balanced(const Matrix& w, double tol = 1e-12) {
  const Vector in = w.colwise().sum().transpose();
  const Vector out = w.rowwise().sum();
  const double imbalance = w.rows() ? (in - out).cwiseAbs().maxCoeff() : 0.0;
  return {imbalance <= tol, imbalance};
}

/// Structural strong connectivity: every node reaches and is reached from node 0.
inline bool is_strongly_connected(const Matrix& w) {
  const auto n = static_cast<std::size_t>(w.rows());
  if (n <= 1) return true;
  auto reach = [&](bool forward) {
    std::vector<char> seen(n, 0);
    std::queue<std::size_t> frontier;
    frontier.push(0);
    seen[0] = 1;
    std::size_t count = 1;
    while (!frontier.empty()) {
      const auto u = frontier.front();
      frontier.pop();
      for (std::size_t v = 0; v < n; ++v) {
        // forward: edge u -> v exists when w(v, u) > 0
        const double weight = forward ? w(static_cast<Eigen::Index>(v), static_cast<Eigen::Index>(u))
                                      : w(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(v));
        if (weight > 0.0 && !seen[v]) {
          seen[v] = 1;
          ++count;
          frontier.push(v);
        }
      }
    }
    return count == n;
  };
  return reach(true) && reach(false);
}

/// Every invariant violation of a candidate weight matrix (empty when valid).
inline std::vector<std::string> graph_violations(const Matrix& w, double tol = 1e-12) {
  std::vector<std::string> errors;
  if (w.rows() != w.cols()) {
    errors.push_back("weight matrix is not square");
    return errors;
  }
  if (w.rows() == 0) {
    errors.push_back("graph has no nodes");
    return errors;
  }
  if (!w.allFinite()) errors.push_back("weights must be finite");
  for (Eigen::Index i = 0; i < w.rows(); ++i) {
    if (w(i, i) != 0.0) errors.push_back("nonzero self-loop at node " + std::to_string(i));
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
      if (w(i, j) < 0.0) {
        errors.push_back("negative weight at (" + std::to_string(i) + "," + std::to_string(j) + ")");
      }
    }
    if (w.row(i).sum() >= 1.0) errors.push_back("row sum of node " + std::to_string(i) + " is not below 1");
  }
  if (const auto bal = check_weight_balanced(w, tol); !bal.balanced) {
    std::ostringstream os;
    os << "graph is not weight-balanced (max imbalance " << bal.max_imbalance << ")";
    errors.push_back(os.str());
  }
  if (!is_strongly_connected(w)) errors.push_back("graph is not strongly connected");
  return errors;
}

/// Immutable weighted digraph satisfying non-negativity, row sums below one,
/// weight balance and strong connectivity.
class WeightedGraph {
 public:
  explicit WeightedGraph(Matrix weights) : w_(std::move(weights)) {
    if (auto errors = graph_violations(w_); !errors.empty()) {
      throw InvalidInput("invalid graph: " + join_lines(errors));
    }
  }

  std::size_t size() const noexcept { return static_cast<std::size_t>(w_.rows()); }
  const Matrix& weights() const noexcept { return w_; }
  double weight(std::size_t i, std::size_t j) const {
    return w_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }
  bool symmetric() const { return (w_ - w_.transpose()).cwiseAbs().maxCoeff() == 0.0; }

  /// Relabel nodes: node i becomes perm[i].
  WeightedGraph permuted(const std::vector<std::size_t>& perm) const {
    const auto n = w_.rows();
    Matrix out = Matrix::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        out(static_cast<Eigen::Index>(perm[static_cast<std::size_t>(i)]),
            static_cast<Eigen::Index>(perm[static_cast<std::size_t>(j)])) = w_(i, j);
      }
    }
    return WeightedGraph(std::move(out));
  }

  friend bool operator==(const WeightedGraph& a, const WeightedGraph& b) {
    return a.w_.rows() == b.w_.rows() && a.w_ == b.w_;
  }

 private:
  Matrix w_;
};

/// Single isolated agent (no links); useful for reduced scalar fixtures.
inline WeightedGraph single_node_graph() { return WeightedGraph(Matrix::Zero(1, 1)); }

/// Ring where each node links to its k nearest neighbours on each side, every
/// link weighted total_weight / (2k). With `directed` set, node i only hears
/// from its k predecessors (weight total_weight / k), a balanced circulant digraph.
inline WeightedGraph make_khop_ring(std::size_t n, std::size_t k, double total_weight, bool directed = false) {
  if (n < 2) throw InvalidInput("k-hop ring needs at least 2 nodes");
  const std::size_t k_max = directed ? n - 1 : (n - 1) / 2;
  if (k < 1 || k > k_max) {
    throw InvalidInput("hop radius " + std::to_string(k) + " out of range [1, " + std::to_string(k_max) +
                       "] for n=" + std::to_string(n));
  }
  if (!(total_weight > 0.0 && total_weight < 1.0)) throw InvalidInput("total_weight must lie in (0, 1)");
  const auto N = static_cast<Eigen::Index>(n);
  Matrix w = Matrix::Zero(N, N);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t d = 1; d <= k; ++d) {
      const auto prev = static_cast<Eigen::Index>((i + n - d) % n);
      const auto I = static_cast<Eigen::Index>(i);
      if (directed) {
        w(I, prev) = total_weight / static_cast<double>(k);
      } else {
        const auto next = static_cast<Eigen::Index>((i + d) % n);
        w(I, prev) = total_weight / static_cast<double>(2 * k);
        w(I, next) = total_weight / static_cast<double>(2 * k);
      }
    }
  }
  return WeightedGraph(std::move(w));
}

class Laplacian {
 public:
  explicit Laplacian(Matrix entries) : l_(std::move(entries)) {}
  const Matrix& matrix() const noexcept { return l_; }
  std::size_t size() const noexcept { return static_cast<std::size_t>(l_.rows()); }

 private:
  Matrix l_;
};

inline Laplacian laplacian(const WeightedGraph& g) {
  Matrix l = g.weights();
  for (Eigen::Index i = 0; i < l.rows(); ++i) l(i, i) = -g.weights().row(i).sum();
  return Laplacian(std::move(l));
}

enum class SwitchMode { fixed, permute };

/// Piecewise-constant topology signal: the base graph with node labels
/// re-drawn at every multiple of the switching period. Each interval's
/// permutation comes from its own counter-keyed stream, so any interval can be
/// evaluated without replaying earlier ones.
class SwitchingSchedule {
 public:
  SwitchingSchedule(WeightedGraph base, double switch_period, std::uint64_t seed, SwitchMode mode)
      : base_(std::move(base)), period_(switch_period), seed_(seed), mode_(mode) {
    if (!(switch_period > 0.0) || !std::isfinite(switch_period)) {
      throw InvalidInput("switch_period must be positive and finite");
    }
  }

  static SwitchingSchedule fixed(WeightedGraph base) {
    return SwitchingSchedule(std::move(base), std::numeric_limits<double>::max(), 0, SwitchMode::fixed);
  }

  const WeightedGraph& base_graph() const noexcept { return base_; }
  double switch_period() const noexcept { return period_; }
  std::uint64_t seed() const noexcept { return seed_; }
  SwitchMode mode() const noexcept { return mode_; }

  /// Interval index floor(t / period); the tiny slack keeps t = k * period from
  /// landing in interval k-1 through rounding.
  std::uint64_t interval_at(double t) const {
    if (t < 0.0) throw InvalidInput("graph_at requires t >= 0");
    if (mode_ == SwitchMode::fixed) return 0;
    return static_cast<std::uint64_t>(std::floor(t / period_ + 1e-9));
  }

  WeightedGraph graph_for_interval(std::uint64_t interval) const {
    if (mode_ == SwitchMode::fixed) return base_;
    Rng rng(mix_seed(seed_, interval));
    return base_.permuted(random_permutation(base_.size(), rng));
  }

  WeightedGraph graph_at(double t) const { return graph_for_interval(interval_at(t)); }

 private:
  WeightedGraph base_;
  double period_;
  std::uint64_t seed_;
  SwitchMode mode_;
};

// Edge-list text format:
//   n <count>
//   i j w_ij        (0-indexed, one nonzero weight per line)

inline void write_edge_list(std::ostream& os, const WeightedGraph& g) {
  os << "n " << g.size() << '\n';
  char buf[64];
  for (std::size_t i = 0; i < g.size(); ++i) {
    for (std::size_t j = 0; j < g.size(); ++j) {
      if (const double w = g.weight(i, j); w != 0.0) {
        std::snprintf(buf, sizeof buf, "%.17g", w);
        os << i << ' ' << j << ' ' << buf << '\n';
      }
    }
  }
}

inline WeightedGraph read_edge_list(std::istream& is) {
  std::string line;
  std::size_t n = 0;
  bool have_header = false;
  Matrix w;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    if (!have_header) {
      std::string tag;
      if (!(ls >> tag >> n) || tag != "n" || n == 0) {
        throw InvalidInput("edge list: expected header 'n <count>' on line " + std::to_string(line_no));
      }
      w = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
      have_header = true;
      continue;
    }
    long long i = -1;
    long long j = -1;
    double value = 0.0;
    std::string rest;
    if (!(ls >> i >> j >> value) || (ls >> rest)) {
      throw InvalidInput("edge list: malformed triple on line " + std::to_string(line_no));
    }
    if (i < 0 || j < 0 || static_cast<std::size_t>(i) >= n || static_cast<std::size_t>(j) >= n) {
      throw InvalidInput("edge list: node index out of range on line " + std::to_string(line_no));
    }
    w(i, j) = value;
  }
  if (!have_header) throw InvalidInput("edge list: missing header");
  return WeightedGraph(std::move(w));
}

}  // namespace nlgt
