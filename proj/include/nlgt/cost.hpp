#pragma once

// Local cost functions f_i with value / gradient / Hessian, the block-diagonal
// Hessian aggregate, and global sums over agents.

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "nlgt/types.hpp"

namespace nlgt {

struct HingeEval {
  double value = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
};

/// L(z, mu) = softplus(mu z) / mu, overflow-safe, with L' and L''.
inline HingeEval smoothed_hinge(double z, double mu) {
  if (!(mu > 0.0) || !std::isfinite(mu)) throw InvalidInput("smoothing parameter mu must be positive");
  const double t = mu * z;
  const double e = std::exp(-std::abs(t));
  const double value = (std::max(t, 0.0) + std::log1p(e)) / mu;
  // logistic(t) without overflow on either side
  const double s = t >= 0.0 ? 1.0 / (1.0 + e) : e / (1.0 + e);
  return {value, s, mu * s * (1.0 - s)};
}

/// L(z, mu) - max(z, 0); lies in (0, log 2 / mu].
inline double smoothing_gap(double z, double mu) {
  if (!(mu > 0.0) || !std::isfinite(mu)) throw InvalidInput("smoothing parameter mu must be positive");
  return std::log1p(std::exp(-std::abs(mu * z))) / mu;
}

struct CostEval {
  double value = 0.0;
  Vector gradient;
  Matrix hessian;
};

class LocalCost {
 public:
  virtual ~LocalCost() = default;
  virtual Eigen::Index dimension() const = 0;
  virtual CostEval evaluate(const Vector& x) const = 0;
  virtual double value(const Vector& x) const { return evaluate(x).value; }
  virtual Vector gradient(const Vector& x) const { return evaluate(x).gradient; }
  virtual Matrix hessian(const Vector& x) const { return evaluate(x).hessian; }

 protected:
  void check_dimension(const Vector& x) const {
    if (x.size() != dimension()) {
      throw InvalidInput("cost evaluated at dimension " + std::to_string(x.size()) + ", expected " +
                         std::to_string(dimension()));
    }
  }
};

/// f(x) = 0.5 (x - b)^T Q (x - b).
class QuadraticCost final : public LocalCost {
 public:
  QuadraticCost(Matrix q, Vector b) : q_(std::move(q)), b_(std::move(b)) {
    if (q_.rows() != q_.cols() || q_.rows() != b_.size() || q_.rows() == 0) {
      throw InvalidInput("quadratic cost: Q must be square and match b");
    }
    if ((q_ - q_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, q_.cwiseAbs().maxCoeff())) {
      throw InvalidInput("quadratic cost: Q must be symmetric");
    }
    if (Eigen::LLT<Matrix>(q_).info() != Eigen::Success) {
      throw InvalidInput("quadratic cost: Q must be positive definite");
    }
  }

  Eigen::Index dimension() const override { return b_.size(); }
  const Matrix& curvature() const noexcept { return q_; }
  const Vector& center() const noexcept { return b_; }

  CostEval evaluate(const Vector& x) const override {
    check_dimension(x);
    const Vector d = x - b_;
    const Vector g = q_ * d;
    return {0.5 * d.dot(g), g, q_};
  }
  double value(const Vector& x) const override {
    check_dimension(x);
    const Vector d = x - b_;
    return 0.5 * d.dot(q_ * d);
  }
  Vector gradient(const Vector& x) const override {
    check_dimension(x);
    return q_ * (x - b_);
  }
  Matrix hessian(const Vector& x) const override {
    check_dimension(x);
    return q_;
  }

 private:
  Matrix q_;
  Vector b_;
};

/// Smoothed-hinge SVM summand over a local dataset, decision x = [omega; nu]:
///   reg * omega^T omega + C sum_j L(z_j, mu) + eps_nu nu^2,
///   z_j = 1 - l_j (omega^T chi_j - nu).
class SvmHingeCost final : public LocalCost {
 public:
  SvmHingeCost(Matrix features, Vector labels, double c, double mu, double eps_nu = 1e-6, double reg_weight = 1.0)
      : chi_(std::move(features)), labels_(std::move(labels)), c_(c), mu_(mu), eps_nu_(eps_nu), reg_(reg_weight) {
    if (chi_.rows() != labels_.size()) throw InvalidInput("svm cost: feature rows and labels differ in count");
    if (chi_.cols() == 0) throw InvalidInput("svm cost: feature dimension must be positive");
    for (Eigen::Index j = 0; j < labels_.size(); ++j) {
      if (labels_[j] != 1.0 && labels_[j] != -1.0) throw InvalidInput("svm cost: labels must be +1 or -1");
    }
    if (!(c_ > 0.0)) throw InvalidInput("svm cost: C must be positive");
    if (!(mu_ > 0.0)) throw InvalidInput("svm cost: mu must be positive");
    if (!(eps_nu_ >= 0.0)) throw InvalidInput("svm cost: eps_nu must be non-negative");
    if (!(reg_ > 0.0)) throw InvalidInput("svm cost: regularizer weight must be positive");
    // rows [chi_j, -1] so that augmented * x = omega^T chi_j - nu
    aug_.resize(chi_.rows(), chi_.cols() + 1);
    aug_.leftCols(chi_.cols()) = chi_;
    aug_.col(chi_.cols()).setConstant(-1.0);
  }

  Eigen::Index dimension() const override { return chi_.cols() + 1; }
  Eigen::Index points() const noexcept { return chi_.rows(); }
  const Matrix& features() const noexcept { return chi_; }
  const Vector& labels() const noexcept { return labels_; }

  CostEval evaluate(const Vector& x) const override {
    check_dimension(x);
    const Eigen::Index p = chi_.cols();
    const auto omega = x.head(p);
    const double nu = x[p];

    CostEval out;
    out.value = reg_ * omega.squaredNorm() + eps_nu_ * nu * nu;
    out.gradient = Vector::Zero(p + 1);
    out.gradient.head(p) = 2.0 * reg_ * omega;
    out.gradient[p] = 2.0 * eps_nu_ * nu;
    out.hessian = Matrix::Zero(p + 1, p + 1);
    out.hessian.diagonal().head(p).setConstant(2.0 * reg_);
    out.hessian(p, p) = 2.0 * eps_nu_;
    if (chi_.rows() == 0) return out;

    const Vector s = aug_ * x;
    Vector dz(chi_.rows());
    Vector curv(chi_.rows());
    double loss = 0.0;
    for (Eigen::Index j = 0; j < chi_.rows(); ++j) {
      const auto h = smoothed_hinge(1.0 - labels_[j] * s[j], mu_);
      loss += h.value;
      dz[j] = -labels_[j] * h.d1;  // dL/ds_j
      curv[j] = h.d2;              // l_j^2 = 1
    }
    out.value += c_ * loss;
    out.gradient.noalias() += c_ * (aug_.transpose() * dz);
    out.hessian.noalias() += c_ * (aug_.transpose() * curv.asDiagonal() * aug_);
    return out;
  }

 private:
  Matrix chi_;
  Vector labels_;
  double c_;
  double mu_;
  double eps_nu_;
  double reg_;
  Matrix aug_;
};

using CostHandle = std::shared_ptr<const LocalCost>;

/// n local costs sharing decision dimension m; stacked states are agent-major.
class CostModel {
 public:
  CostModel(Eigen::Index m, std::vector<CostHandle> agents) : m_(m), agents_(std::move(agents)) {
    if (m_ <= 0) throw InvalidInput("cost model: decision dimension must be positive");
    if (agents_.empty()) throw InvalidInput("cost model: needs at least one agent");
    for (std::size_t i = 0; i < agents_.size(); ++i) {
      if (!agents_[i]) throw InvalidInput("cost model: null cost for agent " + std::to_string(i));
      if (agents_[i]->dimension() != m_) {
        throw InvalidInput("cost model: agent " + std::to_string(i) + " has dimension " +
                           std::to_string(agents_[i]->dimension()) + ", expected " + std::to_string(m_));
      }
    }
  }

  Eigen::Index m() const noexcept { return m_; }
  std::size_t n() const noexcept { return agents_.size(); }
  const LocalCost& agent(std::size_t i) const { return *agents_.at(i); }
  const std::vector<CostHandle>& agents() const noexcept { return agents_; }

  auto block(const Vector& x, std::size_t i) const { return x.segment(static_cast<Eigen::Index>(i) * m_, m_); }

  void check_state(const Vector& x) const {
    if (x.size() != static_cast<Eigen::Index>(n()) * m_) {
      throw InvalidInput("state has size " + std::to_string(x.size()) + ", expected n*m = " +
                         std::to_string(static_cast<Eigen::Index>(n()) * m_));
    }
  }

 private:
  Eigen::Index m_;
  std::vector<CostHandle> agents_;
};

/// Block-diagonal H with its infinity norm gamma.
struct HessianAggregate {
  std::vector<Matrix> blocks;
  double gamma = 0.0;

  Eigen::Index size() const {
    Eigen::Index s = 0;
    for (const auto& b : blocks) s += b.rows();
    return s;
  }

  Matrix dense() const {
    const Eigen::Index s = size();
    Matrix h = Matrix::Zero(s, s);
    Eigen::Index off = 0;
    for (const auto& b : blocks) {
      h.block(off, off, b.rows(), b.cols()) = b;
      off += b.rows();
    }
    return h;
  }

  /// H v without materializing the dense matrix.
  Vector apply(const Vector& v) const {
    Vector out(v.size());
    Eigen::Index off = 0;
    for (const auto& b : blocks) {
      out.segment(off, b.rows()).noalias() = b * v.segment(off, b.cols());
      off += b.rows();
    }
    return out;
  }

  /// Smallest eigenvalue over all (symmetric) blocks.
  double min_eigenvalue() const {
    double lo = std::numeric_limits<double>::infinity();
    for (const auto& b : blocks) {
      Eigen::SelfAdjointEigenSolver<Matrix> es(b, Eigen::EigenvaluesOnly);
      lo = std::min(lo, es.eigenvalues().minCoeff());
    }
    return lo;
  }

  static HessianAggregate from_blocks(std::vector<Matrix> blocks) {
    HessianAggregate h;
    h.blocks = std::move(blocks);
    for (const auto& b : h.blocks) h.gamma = std::max(h.gamma, b.cwiseAbs().rowwise().sum().maxCoeff());
    return h;
  }
};

inline HessianAggregate aggregate_hessian(const CostModel& model, const Vector& x) {
  model.check_state(x);
  std::vector<Matrix> blocks;
  blocks.reserve(model.n());
  for (std::size_t i = 0; i < model.n(); ++i) blocks.push_back(model.agent(i).hessian(model.block(x, i)));
  return HessianAggregate::from_blocks(std::move(blocks));
}

inline double global_cost(const CostModel& model, const Vector& x) {
  model.check_state(x);
  double total = 0.0;
  for (std::size_t i = 0; i < model.n(); ++i) total += model.agent(i).value(model.block(x, i));
  return total;
}

/// Agent gradients stacked into an nm vector.
inline Vector stacked_gradient(const CostModel& model, const Vector& x) {
  model.check_state(x);
  Vector g(x.size());
  for (std::size_t i = 0; i < model.n(); ++i) {
    g.segment(static_cast<Eigen::Index>(i) * model.m(), model.m()) = model.agent(i).gradient(model.block(x, i));
  }
  return g;
}

/// Sum over agents of m-blocks of a stacked vector.
inline Vector block_sum(const Vector& stacked, Eigen::Index m) {
  Vector s = Vector::Zero(m);
  for (Eigen::Index off = 0; off < stacked.size(); off += m) s += stacked.segment(off, m);
  return s;
}

inline Vector sum_gradient(const CostModel& model, const Vector& x) {
  return block_sum(stacked_gradient(model, x), model.m());
}

}  // namespace nlgt
