#pragma once

// Link nonlinearities g(.) applied to transmitted states, their sector bounds
// kappa <= g(z)/z <= K, and a randomized checker for the odd / monotone /
// sector-bounded properties the convergence theory relies on.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "nlgt/random.hpp"
#include "nlgt/types.hpp"

namespace nlgt {

enum class LinkKind { identity, log_quantizer, uniform_quantizer, saturation, composite };

inline const char* to_string(LinkKind kind) {
  switch (kind) {
    case LinkKind::identity: return "identity";
    case LinkKind::log_quantizer: return "log_quantizer";
    case LinkKind::uniform_quantizer: return "uniform_quantizer";
    case LinkKind::saturation: return "saturation";
    case LinkKind::composite: return "composite";
  }
  return "?";
}

class LinkNonlinearity {
 public:
  static LinkNonlinearity identity() { return LinkNonlinearity(LinkKind::identity, 0.0); }

  /// sgn(z) exp(rho * round(log|z| / rho)), with g(0) = 0.
  static LinkNonlinearity log_quantizer(double rho) {
    if (!(rho > 0.0) || !std::isfinite(rho)) throw InvalidInput("log quantizer level rho must be positive");
    return LinkNonlinearity(LinkKind::log_quantizer, rho);
  }

  /// rho * round(z / rho).
  static LinkNonlinearity uniform_quantizer(double rho) {
    if (!(rho > 0.0) || !std::isfinite(rho)) throw InvalidInput("uniform quantizer level rho must be positive");
    return LinkNonlinearity(LinkKind::uniform_quantizer, rho);
  }

  static LinkNonlinearity saturation(double limit) {
    if (!(limit > 0.0) || !std::isfinite(limit)) throw InvalidInput("saturation limit must be positive");
    return LinkNonlinearity(LinkKind::saturation, limit);
  }

  /// outer(inner(z)).
  static LinkNonlinearity composite(const LinkNonlinearity& outer, const LinkNonlinearity& inner) {
    LinkNonlinearity g(LinkKind::composite, 0.0);
    g.outer_ = std::make_shared<const LinkNonlinearity>(outer);
    g.inner_ = std::make_shared<const LinkNonlinearity>(inner);
    return g;
  }

  LinkKind kind() const noexcept { return kind_; }
  /// Quantization level (quantizers) or clipping limit (saturation).
  double level() const noexcept { return level_; }
  const LinkNonlinearity& outer() const { return *outer_; }
  const LinkNonlinearity& inner() const { return *inner_; }

  double operator()(double z) const noexcept {
    switch (kind_) {
      case LinkKind::identity: return z;
      case LinkKind::log_quantizer: {
        if (z == 0.0) return 0.0;
        const double q = std::exp(level_ * std::round(std::log(std::abs(z)) / level_));
        return z > 0.0 ? q : -q;
      }
      case LinkKind::uniform_quantizer: return level_ * std::round(z / level_);
      case LinkKind::saturation: return std::clamp(z, -level_, level_);
      case LinkKind::composite: return (*outer_)((*inner_)(z));
    }
    return z;
  }

  Vector apply(const Vector& z) const {
    Vector out(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) out[i] = (*this)(z[i]);
    return out;
  }

  void apply_into(const Vector& z, Vector& out) const {
    out.resize(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) out[i] = (*this)(z[i]);
  }

  std::string describe() const {
    std::ostringstream os;
    os << to_string(kind_);
    if (kind_ == LinkKind::log_quantizer || kind_ == LinkKind::uniform_quantizer) os << "(rho=" << level_ << ")";
    if (kind_ == LinkKind::saturation) os << "(limit=" << level_ << ")";
    if (kind_ == LinkKind::composite) os << "(" << outer_->describe() << " o " << inner_->describe() << ")";
    return os.str();
  }

 private:
  LinkNonlinearity(LinkKind kind, double level) : kind_(kind), level_(level) {}

  LinkKind kind_;
  double level_;
  std::shared_ptr<const LinkNonlinearity> outer_;
  std::shared_ptr<const LinkNonlinearity> inner_;
};

struct Interval {
  double lo = -1.0;
  double hi = 1.0;
  double max_abs() const { return std::max(std::abs(lo), std::abs(hi)); }
};

/// `linearized` uses the linearized log-quantizer bounds (1 - rho/2, 1 + rho/2);
/// `tight` uses the exact (exp(-rho/2), exp(rho/2)).
enum class SectorMode { linearized, tight };

struct SectorBounds {
  double kappa = 1.0;
  double K = 1.0;
  Interval domain{};
  bool strongly_sign_preserving = true;
  SectorMode mode = SectorMode::linearized;

  double ratio() const {
    return kappa > 0.0 ? K / kappa : std::numeric_limits<double>::infinity();
  }
};

inline SectorBounds sector_bounds(const LinkNonlinearity& g, Interval domain, SectorMode mode = SectorMode::linearized) {
  if (!(domain.lo <= domain.hi) || (domain.lo == domain.hi) || !std::isfinite(domain.lo) ||
      !std::isfinite(domain.hi)) {
    throw InvalidInput("sector domain must be a non-empty finite interval");
  }
  SectorBounds b;
  b.domain = domain;
  b.mode = mode;
  const double D = domain.max_abs();
  switch (g.kind()) {
    case LinkKind::identity:
      b.kappa = 1.0;
      b.K = 1.0;
      break;
    case LinkKind::log_quantizer: {
      const double rho = g.level();
      if (rho >= 2.0) throw InvalidInput("log quantizer needs rho < 2 for a positive lower sector bound");
      if (mode == SectorMode::linearized) {
        b.kappa = 1.0 - rho / 2.0;
        b.K = 1.0 + rho / 2.0;
      } else {
        b.kappa = std::exp(-rho / 2.0);
        b.K = std::exp(rho / 2.0);
      }
      break;
    }
    case LinkKind::uniform_quantizer:
      // Dead zone |z| < rho/2 maps to zero; the largest ratio (2) is hit at z = rho/2.
      b.kappa = 0.0;
      b.K = D >= g.level() / 2.0 ? 2.0 : 0.0;
      break;
    case LinkKind::saturation:
      b.kappa = D > g.level() ? g.level() / D : 1.0;
      b.K = 1.0;
      break;
    case LinkKind::composite: {
      const auto inner = sector_bounds(g.inner(), domain, mode);
      const double reach = std::max(inner.K * D, std::numeric_limits<double>::min());
      const auto outer = sector_bounds(g.outer(), Interval{-reach, reach}, mode);
      b.kappa = inner.kappa * outer.kappa;
      b.K = inner.K * outer.K;
      break;
    }
  }
  b.strongly_sign_preserving = b.kappa > 0.0;
  return b;
}

/// Combined bounds when the x-line and y-line use different links.
inline SectorBounds combine_bounds(const SectorBounds& a, const SectorBounds& b) {
  SectorBounds c = a;
  c.kappa = std::min(a.kappa, b.kappa);
  c.K = std::max(a.K, b.K);
  c.domain = Interval{std::min(a.domain.lo, b.domain.lo), std::max(a.domain.hi, b.domain.hi)};
  c.strongly_sign_preserving = c.kappa > 0.0;
  return c;
}

struct PropertyResult {
  bool pass = true;
  double worst_z = 0.0;
  double worst_violation = 0.0;
};

struct Assumption2Report {
  PropertyResult oddness;
  PropertyResult monotonicity;
  PropertyResult sector;
  std::size_t samples = 0;

  bool all_pass() const { return oddness.pass && monotonicity.pass && sector.pass; }

  std::string to_text() const {
    std::ostringstream os;
    os.precision(17);
    auto line = [&](const char* name, const PropertyResult& r) {
      os << name << ": " << (r.pass ? "pass" : "fail") << '\n';
      os << name << "_worst_z: " << r.worst_z << '\n';
      os << name << "_worst_violation: " << r.worst_violation << '\n';
    };
    os << "samples: " << samples << '\n';
    line("oddness", oddness);
    line("monotonicity", monotonicity);
    line("sector", sector);
    return os.str();
  }
};

/// Randomized check of oddness, monotonicity and sector containment over the
/// bounds' domain. Samples mix uniform draws with log-uniform magnitudes
/// spanning 12 decades below the domain radius. Step discontinuities are fine
/// as long as they jump upward.
inline Assumption2Report verify_assumption2(const LinkNonlinearity& g, const SectorBounds& bounds, std::size_t samples,
                                            std::uint64_t seed, double tol = 1e-12) {
  if (samples == 0) throw InvalidInput("verify_assumption2 needs at least one sample");
  Rng rng(seed);
  const Interval dom = bounds.domain;
  const double D = dom.max_abs();
  std::vector<double> zs;
  zs.reserve(samples);
  for (std::size_t s = 0; s < samples; ++s) {
    double z = 0.0;
    if (s % 2 == 0) {
      z = rng.uniform(dom.lo, dom.hi);
    } else {
      const double mag = D * std::pow(10.0, -12.0 * rng.uniform01());
      z = std::clamp(rng.uniform01() < 0.5 ? -mag : mag, dom.lo, dom.hi);
    }
    zs.push_back(z);
  }

  Assumption2Report report;
  report.samples = samples;
  for (const double z : zs) {
    const double odd = std::abs(g(-z) + g(z));
    if (odd > tol * std::max(1.0, std::abs(g(z))) && odd > report.oddness.worst_violation) {
      report.oddness = {false, z, odd};
    }
    if (z == 0.0) continue;
    const double ratio = g(z) / z;
    const double v = std::max({bounds.kappa - ratio, ratio - bounds.K, 0.0});
    if (v > tol * std::max(1.0, bounds.K) && v > report.sector.worst_violation) {
      report.sector = {false, z, v};
    }
  }
  std::sort(zs.begin(), zs.end());
  for (std::size_t i = 1; i < zs.size(); ++i) {
    const double lo = g(zs[i - 1]);
    const double hi = g(zs[i]);
    const double drop = lo - hi;
    if (drop > tol * std::max(1.0, std::abs(lo)) && drop > report.monotonicity.worst_violation) {
      report.monotonicity = {false, zs[i], drop};
    }
  }
  return report;
}

/// Componentwise gains g(z)/z, i.e. the diagonal of Xi(t).
struct LinkGainSnapshot {
  Vector xi;

  Matrix as_diagonal() const { return xi.asDiagonal(); }
  static LinkGainSnapshot uniform(Eigen::Index size, double value) { return {Vector::Constant(size, value)}; }
};

/// Zero components get the midpoint (kappa + K) / 2, which keeps
/// kappa I <= Xi <= K I without biasing either end.
inline LinkGainSnapshot gain_snapshot(const LinkNonlinearity& g, const SectorBounds& bounds, const Vector& state) {
  LinkGainSnapshot snap{Vector(state.size())};
  for (Eigen::Index i = 0; i < state.size(); ++i) {
    const double z = state[i];
    snap.xi[i] = z == 0.0 ? 0.5 * (bounds.kappa + bounds.K) : g(z) / z;
  }
  return snap;
}

}  // namespace nlgt
