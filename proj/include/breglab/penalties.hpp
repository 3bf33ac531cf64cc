#pragma once

#include <cmath>
#include <random>
#include <stdexcept>
#include <variant>

#include "breglab/linops.hpp"

namespace breglab {

/// J(x) = ||x||^2 / 2
struct QuadraticPenalty {};
/// J(x) = ||x||_1
struct L1Penalty {};

using Penalty = std::variant<QuadraticPenalty, L1Penalty>;

inline double eval(const Penalty& j, const Vector& x) {
  if (std::holds_alternative<QuadraticPenalty>(j)) return 0.5 * x.squaredNorm();
  return x.lpNorm<1>();
}

/// argmin_x ||x - z||^2 / 2 + tau J(x)
inline Vector prox(const Penalty& j, const Vector& z, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("prox: tau must be positive");
  if (std::holds_alternative<QuadraticPenalty>(j)) return z / (1.0 + tau);
  return z.unaryExpr([tau](double v) {
    const double m = std::abs(v) - tau;
    return m > 0.0 ? std::copysign(m, v) : 0.0;
  });
}

/// xi = A*(v - A x) / alpha, the subgradient selected by the optimality condition.
inline Vector subgradient_from_optimality(const Operator& a, const Vector& x, const Vector& v,
                                          double alpha) {
  if (!(alpha > 0.0)) throw std::invalid_argument("subgradient_from_optimality: alpha must be positive");
  return adjoint_apply(a, v - apply_op(a, x)) / alpha;
}

/**
 * Largest violation of J(u) >= J(x) + <xi, u - x> - 1e-8 (1 + J(u)) over
 * `probes` random points u around x; 0 when xi passes as a subgradient.
 */
inline double subgradient_inequality_violation(const Penalty& j, const Vector& x, const Vector& xi,
                                               int probes, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> log_scale(-4.0, 1.0);
  const double jx = eval(j, x);
  double worst = 0.0;
  for (int p = 0; p < probes; ++p) {
    Vector dir(x.size());
    for (auto& c : dir) c = normal(rng);
    const Vector u = x + std::pow(10.0, log_scale(rng)) * (1.0 + x.norm()) * dir;
    const double ju = eval(j, u);
    const double gap = jx + xi.dot(u - x) - ju - 1e-8 * (1.0 + ju);
    worst = std::max(worst, gap);
  }
  return worst;
}

/// x_dagger is the characteristic function of a disc of this radius.
struct RofBallGeometry {
  double radius;
  explicit RofBallGeometry(double r) : radius(r) {
    if (!(r > 0.0)) throw std::invalid_argument("RofBallGeometry: radius must be positive");
  }
};

/// x_dagger is the characteristic function of the unit square; r_star is the
/// limiting radius beyond which the minimizer vanishes.
struct RofSquareGeometry {
  double r_star;
  explicit RofSquareGeometry(double r) : r_star(r) {
    if (!(r > 0.0)) throw std::invalid_argument("RofSquareGeometry: r_star must be positive");
  }
};

}  // namespace breglab
