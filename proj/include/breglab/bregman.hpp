#pragma once

// Bregman distances, residual bookkeeping and the identities relating the
// noisy and noise-free minimizers through their optimality conditions.

#include <algorithm>
#include <cmath>

#include "breglab/linops.hpp"
#include "breglab/penalties.hpp"

namespace breglab {

/// B_xi(z; x) = J(x) - J(z) - <xi, x - z>, xi a subgradient at the base point z.
inline double bregman_distance(const Penalty& j, const Vector& xi, const Vector& z, const Vector& x) {
  return eval(j, x) - eval(j, z) - xi.dot(x - z);
}

/// |B_xi(w;u) - B_eta(v;u) - B_xi(w;v) - <eta - xi, u - v>|
inline double three_point_identity_check(const Penalty& j, const Vector& xi_w, const Vector& w,
                                         const Vector& eta_v, const Vector& v, const Vector& u) {
  const double lhs = bregman_distance(j, xi_w, w, u);
  const double rhs = bregman_distance(j, eta_v, v, u) + bregman_distance(j, xi_w, w, v) +
                     (eta_v - xi_w).dot(u - v);
  return std::abs(lhs - rhs);
}

struct ResidualSet {
  Vector r_alpha_delta;  // A x_alpha^delta - y^delta
  Vector r_alpha;        // A x_alpha - y
  Vector delta_vec;      // y^delta - y
};

inline ResidualSet make_residuals(const Operator& a, const Vector& x_alpha,
                                  const Vector& x_alpha_delta, const Vector& y,
                                  const Vector& y_delta) {
  return {apply_op(a, x_alpha_delta) - y_delta, apply_op(a, x_alpha) - y, y_delta - y};
}

/// Noise-free and noisy minimizers of one (alpha, delta) cell.
struct MinimizerPair {
  Vector x_dagger;
  Vector y;
  Vector y_delta;
  Vector x_alpha;
  Vector x_alpha_delta;
  double alpha = 1.0;
  double kkt_residual = 0.0;  // worst of the two solves
};

struct IdentityReport {
  double cross = 0.0;  // <xi_a - xi_ad, x_dagger - x_a> + <r_ad - r_a, r_a> / alpha
  double noisy = 0.0;  // -<xi_ad, x_a - x_ad> - <r_ad, r_a - r_ad - Delta> / alpha
  double clean = 0.0;  // -<xi_a, x_dagger - x_a> + ||r_a||^2 / alpha
  double scale = 1.0;
  double worst() const { return std::max({cross, noisy, clean}); }
};

/**
 * Mismatches of the three identities obtained from the optimality
 * conditions, with subgradients xi = A*(v - A x) / alpha. `scale` is the
 * magnitude of the largest term involved, for relative tolerances.
 */
inline IdentityReport appendix_identities_check(const Operator& a, const MinimizerPair& s) {
  const double alpha = s.alpha;
  const ResidualSet r = make_residuals(a, s.x_alpha, s.x_alpha_delta, s.y, s.y_delta);
  const Vector xi_a = adjoint_apply(a, -r.r_alpha) / alpha;
  const Vector xi_ad = adjoint_apply(a, -r.r_alpha_delta) / alpha;

  const double cross_lhs = (xi_a - xi_ad).dot(s.x_dagger - s.x_alpha);
  const double cross_rhs = -(r.r_alpha_delta - r.r_alpha).dot(r.r_alpha) / alpha;
  const double noisy_lhs = -xi_ad.dot(s.x_alpha - s.x_alpha_delta);
  const double noisy_rhs = r.r_alpha_delta.dot(r.r_alpha - r.r_alpha_delta - r.delta_vec) / alpha;
  const double clean_lhs = -xi_a.dot(s.x_dagger - s.x_alpha);
  const double clean_rhs = -r.r_alpha.squaredNorm() / alpha;

  IdentityReport out;
  out.cross = std::abs(cross_lhs - cross_rhs);
  out.noisy = std::abs(noisy_lhs - noisy_rhs);
  out.clean = std::abs(clean_lhs - clean_rhs);
  out.scale = std::max({1.0, std::abs(cross_lhs), std::abs(cross_rhs), std::abs(noisy_lhs),
                        std::abs(noisy_rhs), std::abs(clean_lhs), std::abs(clean_rhs)});
  return out;
}

struct DistanceBoundsReport {
  // B_xi_a(x_a; x_dagger) - (defect_T - ||r_a||^2 / (2 alpha)); zero up to rounding.
  double identity_mismatch = 0.0;
  // B_xi_ad(x_ad; x_a) - (delta^2/(2 alpha) - ||r_a||^2/(2 alpha) + <r_ad, r_a>/alpha); <= 0.
  double inequality_excess = 0.0;
};

/// The two distance bounds behind the error-splitting estimate.
inline DistanceBoundsReport distance_bounds_check(const Operator& a, const Penalty& j,
                                                  const MinimizerPair& s) {
  const double alpha = s.alpha;
  const ResidualSet r = make_residuals(a, s.x_alpha, s.x_alpha_delta, s.y, s.y_delta);
  const Vector xi_a = adjoint_apply(a, -r.r_alpha) / alpha;
  const Vector xi_ad = adjoint_apply(a, -r.r_alpha_delta) / alpha;
  const double ra2 = r.r_alpha.squaredNorm();
  const double defect_j = eval(j, s.x_dagger) - eval(j, s.x_alpha);
  const double defect_t = defect_j - ra2 / (2.0 * alpha);
  const double delta = r.delta_vec.norm();

  DistanceBoundsReport out;
  out.identity_mismatch =
      bregman_distance(j, xi_a, s.x_alpha, s.x_dagger) - (defect_t - ra2 / (2.0 * alpha));
  out.inequality_excess = bregman_distance(j, xi_ad, s.x_alpha_delta, s.x_alpha) -
                          (delta * delta / (2.0 * alpha) - ra2 / (2.0 * alpha) +
                           r.r_alpha_delta.dot(r.r_alpha) / alpha);
  return out;
}

}  // namespace breglab
