#pragma once

// Tikhonov minimizers: closed forms for the quadratic penalty and the ROF
// disc/square, accelerated proximal gradient for the l1 penalty, and the
// spectral quantities of diagonal problems.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "breglab/index_function.hpp"
#include "breglab/linops.hpp"
#include "breglab/penalties.hpp"

namespace breglab {

struct SolveReport {
  Vector minimizer;
  double objective = 0.0;  // T_alpha(minimizer; v)
  std::size_t iterations = 0;
  double kkt_residual = 0.0;
  bool converged = true;
};

/// T_alpha(x; v) = ||A x - v||^2 / 2 + alpha J(x)
inline double tikhonov_value(const Operator& a, const Penalty& j, const Vector& x, const Vector& v,
                             double alpha) {
  return 0.5 * (apply_op(a, x) - v).squaredNorm() + alpha * eval(j, x);
}

inline SolveReport solve_quadratic(const Operator& a, const Vector& v, double alpha) {
  if (!(alpha > 0.0)) throw std::invalid_argument("solve_quadratic: alpha must be positive");
  if (v.size() != rows(a)) throw std::invalid_argument("solve_quadratic: dimension mismatch");
  SolveReport report;
  if (const auto* d = std::get_if<DiagonalOperator>(&a)) {
    const auto& s = d->singular_values();
    report.minimizer = (s.cwiseProduct(v).array() / (s.array().square() + alpha)).matrix();
  } else {
    const Matrix& m = std::get<DenseOperator>(a).matrix();
    Matrix normal = m.transpose() * m;
    normal.diagonal().array() += alpha;
    Eigen::LDLT<Matrix> ldlt(normal);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
      throw std::runtime_error("solve_quadratic: normal equations not positive definite");
    }
    report.minimizer = ldlt.solve(m.transpose() * v);
  }
  const Vector& x = report.minimizer;
  report.objective = tikhonov_value(a, QuadraticPenalty{}, x, v, alpha);
  report.kkt_residual = (adjoint_apply(a, apply_op(a, x) - v) + alpha * x).norm();
  report.iterations = 1;
  return report;
}

/**
 * Distance from the l1 optimality condition: || A*(Ax - v) + alpha xi || with
 * xi in the subdifferential of ||.||_1 at x chosen to minimize it.
 */
inline double l1_kkt_residual(const Operator& a, const Vector& x, const Vector& v, double alpha) {
  const Vector g = adjoint_apply(a, apply_op(a, x) - v);
  double ss = 0.0;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double r = x[k] != 0.0 ? g[k] + alpha * std::copysign(1.0, x[k])
                                 : std::max(std::abs(g[k]) - alpha, 0.0);
    ss += r * r;
  }
  return std::sqrt(ss);
}

namespace detail {
/// Solves the optimality system restricted to the support of x with its
/// signs held fixed; returns true and overwrites x if the KKT residual drops.
inline bool polish_l1_support(const Operator& a, const Vector& v, double alpha, Vector& x,
                              double& kkt) {
  std::vector<Eigen::Index> support;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    if (x[k] != 0.0) support.push_back(k);
  }
  const Matrix full = to_matrix(a);
  for (int attempt = 0; attempt < 3 && !support.empty(); ++attempt) {
    const auto s = static_cast<Eigen::Index>(support.size());
    Matrix sub(full.rows(), s);
    Vector signs(s);
    for (Eigen::Index i = 0; i < s; ++i) {
      sub.col(i) = full.col(support[static_cast<std::size_t>(i)]);
      signs[i] = std::copysign(1.0, x[support[static_cast<std::size_t>(i)]]);
    }
    Eigen::LDLT<Matrix> ldlt(sub.transpose() * sub);
    if (ldlt.info() != Eigen::Success) return false;
    const Vector xs = ldlt.solve(sub.transpose() * v - alpha * signs);
    std::vector<Eigen::Index> consistent;
    for (Eigen::Index i = 0; i < s; ++i) {
      if (xs[i] * signs[i] > 0.0) consistent.push_back(support[static_cast<std::size_t>(i)]);
    }
    if (consistent.size() == support.size()) {
      Vector candidate = Vector::Zero(x.size());
      for (Eigen::Index i = 0; i < s; ++i) candidate[support[static_cast<std::size_t>(i)]] = xs[i];
      const double candidate_kkt = l1_kkt_residual(a, candidate, v, alpha);
      if (candidate_kkt < kkt) {
        x = std::move(candidate);
        kkt = candidate_kkt;
        return true;
      }
      return false;
    }
    support = std::move(consistent);
  }
  return false;
}
}  // namespace detail

/**
 * argmin ||A x - v||^2 / 2 + alpha ||x||_1 by FISTA with gradient-based
 * adaptive restart, step 0.95 / ||A||^2 from the power-method estimate, zero
 * start unless `start` is given. Iteration stops once the objective decrease falls below
 * tol (1 + objective) with KKT residual below sqrt(tol). The final iterate is
 * then polished by solving the optimality system on its support, which is
 * kept only when it lowers the KKT residual.
 */
inline SolveReport solve_l1(const Operator& a, const Vector& v, double alpha, double tol,
                            std::size_t max_iter, const Vector* start = nullptr) {
  if (!(alpha > 0.0)) throw std::invalid_argument("solve_l1: alpha must be positive");
  if (!(tol > 0.0)) throw std::invalid_argument("solve_l1: tol must be positive");
  if (v.size() != rows(a)) throw std::invalid_argument("solve_l1: dimension mismatch");

  const double lipschitz = operator_norm_squared(a);
  const Penalty l1 = L1Penalty{};
  SolveReport report;
  const Eigen::Index n = cols(a);
  Vector x = Vector::Zero(n);
  if (start != nullptr) {
    if (start->size() != n) throw std::invalid_argument("solve_l1: start has wrong length");
    x = *start;
  }
  if (lipschitz == 0.0) {
    report.minimizer = x;
    report.objective = tikhonov_value(a, l1, x, v, alpha);
    return report;
  }
  const double step = 0.95 / lipschitz;

  Vector ax = apply_op(a, x);
  Vector z = x;
  Vector az = ax;
  double t = 1.0;
  double objective = 0.5 * (ax - v).squaredNorm() + alpha * x.lpNorm<1>();
  bool stopped = false;
  std::size_t it = 0;
  while (it < max_iter) {
    ++it;
    const Vector grad = adjoint_apply(a, az - v);
    Vector x_new = prox(l1, z - step * grad, step * alpha);
    Vector ax_new = apply_op(a, x_new);
    const double t_new = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    if ((z - x_new).dot(x_new - x) > 0.0) {
      z = x_new;
      az = ax_new;
      t = 1.0;
    } else {
      const double beta = (t - 1.0) / t_new;
      z = x_new + beta * (x_new - x);
      az = ax_new + beta * (ax_new - ax);
      t = t_new;
    }
    x = std::move(x_new);
    ax = std::move(ax_new);
    const double obj_new = 0.5 * (ax - v).squaredNorm() + alpha * x.lpNorm<1>();
    const double decrease = objective - obj_new;
    objective = obj_new;
    if (std::abs(decrease) < tol * (1.0 + objective) &&
        l1_kkt_residual(a, x, v, alpha) < std::sqrt(tol)) {
      stopped = true;
      break;
    }
  }

  double kkt = l1_kkt_residual(a, x, v, alpha);
  const bool polished = detail::polish_l1_support(a, v, alpha, x, kkt);
  report.minimizer = std::move(x);
  report.objective = tikhonov_value(a, l1, report.minimizer, v, alpha);
  report.iterations = it;
  report.kkt_residual = kkt;
  report.converged = stopped || (polished && kkt < std::sqrt(tol));
  return report;
}

/// Amplitude of the noise-free ROF minimizer max{1 - 2 alpha / R, 0} chi_B.
inline double rof_ball_minimizer(const RofBallGeometry& geom, double alpha) {
  if (!(alpha > 0.0)) throw std::domain_error("rof_ball_minimizer: alpha must be positive");
  return std::max(1.0 - 2.0 * alpha / geom.radius, 0.0);
}

struct RofQuantities {
  double defect_J = 0.0;     // J(x_dagger) - J(x_alpha)
  double residual_sq = 0.0;  // ||x_alpha - x_dagger||^2
  double bregman = 0.0;      // B_xi(x_alpha; x_dagger), xi from the optimality condition
};

/// Disc of radius R: J(c chi_B) = 2 pi R c, ||chi_B||^2 = pi R^2.
inline RofQuantities rof_ball_quantities(const RofBallGeometry& geom, double alpha) {
  using std::numbers::pi;
  const double r = geom.radius;
  const double gap = 1.0 - rof_ball_minimizer(geom, alpha);
  RofQuantities q;
  if (2.0 * alpha < r) {
    q.defect_J = 4.0 * pi * alpha;
    q.residual_sq = 4.0 * pi * alpha * alpha;
    q.bregman = 0.0;
  } else {
    q.defect_J = 2.0 * pi * r;
    q.residual_sq = pi * r * r;
    // xi = chi_B / alpha.
    q.bregman = q.defect_J - gap * gap * pi * r * r / alpha;
  }
  return q;
}

struct RofNoisyBall {
  double amplitude = 0.0;
  double bregman = 0.0;
};

/**
 * Disc with data y_delta = (1 + eps) chi_B, i.e. noise along chi_B with
 * ||Delta|| = |eps| sqrt(pi) R. One-homogeneity of TV gives the minimizer
 * max{1 + eps - 2 alpha / R, 0} chi_B in closed form.
 */
inline RofNoisyBall rof_ball_noisy(const RofBallGeometry& geom, double alpha, double eps) {
  using std::numbers::pi;
  if (!(alpha > 0.0)) throw std::domain_error("rof_ball_noisy: alpha must be positive");
  if (!(eps > -1.0)) throw std::domain_error("rof_ball_noisy: noise must keep the data positive");
  const double r = geom.radius;
  RofNoisyBall out;
  out.amplitude = std::max(1.0 + eps - 2.0 * alpha / r, 0.0);
  const double c = out.amplitude;
  // xi = (1 + eps - c) chi_B / alpha.
  out.bregman = 2.0 * pi * r * (1.0 - c) - (1.0 + eps - c) * (1.0 - c) * pi * r * r / alpha;
  return out;
}

/// Unit square, alpha <= R*.
inline RofQuantities rof_square_quantities(const RofSquareGeometry& geom, double alpha) {
  using std::numbers::pi;
  const double rs = geom.r_star;
  if (!(alpha > 0.0) || alpha > rs) {
    throw std::domain_error("rof_square_quantities: requires 0 < alpha <= R*");
  }
  const double log_term = std::log(rs / alpha);
  RofQuantities q;
  q.defect_J = 4.0 / rs * alpha + 2.0 * (4.0 - pi) * alpha * log_term;
  q.residual_sq = alpha * alpha / (rs * rs) + 2.0 * (4.0 - pi) * alpha * alpha * log_term;
  q.bregman = q.defect_J - q.residual_sq / alpha;
  return q;
}

/// Psi for the square: (4 / R*) alpha + 2 (4 - pi) alpha log(R* / alpha).
inline IndexFunction rof_square_psi(const RofSquareGeometry& geom) {
  return IndexFunction::log_linear(4.0 / geom.r_star, 2.0 * (4.0 - std::numbers::pi), geom.r_star);
}

struct SpectralQuantities {
  double residual_over_2alpha = 0.0;  // ||A x_alpha - A x_dagger||^2 / (2 alpha)
  double defect_T = 0.0;              // (T(x_dagger) - T(x_alpha)) / alpha
  double defect_J = 0.0;              // J(x_dagger) - J(x_alpha)
  double bregman = 0.0;               // B(x_alpha; x_dagger) = ||x_alpha - x_dagger||^2 / 2
};

/// Noise-free quadratic Tikhonov on diag(sigma) through r_alpha(l) = alpha / (alpha + l).
inline SpectralQuantities spectral_quantities(const DiagonalOperator& a, const Vector& x_dagger,
                                              double alpha) {
  if (!(alpha > 0.0)) throw std::domain_error("spectral_quantities: alpha must be positive");
  if (x_dagger.size() != a.cols()) throw std::invalid_argument("spectral_quantities: dimension mismatch");
  const Vector lambda = a.eigenvalues();
  SpectralQuantities q;
  for (Eigen::Index k = 0; k < lambda.size(); ++k) {
    const double l = lambda[k];
    const double x2 = x_dagger[k] * x_dagger[k];
    const double r = alpha / (alpha + l);
    q.residual_over_2alpha += r * r * l * x2 / (2.0 * alpha);
    q.defect_T += 0.5 * r * x2;
    q.defect_J += 0.5 * (1.0 - (1.0 - r) * (1.0 - r)) * x2;
    q.bregman += 0.5 * r * r * x2;
  }
  return q;
}

/// x_dagger = phi(A*A) v, componentwise phi(lambda_k) v_k; requires ||v|| <= 1.
inline Vector source_element(const DiagonalOperator& a, const IndexFunction& phi, const Vector& v) {
  if (v.size() != a.cols()) throw std::invalid_argument("source_element: dimension mismatch");
  if (v.norm() > 1.0 + 1e-12) throw std::invalid_argument("source_element: requires ||v|| <= 1");
  const Vector lambda = a.eigenvalues();
  Vector x(v.size());
  for (Eigen::Index k = 0; k < v.size(); ++k) x[k] = phi(lambda[k]) * v[k];
  return x;
}

}  // namespace breglab
