#pragma once

// Experiment engine: problem instances, (alpha, delta) sweeps and the
// numerical checks of the defect, error-splitting and rate statements.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "breglab/bregman.hpp"
#include "breglab/index_function.hpp"
#include "breglab/linops.hpp"
#include "breglab/numeric.hpp"
#include "breglab/penalties.hpp"
#include "breglab/solvers.hpp"

namespace breglab {

// ---------------------------------------------------------------------------
// Instances

/// A x = y with y = A x_dagger, solved with a finite-dimensional penalty.
struct LinearInstance {
  Operator op;
  Vector x_dagger;
  Penalty penalty;
  NoiseModel noise;
  std::string label;
  std::optional<PsiProfile> psi;       // profile bound used by the theorem sweep
  std::optional<IndexFunction> vi_phi;  // variational-inequality Phi known to hold
  std::vector<double> source_norms;    // ||A^{-T} e_k||, l1 instances only

  Vector y() const { return apply_op(op, x_dagger); }
};

/// TV denoising of the characteristic function of a disc (closed forms).
struct RofBallInstance {
  RofBallGeometry geom;
  std::string label;
};

/// TV denoising of the characteristic function of the unit square.
struct RofSquareInstance {
  RofSquareGeometry geom;
  std::string label;
};

using RegularizationInstance = std::variant<LinearInstance, RofBallInstance, RofSquareInstance>;

inline const std::string& label(const RegularizationInstance& inst) {
  return std::visit([](const auto& i) -> const std::string& { return i.label; }, inst);
}

/// x_dagger minimizes J globally, which for both finite-dimensional penalties means J(x_dagger) = 0.
inline bool is_singular(const RegularizationInstance& inst) {
  const auto* lin = std::get_if<LinearInstance>(&inst);
  return lin != nullptr && eval(lin->penalty, lin->x_dagger) == 0.0;
}

/**
 * Piecewise-linear concave bound for l1 penalties:
 * 2 min_{0<=n<=N} ( sum_{k>n} |x_k| + t sum_{k<=n} ||f^(k)|| ).
 */
inline double l1_phi(const Vector& x_dagger, const std::vector<double>& source_norms, double t) {
  if (static_cast<std::size_t>(x_dagger.size()) != source_norms.size()) {
    throw std::invalid_argument("l1_phi: need one source norm per coefficient");
  }
  if (!(t >= 0.0)) throw std::domain_error("l1_phi: t must be nonnegative");
  double tail = x_dagger.lpNorm<1>();
  double head = 0.0;
  double best = tail;
  for (std::size_t k = 0; k < source_norms.size(); ++k) {
    tail -= std::abs(x_dagger[static_cast<Eigen::Index>(k)]);
    head += source_norms[k];
    best = std::min(best, std::max(tail, 0.0) + t * head);
  }
  return 2.0 * best;
}

inline IndexFunction l1_phi_function(const Vector& x_dagger, const std::vector<double>& norms) {
  return IndexFunction::composite(
      [x = x_dagger, norms](double t) { return l1_phi(x, norms, t); }, {1e-12, 1.0}, "l1 phi");
}

/// n = 1, A = sqrt(lambda), x_dagger = x, quadratic penalty.
inline LinearInstance make_scalar_quadratic_instance(double lambda = 1.0, double x = 1.0) {
  Vector sigma(1);
  sigma[0] = std::sqrt(lambda);
  Vector xd(1);
  xd[0] = x;
  return {DiagonalOperator(sigma), xd, QuadraticPenalty{}, {}, "quadratic-scalar", {}, {}, {}};
}

/**
 * Diagonal operator with lambda_k = k^{-2} (k = 1..n) and x_dagger =
 * lambda^nu v for v_k proportional to k^{-1/2}, ||v|| = 1. Psi = lambda^{2nu}
 * needs 2 nu <= 1; the linear Phi uses ||w|| for x_dagger = A* w.
 */
inline LinearInstance make_quadratic_instance(std::size_t n = 50, double nu = 0.5) {
  if (n == 0) throw std::invalid_argument("quadratic instance: n must be positive");
  if (!(nu > 0.0 && nu <= 0.5)) throw std::domain_error("quadratic instance: nu must lie in (0, 1/2]");
  const auto size = static_cast<Eigen::Index>(n);
  Vector sigma(size), v(size);
  for (Eigen::Index k = 0; k < size; ++k) {
    sigma[k] = 1.0 / static_cast<double>(k + 1);
    v[k] = 1.0 / std::sqrt(static_cast<double>(k + 1));
  }
  v.normalize();
  DiagonalOperator diag(sigma);
  Vector xd = source_element(diag, IndexFunction::monomial(nu), v);
  Vector w(size);
  for (Eigen::Index k = 0; k < size; ++k) w[k] = xd[k] / sigma[k];
  LinearInstance inst{diag, xd, QuadraticPenalty{}, {}, "quadratic", {}, {}, {}};
  inst.psi = PsiProfile{IndexFunction::monomial(2.0 * nu), PsiSource::assumed};
  inst.vi_phi = IndexFunction::linear(w.norm());
  return inst;
}

enum class L1Shape { sparse, dense, zero };

namespace detail {
/// sparse: the first 3n/4 coefficients are +-10^{-6k/(3n/4)}, the rest zero.
/// dense: every coefficient +-(k+1)^{-2}. zero: x_dagger = 0. Signs from rng.
inline Vector l1_coefficients(L1Shape shape, Eigen::Index size, std::mt19937_64& rng) {
  Vector xd = Vector::Zero(size);
  std::bernoulli_distribution coin(0.5);
  const Eigen::Index support = std::max<Eigen::Index>(1, 3 * size / 4);
  for (Eigen::Index k = 0; k < size; ++k) {
    const double sign = coin(rng) ? 1.0 : -1.0;
    if (shape == L1Shape::sparse && k < support) {
      xd[k] = sign * std::pow(10.0, -6.0 * static_cast<double>(k) / static_cast<double>(support));
    } else if (shape == L1Shape::dense) {
      xd[k] = sign / std::pow(static_cast<double>(k + 1), 2.0);
    }
  }
  return xd;
}

inline LinearInstance assemble_l1_instance(L1Shape shape, Matrix a, const Matrix& inv_t, Vector xd) {
  const auto n = static_cast<std::size_t>(a.cols());
  std::vector<double> norms(n);
  for (std::size_t k = 0; k < n; ++k) norms[k] = inv_t.col(static_cast<Eigen::Index>(k)).norm();
  static constexpr const char* names[] = {"l1-sparse", "l1-dense", "singular"};
  LinearInstance inst{DenseOperator(std::move(a)), std::move(xd), L1Penalty{}, {},
                      names[static_cast<int>(shape)], {}, {}, norms};
  if (shape == L1Shape::zero) {
    inst.psi = PsiProfile{IndexFunction::linear(1.0), PsiSource::assumed};
    inst.vi_phi = IndexFunction::linear(1.0);
  } else {
    inst.vi_phi = l1_phi_function(inst.x_dagger, norms);
    inst.psi = psi_profile_from_phi(*inst.vi_phi);
  }
  return inst;
}
}  // namespace detail

/**
 * A = U diag(sigma) V^T with seeded random orthogonal U, V and sigma
 * log-spaced from 1 down to 0.5; coefficients as in detail::l1_coefficients.
 */
inline LinearInstance make_l1_instance(L1Shape shape, std::size_t n = 40, std::uint64_t seed = 1) {
  if (n < 2) throw std::invalid_argument("l1 instance: n must be at least 2");
  const auto size = static_cast<Eigen::Index>(n);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  auto random_orthogonal = [&] {
    Matrix g(size, size);
    for (Eigen::Index j = 0; j < size; ++j) {
      for (Eigen::Index i = 0; i < size; ++i) g(i, j) = normal(rng);
    }
    Eigen::HouseholderQR<Matrix> qr(g);
    return Matrix(qr.householderQ());
  };
  const Matrix u = random_orthogonal();
  const Matrix v = random_orthogonal();
  Vector sigma(size);
  for (Eigen::Index k = 0; k < size; ++k) {
    sigma[k] = std::pow(0.5, static_cast<double>(k) / static_cast<double>(size - 1));
  }
  Matrix a = u * sigma.asDiagonal() * v.transpose();
  const Matrix inv_t = u * sigma.cwiseInverse().asDiagonal() * v.transpose();
  return detail::assemble_l1_instance(shape, std::move(a), inv_t, detail::l1_coefficients(shape, size, rng));
}

/// Same coefficients for a user-supplied square invertible matrix.
inline LinearInstance make_l1_instance(L1Shape shape, const DenseOperator& op, std::uint64_t seed = 1) {
  const Matrix& a = op.matrix();
  if (a.rows() != a.cols()) throw std::invalid_argument("l1 instance: operator must be square");
  Eigen::FullPivLU<Matrix> lu(a);
  if (!lu.isInvertible()) throw std::invalid_argument("l1 instance: operator must be invertible");
  std::mt19937_64 rng(seed);
  const Matrix inv_t = lu.inverse().transpose();
  return detail::assemble_l1_instance(shape, a, inv_t, detail::l1_coefficients(shape, a.cols(), rng));
}

inline LinearInstance make_singular_instance(std::size_t n = 40, std::uint64_t seed = 1) {
  return make_l1_instance(L1Shape::zero, n, seed);
}

inline RofBallInstance make_rof_ball_instance(double radius) {
  return {RofBallGeometry(radius), "rof-ball"};
}

inline RofSquareInstance make_rof_square_instance(double r_star) {
  return {RofSquareGeometry(r_star), "rof-square"};
}

/// Psi supplied with the instance: 4 pi alpha for the disc, the explicit
/// formula for the square, the stored profile otherwise.
inline std::optional<PsiProfile> instance_psi(const RegularizationInstance& inst) {
  if (const auto* lin = std::get_if<LinearInstance>(&inst)) return lin->psi;
  if (std::holds_alternative<RofBallInstance>(inst)) {
    return PsiProfile{IndexFunction::linear(4.0 * std::numbers::pi), PsiSource::assumed};
  }
  return PsiProfile{rof_square_psi(std::get<RofSquareInstance>(inst).geom), PsiSource::assumed};
}

// ---------------------------------------------------------------------------
// Point evaluation

struct SolverSettings {
  double tol = 1e-10;
  std::size_t max_iter = 200000;
};

class NonConvergence : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline SolveReport solve_tikhonov(const LinearInstance& inst, const Vector& v, double alpha,
                                  const SolverSettings& settings, const Vector* start = nullptr) {
  if (std::holds_alternative<QuadraticPenalty>(inst.penalty)) return solve_quadratic(inst.op, v, alpha);
  return solve_l1(inst.op, v, alpha, settings.tol, settings.max_iter, start);
}

struct NoiseFreePoint {
  double alpha = 0.0;
  double defect_J = 0.0;
  double defect_T = 0.0;
  double residual_sq = 0.0;
  double bregman = 0.0;  // B_xi_alpha(x_alpha; x_dagger)
  double kkt = 0.0;
  bool converged = true;
  Vector x_alpha;  // empty for the closed-form geometries
};

inline NoiseFreePoint solve_noise_free(const RegularizationInstance& inst, double alpha,
                                       const SolverSettings& settings = {}) {
  if (!(alpha > 0.0)) throw std::domain_error("alpha must be positive");
  NoiseFreePoint p;
  p.alpha = alpha;
  if (const auto* lin = std::get_if<LinearInstance>(&inst)) {
    const Vector y = lin->y();
    SolveReport r = solve_tikhonov(*lin, y, alpha, settings);
    p.x_alpha = std::move(r.minimizer);
    p.kkt = r.kkt_residual;
    p.converged = r.converged;
    p.defect_J = eval(lin->penalty, lin->x_dagger) - eval(lin->penalty, p.x_alpha);
    p.residual_sq = (apply_op(lin->op, p.x_alpha) - y).squaredNorm();
    p.defect_T = (tikhonov_value(lin->op, lin->penalty, lin->x_dagger, y, alpha) -
                  tikhonov_value(lin->op, lin->penalty, p.x_alpha, y, alpha)) /
                 alpha;
    const Vector xi = subgradient_from_optimality(lin->op, p.x_alpha, y, alpha);
    p.bregman = bregman_distance(lin->penalty, xi, p.x_alpha, lin->x_dagger);
    return p;
  }
  const RofQuantities q = std::holds_alternative<RofBallInstance>(inst)
                              ? rof_ball_quantities(std::get<RofBallInstance>(inst).geom, alpha)
                              : rof_square_quantities(std::get<RofSquareInstance>(inst).geom, alpha);
  p.defect_J = q.defect_J;
  p.residual_sq = q.residual_sq;
  p.defect_T = q.defect_J - q.residual_sq / (2.0 * alpha);
  p.bregman = q.bregman;
  return p;
}

/// J(x_dagger) - J(x_alpha); throws NonConvergence if the solver flag is down.
inline double defect_penalty(const RegularizationInstance& inst, double alpha,
                             const SolverSettings& settings = {}) {
  const NoiseFreePoint p = solve_noise_free(inst, alpha, settings);
  if (!p.converged) throw NonConvergence("defect_penalty: solver did not converge");
  return p.defect_J;
}

/// (T_alpha(x_dagger; y) - T_alpha(x_alpha; y)) / alpha; throws NonConvergence likewise.
inline double defect_tikhonov(const RegularizationInstance& inst, double alpha,
                              const SolverSettings& settings = {}) {
  const NoiseFreePoint p = solve_noise_free(inst, alpha, settings);
  if (!p.converged) throw NonConvergence("defect_tikhonov: solver did not converge");
  return p.defect_T;
}

struct NoisyPoint {
  double bregman = 0.0;   // B_xi_alpha^delta(x_alpha^delta; x_dagger)
  double sq_error = 0.0;  // ||x_alpha^delta - x_dagger||^2
  double kkt = 0.0;
  bool converged = true;
  std::optional<MinimizerPair> pair;  // finite-dimensional instances
};

/**
 * Minimizer for data y_delta with ||y_delta - y|| = delta drawn from `seed`.
 * For the disc the noise runs along its characteristic function with the
 * sign taken from the lowest bit of `seed`; the square has no noisy closed form.
 */
inline NoisyPoint solve_noisy(const RegularizationInstance& inst, const NoiseFreePoint& nf,
                              double delta, std::uint64_t seed, const SolverSettings& settings = {}) {
  if (!(delta >= 0.0)) throw std::domain_error("delta must be nonnegative");
  const double alpha = nf.alpha;
  NoisyPoint out;
  if (const auto* lin = std::get_if<LinearInstance>(&inst)) {
    NoiseModel model = lin->noise;
    model.seed = seed;
    const Vector y = lin->y();
    Vector yd = make_noisy(y, delta, model);
    SolveReport r = solve_tikhonov(*lin, yd, alpha, settings);
    const Vector xi = subgradient_from_optimality(lin->op, r.minimizer, yd, alpha);
    out.bregman = bregman_distance(lin->penalty, xi, r.minimizer, lin->x_dagger);
    out.sq_error = (r.minimizer - lin->x_dagger).squaredNorm();
    out.kkt = std::max(r.kkt_residual, nf.kkt);
    out.converged = r.converged && nf.converged;
    out.pair = MinimizerPair{lin->x_dagger, y,       std::move(yd), nf.x_alpha,
                             std::move(r.minimizer), alpha, out.kkt};
    return out;
  }
  if (const auto* ball = std::get_if<RofBallInstance>(&inst)) {
    const double r = ball->geom.radius;
    const double sign = (seed & 1ULL) ? -1.0 : 1.0;
    const double eps = sign * delta / (std::sqrt(std::numbers::pi) * r);
    const RofNoisyBall nb = rof_ball_noisy(ball->geom, alpha, eps);
    out.bregman = nb.bregman;
    out.sq_error = (1.0 - nb.amplitude) * (1.0 - nb.amplitude) * std::numbers::pi * r * r;
    return out;
  }
  throw std::logic_error("the square geometry has no closed-form noisy minimizer");
}

// ---------------------------------------------------------------------------
// Reports

struct Cell {
  double alpha = std::numeric_limits<double>::quiet_NaN();
  double delta = std::numeric_limits<double>::quiet_NaN();
  std::uint64_t seed = 0;
  bool has_seed = false;
};

inline std::string describe(const Cell& c) {
  std::ostringstream os;
  os.precision(6);
  os << "(alpha=" << c.alpha;
  if (!std::isnan(c.delta)) os << ", delta=" << c.delta;
  if (c.has_seed) os << ", seed=" << c.seed;
  os << ")";
  return os.str();
}

/// Outcome of one inequality check over many points: lhs - rhs is tracked,
/// a point violates when lhs - rhs exceeds its tolerance.
struct CheckReport {
  std::string name;
  std::size_t points = 0;
  std::size_t violations = 0;
  std::size_t nonconverged = 0;
  double max_violation = -kInfinity;
  Cell worst;
  Cell first_failure;
  bool asserted = true;

  bool passed() const { return !asserted || violations == 0; }

  void observe(double excess, double tol, const Cell& cell) {
    ++points;
    if (excess > max_violation || std::isnan(excess)) {
      max_violation = excess;
      worst = cell;
    }
    if (!(excess <= tol)) {
      if (violations == 0) first_failure = cell;
      ++violations;
    }
  }
  void skip_nonconverged() { ++nonconverged; }
};

struct ExperimentRecord {
  double alpha = 0.0;
  double delta = 0.0;
  std::uint64_t seed = 0;
  double defect_J = 0.0;
  double defect_T = 0.0;
  double residual_sq = 0.0;
  double bregman_noisy = 0.0;
  double psi = 0.0;
  double bound = 0.0;
  double violation = 0.0;  // max(bregman_noisy - bound, 0)
};

// ---------------------------------------------------------------------------
// Noise-free checks

inline std::vector<NoiseFreePoint> sweep_noise_free(const RegularizationInstance& inst,
                                                    const std::vector<double>& alpha_grid,
                                                    const SolverSettings& settings = {}) {
  std::vector<NoiseFreePoint> out(alpha_grid.size());
  parallel_for(alpha_grid.size(),
               [&](std::size_t i) { out[i] = solve_noise_free(inst, alpha_grid[i], settings); });
  return out;
}

namespace detail {
template <class Excess>
CheckReport check_points(std::string name, const std::vector<NoiseFreePoint>& points, double tol,
                         Excess excess) {
  if (points.empty()) throw std::invalid_argument(name + ": empty alpha grid");
  CheckReport rep;
  rep.name = std::move(name);
  for (const auto& p : points) {
    if (!p.converged) {
      rep.skip_nonconverged();
      continue;
    }
    rep.observe(excess(p), tol, Cell{p.alpha});
  }
  return rep;
}
}  // namespace detail

/// defect_J <= 2 defect_T + 1e-10 at every point.
inline CheckReport check_equivalence(const std::vector<NoiseFreePoint>& points) {
  return detail::check_points("equivalence", points, 1e-10,
                              [](const NoiseFreePoint& p) { return p.defect_J - 2.0 * p.defect_T; });
}

inline CheckReport check_equivalence(const RegularizationInstance& inst,
                                     const std::vector<double>& alpha_grid,
                                     const SolverSettings& settings = {}) {
  return check_equivalence(sweep_noise_free(inst, alpha_grid, settings));
}

/// residual_sq / (2 alpha) <= defect_J + 1e-10.
inline CheckReport check_residual_bound(const std::vector<NoiseFreePoint>& points) {
  return detail::check_points("residual bound", points, 1e-10, [](const NoiseFreePoint& p) {
    return p.residual_sq / (2.0 * p.alpha) - p.defect_J;
  });
}

/// defect_J >= -1e-10.
inline CheckReport check_defect_nonnegative(const std::vector<NoiseFreePoint>& points) {
  return detail::check_points("defect nonnegative", points, 1e-10,
                              [](const NoiseFreePoint& p) { return -p.defect_J; });
}

/// T_alpha(x_alpha) <= T_alpha(x_dagger), i.e. defect_T >= 0.
inline CheckReport check_minimizing(const std::vector<NoiseFreePoint>& points) {
  return detail::check_points("minimizing property", points, 1e-10,
                              [](const NoiseFreePoint& p) { return -p.defect_T; });
}

/// |defect_J - defect_T - residual_sq / (2 alpha)| relative to the defect.
inline CheckReport check_defect_identity(const std::vector<NoiseFreePoint>& points) {
  return detail::check_points("defect identity", points, 1e-10, [](const NoiseFreePoint& p) {
    return std::abs(p.defect_J - p.defect_T - p.residual_sq / (2.0 * p.alpha)) /
           (1.0 + std::abs(p.defect_J));
  });
}

/// Counts decreases of defect_J along the increasing grid; reported, not asserted.
inline CheckReport observe_defect_monotone(std::vector<NoiseFreePoint> points) {
  std::sort(points.begin(), points.end(),
            [](const auto& a, const auto& b) { return a.alpha < b.alpha; });
  CheckReport rep;
  rep.name = "defect monotone in alpha";
  rep.asserted = false;
  for (std::size_t i = 1; i < points.size(); ++i) {
    rep.observe(points[i - 1].defect_J - points[i].defect_J,
                1e-10 * (1.0 + std::abs(points[i].defect_J)), Cell{points[i].alpha});
  }
  return rep;
}

/**
 * Two solves per alpha from different starts (zero and a seeded random
 * point for l1; diagonal and dense factorization for the quadratic penalty)
 * must agree in T_alpha to 1e-8 relative.
 */
inline CheckReport check_value_uniqueness(const LinearInstance& inst,
                                          const std::vector<double>& alpha_grid,
                                          std::uint64_t seed, const SolverSettings& settings = {}) {
  const Vector y = inst.y();
  std::vector<double> gaps(alpha_grid.size());
  std::vector<char> ok(alpha_grid.size(), 1);
  parallel_for(alpha_grid.size(), [&](std::size_t i) {
    const double alpha = alpha_grid[i];
    SolveReport first = solve_tikhonov(inst, y, alpha, settings);
    SolveReport second;
    if (std::holds_alternative<QuadraticPenalty>(inst.penalty)) {
      second = solve_quadratic(DenseOperator(to_matrix(inst.op)), y, alpha);
    } else {
      std::mt19937_64 rng(point_seed(seed, i, 0, 0));
      std::normal_distribution<double> normal;
      Vector start(cols(inst.op));
      for (auto& c : start) c = normal(rng) * (1.0 + inst.x_dagger.norm());
      second = solve_tikhonov(inst, y, alpha, settings, &start);
    }
    ok[i] = first.converged && second.converged;
    gaps[i] = std::abs(first.objective - second.objective) /
              std::max(std::abs(first.objective), std::numeric_limits<double>::min());
  });
  CheckReport rep;
  rep.name = "minimal value uniqueness";
  for (std::size_t i = 0; i < alpha_grid.size(); ++i) {
    if (!ok[i]) {
      rep.skip_nonconverged();
      continue;
    }
    rep.observe(gaps[i], 1e-8, Cell{alpha_grid[i]});
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Error splitting

struct SplittingResult {
  CheckReport theorem;     // B <= delta^2/(2 alpha) + Psi(alpha)
  CheckReport distance_identity;    // B_xi_a(x_a; x_dagger) identity
  CheckReport distance_inequality;  // B_xi_ad(x_ad; x_a) inequality
  CheckReport identities;  // the three optimality identities
  std::vector<ExperimentRecord> records;
  std::size_t excluded_psi_infinite = 0;
};

/**
 * Theorem sweep over alpha x delta x replicate. Rows come out alpha outer,
 * delta inner, replicate innermost; seeds are point_seed(base, i, j, r).
 * Points with Psi(alpha) = +inf are recorded but not asserted; points whose
 * solver flag is down are counted separately.
 */
inline SplittingResult check_error_splitting(const RegularizationInstance& inst, const PsiProfile& psi,
                                             const std::vector<double>& alpha_grid,
                                             const std::vector<double>& delta_grid,
                                             std::size_t replicates, std::uint64_t base_seed,
                                             const SolverSettings& settings = {}) {
  if (alpha_grid.empty() || delta_grid.empty() || replicates == 0) {
    throw std::invalid_argument("check_error_splitting: empty grid");
  }
  const std::vector<NoiseFreePoint> nf = sweep_noise_free(inst, alpha_grid, settings);
  std::vector<double> psi_values(alpha_grid.size());
  parallel_for(alpha_grid.size(), [&](std::size_t i) { psi_values[i] = psi(alpha_grid[i]); });

  const std::size_t per_alpha = delta_grid.size() * replicates;
  const std::size_t total = alpha_grid.size() * per_alpha;
  std::vector<NoisyPoint> noisy(total);
  std::vector<std::uint64_t> seeds(total);
  parallel_for(total, [&](std::size_t idx) {
    const std::size_t i = idx / per_alpha;
    const std::size_t j = (idx % per_alpha) / replicates;
    const std::size_t r = idx % replicates;
    seeds[idx] = point_seed(base_seed, i, j, r);
    noisy[idx] = solve_noisy(inst, nf[i], delta_grid[j], seeds[idx], settings);
  });

  const auto* lin = std::get_if<LinearInstance>(&inst);
  const bool quadratic = lin != nullptr && std::holds_alternative<QuadraticPenalty>(lin->penalty);
  SplittingResult out;
  out.theorem.name = "error splitting";
  out.distance_identity.name = "distance identity";
  out.distance_inequality.name = "distance inequality";
  out.identities.name = "optimality identities";
  out.records.reserve(total);
  for (std::size_t idx = 0; idx < total; ++idx) {
    const std::size_t i = idx / per_alpha;
    const std::size_t j = (idx % per_alpha) / replicates;
    const double alpha = alpha_grid[i];
    const double delta = delta_grid[j];
    const NoisyPoint& p = noisy[idx];
    const Cell cell{alpha, delta, seeds[idx], true};

    ExperimentRecord rec;
    rec.alpha = alpha;
    rec.delta = delta;
    rec.seed = seeds[idx];
    rec.defect_J = nf[i].defect_J;
    rec.defect_T = nf[i].defect_T;
    rec.residual_sq = nf[i].residual_sq;
    rec.bregman_noisy = p.bregman;
    rec.psi = psi_values[i];
    rec.bound = delta * delta / (2.0 * alpha) + rec.psi;
    rec.violation = is_infinite(rec.bound) ? 0.0 : std::max(p.bregman - rec.bound, 0.0);
    out.records.push_back(rec);

    if (!p.converged) {
      out.theorem.skip_nonconverged();
      continue;
    }
    if (is_infinite(rec.psi)) {
      ++out.excluded_psi_infinite;
    } else {
      out.theorem.observe(p.bregman - rec.bound, 1e-10 * (1.0 + rec.bound), cell);
    }
    if (p.pair) {
      const IdentityReport a = appendix_identities_check(lin->op, *p.pair);
      out.identities.observe(a.worst(), (quadratic ? 1e-12 : 1e-6) * a.scale, cell);
      const DistanceBoundsReport d = distance_bounds_check(lin->op, lin->penalty, *p.pair);
      out.distance_identity.observe(std::abs(d.identity_mismatch),
                                    1e-10 * (1.0 + std::abs(nf[i].defect_J)), cell);
      out.distance_inequality.observe(d.inequality_excess, 1e-10 * (1.0 + delta * delta / alpha), cell);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Variational inequality

/**
 * Samples x around x_dagger and checks J(x_dagger) - J(x) <= Phi(||A x - A x_dagger||).
 * Even probes are Gaussian directions scaled by 10^U(-6,1) (1 + ||x_dagger||)
 * / sqrt(n); odd probes change one to three coordinates, each either zeroed
 * or shifted by a scaled normal draw.
 */
inline CheckReport check_vi(const LinearInstance& inst, const IndexFunction& phi, std::size_t probes,
                            std::uint64_t seed) {
  if (probes == 0) throw std::invalid_argument("check_vi: probes must be at least 1");
  const Eigen::Index n = inst.x_dagger.size();
  const Vector ax = apply_op(inst.op, inst.x_dagger);
  const double jd = eval(inst.penalty, inst.x_dagger);
  const double scale = (1.0 + inst.x_dagger.norm()) / std::sqrt(static_cast<double>(n));
  std::vector<double> excess(probes);
  parallel_for(probes, [&](std::size_t p) {
    std::mt19937_64 rng(point_seed(seed, p, 0, 0));
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> log_scale(-6.0, 1.0);
    Vector x = inst.x_dagger;
    if (p % 2 == 0) {
      const double s = std::pow(10.0, log_scale(rng)) * scale;
      for (auto& c : x) c += s * normal(rng);
    } else {
      std::uniform_int_distribution<Eigen::Index> coord(0, n - 1);
      std::uniform_int_distribution<int> count(1, 3);
      std::bernoulli_distribution zero(0.5);
      for (int c = count(rng); c > 0; --c) {
        const Eigen::Index k = coord(rng);
        if (zero(rng)) {
          x[k] = 0.0;
        } else {
          x[k] += std::pow(10.0, log_scale(rng)) * (1.0 + std::abs(x[k])) * normal(rng);
        }
      }
    }
    const double t = (apply_op(inst.op, x) - ax).norm();
    const double bound = t > 0.0 ? phi(t) : 0.0;
    excess[p] = jd - eval(inst.penalty, x) - bound;
  });
  CheckReport rep;
  rep.name = "variational inequality";
  for (std::size_t p = 0; p < probes; ++p) {
    rep.observe(excess[p], 1e-12 * (1.0 + jd), Cell{std::numeric_limits<double>::quiet_NaN(),
                                                    std::numeric_limits<double>::quiet_NaN(),
                                                    static_cast<std::uint64_t>(p), true});
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Rates

struct AlphaRule {
  enum class Kind { proportional, calibrated, fixed_power };
  Kind kind = Kind::proportional;
  double parameter = 1.0;  // c for proportional, p for fixed_power
  std::optional<PsiProfile> psi;

  static AlphaRule proportional(double c) { return {Kind::proportional, c, {}}; }
  static AlphaRule calibrated(PsiProfile p) { return {Kind::calibrated, 1.0, std::move(p)}; }
  static AlphaRule fixed_power(double p) { return {Kind::fixed_power, p, {}}; }

  double operator()(double delta) const {
    switch (kind) {
      case Kind::proportional:
        return parameter * delta;
      case Kind::fixed_power:
        return std::pow(delta, parameter);
      case Kind::calibrated:
        if (!psi) throw std::invalid_argument("calibrated rule needs a profile");
        return calibrate_alpha(*psi, delta, 1e-10);
    }
    throw std::logic_error("unknown alpha rule");
  }
};

enum class ErrorMeasure { bregman, squared_norm };

struct RateFit {
  std::vector<double> deltas;
  std::vector<double> alphas;
  std::vector<double> errors;  // mean over replicates
  double slope = 0.0;
  double intercept = 0.0;
  double residual = 0.0;
  std::size_t points_used = 0;
  std::size_t nonconverged = 0;
};

/// Mean error per delta with alpha from the rule, then a log-log fit over the
/// points with finite positive error (at least 4 required).
inline RateFit rate_experiment(const RegularizationInstance& inst, const AlphaRule& rule,
                               const std::vector<double>& delta_grid, std::size_t replicates,
                               std::uint64_t base_seed, ErrorMeasure measure = ErrorMeasure::bregman,
                               const SolverSettings& settings = {}) {
  if (replicates == 0) throw std::invalid_argument("rate_experiment: replicates must be positive");
  if (delta_grid.size() < 4) {
    throw std::invalid_argument("rate_experiment: degenerate fit, fewer than 4 delta values");
  }
  RateFit fit;
  fit.deltas = delta_grid;
  fit.alphas.resize(delta_grid.size());
  for (std::size_t j = 0; j < delta_grid.size(); ++j) fit.alphas[j] = rule(delta_grid[j]);

  std::vector<NoiseFreePoint> nf(delta_grid.size());
  parallel_for(delta_grid.size(),
               [&](std::size_t j) { nf[j] = solve_noise_free(inst, fit.alphas[j], settings); });
  const std::size_t total = delta_grid.size() * replicates;
  std::vector<NoisyPoint> noisy(total);
  parallel_for(total, [&](std::size_t idx) {
    const std::size_t j = idx / replicates;
    noisy[idx] = solve_noisy(inst, nf[j], delta_grid[j], point_seed(base_seed, 0, j, idx % replicates),
                             settings);
  });

  fit.errors.assign(delta_grid.size(), 0.0);
  std::vector<double> lx, ly;
  for (std::size_t j = 0; j < delta_grid.size(); ++j) {
    bool ok = true;
    for (std::size_t r = 0; r < replicates; ++r) {
      const NoisyPoint& p = noisy[j * replicates + r];
      if (!p.converged) {
        ++fit.nonconverged;
        ok = false;
      }
      fit.errors[j] += (measure == ErrorMeasure::bregman ? p.bregman : p.sq_error);
    }
    fit.errors[j] /= static_cast<double>(replicates);
    if (ok && fit.errors[j] > 0.0 && std::isfinite(fit.errors[j])) {
      lx.push_back(std::log10(delta_grid[j]));
      ly.push_back(std::log10(fit.errors[j]));
    }
  }
  if (lx.size() < 4) {
    throw std::invalid_argument("rate_experiment: degenerate fit, fewer than 4 valid points");
  }
  const LineFit line = fit_line(lx, ly);
  fit.slope = line.slope;
  fit.intercept = line.intercept;
  fit.residual = line.residual;
  fit.points_used = lx.size();
  return fit;
}

// ---------------------------------------------------------------------------
// Dichotomy, singular case, higher-order probe

struct DichotomyReport {
  CheckReport check;
  bool singular = false;
  double c0 = 0.0;
  std::vector<double> decade_minima;  // min defect_J / alpha per decade, smallest alpha first
};

/**
 * Singular instances: defect_J must vanish on the grid. Otherwise the
 * quotient defect_J / alpha is examined on the lowest three decades of the
 * grid: its per-decade minimum may fall by at most a factor 2 from one decade
 * to the next smaller one, and c0 = half the smallest minimum must be positive.
 */
inline DichotomyReport check_dichotomy(const RegularizationInstance& inst,
                                       const std::vector<double>& alpha_grid,
                                       const SolverSettings& settings = {}) {
  if (alpha_grid.empty()) throw std::invalid_argument("check_dichotomy: empty grid");
  const auto [lo_it, hi_it] = std::minmax_element(alpha_grid.begin(), alpha_grid.end());
  const double lo = *lo_it;
  if (*hi_it < lo * 1e3 * (1.0 - 1e-12)) {
    throw std::invalid_argument("check_dichotomy: grid must span at least 3 decades");
  }
  const std::vector<NoiseFreePoint> points = sweep_noise_free(inst, alpha_grid, settings);
  DichotomyReport out;
  out.check.name = "dichotomy";
  out.singular = is_singular(inst);
  if (out.singular) {
    for (const auto& p : points) {
      if (!p.converged) {
        out.check.skip_nonconverged();
        continue;
      }
      out.check.observe(std::abs(p.defect_J), 1e-12, Cell{p.alpha});
    }
    return out;
  }
  out.decade_minima.assign(3, kInfinity);
  for (const auto& p : points) {
    if (!p.converged) {
      out.check.skip_nonconverged();
      continue;
    }
    const double decade = std::floor(std::log10(p.alpha / lo) + 1e-9);
    if (decade > 3.0 || (decade == 3.0 && p.alpha > lo * 1e3 * (1.0 + 1e-12))) continue;
    const auto b = static_cast<std::size_t>(std::min(decade, 2.0));
    out.decade_minima[b] = std::min(out.decade_minima[b], p.defect_J / p.alpha);
  }
  double tail_min = kInfinity;
  for (double m : out.decade_minima) tail_min = std::min(tail_min, m);
  out.c0 = 0.5 * tail_min;
  out.check.observe(-out.c0, 0.0, Cell{lo});
  for (std::size_t b = 0; b + 1 < out.decade_minima.size(); ++b) {
    const double smaller = out.decade_minima[b];
    const double larger = out.decade_minima[b + 1];
    if (is_infinite(smaller) || is_infinite(larger)) continue;
    out.check.observe(0.5 * larger - smaller, 0.0, Cell{lo * std::pow(10.0, static_cast<double>(b))});
  }
  return out;
}

/// bregman_noisy <= 1e-8 on every record of a singular sweep.
inline CheckReport singular_bregman_check(const std::vector<ExperimentRecord>& records) {
  CheckReport rep;
  rep.name = "singular bregman";
  for (const auto& r : records) rep.observe(r.bregman_noisy, 1e-8, Cell{r.alpha, r.delta, r.seed, true});
  return rep;
}

/// B_xi_alpha^delta(x_alpha^delta; x_dagger) <= 1e-8 over the grid; requires J(x_dagger) = min J.
inline CheckReport singular_bregman_check(const RegularizationInstance& inst,
                                          const std::vector<double>& alpha_grid,
                                          const std::vector<double>& delta_grid,
                                          std::size_t replicates, std::uint64_t base_seed,
                                          const SolverSettings& settings = {}) {
  if (!is_singular(inst)) throw std::invalid_argument("singular_bregman_check: instance is not singular");
  const auto psi = PsiProfile{IndexFunction::linear(1.0), PsiSource::assumed};
  const SplittingResult sweep =
      check_error_splitting(inst, psi, alpha_grid, delta_grid, replicates, base_seed, settings);
  CheckReport rep = singular_bregman_check(sweep.records);
  rep.nonconverged = sweep.theorem.nonconverged;
  return rep;
}

struct HigherOrderReport {
  CheckReport identity;      // B(x_alpha; x_dagger) = 2 defect_T - defect_J
  CheckReport inequality;    // ||e^delta||^2 <= 2 ||e||^2 + delta^2 / alpha (quadratic only)
  CheckReport residual_form;  // noise-free term = ||r_alpha(A*A) x_dagger||^2 / 2 (diagonal quadratic)
  double empirical_c1 = 0.0;  // smallest C1 with C2 = 1 over the sweep
};

inline HigherOrderReport higher_order_probe(const RegularizationInstance& inst,
                                            const std::vector<double>& alpha_grid,
                                            const std::vector<double>& delta_grid,
                                            std::size_t replicates, std::uint64_t base_seed,
                                            const SolverSettings& settings = {}) {
  if (alpha_grid.empty() || delta_grid.empty()) throw std::invalid_argument("higher_order_probe: empty grid");
  const std::vector<NoiseFreePoint> nf = sweep_noise_free(inst, alpha_grid, settings);
  const auto* lin = std::get_if<LinearInstance>(&inst);
  const bool quadratic = lin != nullptr && std::holds_alternative<QuadraticPenalty>(lin->penalty);

  HigherOrderReport out;
  out.identity.name = "noise-free identity";
  out.inequality.name = "noise propagation inequality";
  out.inequality.asserted = quadratic;
  out.residual_form.name = "residual form";
  out.residual_form.asserted = quadratic;

  for (const auto& p : nf) {
    if (!p.converged) {
      out.identity.skip_nonconverged();
      continue;
    }
    const double rhs = 2.0 * p.defect_T - p.defect_J;
    const double scale = std::max({1.0, std::abs(p.defect_J), std::abs(p.defect_T),
                                   p.residual_sq / p.alpha});
    out.identity.observe(std::abs(p.bregman - rhs), 1e-12 * scale, Cell{p.alpha});
    if (quadratic) {
      if (const auto* diag = std::get_if<DiagonalOperator>(&lin->op)) {
        const SpectralQuantities q = spectral_quantities(*diag, lin->x_dagger, p.alpha);
        out.residual_form.observe(std::abs(rhs - q.bregman), 1e-12 * scale, Cell{p.alpha});
      }
    }
  }

  if (std::holds_alternative<RofSquareInstance>(inst)) return out;
  const std::size_t per_alpha = delta_grid.size() * replicates;
  const std::size_t total = alpha_grid.size() * per_alpha;
  std::vector<NoisyPoint> noisy(total);
  std::vector<std::uint64_t> seeds(total);
  parallel_for(total, [&](std::size_t idx) {
    const std::size_t i = idx / per_alpha;
    const std::size_t j = (idx % per_alpha) / replicates;
    seeds[idx] = point_seed(base_seed, i, j, idx % replicates);
    noisy[idx] = solve_noisy(inst, nf[i], delta_grid[j], seeds[idx], settings);
  });
  for (std::size_t idx = 0; idx < total; ++idx) {
    const std::size_t i = idx / per_alpha;
    const std::size_t j = (idx % per_alpha) / replicates;
    const double alpha = alpha_grid[i];
    const double delta = delta_grid[j];
    const NoisyPoint& p = noisy[idx];
    if (!p.converged) {
      out.inequality.skip_nonconverged();
      continue;
    }
    // ||x_alpha - x_dagger||^2 from the minimizer, or from the closed form for the disc.
    const double e2 = lin != nullptr ? (nf[i].x_alpha - lin->x_dagger).squaredNorm()
                                     : nf[i].residual_sq;
    const double noise = delta * delta / alpha;
    out.inequality.observe(p.sq_error - (2.0 * e2 + noise), 1e-12 * (1.0 + 2.0 * e2 + noise),
                           Cell{alpha, delta, seeds[idx], true});
    if (e2 > 0.0) out.empirical_c1 = std::max(out.empirical_c1, (p.sq_error - noise) / e2);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Distance function

/// d(R) = max over candidates of J(x_dagger) - J(x) - R ||A x_dagger - A x|| (x_dagger included).
inline double distance_function(const LinearInstance& inst, const std::vector<Vector>& candidates,
                                double radius) {
  if (!(radius > 0.0)) throw std::domain_error("distance_function: R must be positive");
  const Vector ax = apply_op(inst.op, inst.x_dagger);
  const double jd = eval(inst.penalty, inst.x_dagger);
  double best = 0.0;
  for (const auto& x : candidates) {
    best = std::max(best, jd - eval(inst.penalty, x) - radius * (apply_op(inst.op, x) - ax).norm());
  }
  return best;
}

/// Noise-free minimizers over a grid, the natural maximizers in d(R).
inline std::vector<Vector> minimizer_candidates(const LinearInstance& inst,
                                                const std::vector<double>& alpha_grid,
                                                const SolverSettings& settings = {}) {
  const auto points = sweep_noise_free(inst, alpha_grid, settings);
  std::vector<Vector> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(p.x_alpha);
  return out;
}

/// d sampled on increasing radii, truncated where it stops being positive and strictly decreasing.
inline DistanceFunction sample_distance_function(const LinearInstance& inst,
                                                 const std::vector<Vector>& candidates,
                                                 const std::vector<double>& radii) {
  DistanceFunction d;
  for (double r : radii) {
    const double v = distance_function(inst, candidates, r);
    if (!(v > 0.0)) break;
    if (!d.radii.empty() && (!(r > d.radii.back()) || !(v < d.values.back()))) break;
    d.radii.push_back(r);
    d.values.push_back(v);
  }
  return d;
}

}  // namespace breglab
