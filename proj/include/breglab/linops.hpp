#pragma once

// Finite-dimensional operators A: R^n -> R^m with their Euclidean adjoints,
// and the norm-delta noise generator.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <variant>

namespace breglab {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

class DenseOperator {
 public:
  explicit DenseOperator(Matrix m) : m_(std::move(m)) {}

  Eigen::Index rows() const { return m_.rows(); }
  Eigen::Index cols() const { return m_.cols(); }
  const Matrix& matrix() const { return m_; }

  Vector apply(const Vector& x) const {
    if (x.size() != cols()) throw std::invalid_argument("apply: dimension mismatch");
    return m_ * x;
  }
  Vector adjoint_apply(const Vector& w) const {
    if (w.size() != rows()) throw std::invalid_argument("adjoint_apply: dimension mismatch");
    return m_.transpose() * w;
  }

 private:
  Matrix m_;
};

/// Square operator diag(sigma); the eigenvalues of A*A are sigma_k^2.
class DiagonalOperator {
 public:
  explicit DiagonalOperator(Vector singular_values) : sigma_(std::move(singular_values)) {
    if (sigma_.size() == 0) throw std::invalid_argument("DiagonalOperator: empty spectrum");
    for (Eigen::Index k = 0; k < sigma_.size(); ++k) {
      if (!(sigma_[k] > 0.0)) {
        throw std::invalid_argument("DiagonalOperator: singular values must be positive");
      }
      if (k > 0 && sigma_[k] > sigma_[k - 1]) {
        throw std::invalid_argument("DiagonalOperator: singular values must be sorted descending");
      }
    }
  }

  Eigen::Index rows() const { return sigma_.size(); }
  Eigen::Index cols() const { return sigma_.size(); }
  const Vector& singular_values() const { return sigma_; }
  Vector eigenvalues() const { return sigma_.array().square().matrix(); }

  Vector apply(const Vector& x) const {
    if (x.size() != cols()) throw std::invalid_argument("apply: dimension mismatch");
    return sigma_.cwiseProduct(x);
  }
  Vector adjoint_apply(const Vector& w) const {
    if (w.size() != rows()) throw std::invalid_argument("adjoint_apply: dimension mismatch");
    return sigma_.cwiseProduct(w);
  }

  DenseOperator to_dense() const { return DenseOperator(sigma_.asDiagonal().toDenseMatrix()); }

 private:
  Vector sigma_;
};

using Operator = std::variant<DenseOperator, DiagonalOperator>;

inline Vector apply_op(const Operator& op, const Vector& x) {
  return std::visit([&](const auto& a) { return a.apply(x); }, op);
}
inline Vector adjoint_apply(const Operator& op, const Vector& w) {
  return std::visit([&](const auto& a) { return a.adjoint_apply(w); }, op);
}
inline Eigen::Index rows(const Operator& op) {
  return std::visit([](const auto& a) { return a.rows(); }, op);
}
inline Eigen::Index cols(const Operator& op) {
  return std::visit([](const auto& a) { return a.cols(); }, op);
}
inline Matrix to_matrix(const Operator& op) {
  if (const auto* d = std::get_if<DiagonalOperator>(&op)) return d->to_dense().matrix();
  return std::get<DenseOperator>(op).matrix();
}

/// ||A||^2 by 100 power iterations on A*A from a fixed-seed start (exact for diagonals).
inline double operator_norm_squared(const Operator& op) {
  if (const auto* d = std::get_if<DiagonalOperator>(&op)) {
    return d->singular_values()[0] * d->singular_values()[0];
  }
  const auto& a = std::get<DenseOperator>(op);
  std::mt19937_64 rng(0x5eedULL);
  std::normal_distribution<double> normal;
  Vector v(a.cols());
  for (auto& c : v) c = normal(rng);
  v.normalize();
  double estimate = 0.0;
  for (int it = 0; it < 100; ++it) {
    Vector w = a.adjoint_apply(a.apply(v));
    estimate = w.norm();
    if (estimate == 0.0) return 0.0;
    v = w / estimate;
  }
  return estimate;
}

enum class NoiseKind { gaussian_scaled, fixed_direction };

/**
 * Noise generator with ||y_delta - y|| = delta exactly.
 *
 * gaussian_scaled draws a standard normal direction from `seed`;
 * fixed_direction uses `direction` (default: the all-ones vector) with sign
 * taken from the lowest bit of `seed`.
 */
struct NoiseModel {
  NoiseKind kind = NoiseKind::gaussian_scaled;
  std::uint64_t seed = 0;
  std::optional<Vector> direction;
};

inline Vector noise_direction(Eigen::Index m, const NoiseModel& model) {
  Vector dir(m);
  if (model.kind == NoiseKind::gaussian_scaled) {
    std::mt19937_64 rng(model.seed);
    std::normal_distribution<double> normal;
    for (auto& c : dir) c = normal(rng);
  } else {
    dir = model.direction ? *model.direction : Vector::Ones(m);
    if (dir.size() != m) throw std::invalid_argument("make_noisy: direction has wrong length");
    if (model.seed & 1ULL) dir = -dir;
  }
  const double n = dir.norm();
  if (!(n > 0.0)) throw std::invalid_argument("make_noisy: zero noise direction");
  return dir / n;
}

inline Vector make_noisy(const Vector& y, double delta, const NoiseModel& model) {
  if (!(delta >= 0.0)) throw std::invalid_argument("make_noisy: delta must be nonnegative");
  if (delta == 0.0) return y;
  return y + delta * noise_direction(y.size(), model);
}

/// Plain-text matrix: "m n" on the first line, then m rows of n decimals.
inline DenseOperator read_dense_operator(std::istream& in) {
  long m = 0, n = 0;
  if (!(in >> m >> n) || m <= 0 || n <= 0) {
    throw std::runtime_error("operator file: bad dimension header");
  }
  Matrix a(m, n);
  for (long i = 0; i < m; ++i) {
    for (long j = 0; j < n; ++j) {
      if (!(in >> a(i, j))) throw std::runtime_error("operator file: truncated matrix data");
    }
  }
  return DenseOperator(std::move(a));
}

inline DenseOperator load_dense_operator(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open operator file: " + path);
  return read_dense_operator(in);
}

}  // namespace breglab
