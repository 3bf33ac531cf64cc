#pragma once

// Index functions: continuous, strictly increasing maps (0, inf) -> (0, inf)
// with limit 0 at 0+, plus the calculus built on them (inversion, Fenchel
// conjugation, the Psi-from-Phi supremum and calibrated parameter choice).

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "breglab/numeric.hpp"

namespace breglab {

struct Monomial {
  double exponent;
};
struct Linear {
  double slope;
};
/// a*t + b*t*log(r_star/t)
struct LogLinear {
  double a;
  double b;
  double r_star;
};
struct Tabulated {
  std::vector<double> t;
  std::vector<double> f;
};
struct Composite {
  std::string description;
};

using IndexKind = std::variant<Monomial, Linear, LogLinear, Tabulated, Composite>;

/// Interval used to seed bracketing searches.
struct DomainHint {
  double t_min = 1e-12;
  double t_max = 1.0;
};

class IndexFunction {
 public:
  using Evaluator = std::function<double(double)>;

  IndexFunction(Evaluator f, DomainHint hint, IndexKind kind)
      : f_(std::move(f)), hint_(hint), kind_(std::move(kind)) {
    if (!(hint_.t_min > 0.0) || !(hint_.t_max > hint_.t_min)) {
      throw std::invalid_argument("IndexFunction: domain hint must satisfy 0 < t_min < t_max");
    }
  }

  static IndexFunction monomial(double mu) {
    if (!(mu > 0.0)) throw std::invalid_argument("monomial: exponent must be positive");
    return {[mu](double t) { return std::pow(t, mu); }, {1e-12, 1.0}, Monomial{mu}};
  }

  static IndexFunction linear(double slope) {
    if (!(slope > 0.0)) throw std::invalid_argument("linear: slope must be positive");
    return {[slope](double t) { return slope * t; }, {1e-12, 1.0}, Linear{slope}};
  }

  /// Increasing on (0, r_star] when a > 0 and b >= 0 with a >= b.
  static IndexFunction log_linear(double a, double b, double r_star) {
    if (!(r_star > 0.0)) throw std::invalid_argument("log_linear: r_star must be positive");
    return {[a, b, r_star](double t) { return a * t + b * t * std::log(r_star / t); },
            {1e-12, r_star},
            LogLinear{a, b, r_star}};
  }

  /// Piecewise linear through the samples, through the origin below the
  /// first sample and extended along the last segment above the last one.
  static IndexFunction tabulated(std::vector<double> t, std::vector<double> f) {
    if (t.size() < 2 || t.size() != f.size()) {
      throw std::invalid_argument("tabulated: need >= 2 paired samples");
    }
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (!(t[i] > 0.0) || (i > 0 && !(t[i] > t[i - 1]))) {
        throw std::invalid_argument("tabulated: abscissae must be positive and increasing");
      }
    }
    const DomainHint hint{t.front(), t.back()};
    Tabulated table{t, f};
    auto eval = [t = std::move(t), f = std::move(f)](double s) {
      if (s <= t.front()) return f.front() * s / t.front();
      const auto it = std::upper_bound(t.begin(), t.end(), s);
      const std::size_t hi = it == t.end() ? t.size() - 1 : static_cast<std::size_t>(it - t.begin());
      const std::size_t lo = hi - 1;
      const double w = (s - t[lo]) / (t[hi] - t[lo]);
      return f[lo] + w * (f[hi] - f[lo]);
    };
    return {std::move(eval), hint, std::move(table)};
  }

  static IndexFunction composite(Evaluator f, DomainHint hint, std::string description) {
    return {std::move(f), hint, Composite{std::move(description)}};
  }

  double operator()(double t) const {
    if (!(t > 0.0)) throw std::domain_error("index function evaluated at non-positive argument");
    return f_(t);
  }

  const DomainHint& hint() const { return hint_; }
  const IndexKind& kind() const { return kind_; }

 private:
  Evaluator f_;
  DomainHint hint_;
  IndexKind kind_;
};

inline double eval(const IndexFunction& f, double t) { return f(t); }

/**
 * Returns t with |f(t) - y| <= tol * max(1, y).
 *
 * The bracket starts at the domain hint and is widened by up to 20 halvings
 * of the lower end and 20 doublings of the upper end; failing that, the value
 * is out of range.
 */
inline double invert(const IndexFunction& f, double y, double tol) {
  if (!(y > 0.0)) throw std::domain_error("invert: target must be positive");
  if (!(tol > 0.0)) throw std::invalid_argument("invert: tolerance must be positive");
  double lo = f.hint().t_min;
  double hi = f.hint().t_max;
  for (int k = 0; k < 20 && f(lo) > y; ++k) lo *= 0.5;
  for (int k = 0; k < 20 && f(hi) < y; ++k) hi *= 2.0;
  if (f(lo) > y || f(hi) < y) throw std::range_error("invert: value outside bracketed range");
  // Bisecting to relative tolerance also meets the absolute contract.
  return bisect_increasing([&](double t) { return f(t); }, y, lo, hi, tol);
}

/// f*(t) = sup_{s >= 0} (s t - f(s)); +inf when the supremum diverges.
inline double fenchel_conjugate(const IndexFunction& f, double t) {
  if (!(t > 0.0)) throw std::domain_error("fenchel_conjugate: argument must be positive");
  const auto objective = [&](double s) { return s * t - f(s); };
  return maximize_on_halfline(objective, f.hint().t_max).value;
}

/// Psi(alpha) = sup_{t > 0} [Phi(t) - t^2 / (2 alpha)]; +inf when divergent.
inline double psi_from_phi(const IndexFunction& phi, double alpha) {
  if (!(alpha > 0.0)) throw std::domain_error("psi_from_phi: alpha must be positive");
  const auto objective = [&](double t) { return phi(t) - t * t / (2.0 * alpha); };
  return maximize_on_halfline(objective, phi.hint().t_max).value;
}

/// Psi(alpha) = conj(phi_tilde_inverse)(2 alpha) / (2 alpha), valid when
/// Phi(sqrt(t)) is concave and `phi_tilde_inverse` is its inverse.
inline double psi_closed_form_concave(const IndexFunction& phi_tilde_inverse, double alpha) {
  if (!(alpha > 0.0)) throw std::domain_error("psi_closed_form_concave: alpha must be positive");
  const double conj = fenchel_conjugate(phi_tilde_inverse, 2.0 * alpha);
  return is_infinite(conj) ? kInfinity : conj / (2.0 * alpha);
}

/// Psi(alpha) = ((2 - mu) / 2) (mu alpha)^(mu / (2 - mu)) for Phi(t) = t^mu, 0 < mu < 2.
inline double monomial_psi(double mu, double alpha) {
  if (!(mu > 0.0 && mu < 2.0)) throw std::domain_error("monomial_psi: need 0 < mu < 2");
  return 0.5 * (2.0 - mu) * std::pow(mu * alpha, mu / (2.0 - mu));
}

enum class PsiSource { assumed, from_phi, empirical };

/// A profile bound Psi with its companion Theta(alpha) = sqrt(alpha Psi(alpha)).
struct PsiProfile {
  IndexFunction psi;
  PsiSource source = PsiSource::assumed;

  double operator()(double alpha) const { return psi(alpha); }
  double theta(double alpha) const { return std::sqrt(alpha * psi(alpha)); }

  IndexFunction theta_function() const {
    return IndexFunction::composite([p = psi](double a) { return std::sqrt(a * p(a)); },
                                    psi.hint(), "theta");
  }
};

/// Psi built as the numerical supremum over a variational-inequality Phi.
inline PsiProfile psi_profile_from_phi(const IndexFunction& phi) {
  return {IndexFunction::composite([phi](double a) { return psi_from_phi(phi, a); },
                                   {1e-12, 1.0}, "psi from phi"),
          PsiSource::from_phi};
}

/// alpha* with Theta(alpha*) = delta / sqrt(2).
inline double calibrate_alpha(const PsiProfile& profile, double delta, double tol) {
  if (!(delta > 0.0)) throw std::domain_error("calibrate_alpha: delta must be positive");
  // Theta^2 = alpha Psi, so a relative error e in Theta moves the summand
  // balance by about 2e.
  return invert(profile.theta_function(), delta / std::sqrt(2.0), 0.25 * tol);
}

namespace detail {
/// Phi_tilde^{-1}(u) = (Phi^{-1}(u))^2.
inline double phi_tilde_inverse(const IndexFunction& phi, double u) {
  const double t = invert(phi, u, 1e-15);
  return t * t;
}
}  // namespace detail

/**
 * Parameter from a subgradient of the convex function Phi_tilde^{-1}, where
 * Phi_tilde(t) = Phi(sqrt(t)). The slope is taken at u = Phi_tilde(delta^2)
 * = Phi(delta), the point where Fenchel-Young holds with equality, by a
 * central difference with relative step 1e-6; alpha is half the slope.
 */
inline double rate_alpha_from_subgradient(const IndexFunction& phi, double delta) {
  if (!(delta > 0.0)) throw std::domain_error("rate_alpha_from_subgradient: delta must be positive");
  const double u = phi(delta);
  const double h = 1e-6 * u;
  const double slope =
      (detail::phi_tilde_inverse(phi, u + h) - detail::phi_tilde_inverse(phi, u - h)) / (2.0 * h);
  return 0.5 * slope;
}

/// Outcome of sampling the index-function axioms on a log grid.
struct IndexValidity {
  bool increasing = true;
  bool vanishes_at_zero = true;
  bool continuous = true;
  bool ok() const { return increasing && vanishes_at_zero && continuous; }
};

inline IndexValidity check_index_function(const IndexFunction& f, std::size_t samples = 64) {
  IndexValidity out;
  const auto grid = log_grid(f.hint().t_min, f.hint().t_max, samples);
  double prev = -kInfinity;
  for (double t : grid) {
    const double v = f(t);
    if (!(v > prev)) out.increasing = false;
    prev = v;
    const double h = 1e-9 * t;
    if (std::abs(f(t + h) - v) > 1e-6 * (1.0 + std::abs(v))) out.continuous = false;
  }
  // Halving toward 0 must decrease f, keep it nonnegative, and the Aitken
  // extrapolation of the last three values must be close to 0.
  std::vector<double> tail{f(f.hint().t_min)};
  for (int k = 1; k <= 20; ++k) {
    const double v = f(f.hint().t_min * std::ldexp(1.0, -k));
    if (!(v < tail.back()) || v < 0.0) out.vanishes_at_zero = false;
    tail.push_back(v);
  }
  const double d1 = tail[19] - tail[18];
  const double d2 = tail[20] - tail[19];
  const double limit = d2 == d1 ? tail[20] : tail[20] - d2 * d2 / (d2 - d1);
  if (std::abs(limit) > 1e-3 * std::abs(tail[0])) out.vanishes_at_zero = false;
  return out;
}

/**
 * Representation of a convex f whose quotient f(t)/t is an increasing index
 * function: phi is defined implicitly by phi(f(t)/t) = sqrt(t), and
 * Theta(t) = sqrt(t) phi(t), so that f(t) = Theta^2((phi^2)^{-1}(t)).
 */
struct ConvexRepresentation {
  IndexFunction phi;
  IndexFunction theta;
};

inline ConvexRepresentation represent_convex(const IndexFunction& f) {
  const auto quotient = IndexFunction::composite([f](double t) { return f(t) / t; }, f.hint(),
                                                 "f(t)/t");
  auto phi = IndexFunction::composite(
      [quotient](double u) { return std::sqrt(invert(quotient, u, 1e-15)); }, f.hint(), "phi");
  auto theta = IndexFunction::composite([phi](double t) { return std::sqrt(t) * phi(t); },
                                        f.hint(), "theta");
  return {std::move(phi), std::move(theta)};
}

/// Theta^2((phi^2)^{-1}(t)) evaluated from a representation.
inline double reconstruct_from_representation(const ConvexRepresentation& rep, double t) {
  const auto phi_sq = IndexFunction::composite(
      [phi = rep.phi](double s) {
        const double p = phi(s);
        return p * p;
      },
      rep.phi.hint(), "phi^2");
  const double s = invert(phi_sq, t, 1e-15);
  const double th = rep.theta(s);
  return th * th;
}

/// Sampled distance function d(R) on increasing radii.
struct DistanceFunction {
  std::vector<double> radii;
  std::vector<double> values;
};

namespace detail {
inline double interpolate(const std::vector<double>& xs, const std::vector<double>& ys, double x) {
  if (x <= xs.front()) return ys.front();
  if (x >= xs.back()) return ys.back();
  const auto it = std::upper_bound(xs.begin(), xs.end(), x);
  const std::size_t hi = static_cast<std::size_t>(it - xs.begin());
  const std::size_t lo = hi - 1;
  const double w = (x - xs[lo]) / (xs[hi] - xs[lo]);
  return ys[lo] + w * (ys[hi] - ys[lo]);
}
}  // namespace detail

/**
 * Phi(alpha) = 2 d(Theta^{-1}(alpha)) with Theta(R) = d(R)/R.
 *
 * Theta is interpolated piecewise linearly between samples (it is strictly
 * decreasing there) and inverted by bisection; d is interpolated the same way.
 */
inline double phi_from_distance(const DistanceFunction& d, double alpha, double tol) {
  const auto& r = d.radii;
  const auto& v = d.values;
  if (r.size() < 2 || r.size() != v.size()) {
    throw std::invalid_argument("phi_from_distance: need >= 2 paired samples");
  }
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (!(r[i] > 0.0) || !(v[i] > 0.0)) {
      throw std::invalid_argument("phi_from_distance: radii and distances must be positive");
    }
    if (i > 0 && (!(r[i] > r[i - 1]) || !(v[i] < v[i - 1]))) {
      throw std::invalid_argument(
          "phi_from_distance: distance function must be strictly decreasing on samples");
    }
  }
  std::vector<double> theta(r.size());
  for (std::size_t i = 0; i < r.size(); ++i) theta[i] = v[i] / r[i];
  if (alpha > theta.front() || alpha < theta.back()) {
    throw std::range_error("phi_from_distance: alpha outside the range of Theta");
  }
  // Theta decreases in R; bisect -Theta, which increases.
  const double radius = bisect_increasing(
      [&](double s) { return -detail::interpolate(r, theta, s); }, -alpha, r.front(), r.back(),
      tol);
  return 2.0 * detail::interpolate(r, v, radius);
}

}  // namespace breglab
