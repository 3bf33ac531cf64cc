#pragma once

// Scalar search primitives, grids, seeding and the parallel map shared by
// the rest of the library.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace breglab {

/// Marker returned by suprema that diverge.
inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

inline bool is_infinite(double v) { return std::isinf(v) && v > 0; }

/// Result of a supremum search over [0, inf).
struct SupResult {
  double value = 0.0;
  double argmax = 0.0;
  bool diverged = false;
};

namespace detail {
inline constexpr double kGolden = 0.6180339887498949;
inline constexpr double kDivergenceBound = 1e30;
inline constexpr double kSupRelTol = 1e-10;
inline constexpr int kGoldenMaxIter = 600;
}  // namespace detail

/**
 * Supremum of g over s >= 0, for objectives that are unimodal near their
 * maximizer but need not be concave (t^mu - t^2/(2 alpha) with mu > 2 first
 * dips, then diverges).
 *
 * g is sampled on the geometric grid start 2^k from start 2^-60 up past
 * 1e30. If the best sample is the last one and g is still increasing there,
 * the supremum is reported as diverged. Otherwise golden-section search
 * refines the maximizer between the neighbouring samples to relative width
 * 1e-10. `floor_value` is the limit of g at 0+, which bounds the supremum
 * from below.
 */
template <class Objective>
SupResult maximize_on_halfline(Objective&& g, double start, double floor_value = 0.0) {
  if (!(start > 0.0)) start = 1.0;
  SupResult best{floor_value, 0.0, false};
  auto consider = [&](double s, double v) {
    if (v > best.value) {
      best.value = v;
      best.argmax = s;
    }
  };

  std::vector<double> grid;
  for (double s = std::ldexp(start, -60); ; s *= 2.0) {
    grid.push_back(s);
    if (s > detail::kDivergenceBound) break;
  }
  std::vector<double> values(grid.size());
  std::size_t top = 0;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    values[k] = g(grid[k]);
    consider(grid[k], values[k]);
    if (values[k] > values[top]) top = k;
  }
  const std::size_t last = grid.size() - 1;
  if (top == last && values[last] > values[last - 1]) {
    return SupResult{kInfinity, grid[last], true};
  }

  double a = top == 0 ? 0.0 : grid[top - 1];
  double b = top == last ? grid[last] : grid[top + 1];
  double c = b - detail::kGolden * (b - a);
  double d = a + detail::kGolden * (b - a);
  double gc = g(c);
  double gd = g(d);
  consider(c, gc);
  consider(d, gd);
  for (int it = 0; it < detail::kGoldenMaxIter; ++it) {
    const double mid = 0.5 * (a + b);
    if (b - a <= detail::kSupRelTol * std::abs(mid) || b - a < 1e-300) break;
    if (gc >= gd) {
      b = d;
      d = c;
      gd = gc;
      c = b - detail::kGolden * (b - a);
      gc = g(c);
      consider(c, gc);
    } else {
      a = c;
      c = d;
      gc = gd;
      d = a + detail::kGolden * (b - a);
      gd = g(d);
      consider(d, gd);
    }
  }
  return best;
}

/**
 * Solves f(t) = y for increasing f by bisection on [lo, hi].
 *
 * Stops once |f(t) - y| <= tol * |y| or the bracket can no longer shrink in
 * double precision; the result is deterministic for a given bracket.
 */
template <class Function>
double bisect_increasing(Function&& f, double y, double lo, double hi, double tol) {
  double mid = 0.5 * (lo + hi);
  for (int it = 0; it < 2000; ++it) {
    mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double fm = f(mid);
    if (std::abs(fm - y) <= tol * std::abs(y)) break;
    if (fm < y) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return mid;
}

/// n log-spaced points from lo to hi inclusive.
inline std::vector<double> log_grid(double lo, double hi, std::size_t n) {
  if (!(lo > 0.0) || !(hi >= lo) || n == 0) {
    throw std::invalid_argument("log_grid: need 0 < lo <= hi and n >= 1");
  }
  std::vector<double> out(n);
  if (n == 1) {
    out[0] = lo;
    return out;
  }
  const double llo = std::log10(lo);
  const double step = (std::log10(hi) - llo) / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) out[i] = std::pow(10.0, llo + step * static_cast<double>(i));
  out.front() = lo;
  out.back() = hi;
  return out;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Per-point seed: independent of evaluation order.
inline std::uint64_t point_seed(std::uint64_t base, std::uint64_t alpha_index,
                                std::uint64_t delta_index, std::uint64_t replicate) {
  std::uint64_t h = splitmix64(base);
  h = splitmix64(h ^ alpha_index);
  h = splitmix64(h ^ (delta_index + 0x100000000ULL));
  h = splitmix64(h ^ (replicate + 0x200000000ULL));
  return h;
}

/// Worker count from BREGLAB_THREADS (0 or unset = hardware concurrency).
inline unsigned worker_count() {
  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("BREGLAB_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && v > 0) return static_cast<unsigned>(v);
  }
  return hw;
}

/**
 * Calls body(i) for i in [0, n) on up to worker_count() threads. Each index
 * is processed exactly once; the first exception is rethrown after joining.
 */
template <class Body>
void parallel_for(std::size_t n, Body&& body) {
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(worker_count(), n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::exception_ptr failure;
  std::mutex failure_mutex;
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t i = w; i < n; i += workers) {
          try {
            body(i);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
            return;
          }
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
}

/// Least-squares line through (x, y).
struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double residual = 0.0;  // root-mean-square residual
};

inline LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n < 2 || y.size() != n) throw std::invalid_argument("fit_line: need >= 2 paired points");
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  LineFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - (fit.intercept + fit.slope * x[i]);
    ss += r * r;
  }
  fit.residual = std::sqrt(ss / static_cast<double>(n));
  return fit;
}

}  // namespace breglab
