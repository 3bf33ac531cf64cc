#include <gtest/gtest.h>

#include <random>

#include "breglab/bregman.hpp"
#include "breglab/solvers.hpp"

using namespace breglab;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

Vector gaussian(Eigen::Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Vector v(n);
  for (auto& c : v) c = normal(rng);
  return v;
}

MinimizerPair make_pair(const Operator& a, const Penalty& j, const Vector& xd, double alpha,
                        double delta, std::uint64_t seed) {
  MinimizerPair s;
  s.x_dagger = xd;
  s.y = apply_op(a, xd);
  s.y_delta = make_noisy(s.y, delta, NoiseModel{NoiseKind::gaussian_scaled, seed, {}});
  s.alpha = alpha;
  if (std::holds_alternative<QuadraticPenalty>(j)) {
    s.x_alpha = solve_quadratic(a, s.y, alpha).minimizer;
    s.x_alpha_delta = solve_quadratic(a, s.y_delta, alpha).minimizer;
  } else {
    s.x_alpha = solve_l1(a, s.y, alpha, 1e-12, 200000).minimizer;
    s.x_alpha_delta = solve_l1(a, s.y_delta, alpha, 1e-12, 200000).minimizer;
  }
  return s;
}

}  // namespace

TEST(BregmanDistance, QuadraticIsHalfSquaredDistance) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const Vector z = gaussian(4, rng), x = gaussian(4, rng);
    EXPECT_NEAR(bregman_distance(QuadraticPenalty{}, z, z, x), 0.5 * (x - z).squaredNorm(), 1e-12);
  }
  const Vector z = vec({1.0, 2.0});
  EXPECT_EQ(bregman_distance(QuadraticPenalty{}, z, z, z), 0.0);
}

TEST(BregmanDistance, L1VanishesOnCollinearSameSign) {
  EXPECT_EQ(bregman_distance(L1Penalty{}, vec({1.0, 1.0}), vec({1.0, 2.0}), vec({2.0, 4.0})), 0.0);
  EXPECT_GT(bregman_distance(L1Penalty{}, vec({1.0, 1.0}), vec({1.0, 2.0}), vec({-1.0, 4.0})), 0.0);
}

TEST(BregmanDistance, NotSymmetric) {
  const Vector z = vec({1.0, 0.0}), x = vec({0.0, 1.0});
  const double forward = bregman_distance(L1Penalty{}, vec({1.0, 0.5}), z, x);
  const double backward = bregman_distance(L1Penalty{}, vec({0.2, 1.0}), x, z);
  EXPECT_NEAR(forward, 0.5, 1e-15);
  EXPECT_NEAR(backward, 0.8, 1e-15);
}

TEST(ThreePoint, QuadraticRandomTriples) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 1000; ++trial) {
    const Vector u = gaussian(5, rng), v = gaussian(5, rng), w = gaussian(5, rng);
    const double scale = 1.0 + u.squaredNorm() + v.squaredNorm() + w.squaredNorm();
    EXPECT_LE(three_point_identity_check(QuadraticPenalty{}, w, w, v, v, u), 1e-12 * scale);
  }
}

TEST(ThreePoint, CoincidentPointsGiveZero) {
  const Vector u = vec({0.5, -1.5, 2.0});
  EXPECT_EQ(three_point_identity_check(QuadraticPenalty{}, u, u, u, u, u), 0.0);
}

TEST(ThreePoint, L1WithValidSubgradients) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> inner(-1.0, 1.0);
  for (int trial = 0; trial < 500; ++trial) {
    Vector u = gaussian(4, rng), v = gaussian(4, rng), w = gaussian(4, rng);
    v[trial % 4] = 0.0;
    auto subgradient = [&](const Vector& p) {
      Vector xi(p.size());
      for (Eigen::Index k = 0; k < p.size(); ++k) {
        xi[k] = p[k] > 0 ? 1.0 : (p[k] < 0 ? -1.0 : inner(rng));
      }
      return xi;
    };
    const Vector xi_w = subgradient(w), eta_v = subgradient(v);
    EXPECT_LE(three_point_identity_check(L1Penalty{}, xi_w, w, eta_v, v, u), 1e-12 * (1.0 + u.lpNorm<1>()));
    EXPECT_GE(bregman_distance(L1Penalty{}, xi_w, w, u), -1e-12);
    EXPECT_GE(bregman_distance(L1Penalty{}, eta_v, v, u), -1e-12);
  }
}

TEST(OptimalityIdentities, QuadraticPairs) {
  std::mt19937_64 rng(4);
  const Operator a = DiagonalOperator(vec({1.0, 0.5, 0.25, 0.125, 0.0625}));
  for (int trial = 0; trial < 50; ++trial) {
    const Vector xd = gaussian(5, rng);
    const double alpha = std::pow(10.0, -3.0 + 3.0 * (trial % 7) / 6.0);
    const MinimizerPair s = make_pair(a, QuadraticPenalty{}, xd, alpha, 0.01 * (1 + trial % 3), trial);
    const IdentityReport r = appendix_identities_check(a, s);
    EXPECT_LE(r.worst(), 1e-12 * r.scale) << "trial " << trial;
  }
}

TEST(OptimalityIdentities, ZeroNoiseReducesToNoiseFree) {
  const Operator a = DiagonalOperator(vec({1.0, 0.3}));
  const MinimizerPair s = make_pair(a, QuadraticPenalty{}, vec({1.0, -2.0}), 0.1, 0.0, 0);
  EXPECT_EQ(s.x_alpha, s.x_alpha_delta);
  const IdentityReport r = appendix_identities_check(a, s);
  EXPECT_LE(r.worst(), 1e-12 * r.scale);
}

TEST(OptimalityIdentities, L1Pairs) {
  std::mt19937_64 rng(5);
  const Matrix m = (Matrix(4, 4) << 1.0, 0.2, 0.0, 0.1, 0.3, 0.8, 0.1, 0.0, 0.0, 0.2, 0.6, 0.1,
                    0.1, 0.0, 0.2, 0.5)
                       .finished();
  const Operator a = DenseOperator(m);
  for (int trial = 0; trial < 20; ++trial) {
    const Vector xd = vec({1.0, 0.0, -0.5, 0.0});
    const MinimizerPair s = make_pair(a, L1Penalty{}, xd, 0.01 + 0.01 * trial, 0.05, trial);
    const IdentityReport r = appendix_identities_check(a, s);
    EXPECT_LE(r.worst(), 1e-6 * r.scale) << "trial " << trial;
  }
}

TEST(DistanceBounds, QuadraticAndL1) {
  const Operator a = DiagonalOperator(vec({1.0, 0.5, 0.2}));
  const Vector xd = vec({0.7, -0.4, 0.1});
  for (const Penalty j : {Penalty{QuadraticPenalty{}}, Penalty{L1Penalty{}}}) {
    for (double alpha : {1e-3, 1e-2, 0.1, 1.0}) {
      for (double delta : {0.0, 1e-3, 0.1}) {
        const MinimizerPair s = make_pair(a, j, xd, alpha, delta, 17);
        const DistanceBoundsReport d = distance_bounds_check(a, j, s);
        EXPECT_LE(std::abs(d.identity_mismatch), 1e-9);
        EXPECT_LE(d.inequality_excess, 1e-9 * (1.0 + delta * delta / alpha));
      }
    }
  }
}

TEST(Residuals, Components) {
  const Operator a = DiagonalOperator(vec({2.0}));
  const ResidualSet r = make_residuals(a, vec({1.0}), vec({3.0}), vec({1.0}), vec({2.0}));
  EXPECT_EQ(r.r_alpha[0], 1.0);
  EXPECT_EQ(r.r_alpha_delta[0], 4.0);
  EXPECT_EQ(r.delta_vec[0], 1.0);
}
