// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <array>
#include <chrono>
#include <cstdio>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>

#include "breglab/experiments.hpp"

using namespace breglab;
using std::numbers::pi;

namespace {

struct Verdict {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << "[failed: " << what << "] ";
    }
  }
};

int failures = 0;

void criterion(int id, const std::string& title, double budget_s, const std::function<void(Verdict&)>& body) {
  Verdict v;
  v.detail.precision(4);
  const auto t0 = std::chrono::steady_clock::now();
  try {
    body(v);
  } catch (const std::exception& e) {
    v.pass = false;
    v.detail << "[exception: " << e.what() << "] ";
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (budget_s > 0.0 && secs > budget_s) {
    v.pass = false;
    v.detail << "[over time budget " << budget_s << " s] ";
  }
  if (!v.pass) ++failures;
  std::printf("%s %2d %s: %s(%.2f s)\n", v.pass ? "PASS" : "FAIL", id, title.c_str(),
              v.detail.str().c_str(), secs);
  std::fflush(stdout);
}

void require_clean(Verdict& v, const CheckReport& c, const std::string& where) {
  v.require(c.points > 0, where + " " + c.name + " saw no points");
  v.require(c.violations == 0, where + " " + c.name + " has " + std::to_string(c.violations) +
                                   " violations, first at " + describe(c.first_failure));
  v.require(c.nonconverged == 0, where + " " + c.name + " has non-converged points");
}

const std::vector<double> kSweep = log_grid(1e-4, 1e-1, 10);

}  // namespace

int main() {
  criterion(1, "ROF disc closed forms", 1.0, [](Verdict& v) {
    double worst = 0.0;
    for (double r : {0.5, 1.0, 2.0}) {
      for (double a : log_grid(1e-4, r / 4.0, 12)) {
        const RofQuantities q = rof_ball_quantities(RofBallGeometry(r), a);
        worst = std::max({worst, std::abs(q.defect_J - 4 * pi * a),
                          std::abs(q.residual_sq - 4 * pi * a * a), std::abs(q.bregman)});
      }
    }
    v.require(worst <= 1e-10, "closed-form mismatch");
    v.detail << "max abs deviation " << worst << " over 36 points ";
  });

  criterion(2, "ROF square formulas", 1.0, [](Verdict& v) {
    const RofSquareGeometry g(1.0);
    const double at01 = rof_square_quantities(g, 0.1).defect_J;
    const double expected = 0.4 + 2 * (4 - pi) * 0.1 * std::log(10.0);
    v.require(std::abs(at01 - expected) <= 1e-12, "value at alpha = 0.1");
    const double a = 1e-6;
    const double ratio = rof_square_quantities(g, a).defect_J / (a * std::log(1 / a));
    const double target = 2 * (4 - pi) + 4 / std::log(1 / a);
    const double rel = std::abs(ratio - target) / target;
    v.require(rel <= 0.1, "asymptotic ratio");
    v.detail << "defect_J(0.1) = " << at01 << ", ratio at 1e-6 off by " << rel << " relative ";
  });

  criterion(3, "defect equivalence factor 2", 0.0, [](Verdict& v) {
    const auto grid = log_grid(1e-4, 1e-1, 13);
    for (const RegularizationInstance& inst :
         {RegularizationInstance{make_quadratic_instance(50, 0.5)},
          RegularizationInstance{make_l1_instance(L1Shape::sparse)},
          RegularizationInstance{make_l1_instance(L1Shape::dense)}}) {
      require_clean(v, check_equivalence(inst, grid), label(inst));
    }
    const RegularizationInstance s = make_scalar_quadratic_instance();
    const double dj = defect_penalty(s, 1.0), dt = defect_tikhonov(s, 1.0);
    v.require(std::abs(dj - 0.375) <= 1e-12 && std::abs(dt - 0.25) <= 1e-12, "hand values");
    v.detail << "3 instances x 13 alphas; n=1 point gives (" << dj << ", " << dt << ") ";
  });

  criterion(4, "residual bound", 0.0, [](Verdict& v) {
    const std::vector<RegularizationInstance> shipped = {
        make_quadratic_instance(), make_l1_instance(L1Shape::sparse), make_l1_instance(L1Shape::dense),
        make_singular_instance(), make_rof_ball_instance(1.0), make_rof_square_instance(1.0)};
    std::size_t points = 0;
    for (const auto& inst : shipped) {
      const CheckReport c = check_residual_bound(sweep_noise_free(inst, log_grid(1e-4, 1e-1, 12)));
      require_clean(v, c, label(inst));
      points += c.points;
    }
    v.detail << points << " points over 6 instances ";
  });

  SplittingResult quad_split, l1_split;
  criterion(5, "error splitting sweep", 60.0, [&](Verdict& v) {
    const RegularizationInstance quad = make_quadratic_instance();
    const RegularizationInstance ball = make_rof_ball_instance(1.0);
    const RegularizationInstance l1 = make_l1_instance(L1Shape::sparse);
    quad_split = check_error_splitting(quad, *instance_psi(quad), kSweep, kSweep, 5, 1);
    const SplittingResult ball_split = check_error_splitting(ball, *instance_psi(ball), kSweep, kSweep, 5, 1);
    l1_split = check_error_splitting(l1, *instance_psi(l1), kSweep, kSweep, 5, 1);
    for (const SplittingResult* s : std::array<const SplittingResult*, 3>{&quad_split, &ball_split, &l1_split}) {
      v.require(s->theorem.points == 500, "expected 500 asserted points per instance");
      require_clean(v, s->theorem, "");
    }
    v.detail << "quadratic, disc, l1-sparse: 3 x 500 points, violations " << quad_split.theorem.violations
             << "/" << ball_split.theorem.violations << "/" << l1_split.theorem.violations << " ";
  });

  criterion(6, "monomial profiles", 0.0, [](Verdict& v) {
    const auto grid = log_grid(1e-3, 1.0, 12);
    double worst_rel = 0.0;
    for (double mu : {0.5, 1.0, 1.5}) {
      for (double a : grid) {
        const double exact = monomial_psi(mu, a);
        worst_rel = std::max(worst_rel, std::abs(psi_from_phi(IndexFunction::monomial(mu), a) - exact) / exact);
      }
    }
    v.require(worst_rel <= 1e-8, "closed form mismatch for mu < 2");
    bool all_inf = true;
    for (double a : grid) all_inf = all_inf && is_infinite(psi_from_phi(IndexFunction::monomial(3.0), a));
    v.require(all_inf, "mu = 3 must give +inf");

    // mu = 2: a positive value that does not change across the grid.
    double lo = kInfinity, hi = -kInfinity;
    std::size_t infinite = 0;
    for (double a : grid) {
      const double p = psi_from_phi(IndexFunction::monomial(2.0), a);
      if (is_infinite(p)) ++infinite;
      lo = std::min(lo, p);
      hi = std::max(hi, p);
    }
    const bool finite = infinite == 0;
    v.require(finite && lo > 0.0 && hi - lo < 1e-6 * std::max(1.0, std::abs(lo)),
              "mu = 2 positive alpha-independent constant");
    v.detail << "mu<2 max rel err " << worst_rel << "; mu=3 all inf: " << (all_inf ? "yes" : "no")
             << "; mu=2 range [" << lo << ", " << hi << "], " << infinite << " of " << grid.size()
             << " alphas infinite ";
  });

  criterion(7, "rate fits", 120.0, [](Verdict& v) {
    const auto deltas = log_grid(1e-4, 1e-1, 12);
    const RegularizationInstance l1 = make_l1_instance(L1Shape::sparse);
    const RateFit a = rate_experiment(l1, AlphaRule::proportional(1.0), deltas, 5, 1, ErrorMeasure::bregman,
                                      SolverSettings{1e-10, 200000});
    const LinearInstance q = make_quadratic_instance();
    const RateFit b = rate_experiment(q, AlphaRule::calibrated(*q.psi), deltas, 5, 1,
                                      ErrorMeasure::squared_norm);
    v.require(std::abs(a.slope - 1.0) <= 0.15, "l1-sparse slope");
    v.require(std::abs(b.slope - 1.0) <= 0.15, "quadratic slope");
    v.require(a.nonconverged == 0 && b.nonconverged == 0, "non-converged solves");
    v.detail << "l1-sparse slope " << a.slope << " (" << a.points_used << " points), quadratic slope "
             << b.slope << " (" << b.points_used << " points) ";
  });

  criterion(8, "subgradient rate construction", 0.0, [](Verdict& v) {
    double worst = 0.0;
    for (double mu : {0.5, 1.0}) {
      const IndexFunction phi = IndexFunction::monomial(mu);
      for (double delta : {1e-3, 1e-2, 1e-1}) {
        const double a = rate_alpha_from_subgradient(phi, delta);
        const double total = delta * delta / (2 * a) + psi_from_phi(phi, a);
        worst = std::max(worst, std::abs(total - phi(delta)) / phi(delta));
      }
    }
    v.require(worst <= 1e-6, "balance");
    v.detail << "max rel deviation " << worst << " ";
  });

  criterion(9, "optimality identities", 0.0, [&](Verdict& v) {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> normal;
    double worst = 0.0;
    for (int k = 0; k < 1000; ++k) {
      Vector u(6), w(6), z(6);
      for (auto* p : {&u, &w, &z}) {
        for (auto& c : *p) c = normal(rng);
      }
      worst = std::max(worst, three_point_identity_check(QuadraticPenalty{}, w, w, z, z, u));
    }
    v.require(worst <= 1e-12, "three-point identity");
    if (quad_split.records.empty() || l1_split.records.empty()) {
      v.require(false, "sweep from criterion 5 unavailable");
      return;
    }
    for (const SplittingResult* s : {&quad_split, &l1_split}) {
      require_clean(v, s->identities, "");
      require_clean(v, s->distance_identity, "");
      require_clean(v, s->distance_inequality, "");
    }
    v.detail << "three-point max residual " << worst << "; identities max excess quadratic "
             << quad_split.identities.max_violation << ", l1 " << l1_split.identities.max_violation
             << " over 500 points each ";
  });

  criterion(10, "conjugate functions", 0.0, [](Verdict& v) {
    ExperimentConfig cfg = parse_config_string("experiment = conjugates\nprobes = 10000\n");
    const ExperimentOutcome out = run_experiment(cfg);
    std::size_t used = 0;
    for (const auto& c : out.checks) {
      const bool relevant = c.name.rfind("Fenchel-Young", 0) == 0 ||
                            c.name.rfind("convex representation", 0) == 0 ||
                            c.name.rfind("conjugate quotient", 0) == 0;
      if (!relevant) continue;
      ++used;
      require_clean(v, c, "");
      v.detail << c.name << " " << c.points << " pts; ";
    }
    v.require(used == 5, "expected 5 checks");
  });

  criterion(11, "singular case and dichotomy", 0.0, [](Verdict& v) {
    const CheckReport s = singular_bregman_check(make_singular_instance(), kSweep, kSweep, 5, 1);
    require_clean(v, s, "singular");
    v.detail << "singular max B " << s.max_violation << "; c0:";
    const auto grid = log_grid(1e-4, 1e-1, 13);
    for (const RegularizationInstance& inst :
         {RegularizationInstance{make_quadratic_instance()},
          RegularizationInstance{make_l1_instance(L1Shape::sparse)},
          RegularizationInstance{make_l1_instance(L1Shape::dense)},
          RegularizationInstance{make_rof_ball_instance(1.0)},
          RegularizationInstance{make_rof_square_instance(1.0)}}) {
      const DichotomyReport d = check_dichotomy(inst, grid);
      require_clean(v, d.check, label(inst));
      v.detail << " " << label(inst) << " " << d.c0;
    }
    v.detail << " ";
  });

  criterion(12, "higher-order probe", 0.0, [](Verdict& v) {
    const HigherOrderReport h = higher_order_probe(make_quadratic_instance(), kSweep, kSweep, 5, 1);
    require_clean(v, h.identity, "");
    require_clean(v, h.inequality, "");
    require_clean(v, h.residual_form, "");
    v.detail << "identity max residual " << h.identity.max_violation << ", inequality over "
             << h.inequality.points << " points, empirical C1 " << h.empirical_c1 << " ";
  });

  criterion(13, "determinism", 0.0, [](Verdict& v) {
    for (const char* e : {"quadratic", "l1-sparse", "rof-ball"}) {
      ExperimentConfig cfg = parse_config_string(std::string("experiment = ") + e +
                                                 "\nseed = 7\nalpha_points = 6\ndelta_points = 6\n"
                                                 "replicates = 2\nprobes = 200\n");
      std::ostringstream first, second;
      write_csv(first, run_experiment(cfg).records);
      write_csv(second, run_experiment(cfg).records);
      v.require(first.str() == second.str(), std::string(e) + " CSV differs");
      v.detail << e << " " << first.str().size() << " bytes; ";
    }
  });

  std::printf("%s: %d of 13 criteria failed\n", failures == 0 ? "PASS" : "FAIL", failures);
  return failures == 0 ? 0 : 1;
}
