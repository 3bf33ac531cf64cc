#pragma once

// Named experiments driven by an ExperimentConfig, plus CSV and text output.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "breglab/bregman.hpp"
#include "breglab/config.hpp"
#include "breglab/harness.hpp"
#include "breglab/index_function.hpp"

namespace breglab {

struct NamedFit {
  std::string name;
  RateFit fit;
};

struct ExperimentOutcome {
  std::string experiment;
  std::string instance;
  std::vector<ExperimentRecord> records;
  std::vector<CheckReport> checks;
  std::vector<NamedFit> fits;
  std::vector<std::string> notes;
  std::size_t grid_points = 0;  // solver-backed points of the theorem sweep
  std::size_t nonconverged = 0;

  bool checks_passed() const {
    for (const auto& c : checks) {
      if (!c.passed()) return false;
    }
    return true;
  }
  double nonconverged_fraction() const {
    return grid_points == 0 ? 0.0
                            : static_cast<double>(nonconverged) / static_cast<double>(grid_points);
  }
};

/// Settings shared by all experiments, read once from the config.
struct RunParameters {
  std::vector<double> alpha_grid;
  std::vector<double> delta_grid;
  std::size_t replicates = 5;
  std::uint64_t seed = 1;
  std::uint64_t instance_seed = 1;
  std::size_t probes = 10000;
  SolverSettings solver;
};

inline RunParameters read_parameters(const ExperimentConfig& cfg, double default_alpha_max = 1e-1) {
  RunParameters p;
  const double amin = cfg.positive("alpha_min", 1e-4);
  const double amax = cfg.positive("alpha_max", std::max(default_alpha_max, amin));
  const double dmin = cfg.positive("delta_min", 1e-4);
  const double dmax = cfg.positive("delta_max", std::max(1e-1, dmin));
  if (amin > amax) throw ConfigError("alpha_min exceeds alpha_max");
  if (dmin > dmax) throw ConfigError("delta_min exceeds delta_max");
  p.alpha_grid = log_grid(amin, amax, cfg.count("alpha_points", 12));
  p.delta_grid = log_grid(dmin, dmax, cfg.count("delta_points", 12));
  p.replicates = cfg.count("replicates", 5);
  p.seed = cfg.count("seed", 1, true);
  p.instance_seed = cfg.count("instance_seed", 1, true);
  p.probes = cfg.count("probes", 10000);
  p.solver.tol = cfg.positive("tol", 1e-10);
  p.solver.max_iter = cfg.count("max_iter", 200000);
  return p;
}

namespace detail {

inline bool spans_three_decades(const std::vector<double>& grid) {
  return grid.back() >= grid.front() * 1e3 * (1.0 - 1e-12);
}

inline void add_noise_free_checks(ExperimentOutcome& out, const RegularizationInstance& inst,
                                  const RunParameters& p) {
  const auto points = sweep_noise_free(inst, p.alpha_grid, p.solver);
  out.checks.push_back(check_defect_nonnegative(points));
  out.checks.push_back(check_residual_bound(points));
  out.checks.push_back(check_equivalence(points));
  out.checks.push_back(check_minimizing(points));
  out.checks.push_back(check_defect_identity(points));
  out.checks.push_back(observe_defect_monotone(points));
  if (const auto* lin = std::get_if<LinearInstance>(&inst)) {
    out.checks.push_back(check_value_uniqueness(*lin, p.alpha_grid, p.seed, p.solver));
  }
}

inline void add_splitting(ExperimentOutcome& out, const RegularizationInstance& inst,
                          const PsiProfile& psi, const RunParameters& p, bool keep_records = true) {
  SplittingResult s =
      check_error_splitting(inst, psi, p.alpha_grid, p.delta_grid, p.replicates, p.seed, p.solver);
  out.grid_points += s.records.size();
  out.nonconverged += s.theorem.nonconverged;
  out.checks.push_back(s.theorem);
  if (std::holds_alternative<LinearInstance>(inst)) {
    out.checks.push_back(s.distance_identity);
    out.checks.push_back(s.distance_inequality);
    out.checks.push_back(s.identities);
  }
  if (s.excluded_psi_infinite > 0) {
    out.notes.push_back(std::to_string(s.excluded_psi_infinite) +
                        " points with Psi = inf recorded but not asserted");
  }
  if (keep_records) out.records = std::move(s.records);
}

inline void add_dichotomy(ExperimentOutcome& out, const RegularizationInstance& inst,
                          const RunParameters& p) {
  if (!spans_three_decades(p.alpha_grid)) {
    out.notes.push_back("dichotomy check skipped: alpha grid spans fewer than 3 decades");
    return;
  }
  const DichotomyReport d = check_dichotomy(inst, p.alpha_grid, p.solver);
  out.checks.push_back(d.check);
  if (!d.singular) {
    std::ostringstream os;
    os << "dichotomy: c0 = " << d.c0;
    out.notes.push_back(os.str());
  }
}

inline void add_higher_order(ExperimentOutcome& out, const RegularizationInstance& inst,
                             const RunParameters& p) {
  const HigherOrderReport h =
      higher_order_probe(inst, p.alpha_grid, p.delta_grid, p.replicates, p.seed, p.solver);
  out.checks.push_back(h.identity);
  if (!std::holds_alternative<RofSquareInstance>(inst)) {
    out.checks.push_back(h.inequality);
    std::ostringstream os;
    os << "noise propagation: empirical C1 = " << h.empirical_c1 << " with C2 = 1";
    out.notes.push_back(os.str());
  }
  if (h.residual_form.points > 0) out.checks.push_back(h.residual_form);
}

inline void add_fit(ExperimentOutcome& out, const std::string& name,
                    const RegularizationInstance& inst, const AlphaRule& rule, ErrorMeasure measure,
                    const RunParameters& p) {
  try {
    out.fits.push_back({name, rate_experiment(inst, rule, p.delta_grid, p.replicates, p.seed,
                                              measure, p.solver)});
  } catch (const std::invalid_argument& e) {
    out.notes.push_back(name + ": " + e.what());
  }
}

inline void add_vi(ExperimentOutcome& out, const LinearInstance& lin, const RunParameters& p) {
  if (lin.vi_phi) out.checks.push_back(check_vi(lin, *lin.vi_phi, p.probes, p.seed));
}

inline LinearInstance l1_instance_from_config(const ExperimentConfig& cfg, L1Shape shape,
                                              const RunParameters& p) {
  if (cfg.has("operator")) {
    return make_l1_instance(shape, load_dense_operator(cfg.text("operator", "")), p.instance_seed);
  }
  return make_l1_instance(shape, cfg.count("n", 40), p.instance_seed);
}

inline ExperimentOutcome run_quadratic(const ExperimentConfig& cfg) {
  const RunParameters p = read_parameters(cfg);
  const LinearInstance lin = make_quadratic_instance(cfg.count("n", 50), cfg.positive("nu", 0.5));
  const RegularizationInstance inst = lin;
  ExperimentOutcome out;
  add_noise_free_checks(out, inst, p);
  add_splitting(out, inst, *lin.psi, p);
  add_vi(out, lin, p);
  add_dichotomy(out, inst, p);
  add_higher_order(out, inst, p);
  add_fit(out, "squared error, calibrated alpha", inst, AlphaRule::calibrated(*lin.psi),
          ErrorMeasure::squared_norm, p);
  return out;
}

inline ExperimentOutcome run_rof_ball(const ExperimentConfig& cfg) {
  const double r = cfg.positive("R", 1.0);
  const RunParameters p = read_parameters(cfg, r / 4.0);
  const RegularizationInstance inst = make_rof_ball_instance(r);
  ExperimentOutcome out;
  add_noise_free_checks(out, inst, p);
  add_splitting(out, inst, *instance_psi(inst), p);
  add_dichotomy(out, inst, p);
  add_higher_order(out, inst, p);
  add_fit(out, "squared error, alpha = delta", inst, AlphaRule::proportional(1.0),
          ErrorMeasure::squared_norm, p);
  return out;
}

inline ExperimentOutcome run_rof_square(const ExperimentConfig& cfg) {
  const double rs = cfg.positive("R_star", 1.0);
  const RunParameters p = read_parameters(cfg, std::min(1e-1, rs));
  if (p.alpha_grid.back() > rs) {
    std::ostringstream os;
    os << "rof-square: alpha_max = " << p.alpha_grid.back() << " exceeds R_star = " << rs;
    throw std::domain_error(os.str());
  }
  const RegularizationInstance inst = make_rof_square_instance(rs);
  const PsiProfile psi = *instance_psi(inst);
  ExperimentOutcome out;
  add_noise_free_checks(out, inst, p);

  // Noise-free bound B(x_alpha; x_dagger) <= Psi(alpha); rows carry delta = 0.
  CheckReport bound;
  bound.name = "noise-free bound";
  for (const auto& pt : sweep_noise_free(inst, p.alpha_grid, p.solver)) {
    ExperimentRecord rec;
    rec.alpha = pt.alpha;
    rec.defect_J = pt.defect_J;
    rec.defect_T = pt.defect_T;
    rec.residual_sq = pt.residual_sq;
    rec.bregman_noisy = pt.bregman;
    rec.psi = psi(pt.alpha);
    rec.bound = rec.psi;
    rec.violation = std::max(rec.bregman_noisy - rec.bound, 0.0);
    out.records.push_back(rec);
    bound.observe(rec.bregman_noisy - rec.bound, 1e-10 * (1.0 + rec.bound), Cell{pt.alpha});
  }
  out.checks.push_back(bound);
  add_dichotomy(out, inst, p);
  add_higher_order(out, inst, p);
  return out;
}

inline ExperimentOutcome run_l1(const ExperimentConfig& cfg, L1Shape shape) {
  const RunParameters p = read_parameters(cfg);
  const LinearInstance lin = l1_instance_from_config(cfg, shape, p);
  const RegularizationInstance inst = lin;
  ExperimentOutcome out;
  add_noise_free_checks(out, inst, p);
  add_splitting(out, inst, *lin.psi, p);
  add_vi(out, lin, p);
  add_dichotomy(out, inst, p);
  add_higher_order(out, inst, p);
  add_fit(out, "bregman, alpha = delta", inst, AlphaRule::proportional(1.0), ErrorMeasure::bregman, p);
  return out;
}

inline ExperimentOutcome run_singular(const ExperimentConfig& cfg) {
  const RunParameters p = read_parameters(cfg);
  const LinearInstance lin = l1_instance_from_config(cfg, L1Shape::zero, p);
  const RegularizationInstance inst = lin;
  ExperimentOutcome out;
  add_noise_free_checks(out, inst, p);
  add_splitting(out, inst, *lin.psi, p);
  out.checks.push_back(singular_bregman_check(out.records));
  add_vi(out, lin, p);
  add_dichotomy(out, inst, p);
  return out;
}

/// Three-point identity on random triples, then the optimality identities
/// and distance bounds over the quadratic and l1-sparse sweeps.
inline ExperimentOutcome run_identities(const ExperimentConfig& cfg) {
  const RunParameters p = read_parameters(cfg);
  const std::size_t n = cfg.count("n", 50);
  ExperimentOutcome out;

  CheckReport triples;
  triples.name = "three-point identity";
  std::mt19937_64 rng(p.seed);
  std::normal_distribution<double> normal;
  const Penalty quad = QuadraticPenalty{};
  for (std::size_t k = 0; k < p.probes; ++k) {
    Vector w(static_cast<Eigen::Index>(n)), v(w.size()), u(w.size());
    for (auto& c : w) c = normal(rng);
    for (auto& c : v) c = normal(rng);
    for (auto& c : u) c = normal(rng);
    // For J = ||.||^2 / 2 the subgradient at a point is the point itself.
    triples.observe(three_point_identity_check(quad, w, w, v, v, u), 1e-12,
                    Cell{std::numeric_limits<double>::quiet_NaN(),
                         std::numeric_limits<double>::quiet_NaN(), k, true});
  }
  out.checks.push_back(triples);

  const LinearInstance q = make_quadratic_instance(n, cfg.positive("nu", 0.5));
  add_splitting(out, q, *q.psi, p);
  const LinearInstance l1 = make_l1_instance(L1Shape::sparse, 40, p.instance_seed);
  ExperimentOutcome l1_part;
  add_splitting(l1_part, l1, *l1.psi, p, false);
  for (auto& c : l1_part.checks) {
    c.name = "l1: " + c.name;
    out.checks.push_back(std::move(c));
  }
  out.grid_points += l1_part.grid_points;
  out.nonconverged += l1_part.nonconverged;
  return out;
}

/// Conjugate-function machinery: Fenchel-Young, monomial profiles, the
/// convex representation and the subgradient rate construction.
inline ExperimentOutcome run_conjugates(const ExperimentConfig& cfg) {
  const double amin = cfg.positive("alpha_min", 1e-3);
  const double amax = cfg.positive("alpha_max", 1.0);
  if (amin > amax) throw ConfigError("alpha_min exceeds alpha_max");
  const auto alphas = log_grid(amin, amax, cfg.count("alpha_points", 12));
  const std::size_t probes = cfg.count("probes", 10000);
  const std::uint64_t seed = cfg.count("seed", 1, true);
  ExperimentOutcome out;

  const std::vector<std::pair<std::string, IndexFunction>> convex = {
      {"t^2", IndexFunction::monomial(2.0)},
      {"t^1.5", IndexFunction::monomial(1.5)},
      {"exp(t) - 1",
       IndexFunction::composite([](double t) { return std::expm1(t); }, {1e-12, 1.0}, "exp(t) - 1")}};
  for (const auto& [name, f] : convex) {
    CheckReport fy;
    fy.name = "Fenchel-Young " + name;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> log_u(-3.0, 1.0);
    for (std::size_t k = 0; k < probes; ++k) {
      const double s = std::pow(10.0, log_u(rng));
      const double t = std::pow(10.0, log_u(rng));
      const double fs = f(s);
      const double ft = fenchel_conjugate(f, t);
      fy.observe(s * t - fs - ft, 1e-12 * std::max(1.0, s * t), Cell{s, t});
    }
    out.checks.push_back(fy);
  }

  std::vector<double> mus = {0.5, 1.0, 1.5, 2.0, 3.0};
  if (cfg.has("mu")) mus = {cfg.positive("mu", 1.0)};
  for (double mu : mus) {
    const IndexFunction phi = IndexFunction::monomial(mu);
    CheckReport rep;
    std::ostringstream name;
    name << "monomial profile mu=" << mu;
    rep.name = name.str();
    for (double a : alphas) {
      const double numeric = psi_from_phi(phi, a);
      double excess = 0.0;
      if (mu < 2.0) {
        const double exact = monomial_psi(mu, a);
        excess = std::abs(numeric - exact) / exact;
      } else if (mu == 2.0) {
        // sup t^2 (1 - 1/(2 alpha)): zero up to alpha = 1/2, divergent beyond.
        excess = a <= 0.5 ? std::abs(numeric) : (is_infinite(numeric) ? 0.0 : 1.0);
      } else {
        excess = is_infinite(numeric) ? 0.0 : 1.0;
      }
      rep.observe(excess, 1e-8, Cell{a});
      if (mus.size() == 1 || mu == 1.0) {
        ExperimentRecord rec;
        rec.alpha = a;
        rec.psi = numeric;
        rec.bound = numeric;
        out.records.push_back(rec);
      }
    }
    out.checks.push_back(rep);
  }

  CheckReport repr;
  repr.name = "convex representation t^2 family";
  CheckReport quotient;
  quotient.name = "conjugate quotient bound t^2 family";
  for (double c : {0.5, 1.0, 2.0}) {
    const IndexFunction f =
        IndexFunction::composite([c](double t) { return c * t * t; }, {1e-6, 10.0}, "c t^2");
    const ConvexRepresentation rep = represent_convex(f);
    for (double t : log_grid(1e-3, 10.0, 20)) {
      const double ft = f(t);
      repr.observe(std::abs(reconstruct_from_representation(rep, t) - ft) / ft, 1e-8, Cell{t});
      const double th = rep.theta(t);
      quotient.observe(fenchel_conjugate(f, t) - th * th, 1e-8 * th * th, Cell{t});
    }
  }
  out.checks.push_back(repr);
  out.checks.push_back(quotient);

  CheckReport rate;
  rate.name = "subgradient rate construction";
  for (double mu : {0.5, 1.0}) {
    const IndexFunction phi = IndexFunction::monomial(mu);
    for (double delta : {1e-3, 1e-2, 1e-1}) {
      const double a = rate_alpha_from_subgradient(phi, delta);
      const double total = delta * delta / (2.0 * a) + psi_from_phi(phi, a);
      rate.observe(std::abs(total - phi(delta)) / phi(delta), 1e-6, Cell{a, delta});
    }
  }
  out.checks.push_back(rate);
  return out;
}

}  // namespace detail

/// Runs the configured experiment. Throws ConfigError or std::domain_error
/// for invalid configurations.
inline ExperimentOutcome run_experiment(const ExperimentConfig& cfg) {
  ExperimentOutcome out;
  const std::string& e = cfg.experiment;
  if (e == "quadratic") {
    out = detail::run_quadratic(cfg);
    out.instance = "quadratic";
  } else if (e == "rof-ball") {
    out = detail::run_rof_ball(cfg);
    out.instance = "rof-ball";
  } else if (e == "rof-square") {
    out = detail::run_rof_square(cfg);
    out.instance = "rof-square";
  } else if (e == "l1-sparse") {
    out = detail::run_l1(cfg, L1Shape::sparse);
    out.instance = "l1-sparse";
  } else if (e == "l1-dense") {
    out = detail::run_l1(cfg, L1Shape::dense);
    out.instance = "l1-dense";
  } else if (e == "singular") {
    out = detail::run_singular(cfg);
    out.instance = "singular";
  } else if (e == "identities") {
    out = detail::run_identities(cfg);
    out.instance = "quadratic + l1-sparse";
  } else if (e == "conjugates") {
    out = detail::run_conjugates(cfg);
    out.instance = "scalar test functions";
  } else {
    throw ConfigError("unknown experiment '" + e + "'");
  }
  out.experiment = e;
  return out;
}

// ---------------------------------------------------------------------------
// Output

inline constexpr const char* kCsvHeader =
    "alpha,delta,seed,defect_J,defect_T,residual_sq,bregman_noisy,psi,bound,violation";

inline std::string format_decimal(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.16e", v);
  return buf;
}

inline void write_csv(std::ostream& os, const std::vector<ExperimentRecord>& records) {
  os << kCsvHeader << '\n';
  for (const auto& r : records) {
    os << format_decimal(r.alpha) << ',' << format_decimal(r.delta) << ',' << r.seed << ','
       << format_decimal(r.defect_J) << ',' << format_decimal(r.defect_T) << ','
       << format_decimal(r.residual_sq) << ',' << format_decimal(r.bregman_noisy) << ','
       << format_decimal(r.psi) << ',' << format_decimal(r.bound) << ','
       << format_decimal(r.violation) << '\n';
  }
}

inline void write_csv_file(const std::string& path, const std::vector<ExperimentRecord>& records) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path);
  write_csv(os, records);
  if (!os) throw std::runtime_error("write failed: " + path);
}

/// Per-check lines, rate fits and notes; the final line is PASS or FAIL.
inline std::string report(const ExperimentOutcome& out) {
  std::ostringstream os;
  os.precision(4);
  os << "experiment " << out.experiment << " (" << out.instance << "), " << out.records.size()
     << " records\n";
  for (const auto& c : out.checks) {
    os << (c.asserted ? "check " : "observe ") << c.name << ": " << c.violations
       << " violations over " << c.points << " points";
    if (c.points > 0) os << ", max excess " << c.max_violation;
    if (c.nonconverged > 0) os << ", " << c.nonconverged << " non-converged excluded";
    if (c.asserted && c.violations > 0) os << ", first failing cell " << describe(c.first_failure);
    os << '\n';
  }
  for (const auto& f : out.fits) {
    os << "fit " << f.name << ": slope = " << f.fit.slope << " ± " << f.fit.residual << " ("
       << f.fit.points_used << " points)\n";
  }
  for (const auto& n : out.notes) os << "note: " << n << '\n';
  if (out.nonconverged > 0) {
    os << "solver: " << out.nonconverged << " of " << out.grid_points << " points non-converged\n";
  }
  os << (out.checks_passed() ? "PASS" : "FAIL") << '\n';
  return os.str();
}

/// Gnuplot script plotting bregman_noisy and bound against delta from the CSV.
inline std::string plot_script(const std::string& csv_path, const std::string& experiment) {
  std::ostringstream os;
  os << "set datafile separator ','\n"
     << "set key autotitle columnhead\n"
     << "set logscale xy\n"
     << "set xlabel 'delta'\n"
     << "set ylabel 'Bregman distance'\n"
     << "set title '" << experiment << "'\n"
     << "set terminal pngcairo size 900,600\n"
     << "set output '" << csv_path << ".png'\n"
     << "plot '" << csv_path << "' using 2:7 with points pt 7 ps 0.5 title 'bregman_noisy', \\\n"
     << "     '' using 2:9 with points pt 6 ps 0.5 title 'bound'\n";
  return os.str();
}

}  // namespace breglab
