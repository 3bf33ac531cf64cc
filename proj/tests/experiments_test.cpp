#include <gtest/gtest.h>

#include <sstream>

#include "breglab/experiments.hpp"

using namespace breglab;

namespace {

// Coarse grids keep each run short while spanning three decades.
ExperimentConfig small(const std::string& experiment) {
  ExperimentConfig cfg = parse_config_string("experiment = " + experiment + "\n");
  for (const char* o : {"alpha_points=7", "delta_points=5", "replicates=2", "probes=500"}) {
    cfg.apply_override(o);
  }
  return cfg;
}

std::string csv_of(const ExperimentOutcome& out) {
  std::ostringstream os;
  write_csv(os, out.records);
  return os.str();
}

}  // namespace

class EveryExperiment : public ::testing::TestWithParam<std::string> {};

TEST_P(EveryExperiment, RunsAndPasses) {
  const ExperimentOutcome out = run_experiment(small(GetParam()));
  EXPECT_EQ(out.experiment, GetParam());
  EXPECT_FALSE(out.checks.empty());
  for (const auto& c : out.checks) {
    EXPECT_TRUE(c.passed()) << c.name << ": " << c.violations << " violations, first at "
                            << describe(c.first_failure);
  }
  EXPECT_LE(out.nonconverged_fraction(), 0.01);
  EXPECT_FALSE(out.records.empty());
  const std::string text = report(out);
  EXPECT_EQ(text.substr(text.size() - 5), "PASS\n");
}

INSTANTIATE_TEST_SUITE_P(All, EveryExperiment,
                         ::testing::Values("quadratic", "rof-ball", "rof-square", "l1-sparse",
                                           "l1-dense", "singular", "identities", "conjugates"),
                         [](const auto& info) {
                           std::string s = info.param;
                           for (auto& c : s) {
                             if (c == '-') c = '_';
                           }
                           return s;
                         });

TEST(Experiments, RofSquareRejectsLargeAlpha) {
  ExperimentConfig cfg = small("rof-square");
  cfg.apply_override("alpha_max=2");
  EXPECT_THROW(run_experiment(cfg), std::domain_error);
  cfg.apply_override("R_star=3");
  EXPECT_NO_THROW(run_experiment(cfg));
}

TEST(Experiments, RejectsBadGrid) {
  ExperimentConfig cfg = small("rof-ball");
  cfg.apply_override("alpha_min=0.5");
  cfg.apply_override("alpha_max=0.1");
  EXPECT_THROW(run_experiment(cfg), ConfigError);
}

TEST(Experiments, ShortGridSkipsDichotomyWithNote) {
  ExperimentConfig cfg = small("rof-ball");
  cfg.apply_override("alpha_min=1e-2");
  const ExperimentOutcome out = run_experiment(cfg);
  bool noted = false;
  for (const auto& n : out.notes) noted = noted || n.find("dichotomy") != std::string::npos;
  EXPECT_TRUE(noted);
}

TEST(Experiments, QuadraticRecordLayout) {
  const ExperimentOutcome out = run_experiment(small("quadratic"));
  EXPECT_EQ(out.records.size(), 7u * 5u * 2u);
  EXPECT_EQ(out.grid_points, 70u);
  EXPECT_EQ(out.records[1].seed, point_seed(1, 0, 0, 1));
}

TEST(Csv, HeaderAndFormat) {
  ExperimentRecord r;
  r.alpha = 0.1;
  r.delta = 1e-3;
  r.seed = 42;
  r.psi = kInfinity;
  std::ostringstream os;
  write_csv(os, {r});
  const std::string text = os.str();
  EXPECT_EQ(text.substr(0, text.find('\n')), kCsvHeader);
  EXPECT_NE(text.find("1.0000000000000001e-01,1.0000000000000000e-03,42,"), std::string::npos);
  EXPECT_NE(text.find(",inf,"), std::string::npos);
  EXPECT_EQ(format_decimal(std::nan("")), "nan");
  EXPECT_EQ(std::stod(format_decimal(0.1)), 0.1);
}

TEST(Csv, RoundTripsEveryValue) {
  const ExperimentOutcome out = run_experiment(small("l1-sparse"));
  for (const auto& r : out.records) {
    EXPECT_EQ(std::stod(format_decimal(r.bregman_noisy)), r.bregman_noisy);
    EXPECT_EQ(std::stod(format_decimal(r.bound)), r.bound);
  }
}

TEST(Determinism, SameSeedSameBytes) {
  for (const char* e : {"quadratic", "l1-dense"}) {
    ExperimentConfig cfg = small(e);
    cfg.apply_override("seed=7");
    EXPECT_EQ(csv_of(run_experiment(cfg)), csv_of(run_experiment(cfg))) << e;
  }
  ExperimentConfig a = small("quadratic"), b = small("quadratic");
  b.apply_override("seed=8");
  EXPECT_NE(csv_of(run_experiment(a)), csv_of(run_experiment(b)));
}

TEST(Report, Content) {
  const ExperimentOutcome out = run_experiment(small("rof-ball"));
  const std::string text = report(out);
  EXPECT_NE(text.find("0 violations"), std::string::npos);
  EXPECT_NE(text.find("slope = "), std::string::npos);
  EXPECT_NE(text.find("error splitting"), std::string::npos);
}

TEST(Report, FailureNamesCell) {
  ExperimentOutcome out;
  out.experiment = "quadratic";
  CheckReport c;
  c.name = "error splitting";
  c.observe(1.0, 0.0, Cell{0.01, 0.001, 3, true});
  out.checks.push_back(c);
  const std::string text = report(out);
  EXPECT_NE(text.find("first failing cell"), std::string::npos);
  EXPECT_EQ(text.substr(text.size() - 5), "FAIL\n");
}

TEST(Plot, ScriptReferencesCsv) {
  const std::string s = plot_script("run.csv", "l1-sparse");
  EXPECT_NE(s.find("'run.csv'"), std::string::npos);
  EXPECT_NE(s.find("logscale"), std::string::npos);
}
